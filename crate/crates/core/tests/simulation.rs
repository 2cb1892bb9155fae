use std::path::PathBuf;

use chameleon_core::config::{load_path, EngineConfig};
use chameleon_core::feedback::Phase;
use chameleon_core::simulation::{metrics, run_behavior, verify_replay, ResponseMode, SessionTrace};
use chameleon_core::SeverityMode;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

const PATHS: [&str; 4] = ["straight", "l_shape", "circle", "star"];

#[test]
fn default_config_file_matches_defaults() {
    assert_eq!(EngineConfig::load(&fixture("default.config.json")).unwrap(), EngineConfig::default());
}

#[test]
fn every_fixture_completes_and_replays() {
    for name in PATHS {
        let path = load_path(&fixture(&format!("{name}.path.json"))).unwrap();
        for mode in [SeverityMode::Sensor, SeverityMode::Oracle] {
            let config = EngineConfig {
                mode,
                ..EngineConfig::default()
            };
            let trace = run_behavior(&path, &config, 7).unwrap();
            assert!(!trace.header.truncated, "{name} {mode:?} did not complete");
            assert_eq!(trace.records.last().unwrap().state.phase, Phase::Completed);
            let text = trace.to_ndjson();
            let back = SessionTrace::from_ndjson(&text).unwrap();
            assert_eq!(back, trace);
            verify_replay(&back).unwrap();
            let m = metrics(&trace).unwrap();
            assert_eq!(m.cues.fanfare, 1);
            assert!(m.completion_time_ms.is_some());
        }
    }
}

#[test]
fn config_fixtures_load() {
    for name in ["drift_no_correction", "noisy_sensor"] {
        EngineConfig::load(&fixture(&format!("{name}.config.json"))).unwrap();
    }
}

#[test]
fn drift_fixture_escalates_twice() {
    let path = load_path(&fixture("straight.path.json")).unwrap();
    let config = EngineConfig::load(&fixture("drift_no_correction.config.json")).unwrap();
    let m = metrics(&run_behavior(&path, &config, 1).unwrap()).unwrap();
    assert_eq!(m.escalation_count, 2);
    assert_eq!(m.unanswered_cues, 2);
}

fn mean_latency(response: ResponseMode, mode: SeverityMode, drift: f64, gain: f64) -> f64 {
    let path = load_path(&fixture("l_shape.path.json")).unwrap();
    let mut config = EngineConfig {
        mode,
        ..EngineConfig::default()
    };
    config.behavior.response = response;
    config.behavior.drift_rate = drift;
    config.behavior.correction_gain = gain;
    // sway crossing a threshold ends excursions regardless of the response
    config.behavior.tremor_amplitude = 0.0;
    let latencies: Vec<u64> = (1..=5)
        .flat_map(|seed| metrics(&run_behavior(&path, &config, seed).unwrap()).unwrap().correction_latencies_ms)
        .collect();
    assert!(!latencies.is_empty());
    latencies.iter().sum::<u64>() as f64 / latencies.len() as f64
}

#[test]
fn visual_led_response_is_not_slower() {
    for mode in [SeverityMode::Oracle, SeverityMode::Sensor] {
        for drift in [-2.5, -1.5, 1.5, 2.5] {
            for gain in [1.0, 2.5] {
                let visual = mean_latency(ResponseMode::Visual, mode, drift, gain);
                let audio = mean_latency(ResponseMode::Audio, mode, drift, gain);
                assert!(visual <= audio, "{mode:?} drift {drift} gain {gain}: visual {visual} ms, audio {audio} ms");
            }
        }
    }
}
