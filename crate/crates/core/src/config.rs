//! Engine configuration file (`*.config.json`).
//!
//! Every section is optional and falls back to its defaults. Unknown fields
//! are rejected, and load errors name the offending field by its dotted path.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::FeedbackConfig;
use crate::geometry::LinePath;
use crate::sensing::{DwellConfig, FaultModel, OracleThresholds, SensorMountConfig};
use crate::simulation::CutterBehaviorModel;

/// Which severity source drives the feedback machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeverityMode {
    /// Two-sensor estimate, the realistic path.
    #[default]
    Sensor,
    /// Pose-space ground truth.
    Oracle,
}

impl std::str::FromStr for SeverityMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sensor" => Ok(SeverityMode::Sensor),
            "oracle" => Ok(SeverityMode::Oracle),
            other => Err(format!("unknown mode `{other}` (expected sensor or oracle)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    pub mode: SeverityMode,
    pub mount: SensorMountConfig<f64>,
    pub thresholds: OracleThresholds<f64>,
    pub dwell: DwellConfig,
    pub feedback: FeedbackConfig,
    pub faults: FaultModel,
    pub behavior: CutterBehaviorModel,
    /// Simulation runs stop here and are flagged truncated, ms.
    pub max_duration_ms: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            mode: SeverityMode::default(),
            mount: SensorMountConfig::default(),
            thresholds: OracleThresholds::default(),
            dwell: DwellConfig::default(),
            feedback: FeedbackConfig::default(),
            faults: FaultModel::default(),
            behavior: CutterBehaviorModel::default(),
            max_duration_ms: 120_000,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.mount.validate()?;
        self.thresholds.validate()?;
        self.dwell.validate()?;
        self.feedback.validate()?;
        self.faults.validate()?;
        self.behavior.validate()?;
        if self.max_duration_ms == 0 {
            return Err(Error::config("max_duration_ms", "must be > 0"));
        }
        Ok(())
    }

    pub fn validate_for(&self, path: &LinePath<f64>) -> Result<()> {
        self.validate()?;
        self.mount.validate_for(path)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: EngineConfig = parse_json(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Loads a `*.path.json` file.
pub fn load_path(path: &Path) -> Result<LinePath<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_path(&text)
}

pub fn parse_path(text: &str) -> Result<LinePath<f64>> {
    let file: crate::geometry::PathFile<f64> = parse_json(text)?;
    LinePath::try_from(file)
}

/// Deserializes JSON, reporting failures with the dotted field path.
fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let field = err.path().to_string();
        Error::Config {
            field: if field == "." { "<root>".into() } else { field },
            reason: err.into_inner().to_string(),
        }
    })
}
