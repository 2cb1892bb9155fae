//! `clippers`: headless entry points for the feedback engine.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or input error.

use std::fmt::Write as _;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use anyhow::{anyhow, bail, Context};
use chameleon_core::config::load_path;
use chameleon_core::service::{serve, ServiceOptions};
use chameleon_core::simulation::{metrics, run_behavior, verify_replay, MetricsReport, SessionTrace};
use chameleon_core::{EngineConfig, SeverityMode};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "clippers", version, about = "Line-tracking scissors feedback engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the synthetic cutter on a path, writing a trace and metrics per seed.
    Simulate(SimulateArgs),
    /// Re-run traces and check they reproduce record for record.
    Replay {
        /// Trace files or directories containing `*.trace` files.
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
    /// Compute metrics over traces and print an aggregate table.
    Report {
        /// Trace files or directories containing `*.trace` files.
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Print the per-trace reports and aggregate as JSON instead.
        #[arg(long)]
        json: bool,
    },
    /// Serve interactive sessions over the session protocol.
    Serve(ServeArgs),
}

#[derive(Args)]
struct EngineArgs {
    /// Engine configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Severity source driving the feedback machine.
    #[arg(long)]
    mode: Option<SeverityMode>,
}

impl EngineArgs {
    fn load(&self) -> anyhow::Result<EngineConfig> {
        let mut config = match &self.config {
            Some(p) => EngineConfig::load(p).with_context(|| format!("config {}", p.display()))?,
            None => EngineConfig::default(),
        };
        if let Some(mode) = self.mode {
            config.mode = mode;
        }
        Ok(config)
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Path file (`*.path.json`).
    #[arg(long)]
    path: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
    /// Seeds: `1..10` (inclusive), `3,5,8`, or a single number.
    #[arg(long, default_value = "1", value_parser = parse_seeds)]
    seeds: Seeds,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 7878)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[command(flatten)]
    engine: EngineArgs,
    /// Seed for each session's fault stream.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Record each session as `<session_id>.trace` here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Seeds(Vec<u64>);

fn parse_seeds(s: &str) -> Result<Seeds, String> {
    let bad = |part: &str| format!("invalid seed `{part}`");
    let mut seeds = Vec::new();
    for part in s.split(',').map(str::trim) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.parse().map_err(|_| bad(part))?;
            let b: u64 = b.trim_start_matches('=').parse().map_err(|_| bad(part))?;
            if a > b {
                return Err(format!("empty seed range `{part}`"));
            }
            seeds.extend(a..=b);
        } else {
            seeds.push(part.parse().map_err(|_| bad(part))?);
        }
    }
    if seeds.is_empty() {
        return Err("no seeds".into());
    }
    Ok(Seeds(seeds))
}

/// Failure class, mapped to the process exit code.
enum Failure {
    Verification(anyhow::Error),
    Usage(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Replay { traces } => replay(&traces),
        Command::Report { traces, json } => report(&traces, json),
        Command::Serve(args) => run_serve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let path = load_path(&args.path).with_context(|| format!("path {}", args.path.display()))?;
    let config = args.engine.load()?;
    config.validate_for(&path).context("config")?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    // seeds run in parallel; results are collected in seed order
    let results: Vec<_> = thread::scope(|s| {
        let handles: Vec<_> = args
            .seeds
            .0
            .iter()
            .map(|&seed| {
                let (path, config, out) = (&path, &config, &args.out);
                s.spawn(move || -> anyhow::Result<(u64, MetricsReport)> {
                    let trace = run_behavior(path, config, seed)?;
                    let report = metrics(&trace)?;
                    let stem = out.join(format!("seed-{seed:04}"));
                    trace.write(&stem.with_extension("trace"))?;
                    let json = serde_json::to_string_pretty(&report)? + "\n";
                    std::fs::write(stem.with_extension("metrics.json"), json)?;
                    Ok((seed, report))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });
    let rows = results.into_iter().collect::<anyhow::Result<Vec<_>>>()?;
    let rows: Vec<_> = rows.iter().map(|(seed, r)| (format!("seed {seed}"), r)).collect();
    print!("{}", table(&rows));
    Ok(())
}

/// Expands directories to their `*.trace` files, sorted.
fn collect_traces(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<_> = std::fs::read_dir(input)
                .with_context(|| format!("reading {}", input.display()))?
                .map(|e| e.map(|e| e.path()))
                .collect::<Result<_, _>>()?;
            found.retain(|p| p.extension().is_some_and(|e| e == "trace"));
            found.sort();
            out.extend(found);
        } else if input.is_file() {
            out.push(input.clone());
        } else {
            bail!("{}: no such file or directory", input.display());
        }
    }
    if out.is_empty() {
        bail!("no trace files found");
    }
    Ok(out)
}

fn replay(inputs: &[PathBuf]) -> Result<(), Failure> {
    let files = collect_traces(inputs)?;
    let mut failed = 0;
    for file in &files {
        match SessionTrace::read(file).and_then(|t| verify_replay(&t)) {
            Ok(()) => println!("ok    {}", file.display()),
            Err(e) => {
                failed += 1;
                println!("FAIL  {}: {e}", file.display());
            }
        }
    }
    if failed > 0 {
        return Err(Failure::Verification(anyhow!("{failed} of {} traces failed replay", files.len())));
    }
    println!("{} traces replayed identically", files.len());
    Ok(())
}

fn report(inputs: &[PathBuf], json: bool) -> Result<(), Failure> {
    let files = collect_traces(inputs)?;
    let mut rows = Vec::new();
    for file in &files {
        let trace = SessionTrace::read(file).map_err(|e| Failure::Verification(anyhow!("{}: {e}", file.display())))?;
        rows.push((display_name(file), metrics(&trace).map_err(|e| anyhow!("{}: {e}", file.display()))?));
    }
    let aggregate = Aggregate::of(rows.iter().map(|(_, r)| r));
    if json {
        let per_trace: serde_json::Map<_, _> = rows
            .iter()
            .map(|(name, r)| (name.clone(), serde_json::to_value(r).expect("metrics serialize")))
            .collect();
        let doc = serde_json::json!({ "traces": per_trace, "aggregate": aggregate.to_json() });
        println!("{}", serde_json::to_string_pretty(&doc).expect("report serializes"));
    } else {
        let refs: Vec<_> = rows.iter().map(|(n, r)| (n.clone(), r)).collect();
        print!("{}", table(&refs));
        print!("{aggregate}");
    }
    Ok(())
}

fn run_serve(args: ServeArgs) -> Result<(), Failure> {
    let config = args.engine.load()?;
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let addr = format!("{}:{}", args.host, args.port);
    let listener = TcpListener::bind(&addr).with_context(|| format!("binding {addr}"))?;
    eprintln!("listening on {}", listener.local_addr().context("local address")?);
    serve(
        listener,
        ServiceOptions {
            config,
            seed: args.seed,
            record_dir: args.out,
        },
    )
    .context("serve")?;
    Ok(())
}

fn display_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.0}"))
}

fn table(rows: &[(String, &MetricsReport)]) -> String {
    let name_width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(5);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<name_width$} {:>7} {:>8} {:>6} {:>4} {:>4} {:>4} {:>4} {:>4} {:>4} {:>7} {:>7} {:>5} {:>4} {:>8}",
        "trace", "ticks", "ms", "ontrk", "keep", "uhoh", "woah", "bttr", "stay", "fan", "lat_avg", "lat_med", "unans", "esc", "done_ms"
    );
    for (name, r) in rows {
        let _ = writeln!(
            out,
            "{:<name_width$} {:>7} {:>8} {:>6.3} {:>4} {:>4} {:>4} {:>4} {:>4} {:>4} {:>7} {:>7} {:>5} {:>4} {:>8}",
            name,
            r.records,
            r.duration_ms,
            r.on_track_fraction,
            r.cues.keep_going,
            r.cues.uh_oh,
            r.cues.woah_there,
            r.cues.getting_better,
            r.cues.stay_on_track,
            r.cues.fanfare,
            opt(r.mean_correction_latency_ms),
            opt(r.median_correction_latency_ms),
            r.unanswered_cues,
            r.escalation_count,
            r.completion_time_ms.map_or_else(|| "-".into(), |t| t.to_string()),
        );
    }
    out
}

/// Pooled statistics over several reports.
struct Aggregate {
    traces: usize,
    completed: usize,
    mean_on_track: f64,
    latencies: Vec<u64>,
    unanswered: usize,
    escalations: usize,
}

impl Aggregate {
    fn of<'a>(reports: impl Iterator<Item = &'a MetricsReport>) -> Self {
        let mut a = Aggregate {
            traces: 0,
            completed: 0,
            mean_on_track: 0.0,
            latencies: Vec::new(),
            unanswered: 0,
            escalations: 0,
        };
        for r in reports {
            a.traces += 1;
            a.completed += usize::from(r.completion_time_ms.is_some());
            a.mean_on_track += r.on_track_fraction;
            a.latencies.extend(&r.correction_latencies_ms);
            a.unanswered += r.unanswered_cues;
            a.escalations += r.escalation_count;
        }
        if a.traces > 0 {
            a.mean_on_track /= a.traces as f64;
        }
        a.latencies.sort_unstable();
        a
    }

    fn mean_latency(&self) -> Option<f64> {
        (!self.latencies.is_empty()).then(|| self.latencies.iter().sum::<u64>() as f64 / self.latencies.len() as f64)
    }

    fn median_latency(&self) -> Option<f64> {
        let n = self.latencies.len();
        (n > 0).then(|| {
            if n.is_multiple_of(2) {
                (self.latencies[n / 2 - 1] + self.latencies[n / 2]) as f64 / 2.0
            } else {
                self.latencies[n / 2] as f64
            }
        })
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "traces": self.traces,
            "completed": self.completed,
            "mean_on_track_fraction": self.mean_on_track,
            "answered_cues": self.latencies.len(),
            "mean_correction_latency_ms": self.mean_latency(),
            "median_correction_latency_ms": self.median_latency(),
            "unanswered_cues": self.unanswered,
            "escalation_count": self.escalations,
        })
    }
}

impl std::fmt::Display for Aggregate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f)?;
        writeln!(f, "traces            {}", self.traces)?;
        writeln!(f, "completed         {}", self.completed)?;
        writeln!(f, "mean on_track     {:.3}", self.mean_on_track)?;
        writeln!(f, "answered cues     {}", self.latencies.len())?;
        writeln!(f, "latency mean ms   {}", opt(self.mean_latency()))?;
        writeln!(f, "latency median ms {}", opt(self.median_latency()))?;
        writeln!(f, "unanswered cues   {}", self.unanswered)?;
        writeln!(f, "escalations       {}", self.escalations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_syntax() {
        assert_eq!(parse_seeds("1..3").unwrap(), Seeds(vec![1, 2, 3]));
        assert_eq!(parse_seeds("1..=3").unwrap(), Seeds(vec![1, 2, 3]));
        assert_eq!(parse_seeds("4, 9,2").unwrap(), Seeds(vec![4, 9, 2]));
        assert_eq!(parse_seeds("7").unwrap(), Seeds(vec![7]));
        assert!(parse_seeds("3..1").is_err());
        assert!(parse_seeds("x").is_err());
        assert!(parse_seeds("").is_err());
    }

    #[test]
    fn aggregate_pools_latencies() {
        let base = MetricsReport {
            records: 1,
            duration_ms: 0,
            on_track_fraction: 0.5,
            cues: Default::default(),
            correction_latencies_ms: vec![100, 300],
            mean_correction_latency_ms: None,
            median_correction_latency_ms: None,
            unanswered_cues: 1,
            completion_time_ms: Some(10),
            escalation_count: 2,
            truncated: false,
        };
        let other = MetricsReport {
            on_track_fraction: 1.0,
            correction_latencies_ms: vec![200],
            completion_time_ms: None,
            ..base.clone()
        };
        let a = Aggregate::of([&base, &other].into_iter());
        assert_eq!(a.traces, 2);
        assert_eq!(a.completed, 1);
        assert_eq!(a.mean_on_track, 0.75);
        assert_eq!(a.median_latency(), Some(200.0));
        assert_eq!(a.mean_latency(), Some(200.0));
        assert_eq!(a.escalations, 4);
    }
}
