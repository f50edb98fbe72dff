//! Command-line front end: design reports, simulation runs, estimate
//! sweeps, and the invariant suite, with JSON on stdout and CSV
//! trajectories on disk.
//!
//! Exit codes: 0 success, 2 infeasible design or failed checks, 3 invalid
//! configuration or usage, 4 simulation divergence.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::estimator::EstimatorMode;
use crate::model::Signal;
use crate::{config, sim, verify, Error, Result};

#[derive(Parser)]
#[command(
    name = "fxtmrac",
    version,
    about = "Design and simulate robust fixed-time adaptive tracking controllers"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the design pipeline and print the report as JSON.
    Design(DesignArgs),
    /// Integrate the closed loop; print the summary, optionally write
    /// trajectory.csv and summary.json to --out.
    Simulate(SimArgs),
    /// Rerun the scenario over a set of initial estimate scales and
    /// report each settling time.
    Sweep(SweepArgs),
    /// Run the named invariant checks.
    Verify,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Built-in preset name (see `design --help` output; "benchmark" is
    /// the second-order study case).
    #[arg(long)]
    preset: Option<String>,
    /// JSON config path; explicit fields override the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Integration step override.
    #[arg(long)]
    dt: Option<f64>,
    /// Horizon override.
    #[arg(long)]
    t_end: Option<f64>,
    /// Zero out the disturbance.
    #[arg(long)]
    no_disturbance: bool,
    /// Estimator update law: fxt, baseline, or off.
    #[arg(long)]
    estimator: Option<String>,
    /// Seed for design sampling; echoed into outputs.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DesignArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Include the discrepancy audit in the report.
    #[arg(long)]
    audit: bool,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Comma-separated scales; each run starts from theta0 filled with
    /// the scale value.
    #[arg(long, default_value = "0,10,100")]
    theta0_scales: String,
}

/// Parse arguments and dispatch; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

// Stdout may be a closed pipe (`fxtmrac ... | head`); dropping the tail
// of the output beats dying on it.
fn emit(text: &str) {
    use std::io::Write as _;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Diverged { .. } => 4,
        Error::Infeasible(_) | Error::Numerical(_) => 2,
        _ => 3,
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.cmd {
        Command::Design(a) => cmd_design(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify => Ok(cmd_verify()),
    }
}

fn parse_mode(text: &str) -> Result<EstimatorMode> {
    match text {
        "fxt" => Ok(EstimatorMode::Fxt),
        "baseline" => Ok(EstimatorMode::Baseline),
        "off" => Ok(EstimatorMode::Off),
        other => Err(Error::Config(format!(
            "unknown estimator {other:?}; expected fxt, baseline, or off"
        ))),
    }
}

fn load_config(args: &ScenarioArgs) -> Result<config::Config> {
    let mut cfg = match (&args.preset, &args.config) {
        (_, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            let mut c = config::Config::from_json(&text)?;
            if args.preset.is_some() {
                c.preset = args.preset.clone();
            }
            c
        }
        (Some(name), None) => config::Config {
            preset: Some(name.clone()),
            ..config::Config::default()
        },
        (None, None) => {
            return Err(Error::Config("provide --preset or --config".into()));
        }
    };
    if let Some(dt) = args.dt {
        cfg.dt = Some(dt);
    }
    if let Some(t_end) = args.t_end {
        cfg.t_end = Some(t_end);
    }
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    if let Some(mode) = &args.estimator {
        cfg.estimator = Some(parse_mode(mode)?);
    }
    let mut resolved = cfg.resolve()?;
    if args.no_disturbance {
        let n = resolved.a_m.as_ref().map_or(0, |m| m.len());
        resolved.d = Some(Signal::constant(&vec![0.0; n]));
        resolved.d_bound = Some(0.0);
    }
    Ok(resolved)
}

fn ensure_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

fn cmd_design(args: DesignArgs) -> Result<i32> {
    let cfg = load_config(&args.scenario)?;
    let asm = config::build(&cfg)?;
    let mut report = asm.report;
    if !args.audit {
        report.audit.clear();
    }
    let text = serde_json::to_string_pretty(&report)?;
    emit(&text);
    if let Some(dir) = &args.scenario.out {
        ensure_out(dir)?;
        write_out(dir, "design.json", &text)?;
    }
    Ok(if report.certificate_feasible { 0 } else { 2 })
}

fn cmd_simulate(args: SimArgs) -> Result<i32> {
    let cfg = load_config(&args.scenario)?;
    let asm = config::build(&cfg)?;
    let out = sim::run(&asm.scenario)?;
    let text = serde_json::to_string_pretty(&out.summary)?;
    emit(&text);
    if let Some(dir) = &args.scenario.out {
        ensure_out(dir)?;
        write_out(dir, "trajectory.csv", &out.trajectory.to_csv_string()?)?;
        write_out(dir, "summary.json", &text)?;
        write_out(dir, "design.json", &serde_json::to_string_pretty(&asm.report)?)?;
    }
    Ok(0)
}

#[derive(Serialize)]
struct SweepEntry {
    label: String,
    theta0_scale: f64,
    settle_time_theta: Option<f64>,
    settled_before_switch: bool,
    theta_err_final: f64,
}

fn cmd_sweep(args: SweepArgs) -> Result<i32> {
    let mut scales = Vec::new();
    for part in args.theta0_scales.split(',') {
        let v: f64 = part
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad scale {part:?}")))?;
        scales.push(v);
    }
    if scales.is_empty() {
        return Err(Error::Config("no scales given".into()));
    }
    let cfg = load_config(&args.scenario)?;
    let mut entries = Vec::new();
    for scale in scales {
        let mut run_cfg = cfg.clone();
        let n = run_cfg.a_m.as_ref().map_or(0, |m| m.len());
        run_cfg.theta0 = Some(vec![scale; n * n]);
        let asm = config::build(&run_cfg)?;
        let out = sim::run(&asm.scenario)?;
        let s = out.summary;
        entries.push(SweepEntry {
            label: format!("theta0-scale-{scale}"),
            theta0_scale: scale,
            settle_time_theta: s.settle_time_theta,
            settled_before_switch: s
                .settle_time_theta
                .map(|t| t <= s.t_switch)
                .unwrap_or(false),
            theta_err_final: s.theta_err_final,
        });
    }
    let text = serde_json::to_string_pretty(&entries)?;
    emit(&text);
    if let Some(dir) = &args.scenario.out {
        ensure_out(dir)?;
        write_out(dir, "sweep.json", &text)?;
    }
    Ok(0)
}

fn cmd_verify() -> i32 {
    let mut failed = 0;
    for (name, outcome) in verify::run_all() {
        match outcome {
            Ok(()) => emit(&format!("PASS {name}")),
            Err(msg) => {
                failed += 1;
                emit(&format!("FAIL {name}: {msg}"));
            }
        }
    }
    if failed == 0 {
        emit("all checks passed");
        0
    } else {
        emit(&format!("{failed} check(s) failed"));
        2
    }
}
