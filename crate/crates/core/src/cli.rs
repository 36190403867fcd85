//! The `footstep` command line. Exit codes: 0 success, 1 controller-reported
//! failure, 2 usage or configuration error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::acceptance::{run_criterion, CRITERIA};
use crate::biped::scenario::write_joint_log;
use crate::biped::{load_full_scenario, run_full_scenario, Biped, BipedModel};
use crate::error::{Error, Result};
use crate::safety::{region_boundaries, write_boundaries_csv};
use crate::sim::{self, load_scenario, scenario_to_toml, transient_step_count, Outcome, Trace};

pub const META_FILE: &str = "meta.toml";
pub const SCENARIO_FILE: &str = "scenario.toml";
pub const JOINTS_FILE: &str = "joints.csv";
pub const FEASIBILITY_FILE: &str = "feasibility.toml";

#[derive(Debug, Parser)]
#[command(name = "footstep", version, about = "Slip-aware footstep control for sagittal walking")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write its trace.
    Run {
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Override a scenario key, e.g. `params.mu=0.3`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Replace existing output files.
        #[arg(long)]
        force: bool,
    },
    /// Export region borders for the gait of a scenario as CSV.
    Regions {
        config: PathBuf,
        /// Step time of the regions; defaults to the nominal one.
        #[arg(long)]
        step_time: Option<f64>,
        /// Vertices per curved border.
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// Output file; stdout if absent.
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        force: bool,
    },
    /// Run a scenario once per value of one parameter.
    Sweep {
        config: PathBuf,
        /// Key to vary, as in `--set`: `mu`, `h`, `supervisor.kappa`, ...
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
        /// Output file; stdout if absent.
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        force: bool,
    },
    /// Run the acceptance suite and print a pass/fail table.
    Accept {
        /// Run only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
    /// Walk the full-body model through a scenario.
    Plan6dof {
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Model file; the bundled Nao-like model if absent.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        force: bool,
    },
}

/// Parse the process arguments, run, and map the result to an exit code.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for anything the user can fix in the invocation or files, 1 otherwise.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::Io { .. } | Error::NonPositive { .. } | Error::NonFinite { .. } => 2,
        _ => 1,
    }
}

pub fn execute(command: &Command) -> Result<ExitCode> {
    match command {
        Command::Run {
            config,
            out,
            overrides,
            force,
        } => cmd_run(config, out, overrides, *force),
        Command::Regions {
            config,
            step_time,
            points,
            out,
            overrides,
            force,
        } => cmd_regions(config, *step_time, *points, out.as_deref(), overrides, *force),
        Command::Sweep {
            config,
            param,
            values,
            out,
            overrides,
            force,
        } => cmd_sweep(config, param, values, out.as_deref(), overrides, *force),
        Command::Accept { only } => cmd_accept(only),
        Command::Plan6dof {
            config,
            out,
            model,
            overrides,
            force,
        } => cmd_plan6dof(config, out, model.as_deref(), overrides, *force),
    }
}

/// Provenance written next to every output; deliberately free of timestamps.
#[derive(Debug, Serialize)]
struct Meta<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: String,
    overrides: &'a [String],
    files: Vec<&'static str>,
}

impl<'a> Meta<'a> {
    fn new(command: &'static str, config: &Path, overrides: &'a [String], files: Vec<&'static str>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config: config.display().to_string(),
            overrides,
            files,
        }
    }
}

fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Config(e.to_string()))
}

/// Refuse to touch existing files unless forced.
fn guard(paths: &[PathBuf], force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    match paths.iter().find(|p| p.exists()) {
        Some(p) => Err(Error::Config(format!(
            "{} exists; pass --force to overwrite",
            p.display()
        ))),
        None => Ok(()),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn emit(out: Option<&Path>, bytes: &[u8], force: bool) -> Result<()> {
    match out {
        Some(path) => {
            guard(&[path.to_path_buf()], force)?;
            write_file(path, bytes)
        }
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

/// Why a finished trace counts as a controller failure, if it does.
fn failure(trace: &Trace) -> Option<String> {
    match trace.outcome {
        Outcome::Slipped => Some("slip: required friction reached the friction coefficient".into()),
        Outcome::Unrecoverable => Some("unrecoverable/slip: the state left the no-slip strip".into()),
        _ if trace.min_friction_margin() <= 0.0 => Some("slip: required friction reached the friction coefficient".into()),
        _ => None,
    }
}

fn cmd_run(config: &Path, out: &Path, overrides: &[String], force: bool) -> Result<ExitCode> {
    let cfg = load_scenario(config, overrides)?;
    let files = vec![sim::SAMPLES_FILE, sim::SUMMARY_FILE, sim::TRACE_FILE, SCENARIO_FILE, META_FILE];
    guard(&files.iter().map(|f| out.join(f)).collect::<Vec<_>>(), force)?;
    let trace = sim::run(&cfg)?;
    sim::export_trace(&trace, out)?;
    write_file(&out.join(SCENARIO_FILE), scenario_to_toml(&cfg)?.as_bytes())?;
    write_file(
        &out.join(META_FILE),
        to_toml(&Meta::new("run", config, overrides, files))?.as_bytes(),
    )?;
    println!(
        "{}: {} after {} steps, peak mu_r {:.6} (mu {})",
        trace.name,
        trace.outcome,
        trace.records.len(),
        trace.peak_mu_r(),
        cfg.params.mu
    );
    Ok(match failure(&trace) {
        Some(reason) => {
            eprintln!("controller failure: {reason}");
            ExitCode::from(1)
        }
        None => ExitCode::SUCCESS,
    })
}

fn cmd_regions(
    config: &Path,
    step_time: Option<f64>,
    points: usize,
    out: Option<&Path>,
    overrides: &[String],
    force: bool,
) -> Result<ExitCode> {
    let cfg = load_scenario(config, overrides)?;
    let t = step_time.unwrap_or(cfg.params.step_time);
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::NonPositive { field: "step_time", value: t });
    }
    let pts = region_boundaries(&cfg.params, t, points)?;
    let mut buf = Vec::new();
    write_boundaries_csv(&pts, &mut buf).map_err(|e| Error::io("<buffer>", e))?;
    emit(out, &buf, force)?;
    Ok(ExitCode::SUCCESS)
}

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: Outcome,
    pub transient_steps: Option<usize>,
    pub time_adjusted_steps: usize,
    pub peak_mu_r: f64,
    pub min_margin: f64,
}

pub const SWEEP_HEADER: &str = "value,outcome,transient_steps,time_adjusted_steps,peak_mu_r,min_margin";

/// Run `config` once per value, in parallel; rows keep the order of `values`.
pub fn sweep(config: &Path, param: &str, values: &[f64], overrides: &[String]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    values
        .par_iter()
        .map(|&v| {
            let mut ov = overrides.to_vec();
            ov.push(format!("{param}={v}"));
            let cfg = load_scenario(config, &ov)?;
            let trace = sim::run(&cfg)?;
            Ok(SweepRow {
                value: v,
                outcome: trace.outcome,
                transient_steps: transient_step_count(&trace, cfg.convergence.tol).ok(),
                time_adjusted_steps: trace
                    .records
                    .iter()
                    .filter(|r| r.command.step_time != r.nominal_time)
                    .count(),
                peak_mu_r: trace.peak_mu_r(),
                min_margin: trace.min_friction_margin(),
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        let transient = r.transient_steps.map(|n| n.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.value, r.outcome, transient, r.time_adjusted_steps, r.peak_mu_r, r.min_margin
        )?;
    }
    Ok(())
}

fn cmd_sweep(
    config: &Path,
    param: &str,
    values: &[f64],
    out: Option<&Path>,
    overrides: &[String],
    force: bool,
) -> Result<ExitCode> {
    if let Some(p) = out {
        guard(&[p.to_path_buf()], force)?;
    }
    let rows = sweep(config, param, values, overrides)?;
    let mut buf = Vec::new();
    write_sweep_csv(&rows, &mut buf).map_err(|e| Error::io("<buffer>", e))?;
    emit(out, &buf, true)?;
    let failed = rows.iter().filter(|r| !r.outcome.is_success() || r.min_margin <= 0.0).count();
    if failed > 0 {
        eprintln!("controller failure in {failed} of {} runs", rows.len());
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_accept(only: &[u8]) -> Result<ExitCode> {
    for id in only {
        if !CRITERIA.iter().any(|(k, _)| k == id) {
            return Err(Error::Config(format!("no acceptance criterion {id}")));
        }
    }
    let mut failed = 0;
    for (id, _) in CRITERIA.iter().filter(|(k, _)| only.is_empty() || only.contains(k)) {
        let r = run_criterion(*id);
        println!("{r}");
        failed += usize::from(!r.passed);
    }
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_plan6dof(
    config: &Path,
    out: &Path,
    model: Option<&Path>,
    overrides: &[String],
    force: bool,
) -> Result<ExitCode> {
    let (cfg, run_cfg) = load_full_scenario(config, overrides)?;
    let model = match model {
        Some(p) => BipedModel::load(p)?,
        None => BipedModel::nao_like(),
    };
    let biped = Biped::new(model)?;
    let files = vec![
        JOINTS_FILE,
        FEASIBILITY_FILE,
        sim::SAMPLES_FILE,
        sim::SUMMARY_FILE,
        sim::TRACE_FILE,
        META_FILE,
    ];
    guard(&files.iter().map(|f| out.join(f)).collect::<Vec<_>>(), force)?;
    let run = run_full_scenario(&biped, &cfg, &run_cfg)?;
    sim::export_trace(&run.trace, out)?;
    let mut buf = Vec::new();
    write_joint_log(&run.joints, &mut buf).map_err(|e| Error::io(out.join(JOINTS_FILE), e))?;
    write_file(&out.join(JOINTS_FILE), &buf)?;
    write_file(&out.join(FEASIBILITY_FILE), to_toml(&run.report)?.as_bytes())?;
    write_file(
        &out.join(META_FILE),
        to_toml(&Meta::new("plan6dof", config, overrides, files))?.as_bytes(),
    )?;
    let r = run.report;
    println!(
        "{}: {} steps, peak mu_r {:.4}, min f_n {:.3} N, CoP [{:.4}, {:.4}] m, touchdown speed {:.2e} m/s",
        run.trace.name,
        run.trace.records.len(),
        r.peak_mu_r,
        r.min_normal_force,
        r.cop_range[0],
        r.cop_range[1],
        r.max_touchdown_speed
    );
    Ok(ExitCode::SUCCESS)
}
