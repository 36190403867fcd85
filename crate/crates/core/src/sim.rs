//! Deterministic step-by-step scenario engine on the LIP model.
//!
//! Each step: apply the events scheduled for it, ask the supervisor for a
//! command, sample the single-support flow, then take the step-to-step map.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::{supervise, ControlMode, StepCommand, SupervisorConfig, SupervisorState};
use crate::error::{Error, Result};
use crate::lip::{apply_push, flow_unchecked, step_map, GaitParams, StepState, DEFAULT_GRAVITY};
use crate::safety::{extremum, required_friction};

/// Something that happens at the start of a step, before the controller acts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Event {
    /// Horizontal impulse at the CoM, kg·m/s.
    Push { at_step: usize, impulse: f64 },
    /// New nominal gait. A negative step length walks backwards.
    SwitchGait {
        at_step: usize,
        step_length: f64,
        step_time: f64,
    },
    SetHeight { at_step: usize, h: f64 },
}

impl Event {
    pub fn at_step(&self) -> usize {
        match *self {
            Event::Push { at_step, .. }
            | Event::SwitchGait { at_step, .. }
            | Event::SetHeight { at_step, .. } => at_step,
        }
    }

    fn apply(&self, s: StepState, params: GaitParams) -> Result<(StepState, GaitParams)> {
        Ok(match *self {
            Event::Push { impulse, .. } => (apply_push(s, impulse, params.mass)?, params),
            Event::SwitchGait {
                step_length,
                step_time,
                ..
            } => (s, params.with_gait(step_length, step_time)?),
            Event::SetHeight { h, .. } => (s, params.with_height(h)?),
        })
    }
}

/// Convergence test: `‖x₀ − x₀*‖ < tol` on the last `window` step-initial
/// states, measured against the fixed point of the final gait.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Convergence {
    pub tol: f64,
    pub window: usize,
}

impl Default for Convergence {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            window: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub params: GaitParams,
    pub initial: StepState,
    pub events: Vec<Event>,
    pub n_steps: usize,
    /// Sampling period of the continuous trace; `None` means `T*/200` of the
    /// gait active at each step.
    pub sample_dt: Option<f64>,
    pub supervisor: SupervisorConfig,
    pub convergence: Convergence,
}

impl ScenarioConfig {
    /// A scenario starting at the fixed point of `params` with no events.
    pub fn new(name: impl Into<String>, params: GaitParams, n_steps: usize) -> Self {
        Self {
            name: name.into(),
            initial: params.fixed_point(),
            params,
            events: Vec::new(),
            n_steps,
            sample_dt: None,
            supervisor: SupervisorConfig::default(),
            convergence: Convergence::default(),
        }
    }

    pub fn with_event(mut self, event: Event) -> Self {
        self.events.push(event);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::Config("n_steps must be at least 1".into()));
        }
        if let Some(dt) = self.sample_dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Config(format!("sample_dt must be positive, got {dt}")));
            }
        }
        if !self.initial.is_finite() {
            return Err(Error::Config("initial state must be finite".into()));
        }
        self.supervisor.validate()?;
        if !(self.convergence.tol > 0.0) || self.convergence.window == 0 {
            return Err(Error::Config("convergence needs tol > 0 and window >= 1".into()));
        }
        // replay parameter changes so a bad event fails before the run starts
        let mut params = self.params;
        for (k, e) in self.events.iter().enumerate() {
            if e.at_step() == 0 {
                return Err(Error::Config(format!("event {} is scheduled at step 0; steps count from 1", k + 1)));
            }
            params = e
                .apply(StepState::ORIGIN, params)
                .map_err(|err| Error::Config(format!("event {}: {err}", k + 1)))?
                .1;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Converged,
    /// Still safe but not yet within the convergence tolerance.
    Running,
    /// Some sample demanded at least the available friction. Never expected.
    Slipped,
    /// A step started with the CoM already beyond `μh`.
    Unrecoverable,
}

impl Outcome {
    pub fn is_success(&self) -> bool {
        matches!(self, Outcome::Converged | Outcome::Running)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Converged => "converged",
            Outcome::Running => "running",
            Outcome::Slipped => "slipped",
            Outcome::Unrecoverable => "unrecoverable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based step index.
    pub index: usize,
    pub state_before: StepState,
    pub state_after_events: StepState,
    pub command: StepCommand,
    /// Largest `|x|/h` over the step's samples.
    pub mu_r_peak: f64,
    /// Friction coefficient in force during the step.
    pub mu: f64,
    /// Nominal gait in force during the step.
    pub nominal_length: f64,
    pub nominal_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub step: usize,
    /// Time since the start of the run, s.
    pub t: f64,
    pub x: f64,
    pub xdot: f64,
    pub mu_r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub name: String,
    pub records: Vec<StepRecord>,
    pub samples: Vec<Sample>,
    pub outcome: Outcome,
    /// Initial state of the step after the last recorded one.
    pub final_state: StepState,
    /// Gait in force at the end of the run.
    pub final_params: GaitParams,
}

impl Trace {
    pub fn peak_mu_r(&self) -> f64 {
        self.records.iter().map(|r| r.mu_r_peak).fold(0.0, f64::max)
    }

    pub fn modes(&self) -> Vec<ControlMode> {
        self.records.iter().map(|r| r.command.mode).collect()
    }

    /// Step-initial states in order, ending with the final state.
    pub fn initial_states(&self) -> Vec<StepState> {
        let mut v: Vec<_> = self.records.iter().map(|r| r.state_after_events).collect();
        v.push(self.final_state);
        v
    }

    /// Smallest friction margin `μ − μ_r` over all samples.
    pub fn min_friction_margin(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.mu - r.mu_r_peak)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Simulate a scenario.
pub fn run(config: &ScenarioConfig) -> Result<Trace> {
    config.validate()?;
    let mut params = config.params;
    let mut s = config.initial;
    let mut sup = SupervisorState::PRIMARY;
    let mut records = Vec::with_capacity(config.n_steps);
    let mut samples = Vec::new();
    let mut clock = 0.0;
    let mut outcome = None;

    for index in 1..=config.n_steps {
        let before = s;
        for e in config.events.iter().filter(|e| e.at_step() == index) {
            (s, params) = e.apply(s, params)?;
            log::debug!("step {index}: {e:?}");
        }
        let (cmd, next_sup) = supervise(s, sup, &params, &config.supervisor)?;
        sup = next_sup;
        if cmd.mode != ControlMode::Nominal {
            log::debug!("step {index}: {} (T = {}, L = {})", cmd.mode, cmd.step_time, cmd.step_length);
        }

        let mut record = StepRecord {
            index,
            state_before: before,
            state_after_events: s,
            command: cmd,
            mu_r_peak: required_friction(s.x0, params.h),
            mu: params.mu,
            nominal_length: params.step_length,
            nominal_time: params.step_time,
        };
        if cmd.mode == ControlMode::Unrecoverable {
            log::warn!("step {index}: state [{}, {}] already slips", s.x0, s.xdot0);
            records.push(record);
            outcome = Some(Outcome::Unrecoverable);
            break;
        }

        let dt = config.sample_dt.unwrap_or(params.step_time / 200.0);
        let t = cmd.step_time;
        let n = ((t / dt).ceil() as usize).max(1);
        let mut peak = 0.0f64;
        for k in 0..=n {
            let tk = t * k as f64 / n as f64;
            let st = flow_unchecked(s, tk, params.omega);
            let mu_r = required_friction(st.x0, params.h);
            peak = peak.max(mu_r);
            samples.push(Sample {
                step: index,
                t: clock + tk,
                x: st.x0,
                xdot: st.xdot0,
                mu_r,
            });
        }
        if let Some((t_m, x_m)) = extremum(s, params.omega) {
            if t_m < t {
                peak = peak.max(required_friction(x_m, params.h));
            }
        }
        record.mu_r_peak = peak;
        records.push(record);
        clock += t;
        s = step_map(s, cmd.step_length, t, params.omega)?;

        if peak >= params.mu {
            log::warn!("step {index}: required friction {peak} reached mu = {}", params.mu);
            outcome = Some(Outcome::Slipped);
            break;
        }
    }

    let outcome = outcome.unwrap_or_else(|| {
        let fp = params.fixed_point();
        let mut states: Vec<_> = records.iter().map(|r| r.state_after_events).collect();
        states.push(s);
        let w = config.convergence.window;
        let settled = states.len() >= w
            && sup == SupervisorState::PRIMARY
            && states[states.len() - w..]
                .iter()
                .all(|x| (*x - fp).norm() < config.convergence.tol);
        if settled {
            Outcome::Converged
        } else {
            Outcome::Running
        }
    });

    Ok(Trace {
        name: config.name.clone(),
        records,
        samples,
        outcome,
        final_state: s,
        final_params: params,
    })
}

/// Number of steps taken before the step-initial state enters, for good, the
/// `tol`-ball around the final gait's fixed point.
pub fn transient_step_count(trace: &Trace, tol: f64) -> Result<usize> {
    if trace.outcome != Outcome::Converged {
        return Err(Error::NotConverged(format!(
            "scenario `{}` ended as {}",
            trace.name, trace.outcome
        )));
    }
    let fp = trace.final_params.fixed_point();
    let states = trace.initial_states();
    let last_out = states.iter().rposition(|s| !((*s - fp).norm() < tol));
    Ok(last_out.map_or(0, |k| k + 1))
}

/// Steps whose length differs from the nominal length by more than `tol`.
pub fn adjusted_step_count(trace: &Trace, tol: f64) -> usize {
    trace
        .records
        .iter()
        .filter(|r| (r.command.step_length - r.nominal_length).abs() > tol)
        .count()
}

// ---------------------------------------------------------------------------
// Scenario files

fn default_g() -> f64 {
    DEFAULT_GRAVITY
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsSpec {
    #[serde(default = "default_g")]
    g: f64,
    h: f64,
    mu: f64,
    mass: f64,
    step_length: f64,
    step_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum InitialKeyword {
    FixedPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum InitialSpec {
    Keyword(InitialKeyword),
    State {
        x0: f64,
        xdot0: f64,
    },
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::Keyword(InitialKeyword::FixedPoint)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    name: Option<String>,
    params: ParamsSpec,
    #[serde(default)]
    initial: InitialSpec,
    n_steps: usize,
    #[serde(default)]
    sample_dt: Option<f64>,
    #[serde(default)]
    supervisor: SupervisorConfig,
    #[serde(default)]
    convergence: Convergence,
    #[serde(default)]
    events: Vec<Event>,
}

const PARAM_KEYS: [&str; 6] = ["g", "h", "mu", "mass", "step_length", "step_time"];

/// Apply `key=value` overrides to a parsed scenario table. Bare parameter
/// names (`mu=0.3`) address the `[params]` table; dotted keys address any
/// table (`supervisor.kappa=0.7`).
fn apply_overrides(table: &mut toml::Table, overrides: &[String]) -> Result<()> {
    for ov in overrides {
        let (key, raw) = ov
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{ov}` is not key=value")))?;
        let key = key.trim();
        let raw = raw.trim();
        let mut path: Vec<&str> = key.split('.').collect();
        if path.len() == 1 && PARAM_KEYS.contains(&path[0]) {
            path.insert(0, "params");
        }
        if path.iter().any(|p| p.is_empty()) {
            return Err(Error::Config(format!("override `{ov}` has an empty key")));
        }
        let value = parse_toml_value(raw);
        let (last, parents) = path.split_last().expect("nonempty");
        let mut cur = &mut *table;
        for p in parents {
            let entry = cur
                .entry(p.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            cur = entry
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("override `{ov}`: `{p}` is not a table")))?;
        }
        cur.insert(last.to_string(), value);
    }
    Ok(())
}

fn parse_toml_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Parse a scenario from TOML text, applying overrides first.
pub fn parse_scenario(text: &str, overrides: &[String]) -> Result<ScenarioConfig> {
    scenario_from_table(scenario_table(text, overrides)?)
}

/// TOML text with overrides applied, before schema checks.
pub(crate) fn scenario_table(text: &str, overrides: &[String]) -> Result<toml::Table> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    apply_overrides(&mut table, overrides)?;
    Ok(table)
}

pub(crate) fn scenario_from_table(table: toml::Table) -> Result<ScenarioConfig> {
    let file: ScenarioFile = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let p = file.params;
    let params = GaitParams::new(p.g, p.h, p.mu, p.mass, p.step_length, p.step_time)
        .map_err(|e| Error::Config(e.to_string()))?;
    let initial = match file.initial {
        InitialSpec::Keyword(InitialKeyword::FixedPoint) => params.fixed_point(),
        InitialSpec::State { x0, xdot0 } => StepState::new(x0, xdot0),
    };
    let config = ScenarioConfig {
        name: file.name.unwrap_or_else(|| "scenario".into()),
        params,
        initial,
        events: file.events,
        n_steps: file.n_steps,
        sample_dt: file.sample_dt,
        supervisor: file.supervisor,
        convergence: file.convergence,
    };
    config.validate()?;
    Ok(config)
}

/// Read a scenario file; a missing `name` defaults to the file stem.
pub fn load_scenario(path: &Path, overrides: &[String]) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg = parse_scenario(&text, overrides).map_err(|e| in_file(path, e))?;
    Ok(named_after(cfg, path))
}

/// Attach the file path to configuration errors.
pub(crate) fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Config(detail) => Error::Parse {
            path: path.to_path_buf(),
            detail,
        },
        other => other,
    }
}

pub(crate) fn named_after(mut cfg: ScenarioConfig, path: &Path) -> ScenarioConfig {
    if cfg.name == "scenario" {
        if let Some(stem) = path.file_stem() {
            cfg.name = stem.to_string_lossy().into_owned();
        }
    }
    cfg
}

/// Render a scenario back to TOML; `parse_scenario` recovers it.
pub fn scenario_to_toml(config: &ScenarioConfig) -> Result<String> {
    let p = config.params;
    let file = ScenarioFile {
        name: Some(config.name.clone()),
        params: ParamsSpec {
            g: p.g,
            h: p.h,
            mu: p.mu,
            mass: p.mass,
            step_length: p.step_length,
            step_time: p.step_time,
        },
        initial: InitialSpec::State {
            x0: config.initial.x0,
            xdot0: config.initial.xdot0,
        },
        n_steps: config.n_steps,
        sample_dt: config.sample_dt,
        supervisor: config.supervisor,
        convergence: config.convergence,
        events: config.events.clone(),
    };
    toml::to_string(&file).map_err(|e| Error::Config(e.to_string()))
}

// ---------------------------------------------------------------------------
// Trace export

/// File names written by [`export_trace`].
pub const SAMPLES_FILE: &str = "samples.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TRACE_FILE: &str = "trace.toml";

/// The structured part of a trace: step records and outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub name: String,
    pub outcome: Outcome,
    pub final_state: StepState,
    pub steps: Vec<StepRecord>,
}

impl From<&Trace> for TraceSummary {
    fn from(t: &Trace) -> Self {
        Self {
            name: t.name.clone(),
            outcome: t.outcome,
            final_state: t.final_state,
            steps: t.records.clone(),
        }
    }
}

pub fn write_samples_csv<W: Write>(trace: &Trace, mut out: W) -> std::io::Result<()> {
    writeln!(out, "step,t,x,xdot,mu_r")?;
    for s in &trace.samples {
        writeln!(out, "{},{},{},{},{}", s.step, s.t, s.x, s.xdot, s.mu_r)?;
    }
    Ok(())
}

pub fn write_summary_csv<W: Write>(trace: &Trace, mut out: W) -> std::io::Result<()> {
    writeln!(out, "step,L,T,mode,mu_r_peak")?;
    for r in &trace.records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.index, r.command.step_length, r.command.step_time, r.command.mode, r.mu_r_peak
        )?;
    }
    Ok(())
}

/// Write `samples.csv`, `summary.csv` and `trace.toml` into `dir`, which is
/// created if needed. Output depends only on the trace.
pub fn export_trace(trace: &Trace, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, f: &dyn Fn(&mut Vec<u8>) -> std::io::Result<()>| -> Result<()> {
        let path = dir.join(name);
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| Error::io(&path, e))?;
        fs::write(&path, buf).map_err(|e| Error::io(&path, e))
    };
    write(SAMPLES_FILE, &|b| write_samples_csv(trace, b))?;
    write(SUMMARY_FILE, &|b| write_summary_csv(trace, b))?;
    let text = toml::to_string(&TraceSummary::from(trace))
        .map_err(|e| Error::Config(e.to_string()))?;
    write(TRACE_FILE, &|b| b.write_all(text.as_bytes()))
}

/// Parse a `trace.toml` written by [`export_trace`].
pub fn read_trace_summary(path: &Path) -> Result<TraceSummary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}
