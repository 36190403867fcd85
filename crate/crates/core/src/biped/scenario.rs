//! Closed-loop walking of the full-body model: each step the supervisor reads
//! the measured CoM state, the planner builds the joint trajectory, computed
//! torque tracks it, and at touchdown the legs swap roles.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::kinematics::{Biped, Joints};
use super::plan::{initial_posture, plan_step, PlanReport, PlannerConfig, StepTarget};
use super::track::{rollout, tracking_error, Gains};
use crate::control::{supervise, ControlMode, SupervisorState};
use crate::error::{Error, Result};
use crate::lip::{transition_matrix, StepState};
use crate::sim::{self, Event, Outcome, Sample, ScenarioConfig, StepRecord, Trace};

/// Settings of the full-body run beyond the gait scenario itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BipedRunConfig {
    pub planner: PlannerConfig,
    pub gains: Gains,
    /// Largest RK4 step, s.
    pub dt: f64,
    /// Bound on the simulated `max |ẍ − ω²x|` of the CoM, m/s².
    pub lip_defect_bound: f64,
}

impl Default for BipedRunConfig {
    fn default() -> Self {
        Self {
            planner: PlannerConfig::default(),
            gains: Gains::default(),
            dt: 1e-3,
            lip_defect_bound: 0.5,
        }
    }
}

impl BipedRunConfig {
    pub fn validate(&self) -> Result<()> {
        self.planner.validate()?;
        self.gains.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::NonPositive { field: "dt", value: self.dt });
        }
        if !(self.lip_defect_bound > 0.0) {
            return Err(Error::NonPositive {
                field: "lip_defect_bound",
                value: self.lip_defect_bound,
            });
        }
        Ok(())
    }
}

/// Boundary-condition residuals on the simulated state at touchdown.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TouchdownResiduals {
    pub sole_position: f64,
    pub sole_velocity: f64,
    pub com_horizontal: f64,
    pub com_vertical: f64,
    pub swing_foot: f64,
    pub torso: f64,
}

impl TouchdownResiduals {
    fn max(self, o: Self) -> Self {
        Self {
            sole_position: self.sole_position.max(o.sole_position),
            sole_velocity: self.sole_velocity.max(o.sole_velocity),
            com_horizontal: self.com_horizontal.max(o.com_horizontal),
            com_vertical: self.com_vertical.max(o.com_vertical),
            swing_foot: self.swing_foot.max(o.swing_foot),
            torso: self.torso.max(o.torso),
        }
    }
}

/// Feasibility of the simulated (not planned) motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub min_normal_force: f64,
    pub peak_mu_r: f64,
    /// CoP extremes about the stance ankle, m.
    pub cop_range: [f64; 2],
    /// Largest swing-sole speed at touchdown, m/s.
    pub max_touchdown_speed: f64,
    pub min_clearance: f64,
    /// Knee angles at the sampled instants T/2 and T: min q₂ and max q₄.
    pub min_stance_knee: f64,
    pub max_swing_knee: f64,
    pub max_tracking_error: f64,
    /// Largest |ẍ − ω²x| of the simulated CoM.
    pub max_lip_defect: f64,
    /// Worst planned CoP endpoint residual.
    pub max_cop_residual: f64,
    pub touchdown: TouchdownResiduals,
}

impl FeasibilityReport {
    fn new() -> Self {
        Self {
            min_normal_force: f64::INFINITY,
            peak_mu_r: 0.0,
            cop_range: [f64::INFINITY, f64::NEG_INFINITY],
            max_touchdown_speed: 0.0,
            min_clearance: f64::INFINITY,
            min_stance_knee: f64::INFINITY,
            max_swing_knee: f64::NEG_INFINITY,
            max_tracking_error: 0.0,
            max_lip_defect: 0.0,
            max_cop_residual: 0.0,
            touchdown: TouchdownResiduals::default(),
        }
    }

    pub fn is_finite(&self) -> bool {
        let t = self.touchdown;
        [
            self.min_normal_force,
            self.peak_mu_r,
            self.cop_range[0],
            self.cop_range[1],
            self.max_touchdown_speed,
            self.min_clearance,
            self.min_stance_knee,
            self.max_swing_knee,
            self.max_tracking_error,
            self.max_lip_defect,
            self.max_cop_residual,
            t.sole_position,
            t.sole_velocity,
            t.com_horizontal,
            t.com_vertical,
            t.swing_foot,
            t.torso,
        ]
        .iter()
        .all(|v| v.is_finite())
    }

    /// CoP inside the sole `[−aft, fore]`.
    pub fn cop_within(&self, aft: f64, fore: f64) -> bool {
        self.cop_range[0] >= -aft && self.cop_range[1] <= fore
    }
}

/// One row of the joint log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointSample {
    pub t: f64,
    pub q: Joints,
    pub qd: Joints,
    pub tau: Joints,
    pub x_cop: f64,
    pub fn_y: f64,
    pub mu_r: f64,
}

pub const JOINT_LOG_HEADER: &str =
    "t,q1,q2,q3,q4,q5,q6,qd1,qd2,qd3,qd4,qd5,qd6,tau1,tau2,tau3,tau4,tau5,tau6,x_cop,fn,mu_r";

pub fn write_joint_log<W: Write>(rows: &[JointSample], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{JOINT_LOG_HEADER}")?;
    for r in rows {
        write!(out, "{}", r.t)?;
        for v in r.q.iter().chain(r.qd.iter()).chain(r.tau.iter()) {
            write!(out, ",{v}")?;
        }
        writeln!(out, ",{},{},{}", r.x_cop, r.fn_y, r.mu_r)?;
    }
    Ok(())
}

/// Everything a full-body run produces.
#[derive(Debug, Clone)]
pub struct FullRun {
    pub trace: Trace,
    pub report: FeasibilityReport,
    pub joints: Vec<JointSample>,
    pub plans: Vec<PlanReport>,
}

fn measure(biped: &Biped, q: &Joints, qd: &Joints) -> StepState {
    let c = biped.com_state(q, qd);
    StepState::new(c.x, c.xdot)
}

/// Walk the full-body model through `scenario`. Pushes are applied at the
/// torso midpoint; gait switches change the supervisor's nominal gait.
/// Lift-off, slipping and planner failure abort the run with
/// [`Error::RolloutAborted`].
pub fn run_full_scenario(biped: &Biped, scenario: &ScenarioConfig, config: &BipedRunConfig) -> Result<FullRun> {
    scenario.validate()?;
    config.validate()?;
    if let Some(e) = scenario.events.iter().find(|e| matches!(e, Event::SetHeight { .. })) {
        return Err(Error::Config(format!(
            "height changes are not supported by the full-body run (step {})",
            e.at_step()
        )));
    }
    let mut params = scenario.params;
    if (params.g - biped.model.gravity).abs() > 1e-12 {
        return Err(Error::Config(format!(
            "gait gravity {} differs from model gravity {}",
            params.g, biped.model.gravity
        )));
    }
    let (mut q, mut qd) = initial_posture(biped, scenario.initial, params.h, -params.step_length)?;
    let mut sup = SupervisorState::PRIMARY;
    let mut report = FeasibilityReport::new();
    let mut records = Vec::with_capacity(scenario.n_steps);
    let mut samples = Vec::new();
    let mut joints = Vec::new();
    let mut plans = Vec::new();
    let mut clock = 0.0;
    let mut outcome = None;
    let abort = |step: usize, time: f64, reason: String| Error::RolloutAborted { step, time, reason };

    for index in 1..=scenario.n_steps {
        let before = measure(biped, &q, &qd);
        for e in scenario.events.iter().filter(|e| e.at_step() == index) {
            match *e {
                Event::Push { impulse, .. } => qd = biped.impact(&q, &qd, impulse)?,
                Event::SwitchGait {
                    step_length,
                    step_time,
                    ..
                } => params = params.with_gait(step_length, step_time)?,
                Event::SetHeight { .. } => unreachable!("rejected above"),
            }
        }
        let s = measure(biped, &q, &qd);
        let (cmd, next_sup) = supervise(s, sup, &params, &scenario.supervisor)?;
        sup = next_sup;
        let mut record = StepRecord {
            index,
            state_before: before,
            state_after_events: s,
            command: cmd,
            mu_r_peak: 0.0,
            mu: params.mu,
            nominal_length: params.step_length,
            nominal_time: params.step_time,
        };
        if cmd.mode == ControlMode::Unrecoverable {
            records.push(record);
            outcome = Some(Outcome::Unrecoverable);
            break;
        }
        if cmd.mode != ControlMode::Nominal {
            log::debug!("step {index}: {} (T = {}, L = {})", cmd.mode, cmd.step_time, cmd.step_length);
        }

        let target = StepTarget {
            step_length: cmd.step_length,
            step_time: cmd.step_time,
            initial: s,
        };
        let (plan, plan_report) = plan_step(biped, &q, &qd, &target, &params, &config.planner)
            .map_err(|e| abort(index, clock, format!("planner: {e}")))?;
        let run = rollout(biped, &plan, &config.gains, &q, &qd, config.dt)?;

        let w2 = params.omega * params.omega;
        let mut peak = 0.0f64;
        for r in &run {
            let c = r.contact;
            let t = clock + r.t;
            if c.lifted_off() {
                return Err(abort(index, t, format!("lift-off: normal force {}", c.fy)));
            }
            let mu_r = c.mu_r();
            if mu_r >= params.mu {
                return Err(abort(index, t, format!("slip: required friction {mu_r} >= mu = {}", params.mu)));
            }
            peak = peak.max(mu_r);
            report.min_normal_force = report.min_normal_force.min(c.fy);
            report.cop_range = [report.cop_range[0].min(c.x_cop), report.cop_range[1].max(c.x_cop)];
            let (sole, _) = biped.swing_sole(&r.q, &r.qd);
            report.min_clearance = report.min_clearance.min(sole.y);
            let com = biped.com_state(&r.q, &r.qd);
            let acc = biped.com_acceleration(&r.q, &r.qd, &r.qdd);
            report.max_lip_defect = report.max_lip_defect.max((acc.x - w2 * com.x).abs());
            samples.push(Sample {
                step: index,
                t,
                x: com.x,
                xdot: com.xdot,
                mu_r,
            });
            joints.push(JointSample {
                t,
                q: r.q,
                qd: r.qd,
                tau: r.tau,
                x_cop: c.x_cop,
                fn_y: c.fy,
                mu_r,
            });
        }
        report.peak_mu_r = report.peak_mu_r.max(peak);
        report.max_tracking_error = report.max_tracking_error.max(tracking_error(&plan, &run));
        report.max_cop_residual = report
            .max_cop_residual
            .max(plan_report.residuals.cop[0].abs())
            .max(plan_report.residuals.cop[1].abs());

        let mid = run
            .iter()
            .min_by(|a, b| (a.t - 0.5 * cmd.step_time).abs().total_cmp(&(b.t - 0.5 * cmd.step_time).abs()))
            .expect("rollout has samples");
        let last = run.last().expect("rollout has samples");
        report.min_stance_knee = report.min_stance_knee.min(mid.q[1]).min(last.q[1]);
        report.max_swing_knee = report.max_swing_knee.max(mid.q[3]).max(last.q[3]);

        let (sole, sole_v) = biped.swing_sole(&last.q, &last.qd);
        let com = biped.com_state(&last.q, &last.qd);
        let expected = transition_matrix(cmd.step_time, params.omega)?.apply(s);
        let td = TouchdownResiduals {
            sole_position: (sole - Vector2::new(cmd.step_length, 0.0)).amax(),
            sole_velocity: sole_v.norm(),
            com_horizontal: (com.x - expected.x0).abs().max((com.xdot - expected.xdot0).abs()),
            com_vertical: (com.y - params.h).abs().max(com.ydot.abs()),
            swing_foot: last.q[4].abs().max(last.qd[4].abs()),
            torso: (last.q[5] - std::f64::consts::FRAC_PI_2).abs().max(last.qd[5].abs()),
        };
        report.max_touchdown_speed = report.max_touchdown_speed.max(td.sole_velocity);
        report.touchdown = report.touchdown.max(td);

        record.mu_r_peak = peak;
        records.push(record);
        plans.push(plan_report);
        clock += cmd.step_time;
        (q, qd) = biped.switch_legs(&last.q, &last.qd);
    }

    let final_state = measure(biped, &q, &qd);
    let outcome = outcome.unwrap_or_else(|| {
        let fp = params.fixed_point();
        let w = scenario.convergence.window;
        let mut states: Vec<_> = records.iter().map(|r| r.state_after_events).collect();
        states.push(final_state);
        let settled = states.len() >= w
            && sup == SupervisorState::PRIMARY
            && states[states.len() - w..]
                .iter()
                .all(|x| (*x - fp).norm() < scenario.convergence.tol);
        if settled {
            Outcome::Converged
        } else {
            Outcome::Running
        }
    });
    Ok(FullRun {
        trace: Trace {
            name: scenario.name.clone(),
            records,
            samples,
            outcome,
            final_state,
            final_params: params,
        },
        report,
        joints,
        plans,
    })
}

/// Parse a scenario whose optional `[biped]` table holds a
/// [`BipedRunConfig`]. Overrides may address either part, e.g.
/// `biped.planner.rho=50` or `params.mu=0.2`.
pub fn parse_full_scenario(text: &str, overrides: &[String]) -> Result<(ScenarioConfig, BipedRunConfig)> {
    let mut table = sim::scenario_table(text, overrides)?;
    let run = match table.remove("biped") {
        Some(v) => v
            .try_into::<BipedRunConfig>()
            .map_err(|e| Error::Config(format!("[biped]: {e}")))?,
        None => BipedRunConfig::default(),
    };
    run.validate()?;
    Ok((sim::scenario_from_table(table)?, run))
}

pub fn load_full_scenario(path: &Path, overrides: &[String]) -> Result<(ScenarioConfig, BipedRunConfig)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (cfg, run) = parse_full_scenario(&text, overrides).map_err(|e| sim::in_file(path, e))?;
    Ok((sim::named_after(cfg, path), run))
}
