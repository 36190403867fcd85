//! Step-length and step-time control laws and the supervisor that picks
//! between them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lip::{flow_unchecked, GaitParams, StepState};
use crate::safety::{
    classify_with, critical_window, return_length_range, safe_range_with, slip_time, IntervalKind,
    LengthInterval,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    Nominal,
    FixedBorder,
    MovingBorder,
    Unrecoverable,
}

impl ControlMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ControlMode::Nominal => "nominal",
            ControlMode::FixedBorder => "fixed_border",
            ControlMode::MovingBorder => "moving_border",
            ControlMode::Unrecoverable => "unrecoverable",
        }
    }
}

impl fmt::Display for ControlMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ControlMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nominal" => Ok(ControlMode::Nominal),
            "fixed_border" => Ok(ControlMode::FixedBorder),
            "moving_border" => Ok(ControlMode::MovingBorder),
            "unrecoverable" => Ok(ControlMode::Unrecoverable),
            other => Err(Error::Config(format!("unknown control mode `{other}`"))),
        }
    }
}

/// Gait the step-length controller is currently converging to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaitTarget {
    Primary,
    /// Marching in place (`L = 0`) at the moving-border step time.
    ZeroGait,
}

impl GaitTarget {
    pub fn as_str(&self) -> &'static str {
        match self {
            GaitTarget::Primary => "primary",
            GaitTarget::ZeroGait => "zero_gait",
        }
    }
}

impl fmt::Display for GaitTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What to do in the coming step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepCommand {
    pub step_length: f64,
    pub step_time: f64,
    pub mode: ControlMode,
    pub target: GaitTarget,
}

impl StepCommand {
    fn nominal(step_length: f64, params: &GaitParams) -> Self {
        Self {
            step_length,
            step_time: params.step_time,
            mode: ControlMode::Nominal,
            target: GaitTarget::Primary,
        }
    }

    /// Best effort for a state that already slips: the nominal gait, flagged.
    fn unrecoverable(params: &GaitParams) -> Self {
        Self {
            step_length: params.step_length,
            step_time: params.step_time,
            mode: ControlMode::Unrecoverable,
            target: GaitTarget::Primary,
        }
    }
}

/// Memory carried between steps by the supervisor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupervisorState {
    pub target: GaitTarget,
    /// Step time of the secondary safe region; set only while heading for the
    /// zero gait.
    pub moving_border_time: Option<f64>,
}

impl Default for SupervisorState {
    fn default() -> Self {
        Self::PRIMARY
    }
}

impl SupervisorState {
    pub const PRIMARY: SupervisorState = SupervisorState {
        target: GaitTarget::Primary,
        moving_border_time: None,
    };

    fn zero_gait(step_time: f64) -> Self {
        Self {
            target: GaitTarget::ZeroGait,
            moving_border_time: Some(step_time),
        }
    }
}

/// Which subset of the fixed-border region triggers the fixed-border law. The
/// rest of the subsequent-slipping region goes to the moving-border law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerPolicy {
    /// Fixed border on all of `A`.
    #[default]
    RegionA,
    /// Never use the fixed border (the empty subset of `A`).
    MovingBorderOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SupervisorConfig {
    /// Moving-border step time as a fraction of the time to slip.
    pub kappa: f64,
    pub trigger: TriggerPolicy,
}

impl Default for SupervisorConfig {
    fn default() -> Self {
        Self {
            kappa: 0.8,
            trigger: TriggerPolicy::RegionA,
        }
    }
}

impl SupervisorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::Config(format!(
                "kappa must lie in (0, 1), got {}",
                self.kappa
            )));
        }
        Ok(())
    }
}

/// Step lengths for which the Lyapunov function `V = (a21 Δx + a22 Δẋ)²` of
/// the deviation `delta` from the nominal fixed point does not grow.
pub fn convergence_range(delta: StepState, params: &GaitParams) -> LengthInterval {
    let a = params.nominal_matrix();
    let (dx, dv) = (delta.x0, delta.xdot0);
    let u = a.a21 * dx + a.a22 * dv;
    let p = (a.a11 * a.a21 + a.a21 * a.a22) * dx + (a.a12 * a.a21 + a.a22 * a.a22) * dv;
    let dl1 = (p + u) / a.a21;
    let dl2 = (p - u) / a.a21;
    let l_star = params.step_length;
    let (lower, upper) = (dl1.min(dl2) + l_star, dl1.max(dl2) + l_star);
    // on V = 0 the roots coincide, possibly only after rounding
    if lower >= upper {
        return LengthInterval::point(IntervalKind::Convergence, 0.5 * (lower + upper));
    }
    LengthInterval::open(IntervalKind::Convergence, lower, upper)
}

/// `V(Δ) = (a21 Δx + a22 Δẋ)²` at the nominal step time.
pub fn lyapunov(delta: StepState, params: &GaitParams) -> f64 {
    let a = params.nominal_matrix();
    (a.a21 * delta.x0 + a.a22 * delta.xdot0).powi(2)
}

/// Safe and convergent step length for a state already in `S`: the midpoint
/// of the intersection of the two ranges.
pub fn step_length_command(s: StepState, params: &GaitParams) -> Result<f64> {
    let a = params.nominal_matrix();
    let report = classify_with(s, &a, params);
    if !report.in_s {
        return Err(Error::precondition(
            "step_length_command",
            format!(
                "state [{}, {}] is outside the safe region; use the supervisor",
                s.x0, s.xdot0
            ),
        ));
    }
    let safe = safe_range_with(s, &a, params);
    if safe.is_empty() {
        return Err(Error::precondition(
            "step_length_command",
            "safe step-length range is empty",
        ));
    }
    let conv = convergence_range(s - params.fixed_point(), params);
    let both = safe.intersect(&conv, IntervalKind::SafeConvergence);
    match both.midpoint() {
        Some(l) => Ok(l),
        None => {
            log::warn!("safe and convergence ranges do not overlap ({safe}, {conv}); keeping safety only");
            Ok(safe.midpoint().expect("nonempty"))
        }
    }
}

/// Admissible single-step durations for a state in `A`.
pub fn fixed_border_window(s: StepState, params: &GaitParams) -> Result<(f64, f64)> {
    let w = params.omega;
    let mh = params.friction_radius();
    let xcr = params.nominal_matrix().critical_velocity(mh);
    let c = s.orbital_energy(w);
    if c <= xcr * xcr - (w * mh).powi(2) {
        let t_slip = slip_time(s, params)?.ok_or_else(|| {
            Error::precondition("fixed_border_adjust", "trajectory never reaches the friction limit")
        })?;
        Ok((0.0, t_slip))
    } else {
        critical_window(s, params)
    }
}

/// Shorten the coming step so that it ends before slipping, with a step length
/// that returns the next initial state into `S`.
pub fn fixed_border_adjust(s: StepState, params: &GaitParams) -> Result<StepCommand> {
    let a = params.nominal_matrix();
    let report = classify_with(s, &a, params);
    if !report.in_a {
        return Err(Error::precondition(
            "fixed_border_adjust",
            format!("state [{}, {}] is not in the fixed-border region", s.x0, s.xdot0),
        ));
    }
    let (lo, hi) = fixed_border_window(s, params)?;
    let m = 0.05 * (hi - lo);
    let t = params.step_time.clamp(lo + m, hi - m);
    let end = flow_unchecked(s, t, params.omega);
    let range = return_length_range(end, params.step_time, params)?;
    let l = range.midpoint().ok_or(Error::EmptyReturnRange)?;
    Ok(StepCommand {
        step_length: l,
        step_time: t,
        mode: ControlMode::FixedBorder,
        target: GaitTarget::Primary,
    })
}

/// Pick a new desired step time that puts `s` inside its own safe region and
/// steer towards marching in place.
pub fn moving_border_adjust(s: StepState, params: &GaitParams, kappa: f64) -> Result<StepCommand> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::Config(format!("kappa must lie in (0, 1), got {kappa}")));
    }
    let a = params.nominal_matrix();
    let report = classify_with(s, &a, params);
    if !report.in_s0 {
        return Ok(StepCommand::unrecoverable(params));
    }
    if report.in_s {
        return Ok(StepCommand::nominal(params.step_length, params));
    }
    let t_slip = slip_time(s, params)?.ok_or_else(|| {
        Error::precondition("moving_border_adjust", "trajectory never reaches the friction limit")
    })?;
    let t_m = kappa * t_slip;
    let secondary = params.with_gait(0.0, t_m)?;
    let l = step_length_command(s, &secondary)?;
    Ok(StepCommand {
        step_length: l,
        step_time: t_m,
        mode: ControlMode::MovingBorder,
        target: GaitTarget::ZeroGait,
    })
}

/// Choose the command for the step starting at `s`.
///
/// While heading for the zero gait, the secondary step time is kept until the
/// state re-enters the primary safe region; the primary gait is then restored
/// on that very step.
pub fn supervise(
    s: StepState,
    state: SupervisorState,
    params: &GaitParams,
    config: &SupervisorConfig,
) -> Result<(StepCommand, SupervisorState)> {
    let a = params.nominal_matrix();
    let report = classify_with(s, &a, params);
    if !report.in_s0 {
        return Ok((StepCommand::unrecoverable(params), state));
    }

    if let (GaitTarget::ZeroGait, Some(t_m)) = (state.target, state.moving_border_time) {
        if report.in_s {
            let l = step_length_command(s, params)?;
            return Ok((StepCommand::nominal(l, params), SupervisorState::PRIMARY));
        }
        let secondary = params.with_gait(0.0, t_m)?;
        if classify_with(s, &secondary.nominal_matrix(), &secondary).in_s {
            let l = step_length_command(s, &secondary)?;
            let cmd = StepCommand {
                step_length: l,
                step_time: t_m,
                mode: ControlMode::MovingBorder,
                target: GaitTarget::ZeroGait,
            };
            return Ok((cmd, state));
        }
    }

    if report.in_s {
        let l = step_length_command(s, params)?;
        return Ok((StepCommand::nominal(l, params), SupervisorState::PRIMARY));
    }

    let fixed = match config.trigger {
        TriggerPolicy::RegionA => report.in_a,
        TriggerPolicy::MovingBorderOnly => false,
    };
    if fixed {
        match fixed_border_adjust(s, params) {
            Ok(cmd) => return Ok((cmd, SupervisorState::PRIMARY)),
            Err(Error::EmptyReturnRange) => {
                log::warn!(
                    "fixed-border return range empty at [{}, {}]; switching to moving border",
                    s.x0,
                    s.xdot0
                );
            }
            Err(e) => return Err(e),
        }
    }
    let cmd = moving_border_adjust(s, params, config.kappa)?;
    Ok((cmd, SupervisorState::zero_gait(cmd.step_time)))
}

/// Share a friction coefficient between the sagittal and lateral directions:
/// `(Cμ, √(1 − C²)μ)`.
pub fn friction_budget_split(mu: f64, c: f64) -> Result<(f64, f64)> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::domain(
            "friction_budget_split",
            format!("C must lie in (0, 1), got {c}"),
        ));
    }
    Ok((c * mu, (1.0 - c * c).sqrt() * mu))
}
