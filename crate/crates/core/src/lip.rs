//! Centroidal linear-inverted-pendulum (LIP) model of sagittal walking.
//!
//! During single support the horizontal CoM offset `x` (CoM minus CoP) obeys
//! `ẍ = ω² x` with `ω = √(g/h)`. Double support is instantaneous: the CoP jumps
//! forward by the step length `L` while the velocity is kept. Chaining the two
//! gives the step-to-step map `x₀ⁱ⁺¹ = A(T) x₀ⁱ + b L` with `b = [-1, 0]ᵀ`.

use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gravity used when none is configured. 9.8 (rather than 9.81) reproduces the
/// periodic gait `[-0.2 m, 1.1274 m/s]` for `L* = T* = 0.4`, `h = 1`.
pub const DEFAULT_GRAVITY: f64 = 9.8;

/// Footstep-initial CoM state relative to the stance CoP.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepState {
    /// Horizontal CoM offset from the CoP, meters.
    pub x0: f64,
    /// Horizontal CoM velocity, m/s.
    pub xdot0: f64,
}

impl StepState {
    pub const ORIGIN: StepState = StepState { x0: 0.0, xdot0: 0.0 };

    pub const fn new(x0: f64, xdot0: f64) -> Self {
        Self { x0, xdot0 }
    }

    pub fn norm(&self) -> f64 {
        self.x0.hypot(self.xdot0)
    }

    pub fn is_finite(&self) -> bool {
        self.x0.is_finite() && self.xdot0.is_finite()
    }

    /// `ẋ² − ω²x²`, the quantity conserved along single-support flow.
    pub fn orbital_energy(&self, omega: f64) -> f64 {
        self.xdot0 * self.xdot0 - omega * omega * self.x0 * self.x0
    }
}

impl Add for StepState {
    type Output = StepState;
    fn add(self, rhs: StepState) -> StepState {
        StepState::new(self.x0 + rhs.x0, self.xdot0 + rhs.xdot0)
    }
}

impl Sub for StepState {
    type Output = StepState;
    fn sub(self, rhs: StepState) -> StepState {
        StepState::new(self.x0 - rhs.x0, self.xdot0 - rhs.xdot0)
    }
}

/// Nominal gait and environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaitParams {
    /// Gravity, m/s².
    pub g: f64,
    /// CoM height, m.
    pub h: f64,
    /// `√(g/h)`, 1/s. Always derived, never set directly.
    pub omega: f64,
    /// Static friction coefficient.
    pub mu: f64,
    /// Total mass, kg.
    pub mass: f64,
    /// Desired step length `L*`, m. May be negative (backward walking) or zero.
    pub step_length: f64,
    /// Desired step time `T*`, s.
    pub step_time: f64,
}

fn positive(field: &'static str, value: f64) -> Result<f64> {
    if !value.is_finite() {
        return Err(Error::NonFinite { field, value });
    }
    if value <= 0.0 {
        return Err(Error::NonPositive { field, value });
    }
    Ok(value)
}

impl GaitParams {
    pub fn new(
        g: f64,
        h: f64,
        mu: f64,
        mass: f64,
        step_length: f64,
        step_time: f64,
    ) -> Result<Self> {
        let g = positive("g", g)?;
        let h = positive("h", h)?;
        let mu = positive("mu", mu)?;
        let mass = positive("mass", mass)?;
        let step_time = positive("T_star", step_time)?;
        if !step_length.is_finite() {
            return Err(Error::NonFinite {
                field: "L_star",
                value: step_length,
            });
        }
        Ok(Self {
            g,
            h,
            omega: (g / h).sqrt(),
            mu,
            mass,
            step_length,
            step_time,
        })
    }

    /// Same environment, different nominal gait.
    pub fn with_gait(&self, step_length: f64, step_time: f64) -> Result<Self> {
        Self::new(self.g, self.h, self.mu, self.mass, step_length, step_time)
    }

    pub fn with_height(&self, h: f64) -> Result<Self> {
        Self::new(self.g, h, self.mu, self.mass, self.step_length, self.step_time)
    }

    pub fn with_friction(&self, mu: f64) -> Result<Self> {
        Self::new(self.g, self.h, mu, self.mass, self.step_length, self.step_time)
    }

    /// `μh`: the largest CoM–CoP offset the surface can hold without slipping.
    pub fn friction_radius(&self) -> f64 {
        self.mu * self.h
    }

    /// Transition matrix at the nominal step time.
    pub fn nominal_matrix(&self) -> StepMatrix {
        StepMatrix::from_exp(self.step_time, self.omega)
    }

    /// Periodic initial state of the nominal gait.
    pub fn fixed_point(&self) -> StepState {
        fixed_point_unchecked(self.step_length, self.step_time, self.omega)
    }
}

/// Build and validate a [`GaitParams`]; `ω` is derived from `g` and `h`.
pub fn make_params(
    g: f64,
    h: f64,
    mu: f64,
    mass: f64,
    step_length: f64,
    step_time: f64,
) -> Result<GaitParams> {
    GaitParams::new(g, h, mu, mass, step_length, step_time)
}

/// Single-support transition matrix `A(T)`.
///
/// All four entries are positive, `a11 == a22` and `a11² − a12·a21 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMatrix {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl StepMatrix {
    /// The exponential form, evaluated literally. Callers guarantee `t > 0`.
    pub(crate) fn from_exp(t: f64, omega: f64) -> Self {
        let ep = (omega * t).exp();
        let em = (-omega * t).exp();
        let c = 0.5 * (ep + em);
        let s = 0.5 * (ep - em);
        Self {
            a11: c,
            a12: s / omega,
            a21: omega * s,
            a22: c,
        }
    }

    pub fn apply(&self, s: StepState) -> StepState {
        StepState::new(
            self.a11 * s.x0 + self.a12 * s.xdot0,
            self.a21 * s.x0 + self.a22 * s.xdot0,
        )
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn determinant(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    /// Real eigenvalues `(small, large)` from the characteristic polynomial.
    ///
    /// The small root is recovered as `det / large` to avoid cancellation, so
    /// its accuracy is bounded by that of the determinant.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let half_tr = 0.5 * self.trace();
        let disc = (0.5 * (self.a11 - self.a22)).powi(2) + self.a12 * self.a21;
        let large = half_tr + disc.sqrt();
        (self.determinant() / large, large)
    }

    /// Critical velocity `(a11 + 1)/a12 · μh`: the largest `|ẋ|` for which a
    /// step length can still place the next initial state in the safe region.
    pub fn critical_velocity(&self, friction_radius: f64) -> f64 {
        (self.a11 + 1.0) / self.a12 * friction_radius
    }
}

/// Closed-form single-support solution at time `t ≥ 0`.
pub fn flow(s: StepState, t: f64, omega: f64) -> Result<StepState> {
    check_omega("flow", omega)?;
    if !(t >= 0.0) {
        return Err(Error::domain("flow", format!("time must be non-negative, got {t}")));
    }
    if t == 0.0 {
        return Ok(s);
    }
    Ok(flow_unchecked(s, t, omega))
}

#[inline]
pub(crate) fn flow_unchecked(s: StepState, t: f64, omega: f64) -> StepState {
    let ep = (omega * t).exp();
    let em = 1.0 / ep;
    let c = 0.5 * (ep + em);
    let sh = 0.5 * (ep - em);
    StepState::new(
        c * s.x0 + sh / omega * s.xdot0,
        omega * sh * s.x0 + c * s.xdot0,
    )
}

fn check_omega(op: &'static str, omega: f64) -> Result<()> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::domain(op, format!("omega must be positive and finite, got {omega}")));
    }
    Ok(())
}

pub fn transition_matrix(t: f64, omega: f64) -> Result<StepMatrix> {
    check_omega("transition_matrix", omega)?;
    if !(t > 0.0) {
        return Err(Error::domain(
            "transition_matrix",
            format!("step time must be positive, got {t}"),
        ));
    }
    Ok(StepMatrix::from_exp(t, omega))
}

/// Step-to-step map: flow for `step_time`, then shift the CoP by `step_length`.
pub fn step_map(s: StepState, step_length: f64, step_time: f64, omega: f64) -> Result<StepState> {
    let a = transition_matrix(step_time, omega)?;
    let end = a.apply(s);
    Ok(StepState::new(end.x0 - step_length, end.xdot0))
}

/// Initial state of the periodic gait with step length `L*` and time `T*`.
pub fn fixed_point(step_length: f64, step_time: f64, omega: f64) -> Result<StepState> {
    if !(step_time > 0.0) {
        return Err(Error::domain(
            "fixed_point",
            format!("step time must be positive, got {step_time}"),
        ));
    }
    Ok(fixed_point_unchecked(step_length, step_time, omega))
}

fn fixed_point_unchecked(step_length: f64, step_time: f64, omega: f64) -> StepState {
    let e = (omega * step_time).exp();
    let half = 0.5 * step_length;
    StepState::new(-half, half * omega * (e + 1.0) / (e - 1.0))
}

/// Horizontal impulse at the CoM: instantaneous velocity jump `impulse/mass`.
pub fn apply_push(s: StepState, impulse: f64, mass: f64) -> Result<StepState> {
    positive("mass", mass)?;
    if !impulse.is_finite() {
        return Err(Error::NonFinite {
            field: "impulse",
            value: impulse,
        });
    }
    Ok(StepState::new(s.x0, s.xdot0 + impulse / mass))
}
