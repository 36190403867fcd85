//! Friction geometry of a single LIP step.
//!
//! The stance foot holds as long as `|x(t)| < μh` over the whole step. Every
//! strict inequality below is evaluated against `μh − ε` with
//! `ε = 1e-9·max(1, μh)`, so states exactly on a border count as unsafe.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lip::{flow_unchecked, transition_matrix, GaitParams, StepMatrix, StepState};

/// Margin applied to every strict friction inequality.
pub fn margin(params: &GaitParams) -> f64 {
    1e-9 * params.friction_radius().max(1.0)
}

/// `μh − ε`, the effective bound on `|x|`.
pub fn effective_bound(params: &GaitParams) -> f64 {
    params.friction_radius() - margin(params)
}

/// Instantaneous friction demand `|x|/h`.
pub fn required_friction(x: f64, h: f64) -> f64 {
    x.abs() / h
}

/// Time and position of the turning point of `x(t)`, if it lies in the future.
///
/// The turning point exists when `|ẋ₀| < ω|x₀|`; it is reported only when
/// `x₀ẋ₀ < 0`, i.e. when the CoM is still heading towards the CoP. A state at
/// rest (`ẋ₀ = 0`) is its own turning point and reports nothing.
pub fn extremum(s: StepState, omega: f64) -> Option<(f64, f64)> {
    if !(s.x0 * s.xdot0 < 0.0) || !(s.xdot0.abs() < omega * s.x0.abs()) {
        return None;
    }
    let num = omega * s.x0 - s.xdot0;
    let den = omega * s.x0 + s.xdot0;
    let arg = num / den;
    if !(arg > 1.0) || !arg.is_finite() {
        return None;
    }
    let t_m = 0.5 / omega * arg.ln();
    Some((t_m, turning_position(s, omega)))
}

/// `x_m` with the sign of `x₀`; written so that `|x_m| ≤ |x₀|` holds exactly.
fn turning_position(s: StepState, omega: f64) -> f64 {
    let r = s.xdot0 / (omega * s.x0);
    s.x0 * (1.0 - r * r).max(0.0).sqrt()
}

/// Membership of a step-initial state in every region of the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionReport {
    /// No slip at the start of the step.
    pub in_s0: bool,
    /// The turning point (if any) does not slip.
    pub in_sm: bool,
    /// No slip at the end of the step.
    pub in_st: bool,
    /// The turning point falls inside `(0, T)`.
    pub in_rm: bool,
    pub in_s: bool,
    /// Subsequent-slipping region.
    pub in_d: bool,
    /// The part of `D` recoverable by shortening only the current step.
    pub in_a: bool,
    pub t_m: Option<f64>,
    pub x_m: Option<f64>,
    /// `x(T)` under the classifying step time.
    pub x_end: f64,
    /// `μh − |x₀|`; negative outside `S₀`.
    pub margin_s0: f64,
    /// `μh − |x(T)|`; negative outside `S_T`.
    pub margin_st: f64,
    pub critical_velocity: f64,
}

impl RegionReport {
    /// Distance (in `x`) to the nearest of the `S₀` and `S_T` borders.
    pub fn boundary_distance(&self) -> f64 {
        self.margin_s0.abs().min(self.margin_st.abs())
    }
}

/// Classify `s` for a step of duration `step_time`.
pub fn classify_state(s: StepState, step_time: f64, params: &GaitParams) -> Result<RegionReport> {
    let a = transition_matrix(step_time, params.omega)?;
    Ok(classify_with(s, &a, params))
}

pub(crate) fn classify_with(s: StepState, a: &StepMatrix, params: &GaitParams) -> RegionReport {
    let w = params.omega;
    let mh = params.friction_radius();
    let b = mh - margin(params);
    let x_end = a.a11 * s.x0 + a.a12 * s.xdot0;

    let in_s0 = s.x0.abs() < b;
    let in_st = x_end.abs() < b;
    let in_rm = s.xdot0 * (s.xdot0 + a.a21 / a.a22 * s.x0) < 0.0;
    let in_sm = s.xdot0.abs() < w * s.x0.abs() && turning_position(s, w).abs() < b;
    let xdot_cr = a.critical_velocity(mh);

    let (t_m, x_m) = if in_rm {
        match extremum(s, w) {
            Some((t, x)) => (Some(t), Some(x)),
            None => (None, None),
        }
    } else {
        (None, None)
    };

    let in_d = in_s0 && !in_st;
    let in_a = in_d && region_a_formula(s, w, xdot_cr);

    RegionReport {
        in_s0,
        in_sm,
        in_st,
        in_rm,
        in_s: in_s0 && in_st,
        in_d,
        in_a,
        t_m,
        x_m,
        x_end,
        margin_s0: mh - s.x0.abs(),
        margin_st: mh - x_end.abs(),
        critical_velocity: xdot_cr,
    }
}

/// The two-branch test defining `A` before intersecting with `D`.
fn region_a_formula(s: StepState, omega: f64, xdot_cr: f64) -> bool {
    let c = s.orbital_energy(omega);
    let cr2 = xdot_cr * xdot_cr;
    let xv = s.x0 * s.xdot0;
    (c < cr2 && xv < 0.0) || (s.xdot0 * s.xdot0 < cr2 && xv > 0.0)
}

/// `S` assembled case by case from the turning-point analysis:
/// `(S₀ ∩ S_T ∩ S_m ∩ R_m) ∪ (S₀ ∩ S_T ∩ R_mᶜ)`.
pub fn safe_by_cases(s: StepState, step_time: f64, params: &GaitParams) -> Result<bool> {
    let r = classify_state(s, step_time, params)?;
    let ext = r.in_s0 && r.in_st && r.in_sm && r.in_rm;
    let nxt = r.in_s0 && r.in_st && !r.in_rm;
    Ok(ext || nxt)
}

/// Dense-grid oracle for "no slip during the step": samples `|x(t)|` at
/// `n_grid + 1` uniform instants of `[0, T]` plus the analytic turning point.
pub fn brute_force_safe(
    s: StepState,
    step_time: f64,
    params: &GaitParams,
    n_grid: usize,
) -> Result<bool> {
    if n_grid < 1000 {
        return Err(Error::precondition(
            "brute_force_safe",
            format!("grid needs at least 1000 intervals, got {n_grid}"),
        ));
    }
    if !(step_time > 0.0) {
        return Err(Error::domain("brute_force_safe", "step time must be positive"));
    }
    let b = effective_bound(params);
    let w = params.omega;
    let mut peak = 0.0f64;
    for k in 0..=n_grid {
        let t = step_time * k as f64 / n_grid as f64;
        peak = peak.max(flow_unchecked(s, t, w).x0.abs());
    }
    if let Some((t_m, x_m)) = extremum(s, w) {
        if t_m < step_time {
            peak = peak.max(x_m.abs());
        }
    }
    Ok(peak < b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    Safe,
    Convergence,
    SafeConvergence,
    Return,
}

impl fmt::Display for IntervalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IntervalKind::Safe => "safe",
            IntervalKind::Convergence => "convergence",
            IntervalKind::SafeConvergence => "safe_convergence",
            IntervalKind::Return => "return",
        })
    }
}

/// Extent of a step-length range. Emptiness is explicit; a single admissible
/// value only arises for the convergence range at zero deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Span {
    Empty,
    Point(f64),
    Open { lower: f64, upper: f64 },
}

/// A range of step lengths, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthInterval {
    pub kind: IntervalKind,
    pub span: Span,
}

impl LengthInterval {
    /// `(lower, upper)`, empty unless `lower < upper`.
    pub fn open(kind: IntervalKind, lower: f64, upper: f64) -> Self {
        let span = if lower < upper {
            Span::Open { lower, upper }
        } else {
            Span::Empty
        };
        Self { kind, span }
    }

    pub fn point(kind: IntervalKind, value: f64) -> Self {
        Self {
            kind,
            span: Span::Point(value),
        }
    }

    pub fn empty(kind: IntervalKind) -> Self {
        Self {
            kind,
            span: Span::Empty,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self.span, Span::Empty)
    }

    pub fn lower(&self) -> Option<f64> {
        match self.span {
            Span::Empty => None,
            Span::Point(v) => Some(v),
            Span::Open { lower, .. } => Some(lower),
        }
    }

    pub fn upper(&self) -> Option<f64> {
        match self.span {
            Span::Empty => None,
            Span::Point(v) => Some(v),
            Span::Open { upper, .. } => Some(upper),
        }
    }

    pub fn midpoint(&self) -> Option<f64> {
        match self.span {
            Span::Empty => None,
            Span::Point(v) => Some(v),
            Span::Open { lower, upper } => Some(0.5 * (lower + upper)),
        }
    }

    pub fn width(&self) -> f64 {
        match self.span {
            Span::Open { lower, upper } => upper - lower,
            _ => 0.0,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        match self.span {
            Span::Empty => false,
            Span::Point(v) => v == value,
            Span::Open { lower, upper } => lower < value && value < upper,
        }
    }

    pub fn intersect(&self, other: &LengthInterval, kind: IntervalKind) -> LengthInterval {
        match (self.span, other.span) {
            (Span::Empty, _) | (_, Span::Empty) => LengthInterval::empty(kind),
            (Span::Point(v), _) if other.contains(v) => LengthInterval::point(kind, v),
            (_, Span::Point(v)) if self.contains(v) => LengthInterval::point(kind, v),
            (Span::Point(_), _) | (_, Span::Point(_)) => LengthInterval::empty(kind),
            (Span::Open { lower: l1, upper: u1 }, Span::Open { lower: l2, upper: u2 }) => {
                LengthInterval::open(kind, l1.max(l2), u1.min(u2))
            }
        }
    }
}

impl fmt::Display for LengthInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.span {
            Span::Empty => write!(f, "{} ∅", self.kind),
            Span::Point(v) => write!(f, "{} {{{v}}}", self.kind),
            Span::Open { lower, upper } => write!(f, "{} ({lower}, {upper})", self.kind),
        }
    }
}

/// Step lengths that put the next initial state in `S`, for a step of
/// duration `step_time` followed by another of the same duration.
pub fn safe_length_range(s: StepState, step_time: f64, params: &GaitParams) -> Result<LengthInterval> {
    let a = transition_matrix(step_time, params.omega)?;
    Ok(safe_range_with(s, &a, params))
}

pub(crate) fn safe_range_with(s: StepState, a: &StepMatrix, params: &GaitParams) -> LengthInterval {
    let b = effective_bound(params);
    let end = a.apply(s);
    // next x0 = x_T − L must lie in (−b, b)
    let (l0, u0) = (end.x0 - b, end.x0 + b);
    // next x_T = a11 (x_T − L) + a12 ẋ_T must lie in (−b, b)
    let centre = end.x0 + a.a12 / a.a11 * end.xdot0;
    let (lt, ut) = (centre - b / a.a11, centre + b / a.a11);
    LengthInterval::open(IntervalKind::Safe, l0.max(lt), u0.min(ut))
}

/// First instant `t > 0` at which `|x(t)| = μh`, or `None` if the CoM never
/// gets there.
pub fn slip_time(s: StepState, params: &GaitParams) -> Result<Option<f64>> {
    if !(s.x0.abs() < effective_bound(params)) {
        return Err(Error::precondition(
            "slip_time",
            format!(
                "immediate slippage state: |x0| = {} is not below mu*h = {}",
                s.x0.abs(),
                params.friction_radius()
            ),
        ));
    }
    Ok(slip_time_unchecked(s, params))
}

fn slip_time_unchecked(s: StepState, params: &GaitParams) -> Option<f64> {
    let w = params.omega;
    let p = s.xdot0 + w * s.x0;
    if p == 0.0 {
        return None;
    }
    let wmh = w * params.friction_radius();
    let disc = wmh * wmh + s.orbital_energy(w);
    if disc < 0.0 {
        return None;
    }
    let arg = (wmh + disc.sqrt()) / p.abs();
    if !(arg > 1.0) || !arg.is_finite() {
        return None;
    }
    Some(arg.ln() / w)
}

/// Interval `(T₁, T₂)` during which `|ẋ(t)| < ẋ_cr`, for states whose orbit
/// leaves the critical-velocity band before reaching `±μh`.
pub fn critical_window(s: StepState, params: &GaitParams) -> Result<(f64, f64)> {
    let w = params.omega;
    let a = params.nominal_matrix();
    let mh = params.friction_radius();
    let xcr = a.critical_velocity(mh);
    let c = s.orbital_energy(w);
    let cr2 = xcr * xcr;
    if !(c > cr2 - (w * mh).powi(2)) {
        return Err(Error::precondition(
            "critical_window",
            format!(
                "orbit stays below the critical velocity until slipping (c = {c}, threshold {})",
                cr2 - (w * mh).powi(2)
            ),
        ));
    }
    if c > cr2 * (1.0 + 1e-12) {
        return Err(Error::precondition(
            "critical_window",
            format!("speed never drops below the critical velocity (c = {c} > {cr2})"),
        ));
    }
    let p = (s.xdot0 + w * s.x0).abs();
    if p == 0.0 {
        return Err(Error::precondition("critical_window", "state lies on the stable manifold"));
    }
    let root = (cr2 - c).max(0.0).sqrt();
    let t1 = ((xcr - root) / p).max(1.0).ln() / w;
    let t2 = ((xcr + root) / p).ln() / w;
    Ok((t1, t2))
}

/// Step lengths that bring the state at the end of the current (shortened)
/// step back into `S`, where `S` is built from the nominal step time
/// `step_time_next` of the following step.
pub fn return_length_range(
    s_end: StepState,
    step_time_next: f64,
    params: &GaitParams,
) -> Result<LengthInterval> {
    let a = transition_matrix(step_time_next, params.omega)?;
    let b = effective_bound(params);
    let xr = b.min((b - a.a12 * s_end.xdot0) / a.a11);
    let xl = (-b).max((-b - a.a12 * s_end.xdot0) / a.a11);
    if !(xl < xr) {
        return Ok(LengthInterval::empty(IntervalKind::Return));
    }
    Ok(LengthInterval::open(
        IntervalKind::Return,
        s_end.x0 - xr,
        s_end.x0 - xl,
    ))
}

/// One vertex of a region border, ready for CSV export.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub region: &'static str,
    pub branch: &'static str,
    pub x: f64,
    pub xdot: f64,
}

/// Borders of `S`, `D`, `A` and the `±μh`, `±ẋ_cr` guide lines for a step of
/// duration `step_time`. Curved borders get `n_points` vertices; the plot
/// window spans `|ẋ| ≤ 2ẋ_cr`.
pub fn region_boundaries(
    params: &GaitParams,
    step_time: f64,
    n_points: usize,
) -> Result<Vec<BoundaryPoint>> {
    if n_points < 2 {
        return Err(Error::Config(format!(
            "boundary export needs at least 2 points per curve, got {n_points}"
        )));
    }
    let a = transition_matrix(step_time, params.omega)?;
    let w = params.omega;
    let mh = params.friction_radius();
    let xcr = a.critical_velocity(mh);
    let vmax = 2.0 * xcr;
    let st_upper = |x: f64| (mh - a.a11 * x) / a.a12;
    let st_lower = |x: f64| (-mh - a.a11 * x) / a.a12;
    let grid = |lo: f64, hi: f64| {
        (0..n_points).map(move |k| lo + (hi - lo) * k as f64 / (n_points - 1) as f64)
    };

    let mut out = Vec::new();
    let mut push = |region, branch, x: f64, xdot: f64| {
        out.push(BoundaryPoint {
            region,
            branch,
            x,
            xdot,
        })
    };

    // S = S0 ∩ ST: a parallelogram
    let corners = [
        (-mh, st_lower(-mh)),
        (-mh, st_upper(-mh)),
        (mh, st_upper(mh)),
        (mh, st_lower(mh)),
        (-mh, st_lower(-mh)),
    ];
    for (x, v) in corners {
        push("S", "border", x, v);
    }

    // D: the parts of the S0 strip above and below ST
    for (x, v) in [
        (-mh, st_upper(-mh)),
        (mh, st_upper(mh)),
        (mh, vmax),
        (-mh, vmax),
        (-mh, st_upper(-mh)),
    ] {
        push("D", "upper", x, v);
    }
    for (x, v) in [
        (mh, st_lower(mh)),
        (-mh, st_lower(-mh)),
        (-mh, -vmax),
        (mh, -vmax),
        (mh, st_lower(mh)),
    ] {
        push("D", "lower", x, v);
    }

    // A: between ST and the recoverability cap, mirrored for the lower part
    let cap = |x: f64| {
        if x < 0.0 {
            (xcr * xcr + w * w * x * x).sqrt().min(vmax)
        } else {
            xcr
        }
    };
    let mut upper: Vec<(f64, f64)> = grid(-mh, mh).map(|x| (x, st_upper(x))).collect();
    let mut top: Vec<(f64, f64)> = grid(-mh, mh).map(|x| (x, cap(x))).collect();
    top.reverse();
    upper.append(&mut top);
    upper.push(upper[0]);
    for &(x, v) in &upper {
        push("A", "upper", x, v);
    }
    for &(x, v) in &upper {
        push("A", "lower", -x, -v);
    }

    for (branch, x) in [("minus", -mh), ("plus", mh)] {
        push("mu_h", branch, x, -vmax);
        push("mu_h", branch, x, vmax);
    }
    for (branch, v) in [("minus", -xcr), ("plus", xcr)] {
        push("xdot_cr", branch, -2.0 * mh, v);
        push("xdot_cr", branch, 2.0 * mh, v);
    }
    Ok(out)
}

/// Write boundary points as CSV with header `region,branch,x,xdot`.
pub fn write_boundaries_csv<W: Write>(points: &[BoundaryPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "region,branch,x,xdot")?;
    for p in points {
        writeln!(out, "{},{},{},{}", p.region, p.branch, p.x, p.xdot)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lip::{make_params, step_map};
    use approx::assert_relative_eq;

    fn params(mu: f64) -> GaitParams {
        make_params(9.8, 1.0, mu, 50.0, 0.4, 0.4).unwrap()
    }

    fn bisect(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let flo = f(lo);
        assert!(flo * f(hi) <= 0.0, "no sign change");
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) * flo > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn required_friction_examples() {
        assert_eq!(required_friction(0.21, 1.0), 0.21);
        assert_eq!(required_friction(0.0, 1.0), 0.0);
        assert!((required_friction(0.21, 1.3) - 0.1615).abs() < 1e-4);
        assert_eq!(required_friction(-0.1, 0.5), 0.2);
    }

    #[test]
    fn extremum_reference_state() {
        let w = params(0.3).omega;
        let s = StepState::new(-0.2, 0.3);
        let (t_m, x_m) = extremum(s, w).unwrap();
        // high-precision reference values
        assert_relative_eq!(t_m, 0.16671165, max_relative = 1e-7);
        assert_relative_eq!(x_m, -0.17554580, max_relative = 1e-7);
        assert!(flow_unchecked(s, t_m, w).xdot0.abs() < 1e-9 * w * x_m.abs());

        // dense-grid minimum of |x(t)|
        let (mut best_t, mut best) = (0.0, f64::INFINITY);
        for k in 0..=400_000 {
            let t = 0.4 * k as f64 / 400_000.0;
            let x = flow_unchecked(s, t, w).x0.abs();
            if x < best {
                best = x;
                best_t = t;
            }
        }
        assert!((best_t - t_m).abs() < 1e-5);
        assert!((best - x_m.abs()).abs() < 1e-6);
    }

    #[test]
    fn extremum_absent_cases() {
        let w = params(0.3).omega;
        assert!(extremum(StepState::new(-0.2, 1.1274), w).is_none());
        assert!(extremum(StepState::new(0.15, 0.0), w).is_none());
        assert!(extremum(StepState::new(0.0, 0.0), w).is_none());
        // moving away from the CoP: the turning point is in the past
        assert!(extremum(StepState::new(0.2, 0.3), w).is_none());
    }

    #[test]
    fn classify_periodic_state() {
        let p = params(0.21);
        let r = classify_state(StepState::new(-0.2, 1.1274), 0.4, &p).unwrap();
        assert!(r.in_s0 && r.in_st && r.in_s);
        assert!(!r.in_rm && !r.in_d && !r.in_a);
        assert!((r.x_end - 0.2000130).abs() < 1e-6);
        assert!(r.t_m.is_none() && r.x_m.is_none());
    }

    #[test]
    fn classify_pushed_states() {
        let p = params(0.3);
        let r = classify_state(StepState::new(-0.2, 1.7274), 0.4, &p).unwrap();
        assert!(r.in_s0 && !r.in_st && r.in_d && r.in_a && !r.in_s);
        assert!((r.x_end - 0.50783792).abs() < 1e-7);
        assert!((r.critical_velocity - 1.69106188).abs() < 1e-7);

        let r = classify_state(StepState::new(-0.2, 2.0274), 0.4, &p).unwrap();
        assert!(r.in_d && !r.in_a);

        let r = classify_state(StepState::new(0.35, 0.0), 0.4, &p).unwrap();
        assert!(!r.in_s0 && !r.in_d && !r.in_s);
    }

    #[test]
    fn border_states_are_unsafe() {
        let p = params(0.3);
        let r = classify_state(StepState::new(0.3, -1.0), 0.4, &p).unwrap();
        assert!(!r.in_s0);
        let a = p.nominal_matrix();
        // exactly on the S_T border
        let s = StepState::new(0.0, 0.3 / a.a12);
        assert!(!classify_state(s, 0.4, &p).unwrap().in_st);
    }

    #[test]
    fn safe_range_reference_state() {
        let p = params(0.3);
        let s = StepState::new(-0.2, 1.3074);
        let r = safe_length_range(s, 0.4, &p).unwrap();
        assert_relative_eq!(r.lower().unwrap(), 0.53186547, max_relative = 1e-7);
        assert_relative_eq!(r.upper().unwrap(), 0.59236050, max_relative = 1e-7);
        for k in 1..100 {
            let l = r.lower().unwrap() + r.width() * k as f64 / 100.0;
            let next = step_map(s, l, 0.4, p.omega).unwrap();
            assert!(brute_force_safe(next, 0.4, &p, 2000).unwrap());
        }
        for l in [r.lower().unwrap() - 1e-4, r.upper().unwrap() + 1e-4] {
            let next = step_map(s, l, 0.4, p.omega).unwrap();
            assert!(!brute_force_safe(next, 0.4, &p, 2000).unwrap());
        }

        let r = safe_length_range(StepState::new(-0.2, 2.0274), 0.4, &p).unwrap();
        assert!(r.is_empty());

        let big = params(5.0);
        let r = safe_length_range(big.fixed_point(), 0.4, &big).unwrap();
        assert!(r.contains(0.4));
    }

    #[test]
    fn slip_time_examples() {
        let p = params(0.3);
        let s = StepState::new(-0.2, 2.0274);
        let t = slip_time(s, &p).unwrap().unwrap();
        assert!((t - 0.25198045).abs() < 1e-7);
        let oracle = bisect(|t| flow_unchecked(s, t, p.omega).x0.abs() - 0.3, 0.0, 0.4);
        assert!((t - oracle).abs() < 1e-9);

        assert_eq!(slip_time(StepState::ORIGIN, &p).unwrap(), None);

        let p21 = params(0.21);
        let s = StepState::new(-0.2, 1.1274);
        let t = slip_time(s, &p21).unwrap().unwrap();
        assert!((t - 0.40878995).abs() < 1e-7);
        assert!(t > 0.4 && t < 0.41);

        assert!(slip_time(StepState::new(0.31, 0.0), &p).is_err());
    }

    #[test]
    fn critical_window_examples() {
        let p = params(0.3);
        let s = StepState::new(-0.2, 1.7274);
        let (t1, t2) = critical_window(s, &p).unwrap();
        assert!((t1 - 0.02030774).abs() < 1e-7);
        assert!((t2 - 0.22227720).abs() < 1e-7);
        let xcr = p.nominal_matrix().critical_velocity(0.3);
        let f = |t| flow_unchecked(s, t, p.omega).xdot0.abs() - xcr;
        assert!((bisect(f, 0.0, 0.1) - t1).abs() < 1e-9);
        assert!((bisect(f, 0.1, 0.4) - t2).abs() < 1e-9);

        // speed grazes the critical value: window collapses
        let w = p.omega;
        let x0 = -0.1;
        let s = StepState::new(x0, (xcr * xcr + w * w * x0 * x0).sqrt());
        let (t1, t2) = critical_window(s, &p).unwrap();
        assert!((t1 - t2).abs() < 1e-6);

        // speed below critical at the start: T1 clamps to zero
        let s = StepState::new(-0.2, 1.6);
        let (t1, t2) = critical_window(s, &p).unwrap();
        assert_eq!(t1, 0.0);
        assert!(t2 > 0.0);

        assert!(critical_window(StepState::new(-0.2, 1.3074), &p).is_err());
    }

    #[test]
    fn return_range_examples() {
        let p = params(0.3);
        let a = p.nominal_matrix();
        let b = effective_bound(&p);
        let r = return_length_range(StepState::new(0.25, 0.0), 0.4, &p).unwrap();
        let xr = b * (1.0f64).min(1.0 / a.a11);
        assert_relative_eq!(r.lower().unwrap(), 0.25 - xr, max_relative = 1e-12);
        assert_relative_eq!(r.upper().unwrap(), 0.25 + xr, max_relative = 1e-12);

        let xcr = a.critical_velocity(0.3);
        let end = StepState::new(0.2, 0.9 * xcr);
        let r = return_length_range(end, 0.4, &p).unwrap();
        assert!(!r.is_empty());
        for k in 1..50 {
            let l = r.lower().unwrap() + r.width() * k as f64 / 50.0;
            let next = StepState::new(end.x0 - l, end.xdot0);
            assert!(classify_state(next, 0.4, &p).unwrap().in_s);
        }
        let end = StepState::new(0.2, 1.01 * xcr);
        assert!(return_length_range(end, 0.4, &p).unwrap().is_empty());
        for k in -2000..2000 {
            let l = k as f64 * 1e-3;
            let next = StepState::new(end.x0 - l, end.xdot0);
            assert!(!classify_state(next, 0.4, &p).unwrap().in_s);
        }
    }

    #[test]
    fn brute_force_examples() {
        let p = params(0.3);
        assert!(brute_force_safe(StepState::ORIGIN, 0.4, &p, 1000).unwrap());
        assert!(!brute_force_safe(StepState::new(0.303, 0.0), 0.4, &p, 1000).unwrap());
        assert!(brute_force_safe(StepState::ORIGIN, 0.4, &p, 10).is_err());
    }

    #[test]
    fn interval_algebra() {
        let a = LengthInterval::open(IntervalKind::Safe, 0.0, 1.0);
        let b = LengthInterval::open(IntervalKind::Convergence, 0.5, 2.0);
        let c = a.intersect(&b, IntervalKind::SafeConvergence);
        assert_eq!(c.span, Span::Open { lower: 0.5, upper: 1.0 });
        assert_eq!(c.midpoint(), Some(0.75));
        let p = LengthInterval::point(IntervalKind::Convergence, 0.4);
        assert_eq!(a.intersect(&p, IntervalKind::SafeConvergence).midpoint(), Some(0.4));
        let far = LengthInterval::point(IntervalKind::Convergence, 4.0);
        assert!(a.intersect(&far, IntervalKind::SafeConvergence).is_empty());
        assert!(LengthInterval::open(IntervalKind::Safe, 1.0, 1.0).is_empty());
        assert!(!a.contains(0.0) && a.contains(0.5));
    }

    #[test]
    fn boundary_export() {
        let p = params(0.21);
        let pts = region_boundaries(&p, 0.4, 50).unwrap();
        let s: Vec<_> = pts.iter().filter(|b| b.region == "S").collect();
        // the fixed point lies inside the S parallelogram
        let fp = p.fixed_point();
        let inside = s.windows(2).all(|e| {
            let (a, b) = (e[0], e[1]);
            (b.x - a.x) * (fp.xdot0 - a.xdot) - (b.xdot - a.xdot) * (fp.x0 - a.x) <= 0.0
        });
        assert!(inside);
        // S corners are border states, hence unsafe
        for c in &s {
            let r = classify_state(StepState::new(c.x, c.xdot), 0.4, &p).unwrap();
            assert!(!r.in_s);
        }
        assert!(region_boundaries(&p, 0.4, 0).is_err());
        let mut buf = Vec::new();
        write_boundaries_csv(&pts, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("region,branch,x,xdot\nS,border,"));
    }
}
