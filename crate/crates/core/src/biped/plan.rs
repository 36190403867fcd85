//! Per-step joint trajectory planning.
//!
//! Constraints 1–4, 6 and 7 pin the end position and velocity of every joint
//! (six position and six velocity equations in six unknowns each), so they
//! are eliminated exactly by an end-pose inverse kinematics solve. What is
//! left of the 24 polynomial coefficients are the joint accelerations at the
//! two ends; those are chosen by constrained Gauss-Newton on the discretized
//! index, subject to the two CoP equalities, the mid-step knee limits and
//! swing-sole clearance.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix4, Matrix6, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use super::kinematics::{Biped, Joints};
use crate::error::{Error, Result};
use crate::lip::{transition_matrix, GaitParams, StepState};

/// `q(t) = q₀ + q̇₀ t + c₁ t² + c₂ t³ + c₃ t⁴ + c₄ t⁵` on `[0, duration]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuinticPlan {
    pub q0: Joints,
    pub qdot0: Joints,
    pub c: [Joints; 4],
    pub duration: f64,
}

/// Coefficients of the quintic Hermite basis in τ ∈ [0, 1], τ² … τ⁵.
#[rustfmt::skip]
const HERMITE: [[f64; 4]; 6] = [
    // p0, v0, a0, a1, v1, p1
    [0.0, -10.0, 15.0, -6.0],
    [0.0, -6.0, 8.0, -3.0],
    [0.5, -1.5, 1.5, -0.5],
    [0.0, 0.5, -1.0, 0.5],
    [0.0, -4.0, 7.0, -3.0],
    [0.0, 10.0, -15.0, 6.0],
];

/// Boundary data of one joint trajectory: position, rate and acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundary {
    pub q: Joints,
    pub qd: Joints,
    pub qdd: Joints,
}

impl QuinticPlan {
    /// The unique quintic matching position, rate and acceleration at both ends.
    pub fn hermite(start: &Boundary, end: &Boundary, duration: f64) -> Self {
        let t = duration;
        let data = [
            start.q,
            start.qd * t,
            start.qdd * (t * t),
            end.qdd * (t * t),
            end.qd * t,
            end.q,
        ];
        let mut c = [Joints::zeros(); 4];
        for (k, ck) in c.iter_mut().enumerate() {
            for (row, d) in HERMITE.iter().zip(&data) {
                *ck += d * row[k];
            }
            *ck /= t.powi(k as i32 + 2);
        }
        Self {
            q0: start.q,
            qdot0: start.qd,
            c,
            duration,
        }
    }

    /// Minimum-jerk plan: zero joint accelerations at both ends.
    pub fn min_jerk(q0: Joints, qd0: Joints, q1: Joints, qd1: Joints, duration: f64) -> Self {
        let z = Joints::zeros();
        Self::hermite(
            &Boundary { q: q0, qd: qd0, qdd: z },
            &Boundary { q: q1, qd: qd1, qdd: z },
            duration,
        )
    }

    /// Position, rate and acceleration at time `t`.
    pub fn eval(&self, t: f64) -> (Joints, Joints, Joints) {
        let [c1, c2, c3, c4] = &self.c;
        let q = self.q0 + t * (self.qdot0 + t * (c1 + t * (c2 + t * (c3 + t * c4))));
        let qd = self.qdot0 + t * (2.0 * c1 + t * (3.0 * c2 + t * (4.0 * c3 + t * 5.0 * c4)));
        let qdd = 2.0 * c1 + t * (6.0 * c2 + t * (12.0 * c3 + t * 20.0 * c4));
        (q, qd, qdd)
    }

    pub fn end(&self) -> Boundary {
        let (q, qd, qdd) = self.eval(self.duration);
        Boundary { q, qd, qdd }
    }
}

/// Targets for the end-pose inverse kinematics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseTarget {
    pub sole: Vector2<f64>,
    pub com: Vector2<f64>,
    pub swing_foot: f64,
    pub torso: f64,
}

/// Rate targets matching [`PoseTarget`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateTarget {
    pub sole: Vector2<f64>,
    pub com: Vector2<f64>,
    pub swing_foot: f64,
    pub torso: f64,
}

/// Solve for a posture meeting `target` by damped Newton from `guess`. Only
/// the four leg joints are free; q₅ and q₆ are set directly.
pub fn solve_pose(biped: &Biped, target: &PoseTarget, guess: &Joints) -> Result<Joints> {
    let mut q = *guess;
    q[4] = target.swing_foot;
    q[5] = target.torso;
    let residual = |q: &Joints| {
        let (sole, _) = biped.swing_sole(q, &Joints::zeros());
        let com = biped.com_state(q, &Joints::zeros());
        Vector4::new(
            sole.x - target.sole.x,
            sole.y - target.sole.y,
            com.x - target.com.x,
            com.y - target.com.y,
        )
    };
    let mut r = residual(&q);
    for _ in 0..100 {
        if r.amax() < 1e-13 {
            return Ok(q);
        }
        let js = biped.swing_sole_jacobian(&q);
        let jc = biped.com_jacobian(&q);
        let mut j = Matrix4::zeros();
        for k in 0..4 {
            j[(0, k)] = js[(0, k)];
            j[(1, k)] = js[(1, k)];
            j[(2, k)] = jc[(0, k)];
            j[(3, k)] = jc[(1, k)];
        }
        let step = match j.lu().solve(&r) {
            Some(s) => s,
            None => (j.transpose() * j + Matrix4::identity() * 1e-8)
                .lu()
                .solve(&(j.transpose() * r))
                .ok_or_else(|| Error::NotConverged("pose solve: singular Jacobian".into()))?,
        };
        let scale = (0.2 / step.amax()).min(1.0);
        let mut alpha = scale;
        loop {
            let mut trial = q;
            for k in 0..4 {
                trial[k] -= alpha * step[k];
            }
            let rt = residual(&trial);
            if rt.norm() < r.norm() || alpha < 1e-6 {
                q = trial;
                r = rt;
                break;
            }
            alpha *= 0.5;
        }
    }
    if r.amax() < 1e-10 {
        return Ok(q);
    }
    Err(Error::NotConverged(format!(
        "pose solve residual {:.3e}",
        r.amax()
    )))
}

/// Joint rates realising `target` at posture `q`.
pub fn solve_rates(biped: &Biped, q: &Joints, target: &RateTarget) -> Result<Joints> {
    let js = biped.swing_sole_jacobian(q);
    let jc = biped.com_jacobian(q);
    let mut a = Matrix6::zeros();
    a.fixed_view_mut::<2, 6>(0, 0).copy_from(&js);
    a.fixed_view_mut::<2, 6>(2, 0).copy_from(&jc);
    a[(4, 4)] = 1.0;
    a[(5, 5)] = 1.0;
    let b = Joints::new(
        target.sole.x,
        target.sole.y,
        target.com.x,
        target.com.y,
        target.swing_foot,
        target.torso,
    );
    a.lu()
        .solve(&b)
        .ok_or_else(|| Error::NotConverged("rate solve: singular Jacobian".into()))
}

/// A bent-knee starting guess: stance leg leaning slightly back, swing leg
/// trailing.
pub fn posture_guess() -> Joints {
    Joints::new(PI / 2.0 - 0.25, 0.5, 0.1, -0.5, 0.0, PI / 2.0)
}

/// Initial posture and rates with the CoM at `s` (relative to the stance
/// sole) and height `h`, swing sole flat on the ground at `sole_x`.
pub fn initial_posture(biped: &Biped, s: StepState, h: f64, sole_x: f64) -> Result<(Joints, Joints)> {
    let target = PoseTarget {
        sole: Vector2::new(sole_x, 0.0),
        com: Vector2::new(s.x0, h),
        swing_foot: 0.0,
        torso: PI / 2.0,
    };
    let q = solve_pose(biped, &target, &posture_guess())?;
    let rates = RateTarget {
        sole: Vector2::zeros(),
        com: Vector2::new(s.xdot0, 0.0),
        swing_foot: 0.0,
        torso: 0.0,
    };
    let qd = solve_rates(biped, &q, &rates)?;
    Ok((q, qd))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Weight of the swing-sole height term.
    pub rho: f64,
    /// Apex of the desired swing-sole height profile.
    pub apex: f64,
    /// Quadrature nodes (odd, at least 3).
    pub nodes: usize,
    pub max_iterations: usize,
    /// Tolerance on the equality residuals.
    pub tolerance: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            rho: 100.0,
            apex: 0.02,
            nodes: 101,
            max_iterations: 60,
            tolerance: 1e-9,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::NonPositive { field: "rho", value: self.rho });
        }
        if !(self.apex >= 0.0 && self.apex.is_finite()) {
            return Err(Error::Config(format!("apex must be non-negative, got {}", self.apex)));
        }
        if self.nodes < 3 || self.nodes.is_multiple_of(2) {
            return Err(Error::Config(format!("nodes must be odd and at least 3, got {}", self.nodes)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::NonPositive { field: "tolerance", value: self.tolerance });
        }
        Ok(())
    }

    fn desired_height(&self, tau: f64) -> f64 {
        self.apex * (PI * tau).sin().powi(2)
    }
}

/// What the step has to achieve, in the current stance frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepTarget {
    pub step_length: f64,
    pub step_time: f64,
    /// Measured CoM state at the start of the step.
    pub initial: StepState,
}

/// Constraint residuals evaluated directly on a plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanResiduals {
    pub sole_position: [f64; 2],
    pub sole_velocity: [f64; 2],
    pub com_horizontal: [f64; 2],
    pub com_vertical: [f64; 2],
    pub cop: [f64; 2],
    pub swing_foot: [f64; 2],
    pub torso: [f64; 2],
    /// q₂ at T/2 and T (must be ≥ 0).
    pub stance_knee: [f64; 2],
    /// q₄ at T/2 and T (must be ≤ 0).
    pub swing_knee: [f64; 2],
    /// Lowest swing-sole height over the step.
    pub min_clearance: f64,
}

impl PlanResiduals {
    /// Largest absolute equality residual.
    pub fn max_equality(&self) -> f64 {
        [
            self.sole_position,
            self.sole_velocity,
            self.com_horizontal,
            self.com_vertical,
            self.cop,
            self.swing_foot,
            self.torso,
        ]
        .iter()
        .flatten()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn knees_ok(&self, tol: f64) -> bool {
        self.stance_knee.iter().all(|&v| v >= -tol) && self.swing_knee.iter().all(|&v| v <= tol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanReport {
    pub iterations: usize,
    /// Discretized index J.
    pub index: f64,
    /// Largest |ẍ − ω²x| over the quadrature nodes.
    pub lip_defect: f64,
    pub residuals: PlanResiduals,
}

/// Evaluate the residuals of all constraints for `plan`.
pub fn plan_residuals(
    biped: &Biped,
    plan: &QuinticPlan,
    target: &StepTarget,
    params: &GaitParams,
    samples: usize,
) -> Result<PlanResiduals> {
    let t_end = plan.duration;
    let end_state = transition_matrix(t_end, params.omega)?.apply(target.initial);
    let (q1, qd1, qdd1) = plan.eval(t_end);
    let (sole, sole_v) = biped.swing_sole(&q1, &qd1);
    let com = biped.com_state(&q1, &qd1);
    let (q0, qd0, qdd0) = plan.eval(0.0);
    let cop0 = biped.contact(&q0, &qd0, &qdd0).x_cop;
    let cop1 = biped.contact(&q1, &qd1, &qdd1).x_cop;
    let (qm, _, _) = plan.eval(0.5 * t_end);
    let min_clearance = (0..=samples.max(2))
        .map(|k| {
            let (q, _, _) = plan.eval(t_end * k as f64 / samples.max(2) as f64);
            biped.swing_sole(&q, &Joints::zeros()).0.y
        })
        .fold(f64::INFINITY, f64::min);
    Ok(PlanResiduals {
        sole_position: [sole.x - target.step_length, sole.y],
        sole_velocity: [sole_v.x, sole_v.y],
        com_horizontal: [com.x - end_state.x0, com.xdot - end_state.xdot0],
        com_vertical: [com.y - params.h, com.ydot],
        cop: [cop0, cop1],
        swing_foot: [q1[4], qd1[4]],
        torso: [q1[5] - PI / 2.0, qd1[5]],
        stance_knee: [qm[1], q1[1]],
        swing_knee: [qm[3], q1[3]],
        min_clearance,
    })
}

/// Composite Simpson weights on `n` (odd) nodes over [0, 1].
fn simpson_weights(n: usize) -> Vec<f64> {
    let h = 1.0 / (n - 1) as f64;
    (0..n)
        .map(|i| {
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect()
}

struct Problem<'a> {
    biped: &'a Biped,
    start: Boundary,
    end_q: Joints,
    end_qd: Joints,
    duration: f64,
    omega: f64,
    config: &'a PlannerConfig,
    weights: Vec<f64>,
}

struct Evaluation {
    /// Weighted residuals whose squared sum is the index.
    residual: DVector<f64>,
    lip_defect: f64,
    /// CoP at both ends.
    equality: DVector<f64>,
    /// Must be ≥ 0: q₂(T/2), −q₄(T/2), swing-sole height at interior nodes.
    inequality: DVector<f64>,
}

impl Problem<'_> {
    fn n_nodes(&self) -> usize {
        self.weights.len()
    }

    /// Unknowns: accelerations at both ends scaled by T².
    fn plan(&self, u: &DVector<f64>) -> QuinticPlan {
        let t2 = self.duration * self.duration;
        let a0 = Joints::from_iterator(u.rows(0, 6).iter().map(|v| v / t2));
        let a1 = Joints::from_iterator(u.rows(6, 6).iter().map(|v| v / t2));
        QuinticPlan::hermite(
            &Boundary {
                qdd: a0,
                ..self.start
            },
            &Boundary {
                q: self.end_q,
                qd: self.end_qd,
                qdd: a1,
            },
            self.duration,
        )
    }

    fn evaluate(&self, u: &DVector<f64>) -> Evaluation {
        let plan = self.plan(u);
        let n = self.n_nodes();
        let t_end = self.duration;
        let w2 = self.omega * self.omega;
        let mut residual = DVector::zeros(2 * n);
        let mut inequality = DVector::zeros(2 + n.saturating_sub(2));
        let mut lip_defect = 0.0_f64;
        for i in 0..n {
            let tau = i as f64 / (n - 1) as f64;
            let (q, qd, qdd) = plan.eval(tau * t_end);
            let com = self.biped.com_state(&q, &qd);
            let acc = self.biped.com_acceleration(&q, &qd, &qdd);
            let e = acc.x - w2 * com.x;
            lip_defect = lip_defect.max(e.abs());
            let (sole, _) = self.biped.swing_sole(&q, &qd);
            let w = (self.weights[i] * t_end).sqrt();
            residual[i] = w * e;
            residual[n + i] = w * self.config.rho.sqrt() * (sole.y - self.config.desired_height(tau));
            if i > 0 && i < n - 1 {
                inequality[1 + i] = sole.y;
            }
        }
        let (qm, _, _) = plan.eval(0.5 * t_end);
        inequality[0] = qm[1];
        inequality[1] = -qm[3];
        let end = plan.end();
        let equality = DVector::from_vec(vec![
            self.biped.contact(&self.start.q, &self.start.qd, &plan.eval(0.0).2).x_cop,
            self.biped.contact(&end.q, &end.qd, &end.qdd).x_cop,
        ]);
        Evaluation {
            residual,
            lip_defect,
            equality,
            inequality,
        }
    }

    fn jacobians(&self, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let base = self.evaluate(u);
        let mut jr = DMatrix::zeros(base.residual.len(), u.len());
        let mut je = DMatrix::zeros(base.equality.len(), u.len());
        let mut ji = DMatrix::zeros(base.inequality.len(), u.len());
        for k in 0..u.len() {
            let h = 1e-6 * (1.0 + u[k].abs());
            let mut up = u.clone();
            let mut um = u.clone();
            up[k] += h;
            um[k] -= h;
            let (p, m) = (self.evaluate(&up), self.evaluate(&um));
            jr.set_column(k, &((p.residual - m.residual) / (2.0 * h)));
            je.set_column(k, &((p.equality - m.equality) / (2.0 * h)));
            ji.set_column(k, &((p.inequality - m.inequality) / (2.0 * h)));
        }
        (jr, je, ji)
    }
}

/// min ½dᵀHd + gᵀd  s.t.  E d = e,  G d ≥ h, by a primal active-set loop.
/// Returns the step and the largest multiplier magnitude.
fn solve_qp(
    hess: &DMatrix<f64>,
    grad: &DVector<f64>,
    eq: (&DMatrix<f64>, &DVector<f64>),
    ineq: (&DMatrix<f64>, &DVector<f64>),
) -> Option<(DVector<f64>, f64)> {
    let n = grad.len();
    let mut active: Vec<usize> = Vec::new();
    for _ in 0..200 {
        let m = eq.0.nrows() + active.len();
        let mut kkt = DMatrix::zeros(n + m, n + m);
        let mut rhs = DVector::zeros(n + m);
        kkt.view_mut((0, 0), (n, n)).copy_from(hess);
        rhs.rows_mut(0, n).copy_from(&(-grad));
        let rows: Vec<(DVector<f64>, f64)> = (0..eq.0.nrows())
            .map(|r| (eq.0.row(r).transpose(), eq.1[r]))
            .chain(active.iter().map(|&r| (ineq.0.row(r).transpose(), ineq.1[r])))
            .collect();
        for (k, (a, b)) in rows.iter().enumerate() {
            for j in 0..n {
                kkt[(j, n + k)] = -a[j];
                kkt[(n + k, j)] = a[j];
            }
            rhs[n + k] = *b;
        }
        let sol = kkt.lu().solve(&rhs)?;
        let d = sol.rows(0, n).into_owned();
        let nu = sol.rows(n, m).into_owned();

        let violated = (0..ineq.0.nrows())
            .filter(|r| !active.contains(r))
            .map(|r| (r, ineq.0.row(r).dot(&d.transpose()) - ineq.1[r]))
            .filter(|&(_, slack)| slack < -1e-12)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((r, _)) = violated {
            if active.len() + eq.0.nrows() >= n {
                return None;
            }
            active.push(r);
            continue;
        }
        let ne = eq.0.nrows();
        let wrong = active
            .iter()
            .enumerate()
            .map(|(k, &r)| (k, r, nu[ne + k]))
            .filter(|&(_, _, l)| l < -1e-12)
            .min_by(|a, b| a.2.total_cmp(&b.2));
        if let Some((k, _, _)) = wrong {
            active.remove(k);
            continue;
        }
        let scale = nu.amax();
        return Some((d, scale));
    }
    None
}

/// Plan one step from `(q0, qd0)`. Sole, CoM, swing-foot and torso
/// conditions at touchdown hold through the end pose; the CoP endpoints,
/// knee limits and clearance hold through the optimized end accelerations.
pub fn plan_step(
    biped: &Biped,
    q0: &Joints,
    qd0: &Joints,
    target: &StepTarget,
    params: &GaitParams,
    config: &PlannerConfig,
) -> Result<(QuinticPlan, PlanReport)> {
    config.validate()?;
    let t_end = target.step_time;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::NonPositive { field: "step_time", value: t_end });
    }
    let end_state = transition_matrix(t_end, params.omega)?.apply(target.initial);
    let pose = PoseTarget {
        sole: Vector2::new(target.step_length, 0.0),
        com: Vector2::new(end_state.x0, params.h),
        swing_foot: 0.0,
        torso: PI / 2.0,
    };
    let end_q = end_pose(biped, &pose, q0)?;
    let end_qd = solve_rates(
        biped,
        &end_q,
        &RateTarget {
            sole: Vector2::zeros(),
            com: Vector2::new(end_state.xdot0, 0.0),
            swing_foot: 0.0,
            torso: 0.0,
        },
    )?;

    let problem = Problem {
        biped,
        start: Boundary {
            q: *q0,
            qd: *qd0,
            qdd: Joints::zeros(),
        },
        end_q,
        end_qd,
        duration: t_end,
        omega: params.omega,
        config,
        weights: simpson_weights(config.nodes),
    };

    let mut u = DVector::zeros(12);
    let mut cur = problem.evaluate(&u);
    let merit = |ev: &Evaluation, sigma: f64| {
        0.5 * ev.residual.norm_squared()
            + sigma
                * (ev.equality.abs().sum()
                    + ev.inequality.iter().map(|v| (-v).max(0.0)).sum::<f64>())
    };
    let violation = |ev: &Evaluation| {
        ev.equality
            .amax()
            .max(ev.inequality.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max))
    };
    let mut sigma = 10.0;
    let mut iterations = 0;
    let mut converged = false;
    let mut lambda = f64::NAN;
    'outer: while iterations < config.max_iterations {
        iterations += 1;
        let (jr, je, ji) = problem.jacobians(&u);
        let jtj = jr.transpose() * &jr;
        let grad = jr.transpose() * &cur.residual;
        if lambda.is_nan() {
            lambda = 1e-3 * jtj.diagonal().amax().max(1e-12);
        }
        // Levenberg-Marquardt: raise the damping until the step improves the merit.
        loop {
            let mut hess = jtj.clone();
            for k in 0..hess.nrows() {
                hess[(k, k)] += lambda;
            }
            let mut qp = solve_qp(&hess, &grad, (&je, &(-&cur.equality)), (&ji, &(-&cur.inequality)));
            if qp.is_none() {
                // linearized clearance can be inconsistent far from a solution; keep the knees only
                let (gk, hk) = (ji.rows(0, 2).into_owned(), -cur.inequality.rows(0, 2));
                qp = solve_qp(&hess, &grad, (&je, &(-&cur.equality)), (&gk, &hk));
            }
            if let Some((d, nu)) = qp {
                sigma = f64::max(sigma, 2.0 * nu);
                let trial = &u + &d;
                let ev = problem.evaluate(&trial);
                if merit(&ev, sigma) < merit(&cur, sigma) {
                    let f_old = cur.residual.norm_squared();
                    let f_new = ev.residual.norm_squared();
                    let step = d.amax();
                    u = trial;
                    cur = ev;
                    lambda = (lambda / 3.0).max(1e-14);
                    let small = step < 1e-9 * (1.0 + u.amax()) || f_old - f_new < 1e-12 * f_old;
                    if small && violation(&cur) < config.tolerance {
                        converged = true;
                        break 'outer;
                    }
                    break;
                }
            }
            lambda *= 10.0;
            if lambda > 1e12 * (1.0 + jtj.diagonal().amax()) {
                converged = violation(&cur) < config.tolerance;
                break 'outer;
            }
        }
    }
    if violation(&cur) >= config.tolerance {
        return Err(Error::PlannerFailed {
            iterations,
            residual: violation(&cur),
        });
    }
    if !converged {
        log::debug!("planner stopped after {iterations} iterations with a feasible plan");
    }
    let plan = problem.plan(&u);
    let residuals = plan_residuals(biped, &plan, target, params, 4 * config.nodes)?;
    if !residuals.knees_ok(config.tolerance) {
        return Err(Error::PlannerFailed {
            iterations,
            residual: residuals
                .stance_knee
                .iter()
                .map(|v| (-v).max(0.0))
                .chain(residuals.swing_knee.iter().map(|v| v.max(0.0)))
                .fold(0.0, f64::max),
        });
    }
    Ok((
        plan,
        PlanReport {
            iterations,
            index: cur.residual.norm_squared(),
            lip_defect: cur.lip_defect,
            residuals,
        },
    ))
}

/// End pose with bent knees, trying a few starting guesses.
fn end_pose(biped: &Biped, pose: &PoseTarget, q0: &Joints) -> Result<Joints> {
    let mirrored = {
        let (q, _) = biped.switch_legs(q0, &Joints::zeros());
        Joints::new(q[0], q[1].abs(), q[2], -q[3].abs(), 0.0, PI / 2.0)
    };
    let guesses = [
        *q0,
        Joints::new(PI - q0[0], q0[1], -q0[2], q0[3], 0.0, PI / 2.0),
        mirrored,
        posture_guess(),
    ];
    let mut last = None;
    for g in guesses {
        match solve_pose(biped, pose, &g) {
            Ok(q) if q[1] >= 0.0 && q[3] <= 0.0 => return Ok(q),
            Ok(_) => continue,
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::NotConverged("no bent-knee end pose found".into())))
}

/// Largest |ẍ − ω²x| of the CoM along a plan, on `n` uniform samples.
pub fn lip_defect(biped: &Biped, plan: &QuinticPlan, omega: f64, n: usize) -> f64 {
    (0..=n)
        .map(|k| {
            let (q, qd, qdd) = plan.eval(plan.duration * k as f64 / n as f64);
            let x = biped.com_state(&q, &qd).x;
            (biped.com_acceleration(&q, &qd, &qdd).x - omega * omega * x).abs()
        })
        .fold(0.0, f64::max)
}

/// Minimum-jerk plan to the same end state as `plan`.
pub fn min_jerk_baseline(plan: &QuinticPlan) -> QuinticPlan {
    let end = plan.end();
    QuinticPlan::min_jerk(plan.q0, plan.qdot0, end.q, end.qd, plan.duration)
}
