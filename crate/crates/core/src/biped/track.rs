//! Computed-torque tracking of a planned step and its fixed-step RK4 rollout.

use serde::{Deserialize, Serialize};

use super::dynamics::Contact;
use super::kinematics::{Biped, Joints};
use super::plan::QuinticPlan;
use crate::error::{Error, Result};

/// PD gains of the outer loop; `ë + K_d ė + K_p e = 0` in closed loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Gains {
    pub kp: f64,
    pub kd: f64,
}

impl Default for Gains {
    fn default() -> Self {
        Self { kp: 400.0, kd: 40.0 }
    }
}

impl Gains {
    pub fn validate(&self) -> Result<()> {
        if !(self.kp >= 0.0 && self.kd >= 0.0 && self.kp.is_finite() && self.kd.is_finite()) {
            return Err(Error::Config(format!(
                "gains must be finite and non-negative, got kp = {}, kd = {}",
                self.kp, self.kd
            )));
        }
        Ok(())
    }
}

/// `τ = M(q)(q̈_d + K_d ė + K_p e) + b(q, q̇) − G(q)`.
pub fn computed_torque(biped: &Biped, plan: &QuinticPlan, gains: &Gains, t: f64, q: &Joints, qd: &Joints) -> Joints {
    let (q_des, qd_des, qdd_des) = plan.eval(t);
    let v = qdd_des + gains.kd * (qd_des - qd) + gains.kp * (q_des - q);
    biped.inverse_dynamics(q, qd, &v)
}

/// State, torque and ground reaction at one integration node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutSample {
    /// Time since the start of the step.
    pub t: f64,
    pub q: Joints,
    pub qd: Joints,
    pub tau: Joints,
    pub qdd: Joints,
    pub contact: Contact,
}

/// Integrate one step under computed torque with classical RK4 on
/// `ceil(T / max_dt)` equal intervals. Samples include both ends.
pub fn rollout(
    biped: &Biped,
    plan: &QuinticPlan,
    gains: &Gains,
    q0: &Joints,
    qd0: &Joints,
    max_dt: f64,
) -> Result<Vec<RolloutSample>> {
    gains.validate()?;
    if !(max_dt > 0.0 && max_dt.is_finite()) {
        return Err(Error::NonPositive { field: "dt", value: max_dt });
    }
    let duration = plan.duration;
    let n = ((duration / max_dt).ceil() as usize).max(1);
    let h = duration / n as f64;
    let field = |t: f64, q: &Joints, qd: &Joints| -> Result<(Joints, Joints)> {
        let tau = computed_torque(biped, plan, gains, t, q, qd);
        Ok((*qd, biped.dynamics(q, qd, &tau)?))
    };
    let sample = |t: f64, q: Joints, qd: Joints| -> Result<RolloutSample> {
        let tau = computed_torque(biped, plan, gains, t, &q, &qd);
        let qdd = biped.dynamics(&q, &qd, &tau)?;
        Ok(RolloutSample {
            t,
            q,
            qd,
            tau,
            qdd,
            contact: biped.contact(&q, &qd, &qdd),
        })
    };

    let (mut q, mut qd) = (*q0, *qd0);
    let mut out = Vec::with_capacity(n + 1);
    out.push(sample(0.0, q, qd)?);
    for k in 0..n {
        let t = k as f64 * h;
        let (k1q, k1v) = field(t, &q, &qd)?;
        let (k2q, k2v) = field(t + 0.5 * h, &(q + 0.5 * h * k1q), &(qd + 0.5 * h * k1v))?;
        let (k3q, k3v) = field(t + 0.5 * h, &(q + 0.5 * h * k2q), &(qd + 0.5 * h * k2v))?;
        let (k4q, k4v) = field(t + h, &(q + h * k3q), &(qd + h * k3v))?;
        q += h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
        qd += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        let t_next = if k + 1 == n { duration } else { (k + 1) as f64 * h };
        out.push(sample(t_next, q, qd)?);
    }
    Ok(out)
}

/// Largest joint tracking error over a rollout.
pub fn tracking_error(plan: &QuinticPlan, samples: &[RolloutSample]) -> f64 {
    samples
        .iter()
        .map(|s| (plan.eval(s.t).0 - s.q).amax())
        .fold(0.0, f64::max)
}
