//! Planar kinematics of the six-link biped.
//!
//! Absolute link angles (from the +x axis, counter-clockwise):
//!
//! | angle | link                           |
//! |-------|--------------------------------|
//! | θ₁    | stance shank, ankle → knee     |
//! | θ₂    | stance thigh, knee → hip       |
//! | θ₃    | torso, hip → head              |
//! | θ₄    | swing thigh, hip → knee        |
//! | θ₅    | swing shank, knee → ankle      |
//! | θ₆    | swing foot (0 = sole level)    |
//!
//! Generalized coordinates: `q₁ = θ₁`, `q₂ = θ₂ − θ₁` (stance knee, ≥ 0 when
//! bent forward), `q₃ = θ₄ − θ₂ + π` (inter-leg hip angle), `q₄ = θ₅ − θ₄`
//! (swing knee, ≤ 0 when bent forward), `q₅ = θ₆` (swing sole), `q₆ = θ₃`
//! (torso, π/2 upright).
//!
//! The stance sole point (below the ankle) is the origin; the stance foot is
//! flat and static.

use std::f64::consts::PI;

use nalgebra::{Matrix2x6, Matrix6, Vector2, Vector6};

use super::model::BipedModel;

pub type Joints = Vector6<f64>;

/// Angle slots: θ₁..θ₆ and the stance-foot angle φ (zero unless the foot is
/// released for the floating-base check).
pub(crate) const N_ANGLES: usize = 7;
pub(crate) const PHI: usize = 6;

/// `θ = S q + c₀`.
pub(crate) fn selection() -> Matrix6<f64> {
    #[rustfmt::skip]
    let s = Matrix6::new(
        1.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        1.0, 1.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 0.0, 1.0,
        1.0, 1.0, 1.0, 0.0, 0.0, 0.0,
        1.0, 1.0, 1.0, 1.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, 1.0, 0.0,
    );
    s
}

const OFFSET: [f64; 6] = [0.0, 0.0, 0.0, -PI, -PI, 0.0];

pub fn link_angles(q: &Joints) -> [f64; 6] {
    let t = selection() * q;
    std::array::from_fn(|i| t[i] + OFFSET[i])
}

pub fn joints_from_angles(theta: &[f64; 6]) -> Joints {
    Joints::new(
        theta[0],
        theta[1] - theta[0],
        theta[3] - theta[1] + PI,
        theta[4] - theta[3],
        theta[5],
        theta[2],
    )
}

/// A point rigidly attached to the chain: `base + Σⱼ R(angleⱼ) cⱼ`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Chain {
    c: [Vector2<f64>; N_ANGLES],
}

impl Chain {
    fn zero() -> Self {
        Self {
            c: [Vector2::zeros(); N_ANGLES],
        }
    }

    fn with(mut self, slot: usize, v: Vector2<f64>) -> Self {
        self.c[slot] += v;
        self
    }

    fn along(self, slot: usize, len: f64) -> Self {
        self.with(slot, Vector2::new(len, 0.0))
    }

    /// Rotated link vectors for the current angles.
    pub(crate) fn terms(&self, rot: &Rotations) -> [Vector2<f64>; N_ANGLES] {
        std::array::from_fn(|j| rot.apply(j, &self.c[j]))
    }
}

/// Cosines and sines of all angle slots.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Rotations {
    cs: [(f64, f64); N_ANGLES],
}

impl Rotations {
    pub(crate) fn new(theta: &[f64; 6], phi: f64) -> Self {
        let mut cs = [(1.0, 0.0); N_ANGLES];
        for (k, t) in theta.iter().enumerate() {
            cs[k] = (t.cos(), t.sin());
        }
        cs[PHI] = (phi.cos(), phi.sin());
        Self { cs }
    }

    fn apply(&self, j: usize, v: &Vector2<f64>) -> Vector2<f64> {
        let (c, s) = self.cs[j];
        Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y)
    }
}

#[inline]
pub(crate) fn perp(v: &Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-v.y, v.x)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Body {
    pub mass: f64,
    pub inertia: f64,
    /// Angle slot the body rotates with.
    pub slot: usize,
    pub chain: Chain,
}

/// Model plus precomputed geometry; all dynamics live on this type.
#[derive(Debug, Clone)]
pub struct Biped {
    pub model: BipedModel,
    pub(crate) bodies: [Body; 7],
    pub(crate) hip: Chain,
    pub(crate) stance_knee: Chain,
    pub(crate) swing_knee: Chain,
    pub(crate) swing_ankle: Chain,
    pub(crate) swing_sole: Chain,
    pub(crate) torso_mid: Chain,
    pub(crate) total_mass: f64,
    pub(crate) ankle: Vector2<f64>,
    pub(crate) s: Matrix6<f64>,
}

/// Horizontal and vertical CoM position and velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComState {
    pub x: f64,
    pub y: f64,
    pub xdot: f64,
    pub ydot: f64,
}

impl Biped {
    pub fn new(model: BipedModel) -> crate::Result<Self> {
        model.validate()?;
        let (ls, lt) = (model.shank.length, model.thigh.length);
        let foot_com = Vector2::new(model.foot.com[0], model.foot.com[1]);
        let sole = Vector2::new(0.0, -model.ankle_height);

        let stance_knee = Chain::zero().along(0, ls);
        let hip = stance_knee.along(1, lt);
        let swing_knee = hip.along(3, lt);
        let swing_ankle = swing_knee.along(4, ls);
        let swing_sole = swing_ankle.with(5, sole);
        let torso_mid = hip.along(2, 0.5 * model.torso.length);

        let link = |mass, inertia, slot, chain| Body {
            mass,
            inertia,
            slot,
            chain,
        };
        let (sh, th, to, ft) = (model.shank, model.thigh, model.torso, model.foot);
        let bodies = [
            link(sh.mass, sh.inertia, 0, Chain::zero().along(0, ls - sh.com)),
            link(th.mass, th.inertia, 1, stance_knee.along(1, lt - th.com)),
            link(to.mass, to.inertia, 2, hip.along(2, to.com)),
            link(th.mass, th.inertia, 3, hip.along(3, th.com)),
            link(sh.mass, sh.inertia, 4, swing_knee.along(4, sh.com)),
            link(ft.mass, ft.inertia, 5, swing_ankle.with(5, foot_com)),
            link(ft.mass, ft.inertia, PHI, Chain::zero().with(PHI, foot_com)),
        ];
        Ok(Self {
            total_mass: model.total_mass(),
            ankle: Vector2::new(0.0, model.ankle_height),
            model,
            bodies,
            hip,
            stance_knee,
            swing_knee,
            swing_ankle,
            swing_sole,
            torso_mid,
            s: selection(),
        })
    }

    pub fn nao_like() -> Self {
        Self::new(BipedModel::nao_like()).expect("bundled model is valid")
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub(crate) fn rotations(&self, q: &Joints) -> Rotations {
        Rotations::new(&link_angles(q), 0.0)
    }

    pub(crate) fn point(&self, chain: &Chain, rot: &Rotations) -> Vector2<f64> {
        self.ankle + chain.terms(rot).iter().sum::<Vector2<f64>>()
    }

    /// Jacobian of a chain point with respect to `q`.
    pub(crate) fn jacobian(&self, chain: &Chain, rot: &Rotations) -> Matrix2x6<f64> {
        let r = chain.terms(rot);
        let mut jt = Matrix2x6::zeros();
        for j in 0..6 {
            jt.set_column(j, &perp(&r[j]));
        }
        jt * self.s
    }

    /// `J̇ q̇` for a chain point: the velocity-product part of its acceleration.
    pub(crate) fn jdot_qdot(&self, chain: &Chain, rot: &Rotations, qd: &Joints) -> Vector2<f64> {
        let r = chain.terms(rot);
        let td = self.s * qd;
        let mut a = Vector2::zeros();
        for j in 0..6 {
            a -= td[j] * td[j] * r[j];
        }
        a
    }

    fn point_state(&self, chain: &Chain, q: &Joints, qd: &Joints) -> (Vector2<f64>, Vector2<f64>) {
        let rot = self.rotations(q);
        (self.point(chain, &rot), self.jacobian(chain, &rot) * qd)
    }

    pub fn hip(&self, q: &Joints) -> Vector2<f64> {
        self.point(&self.hip, &self.rotations(q))
    }

    pub fn stance_knee(&self, q: &Joints) -> Vector2<f64> {
        self.point(&self.stance_knee, &self.rotations(q))
    }

    pub fn swing_knee(&self, q: &Joints) -> Vector2<f64> {
        self.point(&self.swing_knee, &self.rotations(q))
    }

    pub fn swing_ankle(&self, q: &Joints) -> Vector2<f64> {
        self.point(&self.swing_ankle, &self.rotations(q))
    }

    /// Swing sole point (below the swing ankle): position and velocity.
    pub fn swing_sole(&self, q: &Joints, qd: &Joints) -> (Vector2<f64>, Vector2<f64>) {
        self.point_state(&self.swing_sole, q, qd)
    }

    /// Midpoint of the torso, where horizontal pushes are applied.
    pub fn torso_midpoint(&self, q: &Joints) -> Vector2<f64> {
        self.point(&self.torso_mid, &self.rotations(q))
    }

    /// Whole-body CoM, including the static stance foot.
    pub fn com_state(&self, q: &Joints, qd: &Joints) -> ComState {
        let rot = self.rotations(q);
        let mut p = Vector2::zeros();
        let mut v = Vector2::zeros();
        for b in &self.bodies {
            p += b.mass * self.point(&b.chain, &rot);
            if b.slot != PHI {
                v += b.mass * (self.jacobian(&b.chain, &rot) * qd);
            }
        }
        p /= self.total_mass;
        v /= self.total_mass;
        ComState {
            x: p.x,
            y: p.y,
            xdot: v.x,
            ydot: v.y,
        }
    }

    /// CoM acceleration for given joint accelerations.
    pub fn com_acceleration(&self, q: &Joints, qd: &Joints, qdd: &Joints) -> Vector2<f64> {
        let rot = self.rotations(q);
        let mut a = Vector2::zeros();
        for b in self.bodies.iter().filter(|b| b.slot != PHI) {
            a += b.mass * (self.jacobian(&b.chain, &rot) * qdd + self.jdot_qdot(&b.chain, &rot, qd));
        }
        a / self.total_mass
    }

    /// CoM position Jacobian with respect to `q`.
    pub fn com_jacobian(&self, q: &Joints) -> Matrix2x6<f64> {
        let rot = self.rotations(q);
        let mut j = Matrix2x6::zeros();
        for b in self.bodies.iter().filter(|b| b.slot != PHI) {
            j += b.mass * self.jacobian(&b.chain, &rot);
        }
        j / self.total_mass
    }

    pub fn swing_sole_jacobian(&self, q: &Joints) -> Matrix2x6<f64> {
        self.jacobian(&self.swing_sole, &self.rotations(q))
    }

    /// Relabel after touchdown: the swing leg becomes the stance leg. Angles
    /// and rates of the new swing foot (the old stance foot) are zeroed.
    pub fn switch_legs(&self, q: &Joints, qd: &Joints) -> (Joints, Joints) {
        let th = link_angles(q);
        let td = self.s * qd;
        let new = [th[4] + PI, th[3] + PI, th[2], th[1] - PI, th[0] - PI, 0.0];
        let new_rates = [td[4], td[3], td[2], td[1], td[0], 0.0];
        let qn = joints_from_angles(&new);
        let s_inv = self.s.try_inverse().expect("selection matrix is invertible");
        let qdn = s_inv * Vector6::from_row_slice(&new_rates);
        (qn, qdn)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn standing() -> Joints {
        Joints::new(PI / 2.0 - 0.2, 0.4, 0.1, -0.3, 0.0, PI / 2.0)
    }

    #[test]
    fn angle_maps_invert() {
        let q = Joints::new(1.2, 0.3, -0.2, -0.4, 0.05, 1.5);
        let back = joints_from_angles(&link_angles(&q));
        assert!((back - q).norm() < 1e-14);
        assert_eq!(selection().determinant().abs(), 1.0);
    }

    #[test]
    fn upright_geometry() {
        let b = Biped::nao_like();
        let q = Joints::new(PI / 2.0, 0.0, 0.0, 0.0, 0.0, PI / 2.0);
        let hip = b.hip(&q);
        assert_relative_eq!(hip.x, 0.0, epsilon = 1e-15);
        assert_relative_eq!(hip.y, 0.245, epsilon = 1e-15);
        let (sole, _) = b.swing_sole(&q, &Joints::zeros());
        assert_relative_eq!(sole.x, 0.0, epsilon = 1e-15);
        assert_relative_eq!(sole.y, 0.0, epsilon = 1e-15);
        assert_relative_eq!(b.torso_midpoint(&q).y, 0.345, epsilon = 1e-15);
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let b = Biped::nao_like();
        let q = standing();
        let h = 1e-6;
        let jc = b.com_jacobian(&q);
        let js = b.swing_sole_jacobian(&q);
        for k in 0..6 {
            let mut qp = q;
            let mut qm = q;
            qp[k] += h;
            qm[k] -= h;
            let dc = (Vector2::new(b.com_state(&qp, &qp).x, b.com_state(&qp, &qp).y)
                - Vector2::new(b.com_state(&qm, &qm).x, b.com_state(&qm, &qm).y))
                / (2.0 * h);
            assert!((dc - jc.column(k)).norm() < 1e-8);
            let ds = (b.swing_sole(&qp, &qp).0 - b.swing_sole(&qm, &qm).0) / (2.0 * h);
            assert!((ds - js.column(k)).norm() < 1e-8);
        }
    }

    #[test]
    fn com_acceleration_matches_finite_differences() {
        let b = Biped::nao_like();
        let q = standing();
        let qd = Joints::new(0.3, -0.5, 0.8, 0.2, -0.1, 0.05);
        let qdd = Joints::new(1.0, -2.0, 0.5, 3.0, 0.2, -0.4);
        let h = 1e-5;
        let v = |t: f64| {
            let qt = q + qd * t + qdd * (0.5 * t * t);
            let qdt = qd + qdd * t;
            let c = b.com_state(&qt, &qdt);
            Vector2::new(c.xdot, c.ydot)
        };
        let fd = (v(h) - v(-h)) / (2.0 * h);
        assert!((fd - b.com_acceleration(&q, &qd, &qdd)).norm() < 1e-7);
    }

    #[test]
    fn leg_switch_is_an_involution_on_the_legs() {
        let b = Biped::nao_like();
        let q = Joints::new(1.4, 0.3, -0.2, -0.4, 0.0, 1.5);
        let qd = Joints::new(0.2, -0.1, 0.4, 0.3, 0.0, 0.1);
        let (q1, qd1) = b.switch_legs(&q, &qd);
        let (q2, qd2) = b.switch_legs(&q1, &qd1);
        assert!((q2 - q).norm() < 1e-12);
        assert!((qd2 - qd).norm() < 1e-12);
        // hip stays where it was relative to the new stance ankle
        let old_hip = b.hip(&q) - b.swing_ankle(&q);
        let new_hip = b.hip(&q1) - b.ankle;
        assert!((old_hip - new_hip).norm() < 1e-12);
    }
}
