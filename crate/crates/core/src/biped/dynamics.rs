//! Single-support equations of motion `M(q) q̈ + b(q, q̇) = τ + G(q)`, ground
//! reaction, centre of pressure and the impulsive push map.

use nalgebra::{DMatrix, DVector, Matrix2x6, Matrix6, RowVector6, SMatrix, SVector, Vector2};

use super::kinematics::{perp, Biped, Joints, Rotations, PHI};
use crate::error::{Error, Result};

/// Ground reaction on the stance sole for one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    /// Tangential force f_s^x.
    pub fx: f64,
    /// Normal force f_n^y.
    pub fy: f64,
    /// Centre of pressure, relative to the stance ankle.
    pub x_cop: f64,
}

impl Contact {
    /// Required friction `|f_s^x| / f_n^y`; infinite on lift-off.
    pub fn mu_r(&self) -> f64 {
        if self.fy > 0.0 {
            self.fx.abs() / self.fy
        } else {
            f64::INFINITY
        }
    }

    pub fn lifted_off(&self) -> bool {
        self.fy <= 0.0
    }
}

struct BodyTerms {
    mass: f64,
    inertia: f64,
    slot: usize,
    j: Matrix2x6<f64>,
}

impl Biped {
    fn body_terms(&self, rot: &Rotations) -> Vec<BodyTerms> {
        self.bodies
            .iter()
            .filter(|b| b.slot != PHI)
            .map(|b| BodyTerms {
                mass: b.mass,
                inertia: b.inertia,
                slot: b.slot,
                j: self.jacobian(&b.chain, rot),
            })
            .collect()
    }

    fn angle_row(&self, slot: usize) -> RowVector6<f64> {
        self.s.row(slot).into_owned()
    }

    pub fn mass_matrix(&self, q: &Joints) -> Matrix6<f64> {
        let rot = self.rotations(q);
        let mut m = Matrix6::zeros();
        for b in self.body_terms(&rot) {
            let row = self.angle_row(b.slot);
            m += b.mass * b.j.transpose() * b.j + b.inertia * row.transpose() * row;
        }
        m
    }

    /// Velocity-product terms `b(q, q̇)`.
    pub fn bias(&self, q: &Joints, qd: &Joints) -> Joints {
        let rot = self.rotations(q);
        let mut out = Joints::zeros();
        for b in self.bodies.iter().filter(|b| b.slot != PHI) {
            let j = self.jacobian(&b.chain, &rot);
            out += b.mass * j.transpose() * self.jdot_qdot(&b.chain, &rot, qd);
        }
        out
    }

    /// Generalized gravity force `G(q)` (enters on the torque side).
    pub fn gravity_force(&self, q: &Joints) -> Joints {
        let rot = self.rotations(q);
        let g = Vector2::new(0.0, -self.model.gravity);
        let mut out = Joints::zeros();
        for b in self.body_terms(&rot) {
            out += b.mass * b.j.transpose() * g;
        }
        out
    }

    /// Forward dynamics.
    pub fn dynamics(&self, q: &Joints, qd: &Joints, tau: &Joints) -> Result<Joints> {
        let m = self.mass_matrix(q);
        let rhs = tau + self.gravity_force(q) - self.bias(q, qd);
        let chol = m.cholesky().ok_or(Error::SingularInertia(q.as_slice().try_into().unwrap()))?;
        Ok(chol.solve(&rhs))
    }

    /// Torques realising a given acceleration (inverse dynamics).
    pub fn inverse_dynamics(&self, q: &Joints, qd: &Joints, qdd: &Joints) -> Joints {
        self.mass_matrix(q) * qdd + self.bias(q, qd) - self.gravity_force(q)
    }

    /// Ground reaction and CoP for a given joint acceleration. The stance foot
    /// is static, so only the six moving links contribute inertial terms.
    pub fn contact(&self, q: &Joints, qd: &Joints, qdd: &Joints) -> Contact {
        let rot = self.rotations(q);
        let g = self.model.gravity;
        let tdd = self.s * qdd;
        let mut f = Vector2::new(0.0, self.total_mass * g);
        let mut moment = 0.0;
        let mut weight_arm = 0.0;
        for b in &self.bodies {
            let p = self.point(&b.chain, &rot);
            weight_arm += b.mass * p.x;
            if b.slot == PHI {
                continue;
            }
            let a = self.jacobian(&b.chain, &rot) * qdd + self.jdot_qdot(&b.chain, &rot, qd);
            f += b.mass * a;
            moment += b.mass * (p.x * a.y - p.y * a.x) + b.inertia * tdd[b.slot];
        }
        Contact {
            fx: f.x,
            fy: f.y,
            x_cop: (moment + g * weight_arm) / f.y,
        }
    }

    pub fn kinetic_energy(&self, q: &Joints, qd: &Joints) -> f64 {
        0.5 * qd.dot(&(self.mass_matrix(q) * qd))
    }

    pub fn potential_energy(&self, q: &Joints) -> f64 {
        let rot = self.rotations(q);
        let g = self.model.gravity;
        self.bodies
            .iter()
            .map(|b| b.mass * g * self.point(&b.chain, &rot).y)
            .sum()
    }

    pub fn energy(&self, q: &Joints, qd: &Joints) -> f64 {
        self.kinetic_energy(q, qd) + self.potential_energy(q)
    }

    /// Translational Jacobian of the torso midpoint.
    pub fn torso_midpoint_jacobian(&self, q: &Joints) -> Matrix2x6<f64> {
        self.jacobian(&self.torso_mid, &self.rotations(q))
    }

    /// Impulsive horizontal push at the torso midpoint with the stance foot
    /// held: `q̇⁺ = q̇⁻ + M⁻¹ Jᵀ [F̂, 0]`.
    pub fn impact(&self, q: &Joints, qd: &Joints, impulse: f64) -> Result<Joints> {
        let m = self.mass_matrix(q);
        let qhat = self.torso_midpoint_jacobian(q).transpose() * Vector2::new(impulse, 0.0);
        let chol = m.cholesky().ok_or(Error::SingularInertia(q.as_slice().try_into().unwrap()))?;
        Ok(qd + chol.solve(&qhat))
    }

    /// Floating-base view of the same robot: coordinates `(aₓ, a_y, φ, q)`
    /// with `a` the stance sole point and `φ` the stance foot angle, evaluated
    /// at `a = 0, φ = 0`. Returns the 9×9 inertia matrix and the 2×9
    /// Jacobian of the torso midpoint.
    pub fn floating_base(&self, q: &Joints) -> (SMatrix<f64, 9, 9>, SMatrix<f64, 2, 9>) {
        let rot = Rotations::new(&super::kinematics::link_angles(q), 0.0);
        let ankle = self.ankle;
        let lift = |chain_phi: Vector2<f64>, j: Matrix2x6<f64>| {
            let mut full = SMatrix::<f64, 2, 9>::zeros();
            full[(0, 0)] = 1.0;
            full[(1, 1)] = 1.0;
            full.set_column(2, &perp(&(ankle + chain_phi)));
            full.fixed_view_mut::<2, 6>(0, 3).copy_from(&j);
            full
        };
        let mut m = SMatrix::<f64, 9, 9>::zeros();
        for b in &self.bodies {
            let terms = b.chain.terms(&rot);
            let j = if b.slot == PHI {
                Matrix2x6::zeros()
            } else {
                self.jacobian(&b.chain, &rot)
            };
            let jf = lift(terms[PHI], j);
            m += b.mass * jf.transpose() * jf;
            let mut row = SMatrix::<f64, 1, 9>::zeros();
            if b.slot == PHI {
                row[2] = 1.0;
            } else {
                row.fixed_view_mut::<1, 6>(0, 3).copy_from(&self.angle_row(b.slot));
            }
            m += b.inertia * row.transpose() * row;
        }
        let jt = lift(Vector2::zeros(), self.torso_midpoint_jacobian(q));
        (m, jt)
    }
}

/// Momentum bookkeeping of a torso push, evaluated two ways.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactCheck {
    /// Horizontal momentum jump of the unconstrained (floating) robot.
    pub free_momentum_jump: f64,
    /// Horizontal momentum jump with the stance foot held.
    pub held_momentum_jump: f64,
    /// Horizontal ground impulse needed to hold the stance foot.
    pub ground_impulse: f64,
    /// Largest difference between the held KKT solution and the reduced map.
    pub reduced_map_error: f64,
}

/// Apply `impulse` at the torso midpoint of the floating-base model, once
/// free and once with the stance foot constrained, and report the linear
/// momentum bookkeeping.
pub fn impact_check(biped: &Biped, q: &Joints, qd: &Joints, impulse: f64) -> Result<ImpactCheck> {
    let (m9, jt) = biped.floating_base(q);
    let qhat: SVector<f64, 9> = jt.transpose() * Vector2::new(impulse, 0.0);
    let momentum_x = |dv: &SVector<f64, 9>| (m9 * dv)[0];

    let chol = m9
        .cholesky()
        .ok_or(Error::SingularInertia(q.as_slice().try_into().unwrap()))?;
    let free = chol.solve(&qhat);

    let mut kkt = DMatrix::<f64>::zeros(12, 12);
    kkt.view_mut((0, 0), (9, 9)).copy_from(&m9);
    for k in 0..3 {
        kkt[(k, 9 + k)] = -1.0;
        kkt[(9 + k, k)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(12);
    rhs.rows_mut(0, 9).copy_from(&qhat);
    let sol = kkt
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::domain("impact_check", "singular contact system"))?;
    let held = SVector::<f64, 9>::from_iterator(sol.rows(0, 9).iter().copied());
    let reduced = biped.impact(q, qd, impulse)? - qd;
    let err = (held.fixed_rows::<6>(3) - reduced).amax();
    // the a-rows of M₉ q̇ are the total linear momentum
    Ok(ImpactCheck {
        free_momentum_jump: momentum_x(&free),
        held_momentum_jump: momentum_x(&held),
        ground_impulse: sol[9],
        reduced_map_error: err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_q(rng: &mut ChaCha8Rng) -> Joints {
        Joints::new(
            rng.gen_range(1.0..2.1),
            rng.gen_range(0.0..1.2),
            rng.gen_range(-0.8..0.8),
            rng.gen_range(-1.2..0.0),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(1.0..2.1),
        )
    }

    fn posture() -> Joints {
        Joints::new(PI / 2.0 - 0.2, 0.4, 0.1, -0.3, 0.05, PI / 2.0 + 0.1)
    }

    #[test]
    fn mass_matrix_symmetric_positive_definite() {
        let b = Biped::nao_like();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let m = b.mass_matrix(&random_q(&mut rng));
            assert!((m - m.transpose()).amax() < 1e-12);
            assert!(m.symmetric_eigenvalues().min() > 0.0);
        }
    }

    #[test]
    fn static_balance() {
        let b = Biped::nao_like();
        let q = posture();
        let z = Joints::zeros();
        let tau = -b.gravity_force(&q);
        let qdd = b.dynamics(&q, &z, &tau).unwrap();
        assert!(qdd.amax() < 1e-10);
        let c = b.contact(&q, &z, &qdd);
        let com = b.com_state(&q, &z);
        assert!((c.x_cop - com.x).abs() < 1e-10);
        assert!((c.fy - 5.0 * 9.8).abs() < 1e-9);
        assert!(c.fx.abs() < 1e-9);
    }

    #[test]
    fn bias_matches_lagrangian() {
        // b = Ṁ q̇ − ½ ∂(q̇ᵀ M q̇)/∂q, by finite differences.
        let b = Biped::nao_like();
        let q = posture();
        let qd = Joints::new(0.4, -0.7, 1.1, 0.3, -0.2, 0.5);
        let h = 1e-6;
        let mut mdot = Matrix6::zeros();
        let mut grad = Joints::zeros();
        for k in 0..6 {
            let mut qp = q;
            let mut qm = q;
            qp[k] += h;
            qm[k] -= h;
            let dm = (b.mass_matrix(&qp) - b.mass_matrix(&qm)) / (2.0 * h);
            mdot += dm * qd[k];
            grad[k] = 0.5 * qd.dot(&(dm * qd));
        }
        let expected = mdot * qd - grad;
        assert!((expected - b.bias(&q, &qd)).amax() < 1e-7);
    }

    #[test]
    fn gravity_is_potential_gradient() {
        let b = Biped::nao_like();
        let q = posture();
        let h = 1e-6;
        for k in 0..6 {
            let mut qp = q;
            let mut qm = q;
            qp[k] += h;
            qm[k] -= h;
            let d = (b.potential_energy(&qp) - b.potential_energy(&qm)) / (2.0 * h);
            assert!((d + b.gravity_force(&q)[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn contact_moment_balance_about_cop() {
        // Independent check: the rate of angular momentum about the CoP equals
        // the gravity moment about it.
        let b = Biped::nao_like();
        let q = posture();
        let qd = Joints::new(0.3, -0.2, 0.5, 0.1, 0.0, -0.2);
        let qdd = Joints::new(0.5, -1.0, 2.0, 0.3, 0.0, 0.1);
        let c = b.contact(&q, &qd, &qdd);
        let com = b.com_state(&q, &qd);
        let acc = b.com_acceleration(&q, &qd, &qdd);
        let m = b.total_mass();
        assert!((c.fx - m * acc.x).abs() < 1e-10);
        assert!((c.fy - m * (acc.y + 9.8)).abs() < 1e-10);
        // centroidal angular momentum rate by finite differences
        let h = 1e-5;
        let hg = |t: f64| {
            let qt = q + qd * t + qdd * (0.5 * t * t);
            let qdt = qd + qdd * t;
            let cs = b.com_state(&qt, &qdt);
            let rot = b.rotations(&qt);
            let td = b.s * qdt;
            let mut l = 0.0;
            for body in b.bodies.iter().filter(|x| x.slot != PHI) {
                let p = b.point(&body.chain, &rot) - Vector2::new(cs.x, cs.y);
                let v = b.jacobian(&body.chain, &rot) * qdt - Vector2::new(cs.xdot, cs.ydot);
                l += body.mass * (p.x * v.y - p.y * v.x) + body.inertia * td[body.slot];
            }
            // static foot relative to moving CoM
            let foot = b.bodies.iter().find(|f| f.slot == super::super::kinematics::PHI).unwrap();
            let p = b.point(&foot.chain, &rot) - Vector2::new(cs.x, cs.y);
            let v = -Vector2::new(cs.xdot, cs.ydot);
            l + foot.mass * (p.x * v.y - p.y * v.x)
        };
        let hdot = (hg(h) - hg(-h)) / (2.0 * h);
        // f_s^x y_com − f_n^y (x_com − x_cop) = Ḣ
        let lhs = c.fx * com.y - c.fy * (com.x - c.x_cop);
        assert!((lhs - hdot).abs() < 1e-6, "{lhs} vs {hdot}");
    }

    #[test]
    fn zero_impulse_is_identity() {
        let b = Biped::nao_like();
        let qd = Joints::new(0.1, 0.2, -0.3, 0.1, 0.0, 0.0);
        assert_eq!(b.impact(&posture(), &qd, 0.0).unwrap(), qd);
    }

    #[test]
    fn push_momentum_bookkeeping() {
        let b = Biped::nao_like();
        let q = posture();
        let qd = Joints::zeros();
        let chk = impact_check(&b, &q, &qd, 0.3).unwrap();
        assert!((chk.free_momentum_jump - 0.3).abs() < 1e-9 * 0.3);
        assert!((chk.held_momentum_jump - (0.3 + chk.ground_impulse)).abs() < 1e-9 * 0.3);
        assert!(chk.reduced_map_error < 1e-12);
        // the reduced map agrees with the CoM velocity jump it produces
        let qd1 = b.impact(&q, &qd, 0.3).unwrap();
        let dv = b.com_state(&q, &qd1).xdot * b.total_mass();
        assert!((dv - chk.held_momentum_jump).abs() < 1e-10);
    }
}
