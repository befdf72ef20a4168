//! Newton–Euler rigid-body dynamics in body coordinates.

use nalgebra::{DMatrix, DVector};

use super::ManipulatorModel;
use crate::error::{Error, Result};
use crate::spatial::{
    blocks, skew, FrameId, ForceVec, Mat6, MotionVec, SpatialInertia, SpatialTransform,
    Vec3, Vec6,
};

/// `C(ω)` with `C(ω) V = V×* M V`, skew-symmetric, depending on `ω` only.
pub fn coriolis_matrix(m: &SpatialInertia, omega: &Vec3) -> Mat6 {
    let wx = skew(omega);
    let hx = skew(&m.first_moment());
    let i = m.rotational();
    let iw = skew(&(i * omega));
    blocks(
        &(wx * m.mass()),
        &(-wx * hx),
        &(hx * wx),
        &((wx * i + i * wx - iw) * 0.5),
    )
}

/// `G = −M [g; 0]` with `g` the gravitational acceleration in body coordinates.
pub fn gravity_term(m: &SpatialInertia, g_body: &Vec3) -> ForceVec {
    let a = Vec6::new(g_body.x, g_body.y, g_body.z, 0.0, 0.0, 0.0);
    ForceVec::from_vector(-(m.matrix * a), m.frame)
}

/// `F* = M V̇ + C(ω) V + G`.
pub fn net_body_force(
    m: &SpatialInertia,
    omega: &Vec3,
    v: &MotionVec,
    vdot: &MotionVec,
    g_body: &Vec3,
) -> Result<ForceVec> {
    for f in [v.frame, vdot.frame] {
        if f != m.frame {
            return Err(Error::FrameMismatch {
                expected: m.frame,
                found: f,
            });
        }
    }
    let out = m.matrix * vdot.vector
        + coriolis_matrix(m, omega) * v.vector
        + gravity_term(m, g_body).vector;
    Ok(ForceVec::from_vector(out, m.frame))
}

/// Chain quantities at one `(q, q̇)`, all in body coordinates.
#[derive(Clone, Debug)]
pub struct ChainDynamics {
    /// `ᴾU_{Aᵢ}` parent → body.
    pub links: Vec<SpatialTransform>,
    /// `ᵂU_{Aᵢ}`.
    pub world: Vec<SpatialTransform>,
    pub velocities: Vec<MotionVec>,
    pub inertias: Vec<SpatialInertia>,
    /// Gravity in each body's coordinates.
    pub gravity_body: Vec<Vec3>,
}

/// Momentum and gravity load of the subtree rooted at each body.
#[derive(Clone, Debug)]
pub struct SubtreeMomentum {
    /// `Hᵢ = Σ_{b ≥ i} U_{i,b} M_b V_b`.
    pub momentum: Vec<ForceVec>,
    /// `Gᶜᵢ = Σ_{b ≥ i} U_{i,b} G_b`.
    pub gravity: Vec<ForceVec>,
}

impl ChainDynamics {
    pub fn dof(&self) -> usize {
        self.links.len()
    }

    pub fn subtree(&self) -> SubtreeMomentum {
        let n = self.dof();
        let mut momentum: Vec<ForceVec> = Vec::with_capacity(n);
        let mut gravity: Vec<ForceVec> = Vec::with_capacity(n);
        for i in (0..n).rev() {
            let frame = FrameId::body(i);
            let mut h = self.inertias[i].matrix * self.velocities[i].vector;
            let mut g = gravity_term(&self.inertias[i], &self.gravity_body[i]).vector;
            if i + 1 < n {
                let u = &self.links[i + 1];
                let k = n - 2 - i;
                h += u.force_to_base(&momentum[k]).expect("chain").vector;
                g += u.force_to_base(&gravity[k]).expect("chain").vector;
            }
            momentum.push(ForceVec::from_vector(h, frame));
            gravity.push(ForceVec::from_vector(g, frame));
        }
        momentum.reverse();
        gravity.reverse();
        SubtreeMomentum { momentum, gravity }
    }
}

impl ManipulatorModel {
    pub fn chain_dynamics(&self, q: &DVector<f64>, qd: &DVector<f64>) -> ChainDynamics {
        let links = self.link_transforms(q);
        let velocities = self.propagate_velocities(&links, qd);
        let world = self.world_transforms(q);
        let inertias = self
            .bodies
            .iter()
            .enumerate()
            .map(|(i, b)| b.spatial_inertia(FrameId::body(i)))
            .collect();
        let gravity_body = world.iter().map(|w| w.rotation().transpose() * self.gravity).collect();
        ChainDynamics {
            links,
            world,
            velocities,
            inertias,
            gravity_body,
        }
    }

    /// Recursive Newton–Euler: joint forces producing `q̈` at `(q, q̇)`.
    ///
    /// `tip_wrench` is an external `[f; m]` applied to the robot at the tool
    /// tip, world axes, moment about the tip point.
    pub fn inverse_dynamics(
        &self,
        q: &DVector<f64>,
        qd: &DVector<f64>,
        qdd: &DVector<f64>,
        with_gravity: bool,
        tip_wrench: Option<&Vec6>,
    ) -> DVector<f64> {
        let n = self.dof();
        let links = self.link_transforms(q);
        let vel = self.propagate_velocities(&links, qd);
        let base_acc = if with_gravity { -self.gravity } else { Vec3::zeros() };
        let mut acc: Vec<Vec6> = Vec::with_capacity(n);
        let mut forces: Vec<Vec6> = Vec::with_capacity(n);
        for i in 0..n {
            let parent = if i == 0 {
                MotionVec::new(base_acc, Vec3::zeros(), FrameId::WORLD)
            } else {
                MotionVec::from_vector(acc[i - 1], FrameId::body(i - 1))
            };
            let s = self.joints[i].screw.vector();
            let sq = MotionVec::from_vector(s * qd[i], FrameId::body(i));
            let a = links[i].motion_to_target(&parent).expect("chain").vector
                + s * qdd[i]
                + vel[i].cross_motion(&sq).expect("same frame").vector;
            let m = self.bodies[i].spatial_inertia(FrameId::body(i));
            let h = m.momentum(&vel[i]).expect("same frame");
            let f = m.matrix * a + vel[i].cross_force(&h).expect("same frame").vector;
            acc.push(a);
            forces.push(f);
        }
        if let Some(w) = tip_wrench {
            let last = self.last_body();
            let tip = self.tip_transform(q);
            let wt = ForceVec::from_vector(*w, FrameId::TIP);
            // Rotate world axes into tool axes; the moment point stays at the tip.
            let rt = tip.rotation().transpose();
            let local = ForceVec::new(rt * wt.force(), rt * wt.moment(), FrameId::TIP);
            forces[last] -= self.tool.force_to_base(&local).expect("tool frame").vector;
        }
        let mut tau = DVector::zeros(n);
        for i in (0..n).rev() {
            tau[i] = self.joints[i].screw.vector().dot(&forces[i]);
            if i > 0 {
                let f = ForceVec::from_vector(forces[i], FrameId::body(i));
                let fp = links[i].force_to_base(&f).expect("chain").vector;
                forces[i - 1] += fp;
            }
        }
        tau
    }

    pub fn mass_matrix(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dof();
        let zero = DVector::zeros(n);
        let mut m = DMatrix::zeros(n, n);
        for k in 0..n {
            let mut e = DVector::zeros(n);
            e[k] = 1.0;
            m.set_column(k, &self.inverse_dynamics(q, &zero, &e, false, None));
        }
        (&m + m.transpose()) * 0.5
    }

    /// `C(q, q̇) q̇ + g(q)`.
    pub fn bias_forces(&self, q: &DVector<f64>, qd: &DVector<f64>) -> DVector<f64> {
        self.inverse_dynamics(q, qd, &DVector::zeros(self.dof()), true, None)
    }

    pub fn gravity_torques(&self, q: &DVector<f64>) -> DVector<f64> {
        let z = DVector::zeros(self.dof());
        self.inverse_dynamics(q, &z, &z, true, None)
    }

    /// `q̈ = M⁻¹ (τ + Jᵀ w − C q̇ − g)`.
    pub fn forward_dynamics(
        &self,
        q: &DVector<f64>,
        qd: &DVector<f64>,
        tau: &DVector<f64>,
        tip_wrench: Option<&Vec6>,
    ) -> Result<DVector<f64>> {
        let m = self.mass_matrix(q);
        let mut rhs = tau - self.bias_forces(q, qd);
        if let Some(w) = tip_wrench {
            rhs += self.jacobian(q).transpose() * DVector::from_column_slice(w.as_slice());
        }
        let chol = m.cholesky().ok_or(Error::Singular("joint-space mass matrix"))?;
        Ok(chol.solve(&rhs))
    }

    pub fn kinetic_energy(&self, q: &DVector<f64>, qd: &DVector<f64>) -> f64 {
        let links = self.link_transforms(q);
        self.propagate_velocities(&links, qd)
            .iter()
            .zip(&self.bodies)
            .map(|(v, b)| 0.5 * v.vector.dot(&(b.spatial_inertia(v.frame).matrix * v.vector)))
            .sum()
    }

    pub fn potential_energy(&self, q: &DVector<f64>) -> f64 {
        self.world_transforms(q)
            .iter()
            .zip(&self.bodies)
            .map(|(w, b)| {
                let m = b.mass();
                let com_world = if m > 0.0 {
                    w.point_to_base(&(b.first_moment() / m))
                } else {
                    Vec3::zeros()
                };
                -m * self.gravity.dot(&com_world)
            })
            .sum()
    }

    /// Joint-space momentum `p = M(q) q̇`.
    pub fn generalized_momentum(&self, q: &DVector<f64>, qd: &DVector<f64>) -> DVector<f64> {
        self.mass_matrix(q) * qd
    }
}
