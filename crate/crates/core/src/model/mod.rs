//! Serial-chain manipulator model: geometry, kinematics and Newton–Euler dynamics.

mod dynamics;
mod file;
mod params;
mod regressor;

pub use dynamics::{coriolis_matrix, gravity_term, net_body_force, ChainDynamics, SubtreeMomentum};
pub use file::{ModelFile, MODEL_FILE_VERSION};
pub use params::{
    consistency_check, phi_to_pseudo, pseudo_to_phi, uniform_box, Consistency, InertialParams,
    PseudoInertia, Phi,
};
pub use regressor::{regressor, Regressor};

use nalgebra::{DMatrix, DVector, Rotation3, Unit, UnitQuaternion};

use crate::error::{Error, Result};
use crate::spatial::{FrameId, MotionVec, SpatialTransform, UnitScrew, Vec3, Vec6};

pub const DEFAULT_GRAVITY: f64 = 9.81;

/// What to do with joint positions outside their limits.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub enum LimitPolicy {
    #[default]
    Error,
    Clamp,
    Ignore,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointSpec {
    pub name: String,
    /// Joint axis in the body frame it moves.
    pub screw: UnitScrew,
    /// Fixed placement of the joint frame in the parent body frame.
    pub offset_rotation: Rotation3<f64>,
    pub offset_translation: Vec3,
    pub limits: (f64, f64),
}

impl JointSpec {
    pub fn validate(&self) -> Result<()> {
        self.screw.validate()?;
        if !(self.limits.0 < self.limits.1) {
            return Err(Error::InvalidInput(format!(
                "joint {}: min limit {} not below max {}",
                self.name, self.limits.0, self.limits.1
            )));
        }
        Ok(())
    }
}

/// End-effector pose: position and unit quaternion `(η, ε)`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn eta(&self) -> f64 {
        self.orientation.w
    }

    pub fn epsilon(&self) -> Vec3 {
        self.orientation.imag()
    }

    /// Flip the quaternion sign if it sits in the other hemisphere from `prev`.
    pub fn align_to(&mut self, prev: &UnitQuaternion<f64>) {
        if self.orientation.coords.dot(&prev.coords) < 0.0 {
            self.orientation = UnitQuaternion::new_unchecked(-self.orientation.into_inner());
        }
    }
}

/// Ordered chain of rigid bodies; body `i` is moved by joint `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct ManipulatorModel {
    pub name: String,
    pub joints: Vec<JointSpec>,
    pub bodies: Vec<InertialParams>,
    /// Gravitational acceleration in world coordinates (m/s²).
    pub gravity: Vec3,
    /// `ᴱU_T`: placement of the contact frame `{T}` in the last body frame.
    pub tool: SpatialTransform,
    pub limit_policy: LimitPolicy,
}

impl ManipulatorModel {
    pub fn new(
        name: impl Into<String>,
        joints: Vec<JointSpec>,
        bodies: Vec<InertialParams>,
        gravity: Vec3,
        tool_rotation: Rotation3<f64>,
        tool_offset: Vec3,
    ) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::InvalidInput("model has no joints".into()));
        }
        if joints.len() != bodies.len() {
            return Err(Error::Dimension {
                what: "bodies per joint",
                expected: joints.len(),
                got: bodies.len(),
            });
        }
        for j in &joints {
            j.validate()?;
        }
        let last = FrameId::body(joints.len() - 1);
        Ok(Self {
            name: name.into(),
            tool: SpatialTransform::from_rotation(&tool_rotation, tool_offset, last, FrameId::TIP),
            joints,
            bodies,
            gravity,
            limit_policy: LimitPolicy::Error,
        })
    }

    /// The 6-DoF heavy-duty arm shipped with the crate.
    pub fn default_hhm() -> Self {
        ModelFile::parse_str(include_str!("../../models/hhm6.toml"))
            .and_then(|f| f.build())
            .expect("bundled model file is valid")
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn parent_frame(&self, i: usize) -> FrameId {
        if i == 0 {
            FrameId::WORLD
        } else {
            FrameId::body(i - 1)
        }
    }

    pub fn last_body(&self) -> usize {
        self.dof() - 1
    }

    pub fn check_q(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        if q.len() != self.dof() {
            return Err(Error::Dimension {
                what: "joint vector",
                expected: self.dof(),
                got: q.len(),
            });
        }
        let mut out = q.clone();
        for (i, j) in self.joints.iter().enumerate() {
            let (lo, hi) = j.limits;
            if q[i] < lo || q[i] > hi {
                match self.limit_policy {
                    LimitPolicy::Error => {
                        return Err(Error::JointLimit {
                            joint: i,
                            value: q[i],
                            min: lo,
                            max: hi,
                        })
                    }
                    LimitPolicy::Clamp => out[i] = q[i].clamp(lo, hi),
                    LimitPolicy::Ignore => {}
                }
            }
        }
        Ok(out)
    }

    /// `ᴾU_{Aᵢ}` for joint `i` at position `qi` (parent → body `i`).
    pub fn joint_transform(&self, i: usize, qi: f64) -> SpatialTransform {
        let j = &self.joints[i];
        let (rot, trans) = if j.screw.is_revolute() {
            let axis = Unit::new_unchecked(j.screw.rotation);
            (
                j.offset_rotation * Rotation3::from_axis_angle(&axis, qi),
                j.offset_translation,
            )
        } else {
            (
                j.offset_rotation,
                j.offset_translation + j.offset_rotation * (j.screw.translation * qi),
            )
        };
        SpatialTransform::from_rotation(&rot, trans, self.parent_frame(i), FrameId::body(i))
    }

    /// Parent → body transforms for every joint. No limit check.
    pub fn link_transforms(&self, q: &DVector<f64>) -> Vec<SpatialTransform> {
        (0..self.dof()).map(|i| self.joint_transform(i, q[i])).collect()
    }

    /// `ᵂU_{Aᵢ}` for every body. No limit check.
    pub fn world_transforms(&self, q: &DVector<f64>) -> Vec<SpatialTransform> {
        let mut out: Vec<SpatialTransform> = Vec::with_capacity(self.dof());
        for (i, link) in self.link_transforms(q).into_iter().enumerate() {
            let w = if i == 0 {
                link
            } else {
                out[i - 1].compose(&link).expect("chain frames are consecutive")
            };
            out.push(w);
        }
        out
    }

    /// `ᵂU_T`.
    pub fn tip_transform(&self, q: &DVector<f64>) -> SpatialTransform {
        let w = self.world_transforms(q);
        w[self.last_body()]
            .compose(&self.tool)
            .expect("tool is attached to the last body")
    }

    pub fn forward_kinematics(&self, q: &DVector<f64>) -> Result<Pose> {
        let q = self.check_q(q)?;
        Ok(pose_of(&self.tip_transform(&q)))
    }

    /// Geometric Jacobian of `{T}`: `Ẋ = [ṗ; ω] = J q̇`, world coordinates.
    pub fn jacobian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let w = self.world_transforms(q);
        let tip = w[self.last_body()].compose(&self.tool).expect("tool frame");
        let p_tip = *tip.offset();
        let mut j = DMatrix::zeros(6, self.dof());
        for (i, wt) in w.iter().enumerate() {
            let s = &self.joints[i].screw;
            let r = wt.rotation();
            let omega = r * s.rotation;
            let lin = r * s.translation + omega.cross(&(p_tip - wt.offset()));
            j.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
            j.fixed_view_mut::<3, 1>(3, i).copy_from(&omega);
        }
        j
    }

    /// Body twists in body coordinates: `Vᵢ = Uᵢᵀ V_parent + sᵢ q̇ᵢ`.
    pub fn chain_velocities(&self, q: &DVector<f64>, qd: &DVector<f64>) -> Vec<MotionVec> {
        self.propagate_velocities(&self.link_transforms(q), qd)
    }

    pub(crate) fn propagate_velocities(
        &self,
        links: &[SpatialTransform],
        qd: &DVector<f64>,
    ) -> Vec<MotionVec> {
        let mut out: Vec<MotionVec> = Vec::with_capacity(self.dof());
        for (i, link) in links.iter().enumerate() {
            let parent = if i == 0 {
                MotionVec::zero(FrameId::WORLD)
            } else {
                out[i - 1]
            };
            let mut v = link.motion_to_target(&parent).expect("consecutive frames");
            v.vector += self.joints[i].screw.vector() * qd[i];
            out.push(v);
        }
        out
    }

    /// Tip twist `[v; ω]` in world coordinates from a body-coordinate twist of the last body.
    pub fn tip_twist_world(&self, q: &DVector<f64>, last: &MotionVec) -> Vec6 {
        let tip = self.tip_transform(q);
        let vt = self.tool.motion_to_target(last).expect("last body frame");
        let r = tip.rotation();
        let mut out = Vec6::zeros();
        out.fixed_view_mut::<3, 1>(0, 0).copy_from(&(r * vt.linear()));
        out.fixed_view_mut::<3, 1>(3, 0).copy_from(&(r * vt.angular()));
        out
    }
}

pub(crate) fn pose_of(t: &SpatialTransform) -> Pose {
    let rot = Rotation3::from_matrix_unchecked(*t.rotation());
    let mut orientation = UnitQuaternion::from_rotation_matrix(&rot);
    if orientation.w < 0.0 {
        orientation = UnitQuaternion::new_unchecked(-orientation.into_inner());
    }
    Pose {
        position: *t.offset(),
        orientation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matrix_rank;
    use approx::assert_relative_eq;
    use nalgebra::Matrix4;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_q(model: &ManipulatorModel, rng: &mut ChaCha8Rng) -> DVector<f64> {
        DVector::from_iterator(
            model.dof(),
            model.joints.iter().map(|j| {
                let (lo, hi) = j.limits;
                let (lo, hi) = (lo.max(-2.5), hi.min(2.5));
                rng.random_range(lo..hi)
            }),
        )
    }

    /// Homogeneous-matrix chain product, written independently of `SpatialTransform`.
    fn homogeneous_tip(model: &ManipulatorModel, q: &DVector<f64>) -> Matrix4<f64> {
        let mut t = Matrix4::<f64>::identity();
        for (i, j) in model.joints.iter().enumerate() {
            let mut off = Matrix4::<f64>::identity();
            off.fixed_view_mut::<3, 3>(0, 0).copy_from(j.offset_rotation.matrix());
            off.fixed_view_mut::<3, 1>(0, 3).copy_from(&j.offset_translation);
            let mut mot = Matrix4::<f64>::identity();
            if j.screw.is_revolute() {
                let axis = Unit::new_normalize(j.screw.rotation);
                let r = Rotation3::from_axis_angle(&axis, q[i]);
                mot.fixed_view_mut::<3, 3>(0, 0).copy_from(r.matrix());
            } else {
                mot.fixed_view_mut::<3, 1>(0, 3).copy_from(&(j.screw.translation * q[i]));
            }
            t = t * off * mot;
        }
        let mut tool = Matrix4::<f64>::identity();
        tool.fixed_view_mut::<3, 3>(0, 0).copy_from(model.tool.rotation());
        tool.fixed_view_mut::<3, 1>(0, 3).copy_from(model.tool.offset());
        t * tool
    }

    #[test]
    fn home_pose_is_offset_composition() {
        let m = ManipulatorModel::default_hhm();
        let q = DVector::zeros(6);
        let pose = m.forward_kinematics(&q).unwrap();
        let mut p = Vec3::zeros();
        let mut r = Rotation3::identity();
        for j in &m.joints {
            p += r * j.offset_translation;
            r *= j.offset_rotation;
        }
        p += r * m.tool.offset();
        assert_relative_eq!(pose.position, p, epsilon = 1e-12);
        assert!(pose.eta() >= 0.0);
    }

    #[test]
    fn base_rotation_quarter_turn() {
        let m = ManipulatorModel::default_hhm();
        let q0 = DVector::zeros(6);
        let mut q1 = q0.clone();
        q1[0] = std::f64::consts::FRAC_PI_2;
        let p0 = m.forward_kinematics(&q0).unwrap().position;
        let p1 = m.forward_kinematics(&q1).unwrap().position;
        assert_relative_eq!(p1, Vec3::new(-p0.y, p0.x, p0.z), epsilon = 1e-12);
    }

    #[test]
    fn fk_matches_homogeneous_chain() {
        let m = ManipulatorModel::default_hhm();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let q = random_q(&m, &mut rng);
            let pose = m.forward_kinematics(&q).unwrap();
            let t = homogeneous_tip(&m, &q);
            assert_relative_eq!(pose.position, t.fixed_view::<3, 1>(0, 3).into_owned(), epsilon = 1e-10);
            let r = pose.orientation.to_rotation_matrix();
            assert_relative_eq!(*r.matrix(), t.fixed_view::<3, 3>(0, 0).into_owned(), epsilon = 1e-10);
            let q_norm = pose.orientation.coords.norm();
            assert!((q_norm - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn limits_enforced_or_clamped() {
        let mut m = ManipulatorModel::default_hhm();
        let mut q = DVector::zeros(6);
        q[1] = 100.0;
        assert!(matches!(m.forward_kinematics(&q), Err(Error::JointLimit { joint: 1, .. })));
        m.limit_policy = LimitPolicy::Clamp;
        assert!(m.forward_kinematics(&q).is_ok());
    }

    #[test]
    fn jacobian_zero_rate() {
        let m = ManipulatorModel::default_hhm();
        let q = DVector::from_vec(vec![0.1, -0.4, 0.9, 0.2, 0.3, -0.1]);
        let xd = m.jacobian(&q) * DVector::zeros(6);
        assert_eq!(xd.norm(), 0.0);
    }

    #[test]
    fn jacobian_position_rows_match_finite_differences() {
        let m = ManipulatorModel::default_hhm();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6;
        for _ in 0..20 {
            let q = random_q(&m, &mut rng);
            let j = m.jacobian(&q);
            for i in 0..6 {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[i] += h;
                qm[i] -= h;
                let dp = (m.tip_transform(&qp).offset() - m.tip_transform(&qm).offset()) / (2.0 * h);
                let col = j.fixed_view::<3, 1>(0, i).into_owned();
                assert!((dp - col).norm() < 1e-6, "column {i}: {dp} vs {col}");
            }
        }
    }

    #[test]
    fn wrist_singularity_drops_rank() {
        let m = ManipulatorModel::default_hhm();
        let mut q = DVector::from_vec(vec![0.2, -0.3, 0.8, 0.4, 0.0, -0.3]);
        assert_eq!(matrix_rank(&m.jacobian(&q), 1e-9), 6);
        // Joint 5 at a quarter turn lines the last wrist axis up with the first.
        q[4] = std::f64::consts::FRAC_PI_2;
        assert!(matrix_rank(&m.jacobian(&q), 1e-9) < 6);
    }

    #[test]
    fn zero_rates_give_zero_twists() {
        let m = ManipulatorModel::default_hhm();
        let q = DVector::from_vec(vec![0.3, -0.2, 0.5, 0.1, 0.2, 0.3]);
        for v in m.chain_velocities(&q, &DVector::zeros(6)) {
            assert_eq!(v.vector, Vec6::zeros());
        }
    }

    #[test]
    fn base_joint_only_propagates_rigidly() {
        let m = ManipulatorModel::default_hhm();
        let q = DVector::from_vec(vec![0.3, -0.2, 0.5, 0.1, 0.2, 0.3]);
        let mut qd = DVector::zeros(6);
        qd[0] = 0.7;
        let vs = m.chain_velocities(&q, &qd);
        let w = m.world_transforms(&q);
        // Every body spins about the world z axis through the origin at 0.7 rad/s.
        let omega = Vec3::new(0.0, 0.0, 0.7);
        for (i, v) in vs.iter().enumerate() {
            let r = w[i].rotation();
            assert_relative_eq!(r * v.angular(), omega, epsilon = 1e-12);
            let expected_lin = omega.cross(w[i].offset());
            assert_relative_eq!(r * v.linear(), expected_lin, epsilon = 1e-12);
        }
    }

    #[test]
    fn jacobian_agrees_with_chain_velocities() {
        let m = ManipulatorModel::default_hhm();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let q = random_q(&m, &mut rng);
            let qd = DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
            let vs = m.chain_velocities(&q, &qd);
            let tip = m.tip_twist_world(&q, &vs[5]);
            let jq = m.jacobian(&q) * &qd;
            for k in 0..6 {
                assert!((tip[k] - jq[k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn hemisphere_alignment_flips_sign() {
        let m = ManipulatorModel::default_hhm();
        let mut pose = m.forward_kinematics(&DVector::zeros(6)).unwrap();
        let prev = UnitQuaternion::new_unchecked(-pose.orientation.into_inner());
        pose.align_to(&prev);
        assert!(pose.orientation.coords.dot(&prev.coords) > 0.0);
    }
}
