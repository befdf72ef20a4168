//! Task-space impedance law and its required velocity references.

use log::warn;
use nalgebra::{DMatrix, DVector, Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dls_solve, Solve};
use crate::model::Pose;
use crate::spatial::{skew, FrameId, ForceVec, Mat6, MotionVec, SpatialTransform, Vec3, Vec6};

/// Damped least squares: `λ_max = DLS_DAMPING · σ_max`.
pub const DLS_DAMPING: f64 = 1e-3;
/// Damping fades in once `σ_min < DLS_ONSET · σ_max`.
pub const DLS_ONSET: f64 = 1e-2;

/// Diagonal target impedance. `inertia` is carried but not used by the law.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceSpec {
    pub inertia: Vec6,
    pub damping: Vec6,
    pub stiffness: Vec6,
    /// Desired contact wrench `f_ed`.
    pub desired_wrench: Vec6,
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct DerivedGains {
    pub gamma: Mat6,
    pub sigma: Mat6,
}

impl DerivedGains {
    /// `Γ` scaled by `factor`, `Σ` unchanged.
    pub fn with_gamma_scale(mut self, factor: f64) -> Self {
        self.gamma *= factor;
        self
    }
}

/// `Γ = K_d D_d⁻¹`, `Σ = D_d⁻¹`.
pub fn derive_gains(spec: &ImpedanceSpec) -> Result<DerivedGains> {
    let d = spec.damping;
    if d.iter().any(|x| *x == 0.0 || !x.is_finite()) {
        return Err(Error::Singular("impedance damping D_d"));
    }
    let sigma = Mat6::from_diagonal(&d.map(|x| 1.0 / x));
    Ok(DerivedGains {
        gamma: Mat6::from_diagonal(&spec.stiffness) * sigma,
        sigma,
    })
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct PoseError {
    pub position: Vec3,
    pub orientation: Vec3,
}

impl PoseError {
    pub fn vector(&self) -> Vec6 {
        Vec6::new(
            self.position.x,
            self.position.y,
            self.position.z,
            self.orientation.x,
            self.orientation.y,
            self.orientation.z,
        )
    }
}

fn normalized(eta: f64, eps: &Vec3, what: &str) -> (f64, Vec3) {
    let n = (eta * eta + eps.norm_squared()).sqrt();
    if (n - 1.0).abs() > 1e-10 {
        warn!("{what} quaternion has norm {n}; normalising");
        (eta / n, eps / n)
    } else {
        (eta, *eps)
    }
}

/// `e_o = η ε_d − η_d ε − S(ε_d) ε`; `(η, ε)` is the actual orientation.
pub fn quaternion_error(eta: f64, eps: &Vec3, eta_d: f64, eps_d: &Vec3) -> Vec3 {
    let (eta, eps) = normalized(eta, eps, "actual");
    let (eta_d, eps_d) = normalized(eta_d, eps_d, "desired");
    eps_d * eta - eps * eta_d - skew(&eps_d) * eps
}

/// `e = [p_d − p; e_o]`.
pub fn pose_error(desired: &Pose, actual: &Pose) -> PoseError {
    PoseError {
        position: desired.position - actual.position,
        orientation: quaternion_error(actual.eta(), &actual.epsilon(), desired.eta(), &desired.epsilon()),
    }
}

pub fn quaternion_parts(q: &UnitQuaternion<f64>) -> (f64, Vec3) {
    (q.w, q.imag())
}

pub fn quaternion_from_parts(eta: f64, eps: &Vec3) -> UnitQuaternion<f64> {
    UnitQuaternion::from_quaternion(Quaternion::new(eta, eps.x, eps.y, eps.z))
}

/// `Ẋ_r = Ẋ_d + Γ e + Σ (f_ed − f̃_e)`.
pub fn required_cartesian_velocity(
    xd_dot: &Vec6,
    error: &PoseError,
    desired_wrench: &Vec6,
    filtered_force: &Vec6,
    gains: &DerivedGains,
) -> Vec6 {
    xd_dot + gains.gamma * error.vector() + gains.sigma * (desired_wrench - filtered_force)
}

/// `q̇_r = J⁺ Ẋ_r` with damping near singular configurations.
pub fn required_joint_velocity(jacobian: &DMatrix<f64>, xr_dot: &Vec6) -> Solve {
    dls_solve(
        jacobian,
        &DVector::from_column_slice(xr_dot.as_slice()),
        DLS_DAMPING,
        DLS_ONSET,
    )
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ToolTargets {
    /// `ᵀ𝒱_r = N_c Ẋ_r`.
    pub tip_velocity: MotionVec,
    /// `ᴱ𝒱_r`, the same twist seen from the tool body frame.
    pub body_velocity: MotionVec,
    /// `ᵀF_r = N_c f_ed`.
    pub tip_force: ForceVec,
}

pub fn check_orthonormal(n_c: &Mat6) -> Result<()> {
    let dev = (n_c.transpose() * n_c - Mat6::identity()).abs().max();
    if dev > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "N_c is not orthonormal (max deviation {dev:e})"
        )));
    }
    Ok(())
}

/// `tool` is `ᴱU_T`, from the tool body frame to the contact frame `{T}`.
pub fn tool_frame_targets(
    xr_dot: &Vec6,
    desired_wrench: &Vec6,
    n_c: &Mat6,
    tool: &SpatialTransform,
) -> Result<ToolTargets> {
    check_orthonormal(n_c)?;
    if tool.target() != FrameId::TIP {
        return Err(Error::FrameMismatch {
            expected: FrameId::TIP,
            found: tool.target(),
        });
    }
    let tip_velocity = MotionVec::from_vector(n_c * xr_dot, FrameId::TIP);
    Ok(ToolTargets {
        body_velocity: tool.motion_to_base(&tip_velocity)?,
        tip_velocity,
        tip_force: ForceVec::from_vector(n_c * desired_wrench, FrameId::TIP),
    })
}

/// `D_d ė + K_d e + (f_ed − f_e)`; zero when the target impedance is rendered.
pub fn impedance_residual(
    e_dot: &Vec6,
    e: &Vec6,
    desired_wrench: &Vec6,
    contact_force: &Vec6,
    spec: &ImpedanceSpec,
) -> Vec6 {
    spec.damping.component_mul(e_dot) + spec.stiffness.component_mul(e) + (desired_wrench - contact_force)
}

/// Power flow at `{T}` when the target impedance holds, and its scale.
///
/// With `f_ed − f_e = −(D_d ė + K_d e)` the velocity error at `{T}` is
/// `(I − Σ D_d) ė + (Γ − Σ K_d) e`, which vanishes for conforming gains.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct TipPower {
    pub p_t: f64,
    pub scale: f64,
}

pub fn tip_power(e_dot: &Vec6, e: &Vec6, gains: &DerivedGains, spec: &ImpedanceSpec) -> TipPower {
    let d = Mat6::from_diagonal(&spec.damping);
    let k = Mat6::from_diagonal(&spec.stiffness);
    let force_err = -(d * e_dot + k * e);
    let verr = (Mat6::identity() - gains.sigma * d) * e_dot + (gains.gamma - gains.sigma * k) * e;
    let scale = force_err.norm() * (e_dot.norm() + (gains.gamma * e).norm() + (gains.sigma * force_err).norm());
    TipPower {
        p_t: verr.dot(&force_err),
        scale,
    }
}
