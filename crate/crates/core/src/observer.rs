//! Generalized momentum observer in Plücker coordinates.
//!
//! Each joint frame carries a residual `ℛᵢ` that filters the momentum balance
//! of the subtree it supports. The joint residual is the screw projection
//! `rᵢ = sᵢᵀ ℛᵢ`, and the tip wrench is recovered through `(Jᵀ)⁺`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pinv_solve, Solve};
use crate::model::ManipulatorModel;
use crate::spatial::{FrameId, ForceVec, Mat6, MotionVec, SpatialInertia, UnitScrew, Vec6};

/// Relative singular-value cutoff for the wrench pseudo-inverse.
pub const WRENCH_PINV_CUTOFF: f64 = 1e-8;
/// Detection clears once `‖r‖` falls below this fraction of the threshold.
pub const IMPACT_RELEASE_RATIO: f64 = 0.8;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObserverConfig {
    /// Diagonal of the per-body residual gain `K` (1/s).
    pub gain: Vec6,
    /// Impact threshold on `‖r‖₂`.
    pub impact_threshold: f64,
    /// Diagonal of the force filter gain `𝒞` (1/s).
    pub filter_gain: Vec6,
}

impl Default for ObserverConfig {
    fn default() -> Self {
        Self {
            gain: Vec6::repeat(100.0),
            impact_threshold: 50.0,
            filter_gain: Vec6::repeat(50.0),
        }
    }
}

impl ObserverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: &Vec6| v.iter().all(|x| *x > 0.0 && x.is_finite());
        if !ok(&self.gain) {
            return Err(Error::InvalidInput("observer gain entries must be positive".into()));
        }
        if !ok(&self.filter_gain) {
            return Err(Error::InvalidInput("force filter gain entries must be positive".into()));
        }
        if !(self.impact_threshold > 0.0) {
            return Err(Error::InvalidInput("impact threshold must be positive".into()));
        }
        Ok(())
    }
}

/// `𝔉 = F* − [(V×)ᵀM + M(V×)]V − (C V + G)` for a body frame that is
/// momentarily fixed in space.
///
/// With `F*` the applied wrench, the rate of `M V` seen from that fixed frame
/// is `𝔉 + F_d` where `F_d` is any unmodelled wrench.
pub fn body_force_term(
    m: &SpatialInertia,
    v: &MotionVec,
    f_star: &ForceVec,
    coriolis: &Mat6,
    gravity: &ForceVec,
) -> Result<ForceVec> {
    for f in [v.frame, f_star.frame, gravity.frame] {
        if f != m.frame {
            return Err(Error::FrameMismatch {
                expected: m.frame,
                found: f,
            });
        }
    }
    let vx = crate::spatial::motion_cross(v);
    let mdot_v = (vx.transpose() * m.matrix + m.matrix * vx) * v.vector;
    let out = f_star.vector - mdot_v - (coriolis * v.vector + gravity.vector);
    Ok(ForceVec::from_vector(out, m.frame))
}

/// Residual of one frame: `ℛ = K{H(t) − H(t₀) − ∫(𝔉 + ℛ)}`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ResidualState {
    pub residual: Vec6,
    pub integral: Vec6,
    pub initial: Vec6,
}

impl ResidualState {
    pub fn new(initial_momentum: Vec6) -> Self {
        Self {
            residual: Vec6::zeros(),
            integral: Vec6::zeros(),
            initial: initial_momentum,
        }
    }
}

/// Advance one step with the trapezoidal rule, implicit in `ℛ`.
///
/// `term_start` and `term_end` are `𝔉` at the two ends of the step and
/// `momentum` is `H` at the end.
pub fn residual_step(
    state: &mut ResidualState,
    gain: &Vec6,
    term_start: &Vec6,
    term_end: &Vec6,
    momentum: &Vec6,
    dt: f64,
) -> Vec6 {
    let half = 0.5 * dt;
    let known = state.integral + (term_start + state.residual + term_end) * half;
    let mut next = Vec6::zeros();
    for i in 0..6 {
        let k = gain[i];
        next[i] = k * (momentum[i] - state.initial[i] - known[i]) / (1.0 + k * half);
    }
    state.integral = known + next * half;
    state.residual = next;
    next
}

/// `rᵢ = sᵢᵀ ℛᵢ`, each residual expressed in its joint frame.
pub fn project_to_joint(screws: &[UnitScrew], residuals: &[ForceVec]) -> Result<DVector<f64>> {
    if screws.len() != residuals.len() {
        return Err(Error::Dimension {
            what: "residual per joint",
            expected: screws.len(),
            got: residuals.len(),
        });
    }
    Ok(DVector::from_iterator(
        screws.len(),
        screws.iter().zip(residuals).map(|(s, r)| s.project(r)),
    ))
}

/// `(Jᵀ)⁺ r`, truncating singular values below the relative cutoff.
pub fn reconstruct_wrench(jacobian: &DMatrix<f64>, r: &DVector<f64>) -> Solve {
    pinv_solve(&jacobian.transpose(), r, WRENCH_PINV_CUTOFF)
}

pub fn detect_impact(r: &DVector<f64>, threshold: f64) -> bool {
    r.norm() > threshold
}

/// Threshold detector with a release band at [`IMPACT_RELEASE_RATIO`].
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct ImpactDetector {
    pub active: bool,
}

impl ImpactDetector {
    pub fn update(&mut self, r_norm: f64, threshold: f64) -> bool {
        if self.active {
            if r_norm < IMPACT_RELEASE_RATIO * threshold {
                self.active = false;
            }
        } else if r_norm > threshold {
            self.active = true;
        }
        self.active
    }
}

/// One step of `f̃̇ = 𝒞(f̂ − f̃)`, exact for `f̂` held over the step.
pub fn filter_force(filtered: &Vec6, estimate: &Vec6, gain: &Vec6, dt: f64) -> Vec6 {
    Vec6::from_fn(|i, _| {
        let a = 1.0 - (-gain[i] * dt).exp();
        filtered[i] + a * (estimate[i] - filtered[i])
    })
}

/// Output of [`PluckerObserver::estimate_wrench`].
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct WrenchEstimate {
    /// External wrench on the robot at the tip, world axes.
    pub wrench: Vec6,
    pub filtered: Vec6,
    pub degraded: bool,
    pub impact: bool,
}

#[derive(Clone, Debug)]
pub struct ObserverState {
    pub frames: Vec<ResidualState>,
    /// `τ`-independent part of `𝔉` at the last sample.
    drift: Vec<Vec6>,
    pub joint_residual: DVector<f64>,
    pub filtered: Vec6,
    pub detector: ImpactDetector,
}

/// Chain observer over all joint frames of a model.
#[derive(Clone, Debug)]
pub struct PluckerObserver {
    pub config: ObserverConfig,
    pub state: ObserverState,
}

/// `(Hᵢ, −Gᶜᵢ − Vᵢ×* Hᵢ)` for every joint frame.
fn momentum_and_drift(
    model: &ManipulatorModel,
    q: &DVector<f64>,
    qd: &DVector<f64>,
) -> (Vec<Vec6>, Vec<Vec6>) {
    let chain = model.chain_dynamics(q, qd);
    let sub = chain.subtree();
    let drift = (0..model.dof())
        .map(|i| {
            let vh = chain.velocities[i].cross_force(&sub.momentum[i]).expect("same frame");
            -sub.gravity[i].vector - vh.vector
        })
        .collect();
    (sub.momentum.iter().map(|h| h.vector).collect(), drift)
}

impl PluckerObserver {
    pub fn new(
        config: ObserverConfig,
        model: &ManipulatorModel,
        q: &DVector<f64>,
        qd: &DVector<f64>,
    ) -> Result<Self> {
        config.validate()?;
        let (momentum, drift) = momentum_and_drift(model, q, qd);
        Ok(Self {
            config,
            state: ObserverState {
                frames: momentum.into_iter().map(ResidualState::new).collect(),
                drift,
                joint_residual: DVector::zeros(model.dof()),
                filtered: Vec6::zeros(),
                detector: ImpactDetector::default(),
            },
        })
    }

    /// Advance to `(q, q̇)` at the end of a step over which `tau` was held.
    pub fn step(
        &mut self,
        model: &ManipulatorModel,
        tau: &DVector<f64>,
        q: &DVector<f64>,
        qd: &DVector<f64>,
        dt: f64,
    ) -> Result<&DVector<f64>> {
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("observer dt must be positive, got {dt}")));
        }
        let (momentum, drift) = momentum_and_drift(model, q, qd);
        let mut residuals = Vec::with_capacity(model.dof());
        for i in 0..model.dof() {
            let input = model.joints[i].screw.vector() * tau[i];
            let start = self.state.drift[i] + input;
            let end = drift[i] + input;
            let r = residual_step(
                &mut self.state.frames[i],
                &self.config.gain,
                &start,
                &end,
                &momentum[i],
                dt,
            );
            residuals.push(ForceVec::from_vector(r, FrameId::body(i)));
        }
        self.state.drift = drift;
        let screws: Vec<UnitScrew> = model.joints.iter().map(|j| j.screw).collect();
        self.state.joint_residual = project_to_joint(&screws, &residuals)?;
        Ok(&self.state.joint_residual)
    }

    pub fn residuals(&self) -> Vec<ForceVec> {
        self.state
            .frames
            .iter()
            .enumerate()
            .map(|(i, f)| ForceVec::from_vector(f.residual, FrameId::body(i)))
            .collect()
    }

    pub fn joint_residual(&self) -> &DVector<f64> {
        &self.state.joint_residual
    }

    /// Reconstruct the tip wrench from the current joint residual, filter it
    /// and update the impact flag.
    pub fn estimate_wrench(&mut self, jacobian: &DMatrix<f64>, dt: f64) -> WrenchEstimate {
        let s = reconstruct_wrench(jacobian, &self.state.joint_residual);
        let wrench = Vec6::from_column_slice(s.value.as_slice());
        self.state.filtered = filter_force(&self.state.filtered, &wrench, &self.config.filter_gain, dt);
        let impact = self
            .state
            .detector
            .update(self.state.joint_residual.norm(), self.config.impact_threshold);
        WrenchEstimate {
            wrench,
            filtered: self.state.filtered,
            degraded: s.degraded,
            impact,
        }
    }
}
