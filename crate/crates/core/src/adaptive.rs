//! Body-level force synthesis and adaptation: RBF uncertainty estimator and
//! the natural adaptation law on pseudo-inertias.

use nalgebra::{DMatrix, DVector, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{pseudo_to_phi, PseudoInertia, Regressor};
use crate::spatial::{ForceVec, Mat3, Mat6, MotionVec, SpatialTransform, Vec6};

/// Maximum number of recursive step halvings in [`nal_step`].
pub const NAL_MAX_HALVINGS: u32 = 10;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbfGains {
    /// `Π`, applied as `Π·I`.
    pub weight_rate: f64,
    /// `π`.
    pub bias_rate: f64,
    /// Weight leakage `τ₀`.
    pub weight_leak: f64,
    /// Bias leakage `π₀`.
    pub bias_leak: f64,
}

impl Default for RbfGains {
    fn default() -> Self {
        Self {
            weight_rate: 300.0,
            bias_rate: 10.0,
            weight_leak: 1e-3,
            bias_leak: 1e-3,
        }
    }
}

/// Gaussian RBF network with a 6-dimensional output.
#[derive(Clone, Debug, PartialEq)]
pub struct RbfNetwork {
    pub centers: Vec<DVector<f64>>,
    pub widths: Vec<f64>,
    /// `Ŵ`, one row per centre.
    pub weights: DMatrix<f64>,
    /// `ε̂`.
    pub bias: Vec6,
    pub gains: RbfGains,
}

impl RbfNetwork {
    pub fn new(centers: Vec<DVector<f64>>, widths: Vec<f64>, gains: RbfGains) -> Result<Self> {
        if centers.is_empty() || centers.len() != widths.len() {
            return Err(Error::Dimension {
                what: "RBF widths",
                expected: centers.len(),
                got: widths.len(),
            });
        }
        let dim = centers[0].len();
        if centers.iter().any(|c| c.len() != dim) {
            return Err(Error::InvalidInput("RBF centres have mixed dimensions".into()));
        }
        if widths.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidInput("RBF widths must be positive".into()));
        }
        let n = centers.len();
        Ok(Self {
            centers,
            widths,
            weights: DMatrix::zeros(n, 6),
            bias: Vec6::zeros(),
            gains,
        })
    }

    /// `count` centres `c_k = l_k·𝟙` evenly spaced over `[−envelope, envelope]`
    /// per input, each with width equal to the spacing between neighbours.
    pub fn diagonal_lattice(input_dim: usize, count: usize, envelope: f64, gains: RbfGains) -> Result<Self> {
        if count < 2 || !(envelope > 0.0) {
            return Err(Error::InvalidInput("lattice needs ≥ 2 centres and a positive envelope".into()));
        }
        let step = 2.0 * envelope / (count - 1) as f64;
        let width = step * (input_dim as f64).sqrt();
        let centers = (0..count)
            .map(|k| DVector::repeat(input_dim, -envelope + step * k as f64))
            .collect();
        Self::new(centers, vec![width; count], gains)
    }

    pub fn input_dim(&self) -> usize {
        self.centers[0].len()
    }
}

/// `Ψᵢ = exp(−‖χ − cᵢ‖² / wᵢ²)`.
pub fn rbf_eval(net: &RbfNetwork, chi: &DVector<f64>) -> Result<DVector<f64>> {
    if chi.len() != net.input_dim() {
        return Err(Error::Dimension {
            what: "RBF input",
            expected: net.input_dim(),
            got: chi.len(),
        });
    }
    Ok(DVector::from_iterator(
        net.centers.len(),
        net.centers
            .iter()
            .zip(&net.widths)
            .map(|(c, w)| (-(chi - c).norm_squared() / (w * w)).exp()),
    ))
}

/// `Δ̂ = Ŵᵀ Ψ + ε̂`.
pub fn uncertainty_estimate(net: &RbfNetwork, psi: &DVector<f64>) -> Vec6 {
    let w = net.weights.transpose() * psi;
    Vec6::from_column_slice(w.as_slice()) + net.bias
}

/// Explicit Euler step of `Ŵ̇ = Π(Ψ eᵀ − τ₀Ŵ)` and `ε̂̇ = π(e − π₀ε̂)` with
/// `e = V_r − V`.
pub fn adapt_step(net: &mut RbfNetwork, psi: &DVector<f64>, verr: &Vec6, dt: f64) {
    let g = net.gains;
    let outer = psi * verr.transpose();
    let dw = (outer - &net.weights * g.weight_leak) * g.weight_rate;
    net.weights += dw * dt;
    net.bias += (verr - net.bias * g.bias_leak) * (g.bias_rate * dt);
}

/// Unique symmetric `𝒮` with `tr(𝒮 f(φ)) = eᵀ Y φ` for every `φ`.
pub fn build_s(y: &Regressor, verr: &Vec6) -> Matrix4<f64> {
    let c = y.transpose() * verr;
    let p = Mat3::new(
        c[4],
        0.5 * c[7],
        0.5 * c[8],
        0.5 * c[7],
        c[5],
        0.5 * c[9],
        0.5 * c[8],
        0.5 * c[9],
        c[6],
    );
    let s1 = Mat3::identity() * p.trace() - p;
    let mut s = Matrix4::zeros();
    s.fixed_view_mut::<3, 3>(0, 0).copy_from(&s1);
    for k in 0..3 {
        s[(k, 3)] = 0.5 * c[1 + k];
        s[(3, k)] = 0.5 * c[1 + k];
    }
    s[(3, 3)] = c[0];
    s
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct NalState {
    pub estimate: PseudoInertia,
    pub gamma: f64,
    pub gamma0: f64,
}

impl NalState {
    pub fn new(estimate: PseudoInertia, gamma: f64, gamma0: f64) -> Result<Self> {
        if !(gamma > 0.0) || !(gamma0 > 0.0) {
            return Err(Error::InvalidInput("NAL gains must be positive".into()));
        }
        if estimate.matrix.cholesky().is_none() {
            return Err(Error::NotPositiveDefinite {
                what: "initial pseudo-inertia estimate",
                min_eigenvalue: estimate.min_eigenvalue(),
            });
        }
        Ok(Self {
            estimate,
            gamma,
            gamma0,
        })
    }
}

fn nal_rate(l: &Matrix4<f64>, s: &Matrix4<f64>, gamma: f64, gamma0: f64) -> Matrix4<f64> {
    l * (s - l * gamma0) * l / gamma
}

fn nal_advance(l: &Matrix4<f64>, s: &Matrix4<f64>, gamma: f64, gamma0: f64, dt: f64, depth: u32) -> Result<Matrix4<f64>> {
    let next = l + nal_rate(l, s, gamma, gamma0) * dt;
    let next = (next + next.transpose()) * 0.5;
    if next.cholesky().is_some() {
        return Ok(next);
    }
    if depth >= NAL_MAX_HALVINGS {
        return Err(Error::PdLoss { retries: depth });
    }
    let mid = nal_advance(l, s, gamma, gamma0, 0.5 * dt, depth + 1)?;
    nal_advance(&mid, s, gamma, gamma0, 0.5 * dt, depth + 1)
}

/// Explicit Euler step of `L̂̇ = (1/γ) L̂ (𝒮 − γ₀ L̂) L̂`, halving the step
/// when the update would leave the positive-definite cone.
pub fn nal_step(state: &mut NalState, s: &Matrix4<f64>, dt: f64) -> Result<()> {
    let next = nal_advance(&state.estimate.matrix, s, state.gamma, state.gamma0, dt, 0)?;
    state.estimate = PseudoInertia::new(next);
    Ok(())
}

fn log_det_pd(m: &Matrix4<f64>, what: &'static str) -> Result<f64> {
    let c = m.cholesky().ok_or_else(|| Error::NotPositiveDefinite {
        what,
        min_eigenvalue: PseudoInertia::new(*m).min_eigenvalue(),
    })?;
    Ok(2.0 * c.l().diagonal().iter().map(|x| x.ln()).sum::<f64>())
}

/// `log(|L̂| / |L|) + tr(L̂⁻¹ L) − 4`.
pub fn bregman_divergence(l: &PseudoInertia, l_hat: &PseudoInertia) -> Result<f64> {
    let ld = log_det_pd(&l.matrix, "pseudo-inertia")?;
    let ld_hat = log_det_pd(&l_hat.matrix, "pseudo-inertia estimate")?;
    let chol = l_hat.matrix.cholesky().expect("checked above");
    let tr = chol.solve(&l.matrix).trace();
    Ok(ld_hat - ld + tr - 4.0)
}

/// `F*_r = Y φ̂ + K (V_r − V) + Δ̂`, all in the body frame of `verr`.
pub fn required_net_force(
    y: &Regressor,
    estimate: &PseudoInertia,
    gain: &Mat6,
    verr: &MotionVec,
    delta: &Vec6,
) -> ForceVec {
    let phi = pseudo_to_phi(estimate).phi;
    ForceVec::from_vector(y * phi + gain * verr.vector + delta, verr.frame)
}

/// `ᴱF_r = ᴱF*_r + ᴱU_T ᵀF_r`.
pub fn required_spatial_force(
    net: &ForceVec,
    tool: &SpatialTransform,
    tip_force: &ForceVec,
) -> Result<ForceVec> {
    net.add(&tool.force_to_base(tip_force)?)
}
