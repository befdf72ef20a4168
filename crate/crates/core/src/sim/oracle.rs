//! Two-link planar reference: hand-derived Lagrangian dynamics and the
//! classic joint-space momentum observer, used to cross-check the chain
//! observer.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::error::Result;
use crate::model::{ManipulatorModel, DEFAULT_GRAVITY};
use crate::observer::{ObserverConfig, PluckerObserver};
use crate::sim::environment::{environment_force, Environment};
use crate::sim::trajectory::quintic_profile;
use crate::spatial::{Vec3, Vec6};

/// Uniform slender links rotating about parallel vertical axes, gravity along
/// `−y`, angles measured from `+x`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct TwoLinkAnalytic {
    pub lengths: [f64; 2],
    pub masses: [f64; 2],
    pub gravity: f64,
}

impl TwoLinkAnalytic {
    pub fn new(lengths: [f64; 2], masses: [f64; 2]) -> Self {
        Self {
            lengths,
            masses,
            gravity: DEFAULT_GRAVITY,
        }
    }

    /// The chain model with the same geometry and inertia.
    pub fn model(&self) -> Result<ManipulatorModel> {
        ManipulatorModel::planar_two_link(self.lengths, self.masses)
    }

    fn consts(&self) -> (f64, f64, f64, f64, f64, f64, f64) {
        let [l1, l2] = self.lengths;
        let [m1, m2] = self.masses;
        (l1, m1, m2, l1 / 2.0, l2 / 2.0, m1 * l1 * l1 / 12.0, m2 * l2 * l2 / 12.0)
    }

    pub fn mass_matrix(&self, q: &Vector2<f64>) -> Matrix2<f64> {
        let (l1, m1, m2, c1, c2, i1, i2) = self.consts();
        let c = q[1].cos();
        let m11 = i1 + i2 + m1 * c1 * c1 + m2 * (l1 * l1 + c2 * c2 + 2.0 * l1 * c2 * c);
        let m12 = i2 + m2 * (c2 * c2 + l1 * c2 * c);
        let m22 = i2 + m2 * c2 * c2;
        Matrix2::new(m11, m12, m12, m22)
    }

    /// Christoffel-form `C` with `Ṁ − 2C` skew.
    pub fn coriolis(&self, q: &Vector2<f64>, qd: &Vector2<f64>) -> Matrix2<f64> {
        let (l1, _, m2, _, c2, _, _) = self.consts();
        let h = -m2 * l1 * c2 * q[1].sin();
        Matrix2::new(h * qd[1], h * (qd[0] + qd[1]), -h * qd[0], 0.0)
    }

    pub fn gravity(&self, q: &Vector2<f64>) -> Vector2<f64> {
        let (l1, m1, m2, c1, c2, _, _) = self.consts();
        let g = self.gravity;
        let c12 = (q[0] + q[1]).cos();
        Vector2::new(
            m1 * g * c1 * q[0].cos() + m2 * g * (l1 * q[0].cos() + c2 * c12),
            m2 * g * c2 * c12,
        )
    }

    pub fn tip_position(&self, q: &Vector2<f64>) -> Vector2<f64> {
        let [l1, l2] = self.lengths;
        let q12 = q[0] + q[1];
        Vector2::new(l1 * q[0].cos() + l2 * q12.cos(), l1 * q[0].sin() + l2 * q12.sin())
    }

    pub fn jacobian(&self, q: &Vector2<f64>) -> Matrix2<f64> {
        let [l1, l2] = self.lengths;
        let q12 = q[0] + q[1];
        Matrix2::new(
            -l1 * q[0].sin() - l2 * q12.sin(),
            -l2 * q12.sin(),
            l1 * q[0].cos() + l2 * q12.cos(),
            l2 * q12.cos(),
        )
    }
}

/// One sample of the joint stream: `τ` is held from this sample to the next.
#[derive(Clone, Debug, PartialEq)]
pub struct JointSample {
    pub q: Vector2<f64>,
    pub qd: Vector2<f64>,
    pub tau: Vector2<f64>,
}

/// Classic momentum observer `r = K{p − p₀ − ∫(τ + Cᵀq̇ − G + r)}` with
/// `p = M q̇`, stepped with the same implicit trapezoid as the chain
/// observer. Returns `r` after each step, one entry per sample after the first.
pub fn lagrangian_gmo_oracle(arm: &TwoLinkAnalytic, gain: f64, samples: &[JointSample], dt: f64) -> Vec<Vector2<f64>> {
    let Some(first) = samples.first() else {
        return Vec::new();
    };
    let drift = |s: &JointSample| arm.coriolis(&s.q, &s.qd).transpose() * s.qd - arm.gravity(&s.q);
    let p0 = arm.mass_matrix(&first.q) * first.qd;
    let half = 0.5 * dt;
    let mut integral = Vector2::zeros();
    let mut r = Vector2::zeros();
    let mut out = Vec::with_capacity(samples.len().saturating_sub(1));
    for w in samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let known = integral + (drift(a) + a.tau + r + drift(b) + a.tau) * half;
        let p = arm.mass_matrix(&b.q) * b.qd;
        r = (p - p0 - known) * gain / (1.0 + gain * half);
        integral = known + r * half;
        out.push(r);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleConfig {
    pub duration_s: f64,
    pub dt_s: f64,
    pub chain_gain: f64,
    pub lagrangian_gain: f64,
    /// Without contact the wall is removed and the arm only tracks.
    pub contact: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            duration_s: 10.0,
            dt_s: 1e-3,
            chain_gain: 100.0,
            lagrangian_gain: 100.0,
            contact: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub ticks: usize,
    /// `max |r_chain − r_lagrangian|` over the run and both joints.
    pub max_abs_deviation: f64,
    /// `max |r_lagrangian|`.
    pub max_reference: f64,
    pub max_chain: f64,
    /// Deviation over reference; zero when both stay at zero.
    pub relative_deviation: f64,
    pub peak_contact_force_n: f64,
}

impl OracleReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.relative_deviation <= tolerance
    }
}

/// Drive the two-link arm into a wall under task-space PD with gravity
/// compensation and feed the resulting stream to both observers.
pub fn run_equivalence(config: &OracleConfig) -> Result<OracleReport> {
    let arm = TwoLinkAnalytic::new([1.0, 0.8], [10.0, 6.0]);
    let model = arm.model()?;
    let dt = config.dt_s;
    let n = (config.duration_s / dt).round() as usize;

    let mut q = Vector2::new(0.3, 1.2);
    let mut qd = Vector2::zeros();
    let start = arm.tip_position(&q);
    let goal = start + Vector2::new(0.10, 0.0);
    let travel = 2.0;
    let wall = Environment::new(Vec3::x(), start.x + 0.05, 2e4, 100.0, 0.0)?;
    let (kp, kd) = (2000.0, 200.0);

    let dq = |v: &Vector2<f64>| DVector::from_column_slice(v.as_slice());
    let cfg = ObserverConfig {
        gain: Vec6::repeat(config.chain_gain),
        ..ObserverConfig::default()
    };
    let mut chain = PluckerObserver::new(cfg, &model, &dq(&q), &dq(&qd))?;
    let mut samples = Vec::with_capacity(n + 1);
    let mut chain_out = Vec::with_capacity(n);
    let mut peak_force: f64 = 0.0;
    let mut prev_v = Vector2::zeros();

    for k in 0..=n {
        let t = k as f64 * dt;
        let (s, ds, _) = quintic_profile(t, travel);
        let xd = start + (goal - start) * s;
        let vd = (goal - start) * ds;
        let jac = arm.jacobian(&q);
        let x = arm.tip_position(&q);
        let v = jac * qd;
        let f_cmd = (xd - x) * kp + (vd - v) * kd;
        let tau = jac.transpose() * f_cmd + arm.gravity(&q);
        samples.push(JointSample { q, qd, tau });
        if k == n {
            break;
        }

        let contact = if config.contact {
            let a = (v - prev_v) / dt;
            environment_force(
                &wall,
                &Vec3::new(x.x, x.y, 0.0),
                &Vec3::new(v.x, v.y, 0.0),
                &Vec3::new(a.x, a.y, 0.0),
            )
        } else {
            Vec6::zeros()
        };
        peak_force = peak_force.max(contact.fixed_rows::<3>(0).norm());
        prev_v = v;
        let wrench = -contact;
        let qdd = model.forward_dynamics(&dq(&q), &dq(&qd), &dq(&tau), Some(&wrench))?;
        qd += Vector2::new(qdd[0], qdd[1]) * dt;
        q += qd * dt;
        let r = chain.step(&model, &dq(&tau), &dq(&q), &dq(&qd), dt)?;
        chain_out.push(Vector2::new(r[0], r[1]));
    }

    let reference = lagrangian_gmo_oracle(&arm, config.lagrangian_gain, &samples, dt);
    let amax = |v: &Vector2<f64>| v.amax();
    let max_abs_deviation = chain_out
        .iter()
        .zip(&reference)
        .map(|(a, b)| (a - b).amax())
        .fold(0.0, f64::max);
    let max_reference = reference.iter().map(amax).fold(0.0, f64::max);
    let max_chain = chain_out.iter().map(amax).fold(0.0, f64::max);
    let relative_deviation = if max_abs_deviation == 0.0 {
        0.0
    } else {
        max_abs_deviation / max_reference.max(max_chain)
    };
    Ok(OracleReport {
        ticks: n,
        max_abs_deviation,
        max_reference,
        max_chain,
        relative_deviation,
        peak_contact_force_n: peak_force,
    })
}

/// `J(q)` of the chain model restricted to the planar rows, for comparison
/// with the analytic Jacobian.
pub fn planar_rows(j: &DMatrix<f64>) -> Matrix2<f64> {
    Matrix2::new(j[(0, 0)], j[(0, 1)], j[(1, 0)], j[(1, 1)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arm() -> TwoLinkAnalytic {
        TwoLinkAnalytic::new([1.0, 0.8], [10.0, 6.0])
    }

    #[test]
    fn analytic_matches_chain_model() {
        let a = arm();
        let m = a.model().unwrap();
        for (q1, q2, v1, v2) in [(0.3, 1.2, 0.5, -0.7), (-1.0, 0.2, 2.0, 1.0), (2.0, -2.5, -0.3, 0.9)] {
            let q = Vector2::new(q1, q2);
            let qd = Vector2::new(v1, v2);
            let dq = DVector::from_column_slice(q.as_slice());
            let dqd = DVector::from_column_slice(qd.as_slice());
            let mm = m.mass_matrix(&dq);
            let ma = a.mass_matrix(&q);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((mm[(i, j)] - ma[(i, j)]).abs() < 1e-10);
                }
            }
            let g = m.gravity_torques(&dq);
            assert!((Vector2::new(g[0], g[1]) - a.gravity(&q)).norm() < 1e-10);
            let bias = m.bias_forces(&dq, &dqd);
            let expect = a.coriolis(&q, &qd) * qd + a.gravity(&q);
            assert!((Vector2::new(bias[0], bias[1]) - expect).norm() < 1e-10);
            let jm = planar_rows(&m.jacobian(&dq));
            assert!((jm - a.jacobian(&q)).norm() < 1e-12);
            let tip = m.tip_transform(&dq);
            assert!((Vector2::new(tip.offset().x, tip.offset().y) - a.tip_position(&q)).norm() < 1e-12);
        }
    }

    #[test]
    fn coriolis_skew_property() {
        let a = arm();
        let q = Vector2::new(0.4, 0.9);
        let qd = Vector2::new(1.3, -0.6);
        let h = 1e-6;
        let mdot = (a.mass_matrix(&(q + qd * h)) - a.mass_matrix(&(q - qd * h))) / (2.0 * h);
        let n = mdot - a.coriolis(&q, &qd) * 2.0;
        assert!((n + n.transpose()).norm() < 1e-6);
    }

    #[test]
    fn oracle_quiet_without_force() {
        let a = arm();
        let q = Vector2::new(0.3, 1.2);
        let samples: Vec<_> = (0..100)
            .map(|_| JointSample {
                q,
                qd: Vector2::zeros(),
                tau: a.gravity(&q),
            })
            .collect();
        let r = lagrangian_gmo_oracle(&a, 100.0, &samples, 1e-3);
        assert!(r.iter().all(|r| r.norm() < 1e-12));
    }

    #[test]
    fn short_equivalence_run() {
        let report = run_equivalence(&OracleConfig {
            duration_s: 3.0,
            ..OracleConfig::default()
        })
        .unwrap();
        assert!(report.peak_contact_force_n > 0.0);
        assert!(report.passes(1e-6), "{report:?}");
    }
}
