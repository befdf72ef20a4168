use hydrasim::harness::{gmo_step_response, random};
use hydrasim::model::{LimitPolicy, ManipulatorModel};
use hydrasim::observer::{reconstruct_wrench, residual_step, ObserverConfig, PluckerObserver, ResidualState};
use hydrasim::spatial::Vec6;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn hhm() -> ManipulatorModel {
    let mut m = ManipulatorModel::default_hhm();
    m.limit_policy = LimitPolicy::Ignore;
    m
}

fn observer(model: &ManipulatorModel, gain: f64, q: &DVector<f64>, qd: &DVector<f64>) -> PluckerObserver {
    let cfg = ObserverConfig {
        gain: Vec6::repeat(gain),
        ..ObserverConfig::default()
    };
    PluckerObserver::new(cfg, model, q, qd).unwrap()
}

fn rk4(model: &ManipulatorModel, q: &mut DVector<f64>, qd: &mut DVector<f64>, tau: &DVector<f64>, w: Option<&Vec6>, dt: f64) {
    let acc = |q: &DVector<f64>, qd: &DVector<f64>| model.forward_dynamics(q, qd, tau, w).unwrap();
    let a1 = acc(q, qd);
    let (q2, v2) = (&*q + &*qd * (dt / 2.0), &*qd + &a1 * (dt / 2.0));
    let a2 = acc(&q2, &v2);
    let (q3, v3) = (&*q + &v2 * (dt / 2.0), &*qd + &a2 * (dt / 2.0));
    let a3 = acc(&q3, &v3);
    let (q4, v4) = (&*q + &v3 * dt, &*qd + &a3 * dt);
    let a4 = acc(&q4, &v4);
    *q += (&*qd + &v2 * 2.0 + &v3 * 2.0 + &v4) * (dt / 6.0);
    *qd += (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (dt / 6.0);
}

#[test]
fn step_response_follows_first_order_lag() {
    let (tracking, dc) = gmo_step_response(100.0, 1e-3).unwrap();
    assert!(tracking < 1e-2, "tracking error {tracking:e}");
    assert!(dc < 5e-3, "dc error {dc:e}");
}

/// Joint-space PD tracking of sinusoids with no external wrench.
#[test]
fn no_false_residual_in_free_motion() {
    let model = hhm();
    let dt = 1e-4;
    let mut q = DVector::from_column_slice(&[0.0, -0.4, 1.2, 0.0, 0.8, 0.0]);
    let q0 = q.clone();
    let mut qd = DVector::zeros(6);
    let mut obs = observer(&model, 100.0, &q, &qd);
    let (kp, kd) = (4000.0, 400.0);
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for k in 0..20_000 {
        let t = k as f64 * dt;
        let qr = DVector::from_fn(6, |i, _| q0[i] + 0.3 * (1.3 * t + i as f64).sin());
        let vr = DVector::from_fn(6, |i, _| 0.3 * 1.3 * (1.3 * t + i as f64).cos());
        let m = model.mass_matrix(&q);
        let tau = model.bias_forces(&q, &qd) + m * ((&qr - &q) * kp + (&vr - &qd) * kd);
        scale = scale.max(tau.amax());
        rk4(&model, &mut q, &mut qd, &tau, None, dt);
        let r = obs.step(&model, &tau, &q, &qd, dt).unwrap();
        worst = worst.max(r.norm());
    }
    assert!(worst < 1e-6 * scale, "max |r| {worst:e}, scale {scale:e}");
}

/// Amplitude ratio of the residual for a sinusoidal disturbance, least-squares
/// fitted over whole periods after the transient.
fn measured_ratio(response: &[f64], input: &[f64], t: &[f64], omega: f64) -> f64 {
    let fit = |y: &[f64]| {
        let (mut ss, mut sc, mut cc, mut ys, mut yc) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&yi, &ti) in y.iter().zip(t) {
            let (s, c) = (omega * ti).sin_cos();
            ss += s * s;
            sc += s * c;
            cc += c * c;
            ys += yi * s;
            yc += yi * c;
        }
        let det = ss * cc - sc * sc;
        let a = (ys * cc - yc * sc) / det;
        let b = (yc * ss - ys * sc) / det;
        (a * a + b * b).sqrt()
    };
    fit(response) / fit(input)
}

#[test]
fn residual_transfer_matches_first_order_magnitude() {
    for (k, f) in [(100.0, 5.0), (50.0, 10.0), (200.0, 2.0)] {
        let omega = std::f64::consts::TAU * f;
        let dt = 1e-4;
        let mut state = ResidualState::new(Vec6::zeros());
        let gain = Vec6::repeat(k);
        let zero = Vec6::zeros();
        let (mut ts, mut rs, mut us) = (Vec::new(), Vec::new(), Vec::new());
        let periods = 20.0;
        let n = (periods / f / dt) as usize;
        for i in 1..=n {
            let t = i as f64 * dt;
            // Ḣ = F_d = sin(ωt) with 𝔉 = 0.
            let h = Vec6::repeat((1.0 - (omega * t).cos()) / omega);
            let r = residual_step(&mut state, &gain, &zero, &zero, &h, dt);
            if t > 10.0 / f {
                ts.push(t);
                rs.push(r[0]);
                us.push((omega * t).sin());
            }
        }
        let expect = k / (omega * omega + k * k).sqrt();
        let got = measured_ratio(&rs, &us, &ts, omega);
        assert!((got - expect).abs() / expect < 0.02, "k {k}, f {f}: {got} vs {expect}");
    }
}

/// The same check through the full chain: the arm is held still while a
/// sinusoidal wrench acts at the tip.
#[test]
fn chain_residual_transfer_for_sinusoidal_tip_wrench() {
    let model = hhm();
    let (k, f) = (50.0, 4.0);
    let omega = std::f64::consts::TAU * f;
    let dt = 1e-4;
    let mut q = DVector::from_column_slice(&[0.2, -0.4, 1.2, 0.1, 0.8, 0.3]);
    let mut qd = DVector::zeros(6);
    let dir = Vec6::new(100.0, -50.0, 80.0, 5.0, 0.0, -5.0);
    let mut obs = observer(&model, k, &q, &qd);
    let jt = model.jacobian(&q).transpose();
    let (mut ts, mut rs, mut us) = (Vec::new(), Vec::new(), Vec::new());
    let n = (12.0 / f / dt) as usize;
    for i in 0..n {
        let t = i as f64 * dt;
        let w = dir * (omega * t).sin();
        let tau = model.gravity_torques(&q) - model.jacobian(&q).transpose() * w;
        rk4(&model, &mut q, &mut qd, &tau, Some(&w), dt);
        let r = obs.step(&model, &tau, &q, &qd, dt).unwrap();
        let t1 = t + dt;
        if t1 > 6.0 / f {
            ts.push(t1);
            rs.push(r[1]);
            us.push((&jt * dir)[1] * (omega * t1).sin());
        }
    }
    let expect = k / (omega * omega + k * k).sqrt();
    let got = measured_ratio(&rs, &us, &ts, omega);
    assert!((got - expect).abs() / expect < 0.02, "{got} vs {expect}");
}

#[test]
fn wrench_reconstruction_is_exact_in_statics() {
    let model = hhm();
    let mut rng = random::rng(21);
    let mut checked = 0;
    while checked < 200 {
        let q = DVector::from_fn(6, |_, _| rng.random_range(-2.0..2.0));
        let j: DMatrix<f64> = model.jacobian(&q);
        let sv = j.clone().svd(false, false).singular_values;
        if sv.min() < 1e-2 * sv.max() {
            continue;
        }
        let f = random::vec6(&mut rng, 500.0);
        let r = j.transpose() * f;
        let s = reconstruct_wrench(&j, &r);
        assert!(!s.degraded);
        let got = Vec6::from_column_slice(s.value.as_slice());
        assert!((got - f).norm() < 1e-9 * f.norm(), "{got} vs {f}");
        checked += 1;
    }
}

#[test]
fn estimate_sign_matches_applied_wrench() {
    let model = hhm();
    let q = DVector::from_column_slice(&[0.2, -0.4, 1.2, 0.1, 0.8, 0.3]);
    let qd = DVector::zeros(6);
    let w = Vec6::new(0.0, 300.0, 0.0, 0.0, 0.0, 0.0);
    let tau = model.gravity_torques(&q) - model.jacobian(&q).transpose() * w;
    let mut obs = observer(&model, 100.0, &q, &qd);
    let (mut q1, mut qd1) = (q.clone(), qd.clone());
    for _ in 0..200 {
        rk4(&model, &mut q1, &mut qd1, &tau, Some(&w), 1e-3);
        obs.step(&model, &tau, &q1, &qd1, 1e-3).unwrap();
    }
    let est = obs.estimate_wrench(&model.jacobian(&q1), 1e-3);
    assert!((est.wrench - w).norm() < 1e-3 * w.norm(), "{}", est.wrench);
}
