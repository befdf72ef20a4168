use hydrasim::adaptive::{bregman_divergence, build_s, nal_step, NalState};
use hydrasim::harness::{
    bregman_extremes, tip_power_ratios, nal_min_eigenvalue, quaternion_error_extremes, random, Implementations,
};
use hydrasim::impedance::{
    derive_gains, quaternion_error, quaternion_parts, required_cartesian_velocity, ImpedanceSpec, PoseError,
};
use hydrasim::model::{regressor, PseudoInertia};
use hydrasim::spatial::{Vec3, Vec6};
use nalgebra::{Matrix4, SMatrix, UnitQuaternion};
use proptest::prelude::*;

fn vec6(scale: f64) -> impl Strategy<Value = Vec6> {
    prop::array::uniform6(-scale..scale).prop_map(|a| Vec6::from_column_slice(&a))
}

fn spec() -> impl Strategy<Value = ImpedanceSpec> {
    (prop::array::uniform6(1e2..1e6f64), prop::array::uniform6(1e2..1e5f64), vec6(100.0)).prop_map(|(k, d, f)| {
        ImpedanceSpec {
            inertia: Vec6::zeros(),
            stiffness: Vec6::from_column_slice(&k),
            damping: Vec6::from_column_slice(&d),
            desired_wrench: f,
        }
    })
}

fn pose_error(v: Vec6) -> PoseError {
    PoseError {
        position: v.fixed_rows::<3>(0).into(),
        orientation: v.fixed_rows::<3>(3).into(),
    }
}

proptest! {
    #[test]
    fn required_velocity_superposition(
        s in spec(), xd in vec6(1.0), e1 in vec6(0.1), e2 in vec6(0.1), f1 in vec6(500.0), f2 in vec6(500.0),
        a in -2.0..2.0f64,
    ) {
        let g = derive_gains(&s).unwrap();
        let fed = s.desired_wrench;
        let call = |xd: &Vec6, e: Vec6, f: &Vec6| required_cartesian_velocity(xd, &pose_error(e), &fed, f, &g);
        let base = call(&xd, e1, &f1);
        // Affine in the pose error.
        let de = call(&xd, e1 + e2 * a, &f1) - base;
        let de_expect = (call(&xd, e2, &f1) - call(&xd, Vec6::zeros(), &f1)) * a;
        prop_assert!((de - de_expect).norm() <= 1e-9 * (1.0 + de.norm()));
        // Affine in the filtered force.
        let df = call(&xd, e1, &(f1 + f2 * a)) - base;
        let df_expect = (call(&xd, e1, &f2) - call(&xd, e1, &Vec6::zeros())) * a;
        prop_assert!((df - df_expect).norm() <= 1e-9 * (1.0 + df.norm()));
        // Additive in the feed-forward velocity.
        let dx = call(&(xd * 2.0), e1, &f1) - base;
        prop_assert!((dx - xd).norm() <= 1e-12 * (1.0 + xd.norm()) * 10.0);
    }

    #[test]
    fn equal_rotations_give_zero_error(v in prop::array::uniform3(-3.0..3.0f64), flip in any::<bool>()) {
        let q = UnitQuaternion::from_scaled_axis(Vec3::from(v));
        let (eta, eps) = quaternion_parts(&q);
        let s = if flip { -1.0 } else { 1.0 };
        prop_assert!(quaternion_error(s * eta, &(eps * s), eta, &eps).norm() < 1e-12);
    }

    #[test]
    fn bregman_is_nonnegative(seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let a = PseudoInertia::new(random::spd4(&mut rng, 0.05, 20.0));
        let b = PseudoInertia::new(random::spd4(&mut rng, 0.05, 20.0));
        prop_assert!(bregman_divergence(&a, &b).unwrap() >= 0.0);
        prop_assert!(bregman_divergence(&a, &a).unwrap().abs() < 1e-10);
    }
}

#[test]
fn quaternion_error_vanishes_only_for_equal_rotations() {
    let (equal, distinct) = quaternion_error_extremes(&Implementations::default(), 1000, 2);
    assert!(equal < 1e-9, "{equal:e}");
    // ‖e_o‖ = |sin(θ/2)| for relative angle θ.
    assert!((distinct - 1.0).abs() < 1e-9, "{distinct}");
}

#[test]
fn quaternion_error_is_half_angle_sine() {
    let a = UnitQuaternion::from_scaled_axis(Vec3::new(0.1, 0.2, -0.3));
    for angle in [1e-6, 0.1, 1.0, 3.0] {
        let b = UnitQuaternion::from_scaled_axis(Vec3::new(0.0, 0.0, angle)) * a;
        let (eta, eps) = quaternion_parts(&a);
        let (eta_d, eps_d) = quaternion_parts(&b);
        let e = quaternion_error(eta, &eps, eta_d, &eps_d);
        assert!((e.norm() - (angle / 2.0).sin()).abs() < 1e-12);
    }
}

#[test]
fn tip_power_vanishes_only_for_conforming_gains() {
    let (conforming, perturbed) = tip_power_ratios(1000, 4, 1.1).unwrap();
    assert!(conforming <= 1e-9, "{conforming:e}");
    assert!(perturbed >= 1e-9 * 1e3, "{perturbed:e}");
}

#[test]
fn bregman_spot_value_and_identity() {
    let (min, same, spot) = bregman_extremes(&Implementations::default(), 1000, 6).unwrap();
    assert!(min > 0.0);
    assert!(same < 1e-10);
    assert!(spot < 1e-12, "{spot:e}");
}

#[test]
fn nal_keeps_estimate_positive_definite() {
    let min = nal_min_eigenvalue(100_000, 9, 500.0, 1e-3).unwrap();
    assert!(min > 0.0);
}

#[test]
fn nal_step_keeps_symmetry_exactly() {
    let mut rng = random::rng(10);
    let mut st = NalState::new(PseudoInertia::new(random::spd4(&mut rng, 0.5, 2.0)), 500.0, 1e-6).unwrap();
    for _ in 0..1000 {
        let s = random::spd4(&mut rng, -1.0, 1.0) * 50.0;
        nal_step(&mut st, &s, 1e-3).unwrap();
        let l = st.estimate.matrix;
        assert_eq!(l, l.transpose());
    }
}

/// `⟨𝒮, L(φ)⟩ = (Yᵀ e)ᵀ φ` for every basis vector of the parameter space.
#[test]
fn build_s_pairs_with_the_regressor() {
    let mut rng = random::rng(11);
    for _ in 0..20 {
        let v = random::vec6(&mut rng, 2.0);
        let y = regressor(
            &Vec3::new(v[3], v[4], v[5]),
            &random::vec6(&mut rng, 2.0),
            &random::vec6(&mut rng, 5.0),
            &random::vec3(&mut rng, 9.81),
        );
        let e = random::vec6(&mut rng, 1.0);
        let s: Matrix4<f64> = build_s(&y, &e);
        let yte = y.transpose() * e;
        for k in 0..10 {
            let mut phi = SMatrix::<f64, 10, 1>::zeros();
            phi[k] = 1.0;
            let l = hydrasim::model::phi_to_pseudo(&hydrasim::model::InertialParams::from_vector(phi)).matrix;
            let pairing = s.component_mul(&l).sum();
            assert!((pairing - yte[k]).abs() < 1e-12 * (1.0 + yte[k].abs()), "basis {k}");
        }
    }
}
