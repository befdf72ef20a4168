use hydrasim::harness::{inertia_rate_deviation, random, Implementations};
use hydrasim::spatial::{
    inertia_from_params, inertia_rate, spatial_momentum, FrameId, ForceVec, Mat3, MotionVec, SpatialInertia,
    SpatialTransform, Vec3, Vec6,
};
use nalgebra::Rotation3;
use proptest::prelude::*;

const A: FrameId = FrameId(100);
const B: FrameId = FrameId(101);
const C: FrameId = FrameId(102);

fn vec3(scale: f64) -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-scale..scale).prop_map(Vec3::from)
}

fn vec6(scale: f64) -> impl Strategy<Value = Vec6> {
    prop::array::uniform6(-scale..scale).prop_map(|a| Vec6::from_column_slice(&a))
}

fn rotation() -> impl Strategy<Value = Rotation3<f64>> {
    vec3(std::f64::consts::PI).prop_map(Rotation3::new)
}

fn transform(base: FrameId, target: FrameId) -> impl Strategy<Value = SpatialTransform> {
    (rotation(), vec3(3.0)).prop_map(move |(r, p)| SpatialTransform::from_rotation(&r, p, base, target))
}

fn inertia(frame: FrameId) -> impl Strategy<Value = SpatialInertia> {
    (0.1..100.0f64, vec3(1.0), rotation(), prop::array::uniform3(0.01..10.0f64)).prop_map(move |(m, c, r, d)| {
        inertia_from_params(m, &c, r.matrix(), &Mat3::from_diagonal(&Vec3::from(d)), frame).unwrap()
    })
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn transform_preserves_power(u in transform(A, B), v in vec6(5.0), f in vec6(100.0)) {
        let va = MotionVec::from_vector(v, A);
        let fb = ForceVec::from_vector(f, B);
        let vb = u.motion_to_target(&va).unwrap();
        let fa = u.force_to_base(&fb).unwrap();
        let pa = va.dot(&fa).unwrap();
        let pb = vb.dot(&fb).unwrap();
        let scale = va.vector.norm() * fa.vector.norm() + vb.vector.norm() * fb.vector.norm();
        prop_assert!(rel(pa, pb, scale) < 1e-12, "{pa} vs {pb}");
    }

    #[test]
    fn composition_matches_direct(ab in transform(A, B), bc in transform(B, C), v in vec6(5.0), f in vec6(100.0)) {
        let ac = ab.compose(&bc).unwrap();
        let va = MotionVec::from_vector(v, A);
        let two = bc.motion_to_target(&ab.motion_to_target(&va).unwrap()).unwrap();
        let one = ac.motion_to_target(&va).unwrap();
        prop_assert!((two.vector - one.vector).norm() <= 1e-12 * (1.0 + one.vector.norm()) * 10.0);
        let fc = ForceVec::from_vector(f, C);
        let two = ab.force_to_base(&bc.force_to_base(&fc).unwrap()).unwrap();
        let one = ac.force_to_base(&fc).unwrap();
        prop_assert!((two.vector - one.vector).norm() <= 1e-12 * (1.0 + one.vector.norm()) * 10.0);
    }

    #[test]
    fn inverse_round_trip(u in transform(A, B), v in vec6(5.0)) {
        let va = MotionVec::from_vector(v, A);
        let back = u.inverse().motion_to_target(&u.motion_to_target(&va).unwrap()).unwrap();
        prop_assert_eq!(back.frame, A);
        prop_assert!((back.vector - v).norm() < 1e-12 * (1.0 + v.norm()) * 10.0);
    }

    #[test]
    fn momentum_transforms_like_a_force(u in transform(A, B), m in inertia(B), v in vec6(3.0)) {
        // H_A = U H_B with M_A = U M_B Uᵀ and V_B = Uᵀ V_A.
        let va = MotionVec::from_vector(v, A);
        let vb = u.motion_to_target(&va).unwrap();
        let hb = spatial_momentum(&m, &vb).unwrap();
        let ma = u.inertia_to_base(&m).unwrap();
        let ha = spatial_momentum(&ma, &va).unwrap();
        let via = u.force_to_base(&hb).unwrap();
        prop_assert!((ha.vector - via.vector).norm() <= 1e-10 * (1.0 + ha.vector.norm()));
    }

    #[test]
    fn inertia_is_symmetric_positive_definite(m in inertia(A)) {
        prop_assert!((m.matrix - m.matrix.transpose()).norm() == 0.0);
        prop_assert!(m.min_eigenvalue() > 0.0);
    }

    #[test]
    fn inertia_rate_is_symmetric(m in inertia(A), v in vec6(3.0)) {
        let r = inertia_rate(&m, &MotionVec::from_vector(v, A)).unwrap();
        let sym = r + r.transpose();
        prop_assert!((sym - r * 2.0).norm() <= 1e-12 * (1.0 + r.norm()) * 10.0);
    }
}

#[test]
fn inertia_rate_matches_finite_differences() {
    let worst = inertia_rate_deviation(&Implementations::default(), 200, 99).unwrap();
    assert!(worst < 1e-5, "worst relative deviation {worst:e}");
}

#[test]
fn frame_mismatch_is_reported() {
    let mut rng = random::rng(1);
    let m = random::inertia(&mut rng, A);
    let v = MotionVec::zero(B);
    assert!(inertia_rate(&m, &v).is_err());
    assert!(spatial_momentum(&m, &v).is_err());
}
