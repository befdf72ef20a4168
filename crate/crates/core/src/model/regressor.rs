//! Closed-form body regressor: `Y φ = M V̇_r + C(ω) V_r + G`.

use nalgebra::SMatrix;

use crate::spatial::{skew, Mat3, Vec3, Vec6};

pub type Regressor = SMatrix<f64, 6, 10>;

/// `L(x) θ = I x` for `θ = (Ixx, Iyy, Izz, Ixy, Ixz, Iyz)`.
fn inertia_map(x: &Vec3) -> SMatrix<f64, 3, 6> {
    SMatrix::<f64, 3, 6>::from_row_slice(&[
        x.x, 0.0, 0.0, x.y, x.z, 0.0, //
        0.0, x.y, 0.0, x.x, 0.0, x.z, //
        0.0, 0.0, x.z, 0.0, x.x, x.y,
    ])
}

/// `omega` is the actual angular velocity, `v_r`/`a_r` the required twist and
/// its derivative, `g_body` gravity in body coordinates. All in one body frame.
pub fn regressor(omega: &Vec3, v_r: &Vec6, a_r: &Vec6, g_body: &Vec3) -> Regressor {
    let u = Vec3::new(v_r[0], v_r[1], v_r[2]);
    let w = Vec3::new(v_r[3], v_r[4], v_r[5]);
    let al = Vec3::new(a_r[0], a_r[1], a_r[2]);
    let aw = Vec3::new(a_r[3], a_r[4], a_r[5]);
    let lin = al + omega.cross(&u) - g_body;
    let wx = skew(omega);

    let mut y = Regressor::zeros();
    y.fixed_view_mut::<3, 1>(0, 0).copy_from(&lin);
    let hl: Mat3 = skew(&aw) + wx * skew(&w);
    y.fixed_view_mut::<3, 3>(0, 1).copy_from(&hl);
    y.fixed_view_mut::<3, 3>(3, 1).copy_from(&(-skew(&lin)));
    let li = inertia_map(&aw)
        + (wx * inertia_map(&w) + inertia_map(&omega.cross(&w)) + skew(&w) * inertia_map(omega)) * 0.5;
    y.fixed_view_mut::<3, 6>(3, 4).copy_from(&li);
    y
}
