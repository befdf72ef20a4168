//! Inertial parameter vector `φ ∈ ℝ¹⁰` and its pseudo-inertia image `L ∈ S(4)`.

use nalgebra::{Matrix4, SVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::spatial::{blocks, inertia_from_params, skew, FrameId, Mat3, SpatialInertia, Vec3};

pub type Phi = SVector<f64, 10>;

/// `φ = (m, hx, hy, hz, Ixx, Iyy, Izz, Ixy, Ixz, Iyz)` about the body frame origin.
///
/// `h = m·c` is the first mass moment and `I` the rotational inertia about the
/// frame origin (not the centre of mass).
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InertialParams {
    pub phi: Phi,
}

impl InertialParams {
    pub fn from_vector(phi: Phi) -> Self {
        Self { phi }
    }

    pub fn zero() -> Self {
        Self { phi: Phi::zeros() }
    }

    /// From mass, centre of mass and inertia about the centre of mass (body axes).
    pub fn from_com(mass: f64, com: Vec3, inertia_com: Mat3) -> Result<Self> {
        let m = inertia_from_params(mass, &com, &Mat3::identity(), &inertia_com, FrameId::WORLD)?;
        Ok(Self::from_parts(mass, m.first_moment(), &m.rotational()))
    }

    pub fn from_parts(mass: f64, first_moment: Vec3, inertia: &Mat3) -> Self {
        let i = inertia;
        let mut phi = Phi::zeros();
        phi[0] = mass;
        phi[1] = first_moment.x;
        phi[2] = first_moment.y;
        phi[3] = first_moment.z;
        phi[4] = i[(0, 0)];
        phi[5] = i[(1, 1)];
        phi[6] = i[(2, 2)];
        phi[7] = i[(0, 1)];
        phi[8] = i[(0, 2)];
        phi[9] = i[(1, 2)];
        Self { phi }
    }

    pub fn mass(&self) -> f64 {
        self.phi[0]
    }

    pub fn first_moment(&self) -> Vec3 {
        Vec3::new(self.phi[1], self.phi[2], self.phi[3])
    }

    pub fn rotational(&self) -> Mat3 {
        let p = &self.phi;
        Mat3::new(p[4], p[7], p[8], p[7], p[5], p[9], p[8], p[9], p[6])
    }

    /// `M = [[m·1, −h×], [h×, I]]`. No consistency check is made.
    pub fn spatial_inertia(&self, frame: FrameId) -> SpatialInertia {
        let hx = skew(&self.first_moment());
        SpatialInertia {
            matrix: blocks(
                &(Mat3::identity() * self.mass()),
                &(-hx),
                &hx,
                &self.rotational(),
            ),
            frame,
        }
    }

    pub fn to_pseudo(&self) -> PseudoInertia {
        phi_to_pseudo(self)
    }
}

/// 4×4 symmetric pseudo-inertia `L = [[Σ, h], [hᵀ, m]]`, `Σ = ½tr(I)·1 − I`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct PseudoInertia {
    pub matrix: Matrix4<f64>,
}

impl PseudoInertia {
    pub fn new(matrix: Matrix4<f64>) -> Self {
        Self { matrix }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.matrix).eigenvalues.min()
    }

    pub fn to_phi(&self) -> InertialParams {
        pseudo_to_phi(self)
    }
}

pub fn phi_to_pseudo(params: &InertialParams) -> PseudoInertia {
    let i = params.rotational();
    let sigma = Mat3::identity() * (0.5 * i.trace()) - i;
    let h = params.first_moment();
    let mut l = Matrix4::zeros();
    l.fixed_view_mut::<3, 3>(0, 0).copy_from(&sigma);
    l.fixed_view_mut::<3, 1>(0, 3).copy_from(&h);
    l.fixed_view_mut::<1, 3>(3, 0).copy_from(&h.transpose());
    l[(3, 3)] = params.mass();
    PseudoInertia { matrix: l }
}

/// Inverse map; the input is symmetrised first.
pub fn pseudo_to_phi(l: &PseudoInertia) -> InertialParams {
    let l = (l.matrix + l.matrix.transpose()) * 0.5;
    let sigma: Mat3 = l.fixed_view::<3, 3>(0, 0).into_owned();
    let i = Mat3::identity() * sigma.trace() - sigma;
    let h = Vec3::new(l[(0, 3)], l[(1, 3)], l[(2, 3)]);
    InertialParams::from_parts(l[(3, 3)], h, &i)
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Consistency {
    pub consistent: bool,
    pub min_eigenvalue: f64,
}

/// Physically consistent iff the pseudo-inertia is positive definite.
pub fn consistency_check(params: &InertialParams) -> Consistency {
    let min_eigenvalue = phi_to_pseudo(params).min_eigenvalue();
    Consistency {
        consistent: min_eigenvalue > 0.0,
        min_eigenvalue,
    }
}

/// Uniform box of side lengths `dims` centred at `center` (body axes).
pub fn uniform_box(mass: f64, dims: Vec3, center: Vec3) -> Result<InertialParams> {
    let (a, b, c) = (dims.x, dims.y, dims.z);
    let k = mass / 12.0;
    let inertia = Mat3::from_diagonal(&Vec3::new(k * (b * b + c * c), k * (a * a + c * c), k * (a * a + b * b)));
    InertialParams::from_com(mass, center, inertia)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn unit_params_map_to_half_identity() {
        let p = InertialParams::from_parts(1.0, Vec3::zeros(), &Mat3::identity());
        let l = phi_to_pseudo(&p);
        assert_relative_eq!(
            l.matrix,
            Matrix4::from_diagonal(&nalgebra::Vector4::new(0.5, 0.5, 0.5, 1.0))
        );
    }

    #[test]
    fn box_is_consistent() {
        let p = uniform_box(10.0, Vec3::new(0.4, 0.2, 0.1), Vec3::new(0.3, -0.1, 0.05)).unwrap();
        let c = consistency_check(&p);
        assert!(c.consistent);
        assert!(c.min_eigenvalue > 0.0);
        // Second moments of a uniform box about its centre are m·d²/12 per axis,
        // which is exactly the Σ block of the pseudo-inertia about the centre.
        let centred = uniform_box(10.0, Vec3::new(0.4, 0.2, 0.1), Vec3::zeros()).unwrap();
        let sigma = centred.to_pseudo().matrix;
        assert_relative_eq!(sigma[(0, 0)], 10.0 * 0.16 / 12.0, epsilon = 1e-14);
        assert_relative_eq!(sigma[(1, 1)], 10.0 * 0.04 / 12.0, epsilon = 1e-14);
        assert_relative_eq!(sigma[(2, 2)], 10.0 * 0.01 / 12.0, epsilon = 1e-14);
    }

    #[test]
    fn negative_mass_and_zero_are_inconsistent() {
        let mut p = InertialParams::from_parts(1.0, Vec3::zeros(), &Mat3::identity());
        p.phi[0] = -1.0;
        assert!(!consistency_check(&p).consistent);
        let z = consistency_check(&InertialParams::zero());
        assert!(!z.consistent);
        assert_eq!(z.min_eigenvalue, 0.0);
    }

    #[test]
    fn spatial_inertia_matches_com_construction() {
        let com = Vec3::new(0.2, -0.3, 0.5);
        let ic = Mat3::new(2.0, 0.1, 0.0, 0.1, 3.0, -0.2, 0.0, -0.2, 1.5);
        let p = InertialParams::from_com(4.0, com, ic).unwrap();
        let direct = inertia_from_params(4.0, &com, &Mat3::identity(), &ic, FrameId(3)).unwrap();
        assert_relative_eq!(p.spatial_inertia(FrameId(3)).matrix, direct.matrix, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn pseudo_round_trip(v in proptest::collection::vec(-10.0f64..10.0, 10)) {
            let p = InertialParams::from_vector(Phi::from_column_slice(&v));
            let back = pseudo_to_phi(&phi_to_pseudo(&p));
            prop_assert!((back.phi - p.phi).abs().max() < 1e-12);
        }

        #[test]
        fn pseudo_map_is_linear(
            a in -3.0f64..3.0, b in -3.0f64..3.0,
            v1 in proptest::collection::vec(-10.0f64..10.0, 10),
            v2 in proptest::collection::vec(-10.0f64..10.0, 10),
        ) {
            let p1 = Phi::from_column_slice(&v1);
            let p2 = Phi::from_column_slice(&v2);
            let lhs = phi_to_pseudo(&InertialParams::from_vector(p1 * a + p2 * b)).matrix;
            let rhs = phi_to_pseudo(&InertialParams::from_vector(p1)).matrix * a
                + phi_to_pseudo(&InertialParams::from_vector(p2)).matrix * b;
            prop_assert!((lhs - rhs).abs().max() < 1e-11);
        }
    }
}
