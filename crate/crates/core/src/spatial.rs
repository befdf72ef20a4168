//! Plücker-coordinate spatial vector algebra.
//!
//! Layout is `[linear; angular]` for both motion vectors `V = [v; ω]` and
//! force vectors `F = [f; m]`. Every vector carries the id of the frame it is
//! expressed in, and every operation checks frames before combining values.
//!
//! A [`SpatialTransform`] `ᴬU_B` is built from the rotation `ᴬR_B` and the
//! offset `ᴬr_AB` (origin of B seen from A, in A coordinates):
//!
//! ```text
//! ᴬU_B = [ R        0 ]
//!        [ (r×)R    R ]
//! ```
//!
//! It maps forces from B to A (`ᴬF = ᴬU_B ᴮF`) and its transpose maps motion
//! from A to B (`ᴮV = ᴬU_Bᵀ ᴬV`).

use std::fmt;

use nalgebra::{Matrix3, Matrix6, Rotation3, SymmetricEigen, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Vec6 = Vector6<f64>;
pub type Mat6 = Matrix6<f64>;

/// Absolute tolerance used for algebraic identities (orthonormality, symmetry).
pub const ALGEBRAIC_TOL: f64 = 1e-12;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FrameId(pub u32);

impl FrameId {
    pub const WORLD: FrameId = FrameId(0);
    /// Contact frame `{T}` at the tool tip.
    pub const TIP: FrameId = FrameId(10_000);

    /// Frame attached to body `index` (0-based) at its joint.
    pub const fn body(index: usize) -> FrameId {
        FrameId(index as u32 + 1)
    }
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            FrameId::WORLD => write!(f, "{{world}}"),
            FrameId::TIP => write!(f, "{{T}}"),
            FrameId(n) => write!(f, "{{body {}}}", n - 1),
        }
    }
}

fn check_frame(expected: FrameId, found: FrameId) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::FrameMismatch { expected, found })
    }
}

/// Cross-product matrix: `skew(a) * b == a × b`.
pub fn skew(a: &Vec3) -> Mat3 {
    Mat3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

fn upper(v: &Vec6) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

fn lower(v: &Vec6) -> Vec3 {
    Vec3::new(v[3], v[4], v[5])
}

fn stack(a: &Vec3, b: &Vec3) -> Vec6 {
    Vec6::new(a.x, a.y, a.z, b.x, b.y, b.z)
}

pub(crate) fn blocks(tl: &Mat3, tr: &Mat3, bl: &Mat3, br: &Mat3) -> Mat6 {
    let mut m = Mat6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(tl);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(tr);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(bl);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(br);
    m
}

/// Spatial velocity `[v; ω]` (m/s, rad/s).
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct MotionVec {
    pub vector: Vec6,
    pub frame: FrameId,
}

impl MotionVec {
    pub fn new(linear: Vec3, angular: Vec3, frame: FrameId) -> Self {
        Self {
            vector: stack(&linear, &angular),
            frame,
        }
    }

    pub fn from_vector(vector: Vec6, frame: FrameId) -> Self {
        Self { vector, frame }
    }

    pub fn zero(frame: FrameId) -> Self {
        Self::from_vector(Vec6::zeros(), frame)
    }

    pub fn linear(&self) -> Vec3 {
        upper(&self.vector)
    }

    pub fn angular(&self) -> Vec3 {
        lower(&self.vector)
    }

    /// Duality pairing `Vᵀ F` (power).
    pub fn dot(&self, force: &ForceVec) -> Result<f64> {
        check_frame(self.frame, force.frame)?;
        Ok(self.vector.dot(&force.vector))
    }

    pub fn add(&self, other: &MotionVec) -> Result<MotionVec> {
        check_frame(self.frame, other.frame)?;
        Ok(MotionVec::from_vector(self.vector + other.vector, self.frame))
    }

    pub fn sub(&self, other: &MotionVec) -> Result<MotionVec> {
        check_frame(self.frame, other.frame)?;
        Ok(MotionVec::from_vector(self.vector - other.vector, self.frame))
    }

    /// Motion cross product `self × other`.
    pub fn cross_motion(&self, other: &MotionVec) -> Result<MotionVec> {
        check_frame(self.frame, other.frame)?;
        let (v, w) = (self.linear(), self.angular());
        let (v2, w2) = (other.linear(), other.angular());
        Ok(MotionVec::new(w.cross(&v2) + v.cross(&w2), w.cross(&w2), self.frame))
    }

    /// Force cross product `self ×* force`.
    pub fn cross_force(&self, force: &ForceVec) -> Result<ForceVec> {
        check_frame(self.frame, force.frame)?;
        let (v, w) = (self.linear(), self.angular());
        let (f, m) = (force.force(), force.moment());
        Ok(ForceVec::new(w.cross(&f), v.cross(&f) + w.cross(&m), self.frame))
    }
}

/// Spatial force `[f; m]` (N, N·m).
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ForceVec {
    pub vector: Vec6,
    pub frame: FrameId,
}

impl ForceVec {
    pub fn new(force: Vec3, moment: Vec3, frame: FrameId) -> Self {
        Self {
            vector: stack(&force, &moment),
            frame,
        }
    }

    pub fn from_vector(vector: Vec6, frame: FrameId) -> Self {
        Self { vector, frame }
    }

    pub fn zero(frame: FrameId) -> Self {
        Self::from_vector(Vec6::zeros(), frame)
    }

    pub fn force(&self) -> Vec3 {
        upper(&self.vector)
    }

    pub fn moment(&self) -> Vec3 {
        lower(&self.vector)
    }

    pub fn add(&self, other: &ForceVec) -> Result<ForceVec> {
        check_frame(self.frame, other.frame)?;
        Ok(ForceVec::from_vector(self.vector + other.vector, self.frame))
    }

    pub fn sub(&self, other: &ForceVec) -> Result<ForceVec> {
        check_frame(self.frame, other.frame)?;
        Ok(ForceVec::from_vector(self.vector - other.vector, self.frame))
    }

    pub fn scale(&self, k: f64) -> ForceVec {
        ForceVec::from_vector(self.vector * k, self.frame)
    }
}

/// `V×` for motion vectors: `[[ω×, v×], [0, ω×]]`.
pub fn motion_cross(v: &MotionVec) -> Mat6 {
    let w = skew(&v.angular());
    blocks(&w, &skew(&v.linear()), &Mat3::zeros(), &w)
}

/// `V×* = −(V×)ᵀ`, the dual operator acting on force vectors.
pub fn force_cross_dual(v: &MotionVec) -> Mat6 {
    -motion_cross(v).transpose()
}

/// Frame change `ᴬU_B` between a base frame A and a target frame B.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct SpatialTransform {
    rotation: Mat3,
    offset: Vec3,
    base: FrameId,
    target: FrameId,
}

impl SpatialTransform {
    /// Checks `RᵀR = I` and `det R = +1` within `tol`.
    pub fn new_with_tolerance(
        rotation: Mat3,
        offset: Vec3,
        base: FrameId,
        target: FrameId,
        tol: f64,
    ) -> Result<Self> {
        if !rotation.iter().chain(offset.iter()).all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("non-finite transform entry".into()));
        }
        let ortho = (rotation.transpose() * rotation - Mat3::identity()).abs().max();
        if ortho > tol {
            return Err(Error::InvalidRotation(format!(
                "RᵀR deviates from identity by {ortho:e}"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > tol {
            return Err(Error::InvalidRotation(format!("det R = {det}")));
        }
        Ok(Self {
            rotation,
            offset,
            base,
            target,
        })
    }

    pub fn new(rotation: Mat3, offset: Vec3, base: FrameId, target: FrameId) -> Result<Self> {
        Self::new_with_tolerance(rotation, offset, base, target, ALGEBRAIC_TOL)
    }

    /// Built from a `Rotation3`, which is orthonormal by construction.
    pub fn from_rotation(rotation: &Rotation3<f64>, offset: Vec3, base: FrameId, target: FrameId) -> Self {
        Self {
            rotation: *rotation.matrix(),
            offset,
            base,
            target,
        }
    }

    pub fn identity(base: FrameId, target: FrameId) -> Self {
        Self {
            rotation: Mat3::identity(),
            offset: Vec3::zeros(),
            base,
            target,
        }
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn offset(&self) -> &Vec3 {
        &self.offset
    }

    pub fn base(&self) -> FrameId {
        self.base
    }

    pub fn target(&self) -> FrameId {
        self.target
    }

    /// The 6×6 matrix `ᴬU_B`.
    pub fn matrix(&self) -> Mat6 {
        let r = self.rotation;
        blocks(&r, &Mat3::zeros(), &(skew(&self.offset) * r), &r)
    }

    /// `ᴮV = ᴬU_Bᵀ ᴬV`.
    pub fn motion_to_target(&self, v: &MotionVec) -> Result<MotionVec> {
        check_frame(self.base, v.frame)?;
        let rt = self.rotation.transpose();
        let w = v.angular();
        let lin = rt * (v.linear() + w.cross(&self.offset));
        Ok(MotionVec::new(lin, rt * w, self.target))
    }

    /// `ᴬV = ᴬU_B⁻ᵀ ᴮV`.
    pub fn motion_to_base(&self, v: &MotionVec) -> Result<MotionVec> {
        check_frame(self.target, v.frame)?;
        let w = self.rotation * v.angular();
        let lin = self.rotation * v.linear() + self.offset.cross(&w);
        Ok(MotionVec::new(lin, w, self.base))
    }

    /// `ᴬF = ᴬU_B ᴮF`.
    pub fn force_to_base(&self, f: &ForceVec) -> Result<ForceVec> {
        check_frame(self.target, f.frame)?;
        let fa = self.rotation * f.force();
        let ma = self.offset.cross(&fa) + self.rotation * f.moment();
        Ok(ForceVec::new(fa, ma, self.base))
    }

    /// `ᴮF = ᴬU_B⁻¹ ᴬF`.
    pub fn force_to_target(&self, f: &ForceVec) -> Result<ForceVec> {
        check_frame(self.base, f.frame)?;
        let rt = self.rotation.transpose();
        let fa = f.force();
        let mb = rt * (f.moment() - self.offset.cross(&fa));
        Ok(ForceVec::new(rt * fa, mb, self.target))
    }

    /// `ᴬU_B ∘ ᴮU_C = ᴬU_C`.
    pub fn compose(&self, next: &SpatialTransform) -> Result<SpatialTransform> {
        check_frame(self.target, next.base)?;
        Ok(SpatialTransform {
            rotation: self.rotation * next.rotation,
            offset: self.offset + self.rotation * next.offset,
            base: self.base,
            target: next.target,
        })
    }

    /// `ᴮU_A`.
    pub fn inverse(&self) -> SpatialTransform {
        let rt = self.rotation.transpose();
        SpatialTransform {
            rotation: rt,
            offset: -(rt * self.offset),
            base: self.target,
            target: self.base,
        }
    }

    /// `M_A = ᴬU_B M_B ᴬU_Bᵀ`.
    pub fn inertia_to_base(&self, m: &SpatialInertia) -> Result<SpatialInertia> {
        check_frame(self.target, m.frame)?;
        let u = self.matrix();
        let mat = u * m.matrix * u.transpose();
        Ok(SpatialInertia {
            matrix: (mat + mat.transpose()) * 0.5,
            frame: self.base,
        })
    }

    /// Position of a point given in target coordinates, expressed in base coordinates.
    pub fn point_to_base(&self, p: &Vec3) -> Vec3 {
        self.offset + self.rotation * p
    }
}

/// Motion vector given in `U.target` (B) re-expressed in `U.base` (A).
pub fn transform_motion(u: &SpatialTransform, v: &MotionVec) -> Result<MotionVec> {
    u.motion_to_base(v)
}

/// Force vector given in `U.target` (B) re-expressed in `U.base` (A): `ᴬF = ᴬU_B ᴮF`.
pub fn transform_force(u: &SpatialTransform, f: &ForceVec) -> Result<ForceVec> {
    u.force_to_base(f)
}

/// 6×6 spatial inertia expressed in a named frame.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct SpatialInertia {
    pub matrix: Mat6,
    pub frame: FrameId,
}

impl SpatialInertia {
    pub fn from_matrix(matrix: Mat6, frame: FrameId) -> Result<Self> {
        let asym = (matrix - matrix.transpose()).abs().max();
        let scale = matrix.abs().max().max(1.0);
        if asym > ALGEBRAIC_TOL * scale {
            return Err(Error::InvalidInput(format!(
                "spatial inertia not symmetric (max asymmetry {asym:e})"
            )));
        }
        Ok(Self { matrix, frame })
    }

    pub fn mass(&self) -> f64 {
        self.matrix[(0, 0)]
    }

    /// First mass moment `h = m·r`, read from the lower-left `m(r×)` block.
    pub fn first_moment(&self) -> Vec3 {
        let b = self.matrix.fixed_view::<3, 3>(3, 0);
        Vec3::new(b[(2, 1)], b[(0, 2)], b[(1, 0)])
    }

    pub fn rotational(&self) -> Mat3 {
        self.matrix.fixed_view::<3, 3>(3, 3).into_owned()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.matrix).eigenvalues.min()
    }

    /// Spatial momentum `H = M V`.
    pub fn momentum(&self, v: &MotionVec) -> Result<ForceVec> {
        check_frame(self.frame, v.frame)?;
        Ok(ForceVec::from_vector(self.matrix * v.vector, self.frame))
    }
}

/// Spatial inertia of a body about frame A.
///
/// `com` is `ᴬr_AB` (the centre of mass seen from A), `rotation` is `ᴬR_B` and
/// `inertia_body` is the rotational inertia about the centre of mass in B axes.
pub fn inertia_from_params(
    mass: f64,
    com: &Vec3,
    rotation: &Mat3,
    inertia_body: &Mat3,
    frame: FrameId,
) -> Result<SpatialInertia> {
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::InvalidInput(format!("mass must be positive, got {mass}")));
    }
    let asym = (inertia_body - inertia_body.transpose()).abs().max();
    if asym > ALGEBRAIC_TOL * inertia_body.abs().max().max(1.0) {
        return Err(Error::InvalidInput("body inertia is not symmetric".into()));
    }
    let min_eig = SymmetricEigen::new(*inertia_body).eigenvalues.min();
    if min_eig <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            what: "body rotational inertia",
            min_eigenvalue: min_eig,
        });
    }
    let rx = skew(com);
    let rot = rotation * inertia_body * rotation.transpose() - mass * rx * rx;
    let rot = (rot + rot.transpose()) * 0.5;
    let matrix = blocks(&(Mat3::identity() * mass), &(-mass * rx), &(mass * rx), &rot);
    Ok(SpatialInertia { matrix, frame })
}

/// Spatial momentum `H = M V` (a force-space vector).
pub fn spatial_momentum(m: &SpatialInertia, v: &MotionVec) -> Result<ForceVec> {
    m.momentum(v)
}

/// Rate of change of a body-fixed spatial inertia seen from a stationary frame
/// coinciding with its frame: `Ṁ = −(V×)ᵀ M − M (V×)`.
pub fn inertia_rate(m: &SpatialInertia, v: &MotionVec) -> Result<Mat6> {
    check_frame(m.frame, v.frame)?;
    let vx = motion_cross(v);
    Ok(-vx.transpose() * m.matrix - m.matrix * vx)
}

/// Joint axis `s = [s_t; s_r]`; exactly one half is a unit vector.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitScrew {
    pub translation: Vec3,
    pub rotation: Vec3,
}

impl UnitScrew {
    pub fn revolute(axis: Vec3) -> Result<Self> {
        let n = axis.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidInput("zero joint axis".into()));
        }
        Ok(Self {
            translation: Vec3::zeros(),
            rotation: axis / n,
        })
    }

    pub fn prismatic(axis: Vec3) -> Result<Self> {
        let n = axis.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidInput("zero joint axis".into()));
        }
        Ok(Self {
            translation: axis / n,
            rotation: Vec3::zeros(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let (t, r) = (self.translation.norm(), self.rotation.norm());
        let unit = |x: f64| (x - 1.0).abs() <= 1e-9;
        if (unit(t) && r == 0.0) || (unit(r) && t == 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "unit screw must have exactly one unit half (|s_t| = {t}, |s_r| = {r})"
            )))
        }
    }

    pub fn is_revolute(&self) -> bool {
        self.translation == Vec3::zeros()
    }

    pub fn vector(&self) -> Vec6 {
        stack(&self.translation, &self.rotation)
    }

    pub fn motion(&self, rate: f64, frame: FrameId) -> MotionVec {
        MotionVec::from_vector(self.vector() * rate, frame)
    }

    /// `sᵀ F`.
    pub fn project(&self, f: &ForceVec) -> f64 {
        self.vector().dot(&f.vector)
    }
}
