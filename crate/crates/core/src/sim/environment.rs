//! Unilateral spring–damper contact surface.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::{Vec3, Vec6};

/// Half-space `n·p > offset` filled with compliant material.
///
/// `normal` points into the material, so the penetration depth is
/// `δ = n·p − offset`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub normal: Vec3,
    pub offset: f64,
    pub stiffness: f64,
    pub damping: f64,
    pub mass: f64,
}

impl Environment {
    pub fn new(normal: Vec3, offset: f64, stiffness: f64, damping: f64, mass: f64) -> Result<Self> {
        let n = normal.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidInput("surface normal must be non-zero".into()));
        }
        if !(stiffness >= 0.0 && damping >= 0.0 && mass >= 0.0) {
            return Err(Error::InvalidInput(
                "environment stiffness, damping and mass must be non-negative".into(),
            ));
        }
        Ok(Self {
            normal: normal / n,
            offset,
            stiffness,
            damping,
            mass,
        })
    }

    pub fn penetration(&self, position: &Vec3) -> f64 {
        self.normal.dot(position) - self.offset
    }
}

/// Force `[f; 0]` the tip exerts on the surface. Zero outside the material and
/// never pulling (no adhesion).
pub fn environment_force(env: &Environment, position: &Vec3, velocity: &Vec3, acceleration: &Vec3) -> Vec6 {
    let depth = env.penetration(position);
    if depth <= 0.0 {
        return Vec6::zeros();
    }
    let vn = env.normal.dot(velocity);
    let an = env.normal.dot(acceleration);
    let magnitude = (env.stiffness * depth + env.damping * vn + env.mass * an).max(0.0);
    let f = env.normal * magnitude;
    Vec6::new(f.x, f.y, f.z, 0.0, 0.0, 0.0)
}
