//! TOML model description.
//!
//! ```toml
//! version = 1
//! name = "arm"
//! gravity_m_per_s2 = [0.0, 0.0, -9.81]
//!
//! [tool]
//! offset_m = [0.5, 0.0, 0.0]
//! rpy_rad = [0.0, 0.0, 0.0]
//!
//! [[joint]]
//! name = "slew"
//! kind = "revolute"
//! axis = [0.0, 0.0, 1.0]
//! offset_m = [0.0, 0.0, 0.0]
//! rpy_rad = [0.0, 0.0, 0.0]
//! limits_rad = [-3.1, 3.1]
//! mass_kg = 200.0
//! com_m = [0.0, 0.0, 0.5]
//! inertia_com_kg_m2 = [50.0, 50.0, 10.0, 0.0, 0.0, 0.0]   # xx yy zz xy xz yz
//! ```

use std::path::Path;

use nalgebra::{DVector, Rotation3};
use serde::{Deserialize, Serialize};

use super::{InertialParams, JointSpec, ManipulatorModel};
use crate::error::{Error, Result};
use crate::spatial::{Mat3, UnitScrew, Vec3};

pub const MODEL_FILE_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub version: u32,
    pub name: String,
    #[serde(default = "default_gravity")]
    pub gravity_m_per_s2: [f64; 3],
    pub tool: ToolEntry,
    #[serde(rename = "joint")]
    pub joints: Vec<JointEntry>,
}

fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, -super::DEFAULT_GRAVITY]
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ToolEntry {
    pub offset_m: [f64; 3],
    #[serde(default)]
    pub rpy_rad: [f64; 3],
}

#[derive(Copy, Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Revolute,
    Prismatic,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct JointEntry {
    pub name: String,
    pub kind: JointKind,
    pub axis: [f64; 3],
    pub offset_m: [f64; 3],
    #[serde(default)]
    pub rpy_rad: [f64; 3],
    pub limits_rad: [f64; 2],
    pub mass_kg: f64,
    pub com_m: [f64; 3],
    pub inertia_com_kg_m2: [f64; 6],
}

fn rpy(a: &[f64; 3]) -> Rotation3<f64> {
    Rotation3::from_euler_angles(a[0], a[1], a[2])
}

impl ModelFile {
    pub fn parse_str(text: &str) -> Result<Self> {
        Self::parse_named(text, Path::new("<model>"))
    }

    fn parse_named(text: &str, path: &Path) -> Result<Self> {
        let f: ModelFile = toml::from_str(text).map_err(|e| Error::config(path, e.to_string()))?;
        if f.version != MODEL_FILE_VERSION {
            return Err(Error::config(
                path,
                format!("unsupported model file version {} (expected {MODEL_FILE_VERSION})", f.version),
            ));
        }
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_named(&text, path)
    }

    pub fn build(&self) -> Result<ManipulatorModel> {
        let mut joints = Vec::with_capacity(self.joints.len());
        let mut bodies = Vec::with_capacity(self.joints.len());
        for j in &self.joints {
            let axis = Vec3::from(j.axis);
            let screw = match j.kind {
                JointKind::Revolute => UnitScrew::revolute(axis)?,
                JointKind::Prismatic => UnitScrew::prismatic(axis)?,
            };
            joints.push(JointSpec {
                name: j.name.clone(),
                screw,
                offset_rotation: rpy(&j.rpy_rad),
                offset_translation: Vec3::from(j.offset_m),
                limits: (j.limits_rad[0], j.limits_rad[1]),
            });
            let i = &j.inertia_com_kg_m2;
            let ic = Mat3::new(i[0], i[3], i[4], i[3], i[1], i[5], i[4], i[5], i[2]);
            bodies.push(InertialParams::from_com(j.mass_kg, Vec3::from(j.com_m), ic)?);
        }
        ManipulatorModel::new(
            self.name.clone(),
            joints,
            bodies,
            Vec3::from(self.gravity_m_per_s2),
            rpy(&self.tool.rpy_rad),
            Vec3::from(self.tool.offset_m),
        )
    }
}

impl ManipulatorModel {
    pub fn from_file(path: &Path) -> Result<Self> {
        ModelFile::load(path)?.build()
    }

    /// Planar arm with two revolute joints about `z`, links along `x` and
    /// gravity along `−y`. Each link is a slender bar with its centre of mass
    /// at mid-length.
    pub fn planar_two_link(lengths: [f64; 2], masses: [f64; 2]) -> Result<Self> {
        let mut joints = Vec::new();
        let mut bodies = Vec::new();
        for k in 0..2 {
            let (l, m) = (lengths[k], masses[k]);
            joints.push(JointSpec {
                name: format!("j{}", k + 1),
                screw: UnitScrew::revolute(Vec3::z())?,
                offset_rotation: Rotation3::identity(),
                offset_translation: if k == 0 { Vec3::zeros() } else { Vec3::new(lengths[0], 0.0, 0.0) },
                limits: (-std::f64::consts::PI * 2.0, std::f64::consts::PI * 2.0),
            });
            let izz = m * l * l / 12.0;
            let ic = Mat3::from_diagonal(&Vec3::new(izz * 1e-3, izz, izz));
            bodies.push(InertialParams::from_com(m, Vec3::new(l / 2.0, 0.0, 0.0), ic)?);
        }
        ManipulatorModel::new(
            "planar-2",
            joints,
            bodies,
            Vec3::new(0.0, -super::DEFAULT_GRAVITY, 0.0),
            Rotation3::identity(),
            Vec3::new(lengths[1], 0.0, 0.0),
        )
    }

    /// Joint positions in the middle of every limit range.
    pub fn mid_range(&self) -> DVector<f64> {
        DVector::from_iterator(self.dof(), self.joints.iter().map(|j| 0.5 * (j.limits.0 + j.limits.1)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_model_parses() {
        let m = ManipulatorModel::default_hhm();
        assert_eq!(m.dof(), 6);
        let total: f64 = m.bodies.iter().map(|b| b.mass()).sum();
        assert!(total > 500.0);
        for b in &m.bodies {
            assert!(crate::model::consistency_check(b).consistent);
        }
    }

    #[test]
    fn bad_version_and_unknown_keys_rejected() {
        let text = include_str!("../../models/hhm6.toml");
        let bumped = text.replacen("version = 1", "version = 2", 1);
        assert!(matches!(ModelFile::parse_str(&bumped), Err(Error::Config { .. })));
        let extra = format!("bogus = 3\n{text}");
        let err = ModelFile::parse_str(&extra).unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn round_trip_through_toml() {
        let f = ModelFile::parse_str(include_str!("../../models/hhm6.toml")).unwrap();
        let text = toml::to_string(&f).unwrap();
        assert_eq!(ModelFile::parse_str(&text).unwrap(), f);
    }

    #[test]
    fn negative_mass_rejected() {
        let text = include_str!("../../models/hhm6.toml").replacen("mass_kg = 200.0", "mass_kg = -1.0", 1);
        let f = ModelFile::parse_str(&text).unwrap();
        assert!(f.build().is_err());
    }
}
