//! Scenario configuration (TOML, units in key names).

use std::path::{Path, PathBuf};

use nalgebra::{DVector, Rotation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::impedance::{derive_gains, DerivedGains, ImpedanceSpec};
use crate::model::{ManipulatorModel, Pose};
use crate::observer::ObserverConfig;
use crate::sim::environment::Environment;
use crate::sim::trajectory::Trajectory;
use crate::spatial::{Vec3, Vec6};

pub const SCENARIO_VERSION: u32 = 1;

/// Scenarios shipped with the crate, addressable by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("free-motion", include_str!("../../scenarios/free-motion.toml")),
    ("contact-y", include_str!("../../scenarios/contact-y.toml")),
    ("regulation", include_str!("../../scenarios/regulation.toml")),
];

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    #[default]
    SemiImplicitEuler,
    Rk4,
}

fn one() -> f64 {
    1.0
}

fn default_model() -> String {
    "hhm6".into()
}

fn default_max_speed() -> f64 {
    20.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpedanceSection {
    pub k_d_n_per_m: [f64; 3],
    pub k_d_nm_per_rad: [f64; 3],
    pub d_d_ns_per_m: [f64; 3],
    pub d_d_nms_per_rad: [f64; 3],
    /// Accepted and ignored by the control law.
    #[serde(default)]
    pub m_d_kg: [f64; 3],
    #[serde(default)]
    pub f_ed_n: [f64; 3],
    #[serde(default)]
    pub f_ed_nm: [f64; 3],
    /// Replaces the linear part of `Σ = D_d⁻¹` when set; `Γ` is unaffected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_m_per_ns: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_rad_per_nms: Option<[f64; 3]>,
    #[serde(default = "one")]
    pub gamma_scale: f64,
}

fn join(a: &[f64; 3], b: &[f64; 3]) -> Vec6 {
    Vec6::new(a[0], a[1], a[2], b[0], b[1], b[2])
}

impl ImpedanceSection {
    pub fn spec(&self) -> ImpedanceSpec {
        ImpedanceSpec {
            inertia: join(&self.m_d_kg, &[0.0; 3]),
            damping: join(&self.d_d_ns_per_m, &self.d_d_nms_per_rad),
            stiffness: join(&self.k_d_n_per_m, &self.k_d_nm_per_rad),
            desired_wrench: join(&self.f_ed_n, &self.f_ed_nm),
        }
    }

    pub fn gains(&self) -> Result<DerivedGains> {
        let mut g = derive_gains(&self.spec())?.with_gamma_scale(self.gamma_scale);
        if let Some(s) = self.sigma_m_per_ns {
            for k in 0..3 {
                g.sigma[(k, k)] = s[k];
            }
        }
        if let Some(s) = self.sigma_rad_per_nms {
            for k in 0..3 {
                g.sigma[(k + 3, k + 3)] = s[k];
            }
        }
        Ok(g)
    }

    /// Whether `Γ = K_d D_d⁻¹` and `Σ = D_d⁻¹` hold.
    pub fn conforming(&self) -> bool {
        self.gamma_scale == 1.0 && self.sigma_m_per_ns.is_none() && self.sigma_rad_per_nms.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSection {
    pub gain_per_s: f64,
    pub impact_threshold_nm: f64,
    pub filter_gain_per_s: f64,
}

impl Default for ObserverSection {
    fn default() -> Self {
        let d = ObserverConfig::default();
        Self {
            gain_per_s: d.gain[0],
            impact_threshold_nm: d.impact_threshold,
            filter_gain_per_s: d.filter_gain[0],
        }
    }
}

impl ObserverSection {
    pub fn config(&self) -> ObserverConfig {
        ObserverConfig {
            gain: Vec6::repeat(self.gain_per_s),
            impact_threshold: self.impact_threshold_nm,
            filter_gain: Vec6::repeat(self.filter_gain_per_s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    /// Arm bodies use `K_b = k · M_b`.
    pub arm_velocity_gain_per_s: f64,
    /// Tool body feedback `K_E = k · I + k_M · M̂_E`.
    pub tool_gain_ns_per_m: f64,
    /// `k_M`, weighting the initial tool inertia estimate `M̂_E`.
    #[serde(default)]
    pub tool_inertia_gain_per_s: f64,
    pub adapt_tool: bool,
    /// Initial tool estimate is the true parameter vector times this factor.
    pub tool_estimate_scale: f64,
    pub use_rbf: bool,
}

impl Default for ControlSection {
    fn default() -> Self {
        Self {
            arm_velocity_gain_per_s: 300.0,
            tool_gain_ns_per_m: 50.0,
            tool_inertia_gain_per_s: 0.0,
            adapt_tool: true,
            tool_estimate_scale: 0.5,
            use_rbf: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptationSection {
    pub gamma: f64,
    pub gamma0: f64,
    pub weight_rate: f64,
    pub bias_rate: f64,
    pub weight_leak: f64,
    pub bias_leak: f64,
    pub rbf_centers: usize,
    pub rbf_envelope_m_per_s: f64,
}

impl Default for AdaptationSection {
    fn default() -> Self {
        Self {
            gamma: 500.0,
            gamma0: 1e-6,
            weight_rate: 300.0,
            bias_rate: 10.0,
            weight_leak: 1e-3,
            bias_leak: 1e-3,
            rbf_centers: 32,
            rbf_envelope_m_per_s: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    /// Unit normal pointing into the material, world frame.
    pub normal: [f64; 3],
    /// Surface at `normal · p = offset_m`.
    pub offset_m: f64,
    pub k_f_n_per_m: f64,
    #[serde(default)]
    pub d_f_ns_per_m: f64,
    #[serde(default)]
    pub m_f_kg: f64,
}

impl EnvironmentSection {
    pub fn build(&self) -> Result<Environment> {
        Environment::new(
            Vec3::from(self.normal),
            self.offset_m,
            self.k_f_n_per_m,
            self.d_f_ns_per_m,
            self.m_f_kg,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSection {
    pub force_amplitude_n: f64,
    pub moment_amplitude_nm: f64,
    pub components: usize,
    pub max_frequency_hz: f64,
}

impl Default for DisturbanceSection {
    fn default() -> Self {
        Self {
            force_amplitude_n: 0.0,
            moment_amplitude_nm: 0.0,
            components: 3,
            max_frequency_hz: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointSection {
    /// Tip position relative to the initial tip position, world axes.
    pub offset_m: [f64; 3],
    /// Extra rotation applied to the initial orientation (roll, pitch, yaw about world axes).
    #[serde(default)]
    pub rotate_rpy_rad: [f64; 3],
    pub duration_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    /// Bundled model name or a path relative to the scenario file.
    #[serde(default = "default_model")]
    pub model: String,
    pub dt_s: f64,
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default = "default_max_speed")]
    pub max_joint_speed_rad_per_s: f64,
    pub initial_q_rad: Vec<f64>,
    pub impedance: ImpedanceSection,
    #[serde(default)]
    pub observer: ObserverSection,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub adaptation: AdaptationSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<EnvironmentSection>,
    #[serde(default)]
    pub disturbance: DisturbanceSection,
    #[serde(rename = "waypoint", default)]
    pub waypoints: Vec<WaypointSection>,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn axis_index(name: &str) -> Option<usize> {
    ["x", "y", "z", "rx", "ry", "rz"].iter().position(|a| *a == name)
}

impl Scenario {
    pub fn parse_str(text: &str, origin: &Path) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::config(origin, e.to_string()))?;
        if s.version != SCENARIO_VERSION {
            return Err(Error::config(
                origin,
                format!("unsupported scenario version {} (expected {SCENARIO_VERSION})", s.version),
            ));
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut s = Self::parse_str(&text, path)?;
        s.base_dir = path.parent().map(Path::to_path_buf);
        s.validate().map_err(|e| Error::config(path, e.to_string()))?;
        Ok(s)
    }

    pub fn bundled(name: &str) -> Option<Self> {
        BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(n, text)| Self::parse_str(text, Path::new(n)).expect("bundled scenario parses"))
    }

    /// A file path, or the name of a bundled scenario.
    pub fn resolve(spec: &str) -> Result<Self> {
        let path = Path::new(spec);
        if path.exists() {
            return Self::load(path);
        }
        Self::bundled(spec).ok_or_else(|| {
            Error::config(path, "no such file and no bundled scenario with that name")
        })
    }

    pub fn model(&self) -> Result<ManipulatorModel> {
        if self.model == "hhm6" {
            return Ok(ManipulatorModel::default_hhm());
        }
        let p = Path::new(&self.model);
        let p = match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        };
        ManipulatorModel::from_file(&p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.dt_s > 0.0) {
            return bad(format!("dt_s must be positive, got {}", self.dt_s));
        }
        let span: f64 = self.waypoints.iter().map(|w| w.duration_s).sum();
        if !(self.duration_s >= span) {
            return bad(format!("duration_s {} is shorter than the trajectory ({span} s)", self.duration_s));
        }
        if !(self.max_joint_speed_rad_per_s > 0.0) {
            return bad("max_joint_speed_rad_per_s must be positive".into());
        }
        let model = self.model()?;
        if self.initial_q_rad.len() != model.dof() {
            return Err(Error::Dimension {
                what: "initial_q_rad",
                expected: model.dof(),
                got: self.initial_q_rad.len(),
            });
        }
        self.impedance.gains()?;
        self.observer.config().validate()?;
        if !(self.control.arm_velocity_gain_per_s >= 0.0
            && self.control.tool_gain_ns_per_m >= 0.0
            && self.control.tool_inertia_gain_per_s >= 0.0) {
            return bad("control gains must be non-negative".into());
        }
        if !(self.control.tool_estimate_scale > 0.0) {
            return bad("tool_estimate_scale must be positive".into());
        }
        if let Some(env) = &self.environment {
            env.build()?;
        }
        Ok(())
    }

    pub fn initial_q(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.initial_q_rad)
    }

    /// Waypoints relative to the tip pose at the initial configuration.
    pub fn trajectory(&self, model: &ManipulatorModel) -> Result<Trajectory> {
        let start = crate::model::pose_of(&model.tip_transform(&self.initial_q()));
        let mut poses = vec![start];
        let mut durations = Vec::new();
        for w in &self.waypoints {
            let r = w.rotate_rpy_rad;
            let rot = UnitQuaternion::from_rotation_matrix(&Rotation3::from_euler_angles(r[0], r[1], r[2]));
            let mut pose = Pose {
                position: start.position + Vec3::from(w.offset_m),
                orientation: rot * start.orientation,
            };
            pose.align_to(&start.orientation);
            poses.push(pose);
            durations.push(w.duration_s);
        }
        Trajectory::new(poses, durations)
    }

    /// Set a numeric parameter by dotted path, e.g. `impedance.sigma.y`.
    pub fn set_parameter(&mut self, path: &str, value: f64) -> Result<()> {
        let parts: Vec<&str> = path.split('.').collect();
        let unknown = || Error::InvalidInput(format!("unknown scenario parameter '{path}'"));
        let axis = |name: &str| axis_index(name).ok_or_else(unknown);
        let set3 = |lin: &mut [f64; 3], ang: &mut [f64; 3], i: usize| {
            if i < 3 {
                lin[i] = value
            } else {
                ang[i - 3] = value
            }
        };
        match parts.as_slice() {
            ["dt_s"] => self.dt_s = value,
            ["duration_s"] => self.duration_s = value,
            ["seed"] => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::InvalidInput(format!("seed must be a non-negative integer, got {value}")));
                }
                self.seed = value as u64
            }
            ["max_joint_speed_rad_per_s"] => self.max_joint_speed_rad_per_s = value,
            ["impedance", "gamma_scale"] => self.impedance.gamma_scale = value,
            ["impedance", "k_d", a] => {
                let i = axis(a)?;
                let imp = &mut self.impedance;
                set3(&mut imp.k_d_n_per_m, &mut imp.k_d_nm_per_rad, i)
            }
            ["impedance", "d_d", a] => {
                let i = axis(a)?;
                let imp = &mut self.impedance;
                set3(&mut imp.d_d_ns_per_m, &mut imp.d_d_nms_per_rad, i)
            }
            ["impedance", "f_ed", a] => {
                let i = axis(a)?;
                let imp = &mut self.impedance;
                set3(&mut imp.f_ed_n, &mut imp.f_ed_nm, i)
            }
            ["impedance", "sigma", a] => {
                let i = axis(a)?;
                let current = self.impedance.gains()?.sigma.diagonal();
                let mut lin = [current[0], current[1], current[2]];
                let mut ang = [current[3], current[4], current[5]];
                set3(&mut lin, &mut ang, i);
                if i < 3 {
                    self.impedance.sigma_m_per_ns = Some(lin);
                } else {
                    self.impedance.sigma_rad_per_nms = Some(ang);
                }
            }
            ["observer", "gain_per_s"] => self.observer.gain_per_s = value,
            ["observer", "filter_gain_per_s"] => self.observer.filter_gain_per_s = value,
            ["observer", "impact_threshold_nm"] => self.observer.impact_threshold_nm = value,
            ["control", "arm_velocity_gain_per_s"] => self.control.arm_velocity_gain_per_s = value,
            ["control", "tool_gain_ns_per_m"] => self.control.tool_gain_ns_per_m = value,
            ["control", "tool_inertia_gain_per_s"] => self.control.tool_inertia_gain_per_s = value,
            ["control", "tool_estimate_scale"] => self.control.tool_estimate_scale = value,
            ["adaptation", "gamma"] => self.adaptation.gamma = value,
            ["adaptation", "gamma0"] => self.adaptation.gamma0 = value,
            ["environment", field] => {
                let env = self
                    .environment
                    .as_mut()
                    .ok_or_else(|| Error::InvalidInput("scenario has no environment".into()))?;
                match *field {
                    "offset_m" => env.offset_m = value,
                    "k_f_n_per_m" => env.k_f_n_per_m = value,
                    "d_f_ns_per_m" => env.d_f_ns_per_m = value,
                    "m_f_kg" => env.m_f_kg = value,
                    _ => return Err(unknown()),
                }
            }
            ["disturbance", "force_amplitude_n"] => self.disturbance.force_amplitude_n = value,
            ["disturbance", "moment_amplitude_nm"] => self.disturbance.moment_amplitude_nm = value,
            _ => return Err(unknown()),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_validate() {
        for (name, _) in BUNDLED {
            let s = Scenario::bundled(name).unwrap();
            s.validate().unwrap();
            let m = s.model().unwrap();
            let traj = s.trajectory(&m).unwrap();
            assert!(traj.span() <= s.duration_s);
        }
    }

    #[test]
    fn parse_error_reports_line() {
        let text = "version = 1\nname = \"x\"\ndt_s = oops\n";
        let err = Scenario::parse_str(text, Path::new("bad.toml")).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn sigma_override_keeps_gamma() {
        let mut s = Scenario::bundled("contact-y").unwrap();
        let g0 = s.impedance.gains().unwrap();
        s.set_parameter("impedance.sigma.y", 0.0).unwrap();
        let g1 = s.impedance.gains().unwrap();
        assert_eq!(g1.gamma, g0.gamma);
        assert_eq!(g1.sigma[(1, 1)], 0.0);
        assert_eq!(g1.sigma[(0, 0)], g0.sigma[(0, 0)]);
        assert!(!s.impedance.conforming());
        assert!(s.set_parameter("impedance.sigma.w", 1.0).is_err());
        assert!(s.set_parameter("nope", 1.0).is_err());
    }
}
