//! Per-tick log records, the run summary and their file formats.

use std::io::Write;

use nalgebra::{DVector, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::scenario::Scenario;
use crate::sim::RunStatus;
use crate::spatial::{Vec3, Vec6};

/// First line of every per-tick CSV log.
pub const CSV_HEADER_TAG: &str = "# hydrasim-log v1";
pub const SUMMARY_VERSION: u32 = 1;
/// Fraction of the run, counted from the end, used for steady-contact averages.
pub const STEADY_WINDOW: f64 = 0.2;

#[derive(Clone, Debug, PartialEq)]
pub struct TickRecord {
    pub t: f64,
    pub q: DVector<f64>,
    pub qd: DVector<f64>,
    pub position: Vec3,
    pub orientation: UnitQuaternion<f64>,
    /// `[e_p; e_o]`.
    pub error: Vec6,
    pub error_rate: Vec6,
    /// `[ṗ; ω]` of the tip.
    pub tip_velocity: Vec6,
    /// Joint-space observer residual.
    pub residual: DVector<f64>,
    /// Estimated force of the tip on the environment, world axes.
    pub f_hat: Vec6,
    pub f_tilde: Vec6,
    /// True environment force on the tip side, world axes.
    pub f_contact: Vec6,
    pub impact: bool,
    pub p_t: f64,
    pub power_scale: f64,
    pub vpf: f64,
    pub nu1: f64,
    pub tool_mass_estimate: f64,
    pub tau: DVector<f64>,
}

impl TickRecord {
    /// A record at rest with every signal zero, for building synthetic logs.
    pub fn zero(t: f64, dof: usize) -> Self {
        Self {
            t,
            q: DVector::zeros(dof),
            qd: DVector::zeros(dof),
            position: Vec3::zeros(),
            orientation: UnitQuaternion::identity(),
            error: Vec6::zeros(),
            error_rate: Vec6::zeros(),
            tip_velocity: Vec6::zeros(),
            residual: DVector::zeros(dof),
            f_hat: Vec6::zeros(),
            f_tilde: Vec6::zeros(),
            f_contact: Vec6::zeros(),
            impact: false,
            p_t: 0.0,
            power_scale: 0.0,
            vpf: 0.0,
            nu1: 0.0,
            tool_mass_estimate: 0.0,
            tau: DVector::zeros(dof),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub version: u32,
    pub scenario: String,
    pub seed: u64,
    /// `completed` or `diverged`.
    pub status: String,
    pub diverged_at_s: Option<f64>,
    pub ticks: usize,
    pub rms_position_error_m: f64,
    pub rms_orientation_error: f64,
    pub max_position_error_m: f64,
    pub max_tip_speed_m_per_s: f64,
    pub rho_s: Option<f64>,
    pub peak_estimated_force_n: f64,
    pub peak_contact_force_n: f64,
    /// Times the tip left the surface after touching it.
    pub contact_losses: usize,
    /// Along the surface normal over the steady window; absent without contact.
    pub rendered_stiffness_n_per_m: Option<f64>,
    pub max_abs_p_t_w: f64,
    pub power_scale_w: f64,
    pub nu1_start: f64,
    pub nu1_end: f64,
    pub impact_detected: bool,
    pub first_impact_s: Option<f64>,
    pub tool_mass_estimate_kg: f64,
}

/// `ρ = max‖e_p‖ / max‖ṗ‖`. Zero for a log without error, undefined when
/// the tip errs without ever moving.
pub fn rho(max_error: f64, max_speed: f64) -> Option<f64> {
    if max_error == 0.0 {
        Some(0.0)
    } else if max_speed > 0.0 {
        Some(max_error / max_speed)
    } else {
        None
    }
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    (sum / n as f64).sqrt()
}

/// `(f̂·n − f_ed·n) / (e_p·n)` with sums taken over the ticks of the steady
/// window that are in contact.
pub fn rendered_stiffness(records: &[TickRecord], normal: &Vec3, f_ed: &Vec3) -> Option<f64> {
    let start = records.len() - ((records.len() as f64 * STEADY_WINDOW).ceil() as usize).max(1);
    let (mut df, mut de) = (0.0, 0.0);
    for r in &records[start..] {
        if r.f_contact.fixed_rows::<3>(0).dot(normal) > 0.0 {
            df += r.f_hat.fixed_rows::<3>(0).dot(normal) - f_ed.dot(normal);
            de += r.error.fixed_rows::<3>(0).dot(normal);
        }
    }
    (de != 0.0).then(|| df / de)
}

pub fn metrics(scenario: &Scenario, records: &[TickRecord], status: &RunStatus) -> Result<RunSummary> {
    if records.is_empty() {
        return Err(Error::InvalidInput("cannot summarise an empty run log".into()));
    }
    let pos_err = |r: &TickRecord| r.error.fixed_rows::<3>(0).norm();
    let ori_err = |r: &TickRecord| r.error.fixed_rows::<3>(3).norm();
    let speed = |r: &TickRecord| r.tip_velocity.fixed_rows::<3>(0).norm();
    let max = |f: &dyn Fn(&TickRecord) -> f64| records.iter().map(f).fold(0.0, f64::max);
    let max_error = max(&pos_err);
    let max_speed = max(&speed);
    let stiffness = scenario.environment.as_ref().and_then(|env| {
        let n = Vec3::from(env.normal).normalize();
        rendered_stiffness(records, &n, &Vec3::from(scenario.impedance.f_ed_n))
    });
    let touching: Vec<bool> = records.iter().map(|r| r.f_contact.fixed_rows::<3>(0).norm() > 0.0).collect();
    let contact_losses = touching.windows(2).filter(|w| w[0] && !w[1]).count();
    let first_impact = records.iter().find(|r| r.impact).map(|r| r.t);
    let (status, diverged_at) = match status {
        RunStatus::Completed => ("completed", None),
        RunStatus::Diverged { time, .. } => ("diverged", Some(*time)),
    };
    let last = records.last().expect("non-empty");
    Ok(RunSummary {
        version: SUMMARY_VERSION,
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        status: status.into(),
        diverged_at_s: diverged_at,
        ticks: records.len(),
        rms_position_error_m: rms(records.iter().map(pos_err)),
        rms_orientation_error: rms(records.iter().map(ori_err)),
        max_position_error_m: max_error,
        max_tip_speed_m_per_s: max_speed,
        rho_s: rho(max_error, max_speed),
        peak_estimated_force_n: max(&|r| r.f_hat.fixed_rows::<3>(0).norm()),
        peak_contact_force_n: max(&|r| r.f_contact.fixed_rows::<3>(0).norm()),
        contact_losses,
        rendered_stiffness_n_per_m: stiffness,
        max_abs_p_t_w: max(&|r| r.p_t.abs()),
        power_scale_w: max(&|r| r.power_scale),
        nu1_start: records[0].nu1,
        nu1_end: last.nu1,
        impact_detected: first_impact.is_some(),
        first_impact_s: first_impact,
        tool_mass_estimate_kg: last.tool_mass_estimate,
    })
}

const AXES: [&str; 6] = ["x", "y", "z", "rx", "ry", "rz"];

/// Column names in file order for a model with `dof` joints.
pub fn csv_columns(dof: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    let joints = |prefix: &'static str| (1..=dof).map(move |i| format!("{prefix}{i}"));
    let axes = |prefix: &'static str| AXES.iter().map(move |a| format!("{prefix}_{a}"));
    cols.extend(joints("q"));
    cols.extend(joints("qd"));
    cols.extend(["px", "py", "pz", "qw", "qx", "qy", "qz"].map(String::from));
    cols.extend(axes("e"));
    cols.extend(joints("r"));
    cols.extend(axes("fhat"));
    cols.extend(axes("ftilde"));
    cols.extend(axes("fe"));
    cols.extend(["impact", "p_t", "power_scale", "vpf", "nu1", "tool_mass"].map(String::from));
    cols.extend(joints("tau"));
    cols
}

pub fn write_csv<W: Write>(mut out: W, dof: usize, records: &[TickRecord]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER_TAG}")?;
    writeln!(out, "{}", csv_columns(dof).join(","))?;
    let mut row: Vec<String> = Vec::new();
    for r in records {
        row.clear();
        let mut push = |xs: &[f64]| row.extend(xs.iter().map(|x| x.to_string()));
        push(&[r.t]);
        push(r.q.as_slice());
        push(r.qd.as_slice());
        push(r.position.as_slice());
        let c = r.orientation.coords;
        push(&[c.w, c.x, c.y, c.z]);
        push(r.error.as_slice());
        push(r.residual.as_slice());
        push(r.f_hat.as_slice());
        push(r.f_tilde.as_slice());
        push(r.f_contact.as_slice());
        push(&[f64::from(u8::from(r.impact))]);
        push(&[r.p_t, r.power_scale, r.vpf, r.nu1, r.tool_mass_estimate]);
        push(r.tau.as_slice());
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()
}

pub fn summary_json(summary: &RunSummary) -> Result<String> {
    let mut s = serde_json::to_string_pretty(summary)?;
    s.push('\n');
    Ok(s)
}

/// JSON schema for [`RunSummary`].
pub const SUMMARY_SCHEMA: &str = include_str!("../../schema/summary.schema.json");

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario() -> Scenario {
        Scenario::bundled("free-motion").unwrap()
    }

    #[test]
    fn empty_log_is_an_error() {
        assert!(metrics(&scenario(), &[], &RunStatus::Completed).is_err());
    }

    #[test]
    fn perfect_tracking() {
        let log: Vec<_> = (0..10).map(|i| TickRecord::zero(i as f64 * 1e-3, 6)).collect();
        let s = metrics(&scenario(), &log, &RunStatus::Completed).unwrap();
        assert_eq!(s.rms_position_error_m, 0.0);
        assert_eq!(s.rho_s, Some(0.0));
        assert_eq!(s.status, "completed");
    }

    #[test]
    fn sinusoid_rms() {
        // a·sin over whole periods has RMS a/√2.
        let a = 0.02;
        let n = 1000;
        let log: Vec<_> = (0..n)
            .map(|i| {
                let mut r = TickRecord::zero(i as f64 * 1e-3, 6);
                r.error[0] = a * (std::f64::consts::TAU * 4.0 * i as f64 / n as f64).sin();
                r
            })
            .collect();
        let s = metrics(&scenario(), &log, &RunStatus::Completed).unwrap();
        assert!((s.rms_position_error_m - a / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn csv_row_width_matches_header() {
        let log = vec![TickRecord::zero(0.0, 6), TickRecord::zero(0.001, 6)];
        let mut buf = Vec::new();
        write_csv(&mut buf, 6, &log).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER_TAG);
        let width = lines[1].split(',').count();
        assert_eq!(width, csv_columns(6).len());
        assert!(lines[2..].iter().all(|l| l.split(',').count() == width));
    }

    #[test]
    fn stiffness_from_synthetic_contact() {
        let n = Vec3::y();
        let log: Vec<_> = (0..50)
            .map(|i| {
                let mut r = TickRecord::zero(i as f64, 6);
                r.error[1] = 0.01;
                r.f_hat[1] = 75.0 + 20.0;
                r.f_contact[1] = 95.0;
                r
            })
            .collect();
        let k = rendered_stiffness(&log, &n, &Vec3::new(0.0, 20.0, 0.0)).unwrap();
        assert!((k - 7500.0).abs() < 1e-9);
    }
}
