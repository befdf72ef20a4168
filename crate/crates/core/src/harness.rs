//! Batch front end: scenario runs with artifacts, parameter sweeps, the
//! compiled-in invariant suite and the observer cross-check.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DVector, Matrix4, Rotation3, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adaptive::{bregman_divergence, nal_step, NalState};
use crate::error::{Error, Result};
use crate::impedance::{derive_gains, quaternion_error, quaternion_parts, tip_power, ImpedanceSpec};
use crate::model::{net_body_force, regressor, InertialParams, ManipulatorModel, PseudoInertia};
use crate::observer::{ObserverConfig, PluckerObserver};
use crate::sim::environment::{environment_force, Environment};
use crate::sim::metrics::{summary_json, write_csv, RunSummary};
use crate::sim::oracle::{run_equivalence, OracleConfig, OracleReport};
use crate::sim::{run, RunOutput, RunStatus, Scenario};
use crate::spatial::{inertia_from_params, FrameId, Mat3, Mat6, MotionVec, SpatialInertia, Vec3, Vec6};

pub const SWEEP_VERSION: u32 = 1;
pub const SWEEP_HEADER_TAG: &str = "# hydrasim-sweep v1";
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-6;

/// How independent runs are scheduled.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Up to `threads` workers, or the global pool when `None`.
    Parallel { threads: Option<usize> },
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel { threads: None }
        } else {
            Execution::Sequential
        }
    }
}

/// Map `f` over `items` in order, in parallel when requested and available.
pub fn map_cells<T, R, F>(items: &[T], exec: Execution, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        Execution::Sequential => Ok(items.iter().map(f).collect()),
        #[cfg(feature = "parallel")]
        Execution::Parallel { threads } => {
            use rayon::prelude::*;
            let go = || items.par_iter().map(&f).collect();
            match threads {
                None => Ok(go()),
                Some(0) => Err(Error::InvalidInput("parallelism must be at least 1".into())),
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))
                    .map(|pool| pool.install(go)),
            }
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel { threads } => {
            if threads == Some(0) {
                return Err(Error::InvalidInput("parallelism must be at least 1".into()));
            }
            log::debug!("built without the parallel feature; running sequentially");
            Ok(items.iter().map(f).collect())
        }
    }
}

/// Files written for one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifacts {
    pub csv: PathBuf,
    pub summary: PathBuf,
}

fn create_file(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Run a scenario and write `<name>.csv` and `<name>.summary.json` into `out`.
pub fn run_to_dir(scenario: &Scenario, out: &Path) -> Result<(RunOutput, Artifacts)> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let output = run(scenario)?;
    let dof = scenario.initial_q_rad.len();
    let csv = out.join(format!("{}.csv", scenario.name));
    write_csv(create_file(&csv)?, dof, &output.records).map_err(|e| Error::io(&csv, e))?;
    let summary = out.join(format!("{}.summary.json", scenario.name));
    write_text(&summary, &summary_json(&output.summary)?)?;
    Ok((output, Artifacts { csv, summary }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub version: u32,
    /// Scenario path (relative to the sweep file) or bundled name.
    pub base: String,
    /// Dotted scenario parameter, e.g. `impedance.sigma.y`.
    pub parameter: String,
    pub values: Vec<f64>,
    /// Worker count; all available cores when absent.
    #[serde(default)]
    pub parallelism: Option<usize>,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl SweepSpec {
    pub fn parse_str(text: &str, origin: &Path) -> Result<Self> {
        let s: SweepSpec = toml::from_str(text).map_err(|e| Error::config(origin, e.to_string()))?;
        if s.version != SWEEP_VERSION {
            return Err(Error::config(origin, format!("unsupported sweep version {}", s.version)));
        }
        if s.values.is_empty() {
            return Err(Error::config(origin, "sweep grid is empty"));
        }
        if s.parallelism == Some(0) {
            return Err(Error::config(origin, "parallelism must be at least 1"));
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut s = Self::parse_str(&text, path)?;
        s.base_dir = path.parent().map(Path::to_path_buf);
        Ok(s)
    }

    pub fn base_scenario(&self) -> Result<Scenario> {
        let p = Path::new(&self.base);
        match &self.base_dir {
            Some(dir) if p.is_relative() && dir.join(p).exists() => Scenario::load(&dir.join(p)),
            _ => Scenario::resolve(&self.base),
        }
    }

    pub fn execution(&self) -> Execution {
        match Execution::default() {
            Execution::Parallel { .. } => Execution::Parallel {
                threads: self.parallelism,
            },
            e => e,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: std::result::Result<RunSummary, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub parameter: String,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_err()).count()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{SWEEP_HEADER_TAG} parameter={}", self.parameter)?;
        writeln!(
            out,
            "value,status,peak_estimated_force_n,peak_contact_force_n,contact_losses,rms_position_error_m,rho_s,rendered_stiffness_n_per_m,max_abs_p_t_w,diverged_at_s,error"
        )?;
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
        for row in &self.rows {
            match &row.outcome {
                Ok(s) => writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},",
                    row.value,
                    s.status,
                    s.peak_estimated_force_n,
                    s.peak_contact_force_n,
                    s.contact_losses,
                    s.rms_position_error_m,
                    opt(s.rho_s),
                    opt(s.rendered_stiffness_n_per_m),
                    s.max_abs_p_t_w,
                    opt(s.diverged_at_s),
                )?,
                Err(e) => writeln!(out, "{},failed,,,,,,,,,\"{}\"", row.value, e.replace('"', "'"))?,
            }
        }
        out.flush()
    }
}

/// Run the base scenario once per grid value. A failing cell is recorded and
/// the sweep continues.
pub fn sweep(base: &Scenario, parameter: &str, values: &[f64], exec: Execution) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::InvalidInput("sweep grid is empty".into()));
    }
    // Unknown parameter names are a configuration error, not a failed cell.
    base.clone().set_parameter(parameter, values[0])?;
    let rows = map_cells(values, exec, |&value| {
        let cell = || -> Result<RunSummary> {
            let mut s = base.clone();
            s.set_parameter(parameter, value)?;
            s.validate()?;
            Ok(run(&s)?.summary)
        };
        SweepRow {
            value,
            outcome: cell().map_err(|e| e.to_string()),
        }
    })?;
    Ok(SweepReport {
        parameter: parameter.into(),
        rows,
    })
}

/// Outcome of one invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub measured: f64,
    pub limit: f64,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<28} measured {:.3e} limit {:.3e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.limit
        )?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

/// Implementations exercised by the suite; replaceable so the suite itself
/// can be tested against broken variants.
#[derive(Copy, Clone)]
pub struct Implementations {
    pub inertia_rate: fn(&SpatialInertia, &MotionVec) -> Result<Mat6>,
    pub quaternion_error: fn(f64, &Vec3, f64, &Vec3) -> Vec3,
    pub bregman_divergence: fn(&PseudoInertia, &PseudoInertia) -> Result<f64>,
}

impl Default for Implementations {
    fn default() -> Self {
        Self {
            inertia_rate: crate::spatial::inertia_rate,
            quaternion_error,
            bregman_divergence,
        }
    }
}

pub mod random {
    //! Seeded generators for property checks.

    use super::*;

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    pub fn vec3(rng: &mut impl Rng, scale: f64) -> Vec3 {
        Vec3::from_fn(|_, _| rng.random_range(-scale..scale))
    }

    pub fn vec6(rng: &mut impl Rng, scale: f64) -> Vec6 {
        Vec6::from_fn(|_, _| rng.random_range(-scale..scale))
    }

    pub fn rotation(rng: &mut impl Rng) -> Rotation3<f64> {
        let q = nalgebra::Quaternion::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        UnitQuaternion::from_quaternion(q + nalgebra::Quaternion::new(1e-3, 0.0, 0.0, 0.0)).to_rotation_matrix()
    }

    pub fn unit_quaternion(rng: &mut impl Rng) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&rotation(rng))
    }

    /// Physically consistent rigid-body inertia.
    pub fn inertia(rng: &mut impl Rng, frame: FrameId) -> SpatialInertia {
        let mass = rng.random_range(0.5..50.0);
        let r = rotation(rng);
        let principal = Vec3::from_fn(|_, _| rng.random_range(0.05..5.0));
        let com = vec3(rng, 1.0);
        inertia_from_params(mass, &com, r.matrix(), &Mat3::from_diagonal(&principal), frame)
            .expect("positive mass and principal moments")
    }

    pub fn params(rng: &mut impl Rng) -> InertialParams {
        let mass = rng.random_range(0.5..50.0);
        let principal = Vec3::from_fn(|_, _| rng.random_range(0.05..5.0));
        let r = rotation(rng);
        let ic = r.matrix() * Mat3::from_diagonal(&principal) * r.matrix().transpose();
        InertialParams::from_com(mass, vec3(rng, 1.0), ic).expect("valid body")
    }

    /// Symmetric positive-definite 4×4 with eigenvalues in `[lo, hi]`.
    pub fn spd4(rng: &mut impl Rng, lo: f64, hi: f64) -> Matrix4<f64> {
        let q = Matrix4::from_fn(|_, _| rng.random_range(-1.0..1.0)).qr().q();
        let d = Matrix4::from_diagonal(&nalgebra::Vector4::from_fn(|_, _| rng.random_range(lo..hi)));
        let m = q * d * q.transpose();
        (m + m.transpose()) * 0.5
    }
}

fn result(name: &'static str, measured: f64, limit: f64, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed: measured <= limit && measured.is_finite(),
        measured,
        limit,
        detail,
    }
}

/// Worst relative mismatch between `inertia_rate` and a central difference
/// of the inertia seen from a fixed frame as the body moves with `V`.
pub fn inertia_rate_deviation(imp: &Implementations, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = random::rng(seed);
    let f = FrameId(1);
    let mut worst: f64 = 0.0;
    let h = 1e-6;
    for _ in 0..samples {
        let m = random::inertia(&mut rng, f);
        let v = MotionVec::from_vector(random::vec6(&mut rng, 2.0), f);
        let at = |t: f64| {
            let r = Rotation3::new(v.angular() * t);
            let u = crate::spatial::SpatialTransform::from_rotation(&r, v.linear() * t, FrameId(0), f);
            u.matrix() * m.matrix * u.matrix().transpose()
        };
        let fd = (at(h) - at(-h)) / (2.0 * h);
        let analytic = (imp.inertia_rate)(&m, &v)?;
        let scale = fd.norm().max(m.matrix.norm() * v.vector.norm()).max(1e-12);
        worst = worst.max((analytic - fd).norm() / scale);
    }
    Ok(worst)
}

/// Worst relative mismatch between `Y φ` and the Newton–Euler net force.
pub fn regressor_deviation(samples: usize, seed: u64) -> Result<f64> {
    let mut rng = random::rng(seed);
    let f = FrameId(1);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let p = random::params(&mut rng);
        let v = random::vec6(&mut rng, 2.0);
        let a = random::vec6(&mut rng, 5.0);
        let g = random::vec3(&mut rng, 10.0);
        let w = Vec3::new(v[3], v[4], v[5]);
        let y = regressor(&w, &v, &a, &g);
        let m = p.spatial_inertia(f);
        let ne = net_body_force(&m, &w, &MotionVec::from_vector(v, f), &MotionVec::from_vector(a, f), &g)?;
        let scale = ne.vector.norm().max(1e-9);
        worst = worst.max((y * p.phi - ne.vector).norm() / scale);
    }
    Ok(worst)
}

/// Static arm, constant tip wrench: compares the joint residual with the
/// first-order response `Jᵀw (1 − e^{−kt})`. Returns the worst tracking error
/// after `5/k` and the DC error, both relative to `‖Jᵀw‖`.
pub fn gmo_step_response(gain: f64, dt: f64) -> Result<(f64, f64)> {
    let mut model = ManipulatorModel::default_hhm();
    model.limit_policy = crate::model::LimitPolicy::Ignore;
    let q = DVector::from_column_slice(&[0.2, -0.4, 1.2, 0.1, 0.8, 0.3]);
    let qd = DVector::zeros(6);
    let w = Vec6::new(150.0, -80.0, 200.0, 20.0, -10.0, 5.0);
    let jt_w = model.jacobian(&q).transpose() * w;
    // Hold the arm still: τ cancels gravity and the external torque.
    let tau = model.gravity_torques(&q) - &jt_w;
    let cfg = ObserverConfig {
        gain: Vec6::repeat(gain),
        ..ObserverConfig::default()
    };
    let mut obs = PluckerObserver::new(cfg, &model, &q, &qd)?;
    let (mut q1, mut qd1) = (q.clone(), qd.clone());
    let n = (10.0 / gain / dt).round() as usize;
    let settle = (5.0 / gain / dt).round() as usize;
    let norm = jt_w.norm();
    let mut worst: f64 = 0.0;
    let mut last = DVector::zeros(6);
    for k in 1..=n {
        let qdd = model.forward_dynamics(&q1, &qd1, &tau, Some(&w))?;
        qd1 += qdd * dt;
        q1 += &qd1 * dt;
        last = obs.step(&model, &tau, &q1, &qd1, dt)?.clone();
        if k >= settle {
            let t = k as f64 * dt;
            let expect = &jt_w * (1.0 - (-gain * t).exp());
            worst = worst.max((&last - expect).norm() / norm);
        }
    }
    Ok((worst, (&last - &jt_w).norm() / norm))
}

/// Worst `|p_T| / scale` over random errors with conforming gains, and the
/// smallest ratio with `Γ` scaled by `gamma_scale`.
pub fn tip_power_ratios(samples: usize, seed: u64, gamma_scale: f64) -> Result<(f64, f64)> {
    let mut rng = random::rng(seed);
    let mut conforming: f64 = 0.0;
    let mut perturbed = f64::INFINITY;
    for _ in 0..samples {
        let spec = ImpedanceSpec {
            inertia: Vec6::zeros(),
            damping: Vec6::from_fn(|_, _| rng.random_range(1e2..1e5)),
            stiffness: Vec6::from_fn(|_, _| rng.random_range(1e3..1e6)),
            desired_wrench: Vec6::zeros(),
        };
        let gains = derive_gains(&spec)?;
        let e = random::vec6(&mut rng, 0.05);
        let e_dot = random::vec6(&mut rng, 0.5);
        let p = tip_power(&e_dot, &e, &gains, &spec);
        conforming = conforming.max(p.p_t.abs() / p.scale);
        let p = tip_power(&e_dot, &e, &gains.with_gamma_scale(gamma_scale), &spec);
        perturbed = perturbed.min(p.p_t.abs() / p.scale);
    }
    Ok((conforming, perturbed))
}

/// Worst `‖e_o‖` for equal rotations (with either quaternion sign) and the
/// smallest `‖e_o‖` for distinct ones, scaled by the rotation angle between them.
pub fn quaternion_error_extremes(imp: &Implementations, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = random::rng(seed);
    let mut equal: f64 = 0.0;
    let mut distinct = f64::INFINITY;
    for k in 0..samples {
        let a = random::unit_quaternion(&mut rng);
        let (eta, eps) = quaternion_parts(&a);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        equal = equal.max((imp.quaternion_error)(sign * eta, &(eps * sign), eta, &eps).norm());
        let b = random::unit_quaternion(&mut rng);
        let (eta_b, eps_b) = quaternion_parts(&b);
        let angle = a.angle_to(&b);
        if angle > 1e-6 {
            let e = (imp.quaternion_error)(eta, &eps, eta_b, &eps_b).norm();
            distinct = distinct.min(e / (angle / 2.0).sin());
        }
    }
    (equal, distinct)
}

/// Smallest divergence between distinct random PD pairs, largest
/// self-divergence magnitude, and the error of `𝒟(I ‖ 2I)`.
pub fn bregman_extremes(imp: &Implementations, samples: usize, seed: u64) -> Result<(f64, f64, f64)> {
    let mut rng = random::rng(seed);
    let mut min_distinct = f64::INFINITY;
    let mut max_self: f64 = 0.0;
    for _ in 0..samples {
        let a = PseudoInertia::new(random::spd4(&mut rng, 0.1, 10.0));
        let b = PseudoInertia::new(random::spd4(&mut rng, 0.1, 10.0));
        min_distinct = min_distinct.min((imp.bregman_divergence)(&a, &b)?);
        max_self = max_self.max((imp.bregman_divergence)(&a, &a)?.abs());
    }
    let i = PseudoInertia::new(Matrix4::identity());
    let two = PseudoInertia::new(Matrix4::identity() * 2.0);
    let spot = ((imp.bregman_divergence)(&i, &two)? - (4.0 * 2f64.ln() - 2.0)).abs();
    Ok((min_distinct, max_self, spot))
}

/// Smallest eigenvalue of `L̂` over `steps` NAL updates driven by random `𝒮`.
pub fn nal_min_eigenvalue(steps: usize, seed: u64, gamma: f64, dt: f64) -> Result<f64> {
    let mut rng = random::rng(seed);
    let mut state = NalState::new(PseudoInertia::new(random::spd4(&mut rng, 0.5, 5.0)), gamma, 1e-6)?;
    let mut min = f64::INFINITY;
    for _ in 0..steps {
        let s = random::spd4(&mut rng, -1.0, 1.0) * rng.random_range(0.0..200.0);
        nal_step(&mut state, &s, dt)?;
        min = min.min(state.estimate.min_eigenvalue());
    }
    Ok(min)
}

/// Largest pulling (negative normal) force the environment produces over
/// random states.
pub fn environment_min_normal_force(samples: usize, seed: u64) -> Result<f64> {
    let mut rng = random::rng(seed);
    let env = Environment::new(Vec3::new(0.3, 1.0, -0.2), 0.1, 1e5, 2e3, 5.0)?;
    let mut min = f64::INFINITY;
    for _ in 0..samples {
        let p = random::vec3(&mut rng, 0.5);
        let v = random::vec3(&mut rng, 3.0);
        let a = random::vec3(&mut rng, 50.0);
        let f = environment_force(&env, &p, &v, &a);
        min = min.min(f.fixed_rows::<3>(0).dot(&env.normal));
    }
    Ok(min)
}

fn check_determinism() -> Result<CheckResult> {
    let mut s = Scenario::bundled("contact-y").expect("bundled");
    s.duration_s = 1.0;
    s.waypoints[0].duration_s = 1.0;
    let a = run(&s)?;
    let b = run(&s)?;
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    write_csv(&mut ca, 6, &a.records).map_err(|e| Error::io("<memory>", e))?;
    write_csv(&mut cb, 6, &b.records).map_err(|e| Error::io("<memory>", e))?;
    let differ = ca != cb || a.status != b.status;
    Ok(result(
        "determinism",
        f64::from(u8::from(differ)),
        0.0,
        format!("{} bytes per log", ca.len()),
    ))
}

/// Execute every invariant against `imp`.
pub fn check_with(imp: &Implementations) -> Vec<CheckResult> {
    let guard = |name: &'static str, r: Result<CheckResult>| {
        r.unwrap_or_else(|e| CheckResult {
            name,
            passed: false,
            measured: f64::NAN,
            limit: 0.0,
            detail: e.to_string(),
        })
    };
    let mut out = Vec::new();
    out.push(guard(
        "inertia_rate",
        inertia_rate_deviation(imp, 1000, 11).map(|d| result("inertia_rate", d, 1e-5, "1000 bodies".into())),
    ));
    out.push(guard(
        "regressor",
        regressor_deviation(1000, 12).map(|d| result("regressor", d, 1e-9, "1000 states".into())),
    ));
    out.push(guard(
        "gmo_step_response",
        gmo_step_response(100.0, 1e-3).map(|(w, dc)| {
            let mut r = result("gmo_step_response", w, 1e-2, format!("dc error {dc:.2e}"));
            r.passed &= dc < 5e-3;
            r
        }),
    ));
    out.push(guard(
        "gmo_equivalence",
        run_equivalence(&OracleConfig::default()).map(|r| {
            result("gmo_equivalence", r.relative_deviation, EQUIVALENCE_TOLERANCE, format!("{} ticks", r.ticks))
        }),
    ));
    out.push(guard(
        "tip_power",
        tip_power_ratios(1000, 13, 1.1).map(|(c, p)| {
            let mut r = result("tip_power", c, 1e-9, format!("perturbed min ratio {p:.2e}"));
            r.passed &= p >= 1e-6;
            r
        }),
    ));
    let (equal, distinct) = quaternion_error_extremes(imp, 1000, 14);
    let mut q = result("quaternion_error", equal, 1e-9, format!("distinct min {distinct:.3}"));
    q.passed &= distinct > 0.5;
    out.push(q);
    out.push(guard(
        "bregman",
        bregman_extremes(imp, 1000, 15).map(|(min, same, spot)| {
            let mut r = result("bregman", spot, 1e-12, format!("min distinct {min:.2e}, self {same:.1e}"));
            r.passed &= min > 0.0 && same < 1e-9;
            r
        }),
    ));
    out.push(guard(
        "nal_positive_definite",
        nal_min_eigenvalue(100_000, 16, 500.0, 1e-3).map(|m| {
            let mut r = result("nal_positive_definite", -m, 0.0, "1e5 steps".into());
            r.passed = m > 0.0;
            r
        }),
    ));
    out.push(guard(
        "unilateral_contact",
        environment_min_normal_force(1000, 17).map(|m| result("unilateral_contact", -m, 0.0, "1000 states".into())),
    ));
    out.push(guard("determinism", check_determinism()));
    out
}

pub fn check() -> Vec<CheckResult> {
    check_with(&Implementations::default())
}

/// Observer cross-check with the default configuration.
pub fn oracle() -> Result<OracleReport> {
    run_equivalence(&OracleConfig::default())
}

/// Exit status of a completed run.
pub fn run_exit_code(status: &RunStatus) -> i32 {
    match status {
        RunStatus::Completed => 0,
        RunStatus::Diverged { .. } => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_parallel_agree() {
        let items: Vec<u64> = (0..20).collect();
        let f = |x: &u64| x * x;
        let a = map_cells(&items, Execution::Sequential, f).unwrap();
        let b = map_cells(&items, Execution::Parallel { threads: Some(3) }, f).unwrap();
        assert_eq!(a, b);
        assert!(map_cells(&items, Execution::Parallel { threads: Some(0) }, f).is_err());
    }

    #[test]
    fn sweep_spec_parsing() {
        let ok = "version = 1\nbase = \"contact-y\"\nparameter = \"impedance.sigma.y\"\nvalues = [0.0, 6e-4]\n";
        let s = SweepSpec::parse_str(ok, Path::new("s.toml")).unwrap();
        assert_eq!(s.values.len(), 2);
        assert!(s.base_scenario().is_ok());
        let empty = ok.replace("[0.0, 6e-4]", "[]");
        assert!(SweepSpec::parse_str(&empty, Path::new("s.toml")).is_err());
        let zero = format!("{ok}parallelism = 0\n");
        assert!(SweepSpec::parse_str(&zero, Path::new("s.toml")).is_err());
    }

    #[test]
    fn failed_cell_is_recorded() {
        let mut base = Scenario::bundled("free-motion").unwrap();
        base.duration_s = 3.0;
        let report = sweep(&base, "dt_s", &[-1.0], Execution::Sequential).unwrap();
        assert_eq!(report.failures(), 1);
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("failed"));
    }

    #[test]
    fn inertia_rate_sign_bug_is_caught() {
        fn flipped(m: &SpatialInertia, v: &MotionVec) -> Result<Mat6> {
            crate::spatial::inertia_rate(m, v).map(|x| -x)
        }
        let good = inertia_rate_deviation(&Implementations::default(), 50, 1).unwrap();
        let bad = Implementations {
            inertia_rate: flipped,
            ..Implementations::default()
        };
        let broken = inertia_rate_deviation(&bad, 50, 1).unwrap();
        assert!(good < 1e-5, "{good}");
        assert!(broken > 1e-5, "{broken}");
    }
}
