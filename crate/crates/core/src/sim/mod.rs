//! Deterministic closed-loop simulation of the arm, its controller and the
//! momentum observer against a compliant environment.

pub mod controller;
pub mod environment;
pub mod metrics;
pub mod oracle;
pub mod scenario;
pub mod trajectory;

pub use controller::{Controller, ControlOutput};
pub use environment::{environment_force, Environment};
pub use metrics::{metrics, RunSummary, TickRecord, CSV_HEADER_TAG};
pub use oracle::{lagrangian_gmo_oracle, TwoLinkAnalytic};
pub use scenario::{Integrator, Scenario};
pub use trajectory::{quintic, QuinticSegment, TaskTarget, Trajectory};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adaptive::{bregman_divergence, NalState, RbfNetwork};
use crate::error::{Error, Result};
use crate::impedance::tip_power;
use crate::model::{ManipulatorModel, PseudoInertia};
use crate::observer::PluckerObserver;
use crate::spatial::{ForceVec, MotionVec, SpatialInertia, Vec3, Vec6};

/// `(V_r − V)ᵀ (F_r − F)`.
pub fn vpf(v_r: &MotionVec, v: &MotionVec, f_r: &ForceVec, f: &ForceVec) -> Result<f64> {
    v_r.sub(v)?.dot(&f_r.sub(f)?)
}

/// `ν₁ = ½ eᵀ M e + γ 𝒟(L ‖ L̂) + ½ tr(ŴᵀŴ)/Π + ½ ε̂ᵀε̂/π` with `e = V_r − V`
/// of the tool body. The ideal network weights and bias are taken as zero.
pub fn accompanying_function(
    verr: &Vec6,
    inertia: &SpatialInertia,
    truth: &PseudoInertia,
    nal: &NalState,
    rbf: Option<&RbfNetwork>,
) -> Result<f64> {
    let kinetic = 0.5 * verr.dot(&(inertia.matrix * verr));
    let divergence = nal.gamma * bregman_divergence(truth, &nal.estimate)?;
    let network = rbf.map_or(0.0, |net| {
        0.5 * net.weights.norm_squared() / net.gains.weight_rate
            + 0.5 * net.bias.norm_squared() / net.gains.bias_rate
    });
    Ok(kinetic + divergence + network)
}

/// Smooth random wrench on the tool body: a seeded sum of sinusoids per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Disturbance {
    /// `(axis, amplitude, angular frequency, phase)`.
    terms: Vec<(usize, f64, f64, f64)>,
}

impl Disturbance {
    pub fn from_scenario(s: &Scenario) -> Self {
        let d = &s.disturbance;
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let mut terms = Vec::new();
        if d.components == 0 {
            return Self { terms };
        }
        for axis in 0..6 {
            let amp = if axis < 3 { d.force_amplitude_n } else { d.moment_amplitude_nm };
            if amp == 0.0 {
                continue;
            }
            for _ in 0..d.components {
                let f = rng.random_range(0.1..=d.max_frequency_hz.max(0.1));
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                terms.push((axis, amp / d.components as f64, std::f64::consts::TAU * f, phase));
            }
        }
        Self { terms }
    }

    /// Wrench in tool-body coordinates about the body origin.
    pub fn wrench(&self, t: f64) -> Vec6 {
        let mut w = Vec6::zeros();
        for &(axis, a, omega, phase) in &self.terms {
            w[axis] += a * (omega * t + phase).sin();
        }
        w
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub step: u64,
    pub q: DVector<f64>,
    pub qd: DVector<f64>,
    prev_tip_velocity: Vec3,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RunStatus {
    Completed,
    Diverged { time: f64, reason: String },
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub status: RunStatus,
    pub records: Vec<TickRecord>,
    pub summary: RunSummary,
}

pub struct Simulation {
    pub scenario: Scenario,
    pub model: ManipulatorModel,
    pub trajectory: Trajectory,
    pub environment: Option<Environment>,
    pub disturbance: Disturbance,
    pub controller: Controller,
    pub observer: PluckerObserver,
    pub state: SimState,
    truth_tool: PseudoInertia,
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Self> {
        scenario.validate()?;
        let mut model = scenario.model()?;
        model.limit_policy = crate::model::LimitPolicy::Ignore;
        let trajectory = scenario.trajectory(&model)?;
        let environment = scenario.environment.as_ref().map(|e| e.build()).transpose()?;
        let q = scenario.initial_q();
        let qd = DVector::zeros(model.dof());
        let observer = PluckerObserver::new(scenario.observer.config(), &model, &q, &qd)?;
        let controller = Controller::from_scenario(&scenario, &model)?;
        let truth_tool = model.bodies[model.last_body()].to_pseudo();
        Ok(Self {
            disturbance: Disturbance::from_scenario(&scenario),
            trajectory,
            environment,
            controller,
            observer,
            state: SimState {
                t: 0.0,
                step: 0,
                q,
                qd,
                prev_tip_velocity: Vec3::zeros(),
            },
            truth_tool,
            model,
            scenario,
        })
    }

    /// Tip position and linear velocity, world frame.
    fn tip_motion(&self, q: &DVector<f64>, qd: &DVector<f64>) -> (Vec3, Vec3) {
        let p = *self.model.tip_transform(q).offset();
        let v = (self.model.jacobian(q) * qd).fixed_rows::<3>(0).into_owned();
        (p, v)
    }

    /// External wrench on the robot at the tip, world axes: contact reaction
    /// plus the injected tool-body disturbance.
    fn external_wrench(&self, q: &DVector<f64>, qd: &DVector<f64>, t: f64, tip_acc: &Vec3) -> (Vec6, Vec6) {
        let (p, v) = self.tip_motion(q, qd);
        let contact = match &self.environment {
            Some(env) => environment_force(env, &p, &v, tip_acc),
            None => Vec6::zeros(),
        };
        let mut w = -contact;
        let d = self.disturbance.wrench(t);
        if d != Vec6::zeros() {
            let world = self.model.world_transforms(q);
            let body = &world[self.model.last_body()];
            let r = body.rotation();
            let f = r * d.fixed_rows::<3>(0);
            let m = r * d.fixed_rows::<3>(3) + (body.offset() - p).cross(&f);
            w += Vec6::new(f.x, f.y, f.z, m.x, m.y, m.z);
        }
        (w, contact)
    }

    fn acceleration(&self, q: &DVector<f64>, qd: &DVector<f64>, tau: &DVector<f64>, t: f64, tip_acc: &Vec3) -> Result<DVector<f64>> {
        let (w, _) = self.external_wrench(q, qd, t, tip_acc);
        self.model.forward_dynamics(q, qd, tau, Some(&w))
    }

    fn integrate(&self, tau: &DVector<f64>, tip_acc: &Vec3) -> Result<(DVector<f64>, DVector<f64>)> {
        let dt = self.scenario.dt_s;
        let (q, qd, t) = (&self.state.q, &self.state.qd, self.state.t);
        match self.scenario.integrator {
            Integrator::SemiImplicitEuler => {
                let qdd = self.acceleration(q, qd, tau, t, tip_acc)?;
                let qd_next = qd + qdd * dt;
                let q_next = q + &qd_next * dt;
                Ok((q_next, qd_next))
            }
            Integrator::Rk4 => {
                let f = |q: &DVector<f64>, qd: &DVector<f64>, t: f64| self.acceleration(q, qd, tau, t, tip_acc);
                let a1 = f(q, qd, t)?;
                let (q2, v2) = (q + qd * (0.5 * dt), qd + &a1 * (0.5 * dt));
                let a2 = f(&q2, &v2, t + 0.5 * dt)?;
                let (q3, v3) = (q + &v2 * (0.5 * dt), qd + &a2 * (0.5 * dt));
                let a3 = f(&q3, &v3, t + 0.5 * dt)?;
                let (q4, v4) = (q + &v3 * dt, qd + &a3 * dt);
                let a4 = f(&q4, &v4, t + dt)?;
                let q_next = q + (qd + &v2 * 2.0 + &v3 * 2.0 + &v4) * (dt / 6.0);
                let qd_next = qd + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (dt / 6.0);
                Ok((q_next, qd_next))
            }
        }
    }

    /// Advance one tick and return what happened during it.
    pub fn step(&mut self) -> Result<TickRecord> {
        let dt = self.scenario.dt_s;
        let t = self.state.t;
        let (q, qd) = (self.state.q.clone(), self.state.qd.clone());
        let target = self.trajectory.sample(t);

        let jac = self.model.jacobian(&q);
        let joint_residual = self.observer.joint_residual().clone();
        let est = self.observer.estimate_wrench(&jac, dt);
        let f_hat = -est.wrench;
        let f_tilde = -est.filtered;

        let ctrl = self
            .controller
            .compute(&self.model, &q, &qd, &target, &f_tilde, dt)?;

        let (_, v_tip) = self.tip_motion(&q, &qd);
        let tip_acc = (v_tip - self.state.prev_tip_velocity) / dt;
        let (_, contact) = self.external_wrench(&q, &qd, t, &tip_acc);

        let spec = &self.controller.config.spec;
        let gains = &self.controller.config.gains;
        let e = ctrl.error.vector();
        let power = tip_power(&ctrl.error_rate, &e, gains, spec);
        let vpf_tip = (ctrl.required_tip_velocity - ctrl.tip_velocity).dot(&(spec.desired_wrench - contact));
        let last = self.model.last_body();
        let inertia = self.model.bodies[last].spatial_inertia(crate::spatial::FrameId::body(last));
        let rbf = self.controller.config.use_rbf.then_some(&self.controller.rbf);
        let nu1 = accompanying_function(&ctrl.tool_velocity_error, &inertia, &self.truth_tool, &self.controller.nal, rbf)?;

        let (q_next, qd_next) = self.integrate(&ctrl.tau, &tip_acc)?;
        self.observer.step(&self.model, &ctrl.tau, &q_next, &qd_next, dt)?;

        let record = TickRecord {
            t,
            q: q.clone(),
            qd: qd.clone(),
            position: ctrl.pose.position,
            orientation: ctrl.pose.orientation,
            error: e,
            error_rate: ctrl.error_rate,
            tip_velocity: ctrl.tip_velocity,
            residual: joint_residual,
            f_hat,
            f_tilde,
            f_contact: contact,
            impact: est.impact,
            p_t: power.p_t,
            power_scale: power.scale,
            vpf: vpf_tip,
            nu1,
            tool_mass_estimate: self.controller.nal.estimate.matrix[(3, 3)],
            tau: ctrl.tau.clone(),
        };

        self.state.prev_tip_velocity = v_tip;
        self.state.q = q_next;
        self.state.qd = qd_next;
        self.state.step += 1;
        self.state.t = self.state.step as f64 * dt;

        let speed = self.state.qd.norm();
        if !speed.is_finite() || self.state.q.iter().any(|x| !x.is_finite()) {
            return Err(Error::Diverged {
                time: self.state.t,
                reason: "non-finite joint state".into(),
            });
        }
        if speed > self.scenario.max_joint_speed_rad_per_s {
            return Err(Error::Diverged {
                time: self.state.t,
                reason: format!(
                    "joint speed {speed:.3} rad/s exceeds {} rad/s",
                    self.scenario.max_joint_speed_rad_per_s
                ),
            });
        }
        Ok(record)
    }

    pub fn steps(&self) -> u64 {
        (self.scenario.duration_s / self.scenario.dt_s).round() as u64
    }
}

/// Run a scenario to completion or divergence. Other errors propagate.
pub fn run(scenario: &Scenario) -> Result<RunOutput> {
    let mut sim = Simulation::new(scenario.clone())?;
    let n = sim.steps();
    let mut records = Vec::with_capacity(n as usize);
    let mut status = RunStatus::Completed;
    for _ in 0..n {
        match sim.step() {
            Ok(r) => records.push(r),
            Err(Error::Diverged { time, reason }) => {
                log::warn!("{}: diverged at t = {time:.4} s: {reason}", scenario.name);
                status = RunStatus::Diverged { time, reason };
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let summary = metrics(scenario, &records, &status)?;
    Ok(RunOutput {
        status,
        records,
        summary,
    })
}
