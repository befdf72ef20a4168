//! Closed-loop controller: impedance law on the tip, required velocities
//! propagated down the chain, and body-level force synthesis with adaptation
//! on the tool body.

use nalgebra::DVector;

use crate::adaptive::{
    adapt_step, build_s, nal_step, rbf_eval, required_net_force, uncertainty_estimate, NalState,
    RbfGains, RbfNetwork,
};
use crate::error::Result;
use crate::impedance::{
    pose_error, required_cartesian_velocity, required_joint_velocity, tool_frame_targets,
    DerivedGains, ImpedanceSpec, PoseError,
};
use crate::model::{pose_of, regressor, InertialParams, ManipulatorModel, Pose};
use crate::sim::scenario::Scenario;
use crate::sim::trajectory::TaskTarget;
use crate::spatial::{FrameId, ForceVec, Mat6, MotionVec, SpatialTransform, Vec6};

/// `ᴱU_T` for a contact frame at the tool tip whose axes stay parallel to
/// the world axes, so the task velocity maps to it with `N_c = I`.
pub fn contact_frame_transform(model: &ManipulatorModel, world_last: &SpatialTransform) -> SpatialTransform {
    let r = world_last.rotation().transpose();
    SpatialTransform::new(r, *model.tool.offset(), FrameId::body(model.last_body()), FrameId::TIP)
        .expect("transpose of a rotation is a rotation")
}

#[derive(Clone, Debug)]
pub struct ControllerConfig {
    pub spec: ImpedanceSpec,
    pub gains: DerivedGains,
    pub n_c: Mat6,
    pub arm_velocity_gain: f64,
    pub tool_gain: Mat6,
    pub adapt_tool: bool,
    pub use_rbf: bool,
}

/// Quantities computed during one control tick.
#[derive(Clone, Debug)]
pub struct ControlOutput {
    pub tau: DVector<f64>,
    pub pose: Pose,
    pub error: PoseError,
    /// `ė = Ẋ_d − Ẋ`, angular part from the angular-velocity error.
    pub error_rate: Vec6,
    pub tip_velocity: Vec6,
    pub required_tip_velocity: Vec6,
    pub required_joint_velocity: DVector<f64>,
    /// `V_r − V` of the tool body.
    pub tool_velocity_error: Vec6,
    pub degraded: bool,
}

#[derive(Clone, Debug)]
pub struct Controller {
    pub config: ControllerConfig,
    /// Parameters the controller uses for the arm bodies.
    pub nominal: Vec<InertialParams>,
    pub nal: NalState,
    pub rbf: RbfNetwork,
    prev_qd_r: Option<DVector<f64>>,
}

impl Controller {
    pub fn from_scenario(scenario: &Scenario, model: &ManipulatorModel) -> Result<Self> {
        let spec = scenario.impedance.spec();
        let gains = scenario.impedance.gains()?;
        let last = model.last_body();
        let tool_true = model.bodies[last];
        let tool_est = InertialParams::from_vector(tool_true.phi * scenario.control.tool_estimate_scale);
        let a = &scenario.adaptation;
        let nal = NalState::new(tool_est.to_pseudo(), a.gamma, a.gamma0)?;
        let rbf = RbfNetwork::diagonal_lattice(
            12,
            a.rbf_centers,
            a.rbf_envelope_m_per_s,
            RbfGains {
                weight_rate: a.weight_rate,
                bias_rate: a.bias_rate,
                weight_leak: a.weight_leak,
                bias_leak: a.bias_leak,
            },
        )?;
        Ok(Self {
            config: ControllerConfig {
                spec,
                gains,
                n_c: Mat6::identity(),
                arm_velocity_gain: scenario.control.arm_velocity_gain_per_s,
                tool_gain: Mat6::identity() * scenario.control.tool_gain_ns_per_m
                    + tool_est.spatial_inertia(FrameId::body(last)).matrix * scenario.control.tool_inertia_gain_per_s,
                adapt_tool: scenario.control.adapt_tool,
                use_rbf: scenario.control.use_rbf,
            },
            nominal: model.bodies.clone(),
            nal,
            rbf,
            prev_qd_r: None,
        })
    }

    pub fn rbf_input(v: &Vec6, verr: &Vec6) -> DVector<f64> {
        DVector::from_iterator(12, v.iter().chain(verr.iter()).copied())
    }

    /// One tick. `contact_force` is the filtered estimate of the force the tip
    /// exerts on the environment.
    pub fn compute(
        &mut self,
        model: &ManipulatorModel,
        q: &DVector<f64>,
        qd: &DVector<f64>,
        target: &TaskTarget,
        contact_force: &Vec6,
        dt: f64,
    ) -> Result<ControlOutput> {
        let n = model.dof();
        let last = model.last_body();
        let chain = model.chain_dynamics(q, qd);
        let tip = chain.world[last].compose(&model.tool)?;
        let mut pose = pose_of(&tip);
        pose.align_to(&target.pose.orientation);
        let error = pose_error(&target.pose, &pose);
        let jac = model.jacobian(q);
        let xdot = &jac * qd;
        let tip_velocity = Vec6::from_column_slice(xdot.as_slice());
        let error_rate = target.velocity - tip_velocity;

        let cfg = &self.config;
        let xr = required_cartesian_velocity(
            &target.velocity,
            &error,
            &cfg.spec.desired_wrench,
            contact_force,
            &cfg.gains,
        );
        let qd_r_sol = required_joint_velocity(&jac, &xr);
        let qd_r = qd_r_sol.value;
        let qdd_r = match &self.prev_qd_r {
            Some(prev) => (&qd_r - prev) / dt,
            None => DVector::zeros(n),
        };
        self.prev_qd_r = Some(qd_r.clone());

        // Required twists and their rates, root to tip.
        let mut vr: Vec<MotionVec> = Vec::with_capacity(n);
        let mut ar: Vec<MotionVec> = Vec::with_capacity(n);
        for i in 0..n {
            let (vp, ap) = if i == 0 {
                (MotionVec::zero(FrameId::WORLD), MotionVec::zero(FrameId::WORLD))
            } else {
                (vr[i - 1], ar[i - 1])
            };
            let u = &chain.links[i];
            let s = model.joints[i].screw.vector();
            let vp_local = u.motion_to_target(&vp)?;
            let mut v = vp_local;
            v.vector += s * qd_r[i];
            let sq = MotionVec::from_vector(s * qd[i], FrameId::body(i));
            let mut a = u.motion_to_target(&ap)?;
            a.vector += s * qdd_r[i] + vp_local.cross_motion(&sq)?.vector;
            vr.push(v);
            ar.push(a);
        }

        // Body forces, tip to root.
        let contact = contact_frame_transform(model, &chain.world[last]);
        let targets = tool_frame_targets(&xr, &cfg.spec.desired_wrench, &cfg.n_c, &contact)?;
        let mut forces: Vec<ForceVec> = vec![ForceVec::zero(FrameId::WORLD); n];
        let mut tool_verr = Vec6::zeros();
        let mut tool_regressor = None;
        for i in (0..n).rev() {
            let v = &chain.velocities[i];
            let y = regressor(&v.angular(), &vr[i].vector, &ar[i].vector, &chain.gravity_body[i]);
            let verr = vr[i].sub(v)?;
            let mut f = if i == last {
                tool_verr = verr.vector;
                tool_regressor = Some(y);
                let delta = if cfg.use_rbf {
                    let psi = rbf_eval(&self.rbf, &Self::rbf_input(&v.vector, &verr.vector))?;
                    uncertainty_estimate(&self.rbf, &psi)
                } else {
                    Vec6::zeros()
                };
                let f_star = required_net_force(&y, &self.nal.estimate, &cfg.tool_gain, &verr, &delta);
                f_star.add(&contact.force_to_base(&targets.tip_force)?)?
            } else {
                let gain = chain.inertias[i].matrix * cfg.arm_velocity_gain;
                ForceVec::from_vector(y * self.nominal[i].phi + gain * verr.vector, FrameId::body(i))
            };
            if i < last {
                f = f.add(&chain.links[i + 1].force_to_base(&forces[i + 1])?)?;
            }
            forces[i] = f;
        }
        let tau = DVector::from_iterator(
            n,
            (0..n).map(|i| model.joints[i].screw.project(&forces[i])),
        );

        // Adaptation for the next tick.
        if cfg.adapt_tool {
            let y = tool_regressor.expect("tool body visited");
            nal_step(&mut self.nal, &build_s(&y, &tool_verr), dt)?;
        }
        if cfg.use_rbf {
            let v = chain.velocities[last].vector;
            let psi = rbf_eval(&self.rbf, &Self::rbf_input(&v, &tool_verr))?;
            adapt_step(&mut self.rbf, &psi, &tool_verr, dt);
        }

        Ok(ControlOutput {
            tau,
            pose,
            error,
            error_rate,
            tip_velocity,
            required_tip_velocity: xr,
            required_joint_velocity: qd_r,
            tool_velocity_error: tool_verr,
            degraded: qd_r_sol.degraded,
        })
    }
}
