//! Quintic point-to-point trajectories in position and orientation.

use nalgebra::{DVector, UnitQuaternion};

use crate::error::{Error, Result};
use crate::model::Pose;
use crate::spatial::{Vec3, Vec6};

#[derive(Clone, Debug, PartialEq)]
pub struct QuinticSegment {
    pub start: DVector<f64>,
    pub end: DVector<f64>,
    pub duration: f64,
}

impl QuinticSegment {
    pub fn new(start: DVector<f64>, end: DVector<f64>, duration: f64) -> Result<Self> {
        if !(duration > 0.0) {
            return Err(Error::InvalidInput(format!("segment duration must be positive, got {duration}")));
        }
        if start.len() != end.len() {
            return Err(Error::Dimension {
                what: "segment end point",
                expected: start.len(),
                got: end.len(),
            });
        }
        Ok(Self { start, end, duration })
    }
}

/// Normalised profile `s(τ) = 10τ³ − 15τ⁴ + 6τ⁵` and its first two time
/// derivatives for a segment of length `duration`. `t` is clamped.
pub fn quintic_profile(t: f64, duration: f64) -> (f64, f64, f64) {
    let tau = (t / duration).clamp(0.0, 1.0);
    let (t2, t3) = (tau * tau, tau * tau * tau);
    let s = t3 * (10.0 - 15.0 * tau + 6.0 * t2);
    let ds = 30.0 * t2 * (1.0 - 2.0 * tau + t2) / duration;
    let dds = 60.0 * tau * (1.0 - 3.0 * tau + 2.0 * t2) / (duration * duration);
    (s, ds, dds)
}

/// Position, velocity and acceleration at `t`, clamped to `[0, t_f]`.
pub fn quintic(seg: &QuinticSegment, t: f64) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    let (s, ds, dds) = quintic_profile(t, seg.duration);
    let delta = &seg.end - &seg.start;
    (&seg.start + &delta * s, &delta * ds, &delta * dds)
}

/// Desired tip state at one instant, world frame.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct TaskTarget {
    pub pose: Pose,
    /// `Ẋ_d = [ṗ_d; ω_d]`.
    pub velocity: Vec6,
    pub acceleration: Vec6,
}

/// Sequence of waypoint poses joined by quintic segments, with a hold at the end.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub waypoints: Vec<Pose>,
    /// Duration of the segment ending at each waypoint after the first.
    pub durations: Vec<f64>,
}

impl Trajectory {
    pub fn new(waypoints: Vec<Pose>, durations: Vec<f64>) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::InvalidInput("trajectory needs at least one waypoint".into()));
        }
        if durations.len() + 1 != waypoints.len() {
            return Err(Error::Dimension {
                what: "segment durations",
                expected: waypoints.len() - 1,
                got: durations.len(),
            });
        }
        if durations.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::InvalidInput("segment durations must be positive".into()));
        }
        Ok(Self { waypoints, durations })
    }

    pub fn span(&self) -> f64 {
        self.durations.iter().sum()
    }

    pub fn sample(&self, t: f64) -> TaskTarget {
        let mut start = 0.0;
        for (k, d) in self.durations.iter().enumerate() {
            if t < start + d {
                return segment_target(&self.waypoints[k], &self.waypoints[k + 1], t - start, *d);
            }
            start += d;
        }
        TaskTarget {
            pose: *self.waypoints.last().expect("non-empty"),
            velocity: Vec6::zeros(),
            acceleration: Vec6::zeros(),
        }
    }
}

fn segment_target(a: &Pose, b: &Pose, t: f64, duration: f64) -> TaskTarget {
    let (s, ds, dds) = quintic_profile(t, duration);
    let dp = b.position - a.position;
    // Rotation from a to b in world axes, taking the short way round.
    let mut qb = b.orientation;
    if qb.coords.dot(&a.orientation.coords) < 0.0 {
        qb = UnitQuaternion::new_unchecked(-qb.into_inner());
    }
    let rel = qb * a.orientation.inverse();
    let axis_angle = rel.scaled_axis();
    let orientation = UnitQuaternion::from_scaled_axis(axis_angle * s) * a.orientation;
    let mut pose = Pose {
        position: a.position + dp * s,
        orientation,
    };
    if pose.eta() < 0.0 {
        pose.orientation = UnitQuaternion::new_unchecked(-pose.orientation.into_inner());
    }
    let v = dp * ds;
    let w: Vec3 = axis_angle * ds;
    let acc = dp * dds;
    let alpha: Vec3 = axis_angle * dds;
    TaskTarget {
        pose,
        velocity: Vec6::new(v.x, v.y, v.z, w.x, w.y, w.z),
        acceleration: Vec6::new(acc.x, acc.y, acc.z, alpha.x, alpha.y, alpha.z),
    }
}
