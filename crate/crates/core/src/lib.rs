//! Simulation and control library for a hydraulic heavy-duty manipulator.

pub mod adaptive;
pub mod error;
pub mod harness;
pub mod impedance;
pub mod linalg;
pub mod model;
pub mod observer;
pub mod sim;
pub mod spatial;

pub use error::{Error, Result};
