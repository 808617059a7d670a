//! Quaternion attitude tracking for a rigid body with a hysteretic
//! switching controller that picks the shorter rotation direction.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod error;
pub mod experiments;
pub mod harness;
pub mod quat;
pub mod reference;
pub mod report;
pub mod rigid_body;
pub mod stability;

pub use control::{AttitudeController, ControlLaw, ErrorState, GainSet, Sigma};
pub use error::{Error, Result};
pub use harness::{run_scenario, RunResult, Scenario};
pub use quat::{UnitQuaternion, Vec3};
pub use reference::{ManeuverMode, ManeuverSpec};
pub use rigid_body::{BodyState, InertiaMatrix, TorqueCommand};
