//! Desired-attitude trajectories for the three-stage yaw maneuver.
//!
//! Stage 1 holds the identity attitude, Stage 2 spins at a constant body rate
//! `ω₀` until the vehicle reaches the yaw angle `ψ₀` at time `t₀`, and Stage 3
//! steps the reference back to the identity. In stage-3-only mode the run
//! starts directly at the Stage-3 initial condition.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::quat::{UnitQuaternion, Vec3};
use crate::rigid_body::BodyState;

pub const DEFAULT_STAGE1_DURATION: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ManeuverMode {
    FullThreeStage,
    Stage3Only,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Hover,
    Spin,
    Return,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManeuverSpec {
    /// Stage-2 body-rate reference (rad/s).
    pub omega0: Vec3,
    /// Stage-2 terminal yaw (rad).
    pub psi0: f64,
    pub stage1_duration: f64,
    pub mode: ManeuverMode,
}

impl ManeuverSpec {
    /// Yaw-axis maneuver `{ω_z·b₃, ψ₀}` with `ψ₀` in degrees.
    pub fn yaw(omega_z: f64, psi0_deg: f64, mode: ManeuverMode) -> Result<Self> {
        let spec = Self {
            omega0: Vec3::new(0.0, 0.0, omega_z),
            psi0: psi0_deg.to_radians(),
            stage1_duration: DEFAULT_STAGE1_DURATION,
            mode,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidManeuver("ω₀ must be finite".into()));
        }
        // ψ₀ = 0 is admitted so that zero-error starts can be expressed
        if !(0.0..TAU).contains(&self.psi0) {
            return Err(Error::InvalidManeuver(format!("ψ₀ = {} rad outside [0, 2π)", self.psi0)));
        }
        if !(self.stage1_duration >= 0.0) || !self.stage1_duration.is_finite() {
            return Err(Error::InvalidManeuver("stage-1 duration must be non-negative".into()));
        }
        if self.mode == ManeuverMode::FullThreeStage && self.omega0.z <= 0.0 && self.psi0 > 0.0 {
            return Err(Error::InvalidManeuver(
                "full maneuver needs a positive yaw rate to reach ψ₀".into(),
            ));
        }
        Ok(())
    }

    /// Stage in effect at `t` given the Stage-3 start `t0` (if already known).
    pub fn stage_at(&self, t: f64, t0: Option<f64>) -> Stage {
        if self.mode == ManeuverMode::Stage3Only {
            return Stage::Return;
        }
        match t0 {
            Some(t0) if t >= t0 => Stage::Return,
            _ if t < self.stage1_duration => Stage::Hover,
            _ => Stage::Spin,
        }
    }
}

/// Desired attitude, body rate, and body acceleration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceSample {
    pub q_d: UnitQuaternion,
    pub omega_d: Vec3,
    pub omega_d_dot: Vec3,
}

impl ReferenceSample {
    pub fn identity() -> Self {
        Self {
            q_d: UnitQuaternion::identity(),
            omega_d: Vec3::zeros(),
            omega_d_dot: Vec3::zeros(),
        }
    }
}

/// Constant-rate rotation accumulated from the identity, without any wrap.
fn spin(omega: &Vec3, elapsed: f64) -> UnitQuaternion {
    let rate = omega.norm();
    if rate == 0.0 {
        return UnitQuaternion::identity();
    }
    let half = 0.5 * rate * elapsed;
    UnitQuaternion::normalize(half.cos(), omega / rate * half.sin())
        .expect("cos/sin pair has unit norm")
}

pub fn reference_at(spec: &ManeuverSpec, t: f64, t0: Option<f64>) -> ReferenceSample {
    match spec.stage_at(t, t0) {
        Stage::Hover | Stage::Return => ReferenceSample::identity(),
        Stage::Spin => ReferenceSample {
            q_d: spin(&spec.omega0, t - spec.stage1_duration),
            omega_d: spec.omega0,
            omega_d_dot: Vec3::zeros(),
        },
    }
}

/// Body state at `t₀` for stage-3-only runs: yawed by `ψ₀` with the scalar
/// part going negative past π, spinning at `ω₀`.
pub fn stage3_initial_state(spec: &ManeuverSpec) -> BodyState {
    BodyState::new(UnitQuaternion::about_b3(spec.psi0), spec.omega0)
}
