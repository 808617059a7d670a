use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the attitude simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("axis must be unit length, got norm {norm}")]
    NonUnitAxis { norm: f64 },

    #[error("angle {angle} rad outside (-2pi, 2pi]")]
    AngleOutOfRange { angle: f64 },

    #[error("quaternion norm {norm} is not unit")]
    NonUnitQuaternion { norm: f64 },

    #[error("invalid inertia matrix: {0}")]
    InvalidInertia(String),

    #[error("gain `{name}` must be finite and strictly positive, got {value}")]
    NonPositiveGain { name: &'static str, value: f64 },

    #[error("invalid maneuver: {0}")]
    InvalidManeuver(String),

    #[error("invalid simulation settings: {0}")]
    InvalidSettings(String),

    #[error("non-finite {what} after integration step")]
    NonFinite { what: &'static str },

    #[error("simulation failed at t = {t} s: {source}")]
    AtTime {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("maneuver never reached the stage-3 transition within {limit} s")]
    TransitionNotReached { limit: f64 },

    #[error("effort window [{t0}, {tf}] not covered by run spanning [{start}, {end}]")]
    WindowOutsideRun {
        t0: f64,
        tf: f64,
        start: f64,
        end: f64,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
