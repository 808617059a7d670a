//! Torque-driven rigid-body attitude dynamics and a fixed-step RK4 integrator.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::quat::{QuatRate, UnitQuaternion, Vec3};

pub const DEFAULT_DT: f64 = 1e-3;

/// Symmetric positive-definite inertia matrix in body coordinates (kg·m²).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InertiaMatrix {
    matrix: Matrix3<f64>,
    inverse: Matrix3<f64>,
}

impl InertiaMatrix {
    pub fn new(matrix: Matrix3<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInertia("non-finite entry".into()));
        }
        let asym = (matrix - matrix.transpose()).abs().max();
        if asym > 1e-12 {
            return Err(Error::InvalidInertia(format!("asymmetry {asym:e} exceeds 1e-12")));
        }
        let minors = [
            matrix[(0, 0)],
            matrix.fixed_view::<2, 2>(0, 0).determinant(),
            matrix.determinant(),
        ];
        if minors.iter().any(|&d| d <= 0.0) {
            return Err(Error::InvalidInertia(format!(
                "not positive definite (leading minors {minors:?})"
            )));
        }
        let inverse = matrix
            .try_inverse()
            .ok_or_else(|| Error::InvalidInertia("singular".into()))?;
        Ok(Self { matrix, inverse })
    }

    pub fn diagonal(jx: f64, jy: f64, jz: f64) -> Result<Self> {
        Self::new(Matrix3::from_diagonal(&Vec3::new(jx, jy, jz)))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    pub fn inverse(&self) -> &Matrix3<f64> {
        &self.inverse
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.matrix * v
    }

    /// `J⁻¹ v`.
    pub fn solve(&self, v: &Vec3) -> Vec3 {
        self.inverse * v
    }

    pub fn diagonal_entries(&self) -> Vec3 {
        self.matrix.diagonal()
    }
}

impl Default for InertiaMatrix {
    /// 31-g quadrotor scale placeholder.
    fn default() -> Self {
        Self::diagonal(1.66e-5, 1.66e-5, 2.93e-5).expect("default inertia is valid")
    }
}

/// Attitude of the body frame in the inertial frame plus body-frame angular velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BodyState {
    pub q: UnitQuaternion,
    pub omega: Vec3,
}

impl BodyState {
    pub fn new(q: UnitQuaternion, omega: Vec3) -> Self {
        Self { q, omega }
    }

    pub fn at_rest() -> Self {
        Self::new(UnitQuaternion::identity(), Vec3::zeros())
    }

    /// Angular momentum expressed in the inertial frame.
    pub fn inertial_momentum(&self, inertia: &InertiaMatrix) -> Vec3 {
        self.q.rotate_vector(&inertia.apply(&self.omega))
    }

    pub fn kinetic_energy(&self, inertia: &InertiaMatrix) -> f64 {
        0.5 * self.omega.dot(&inertia.apply(&self.omega))
    }
}

/// Body-frame torque (N·m).
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct TorqueCommand {
    pub tau: Vec3,
}

impl TorqueCommand {
    pub fn new(tau: Vec3) -> Self {
        Self { tau }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// Symmetric per-axis clamp.
    pub fn clamped(self, limit: f64) -> Self {
        Self {
            tau: self.tau.map(|v| v.clamp(-limit, limit)),
        }
    }
}

/// `(q̇, ω̇)` for the torque-driven rigid body.
pub fn open_loop_derivative(
    state: &BodyState,
    torque: &TorqueCommand,
    inertia: &InertiaMatrix,
) -> (QuatRate, Vec3) {
    let w = &state.omega;
    let omega_dot = inertia.solve(&(torque.tau - w.cross(&inertia.apply(w))));
    (state.q.kinematics(w), omega_dot)
}

/// One classical Runge–Kutta step with the torque held over the interval.
/// The quaternion is renormalized afterwards without changing its sign.
pub fn rk4_step(
    state: &BodyState,
    torque: &TorqueCommand,
    inertia: &InertiaMatrix,
    dt: f64,
) -> Result<BodyState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidSettings(format!("dt must be positive, got {dt}")));
    }
    let deriv = |m: f64, n: Vec3, w: Vec3| -> ([f64; 4], Vec3) {
        // raw stage quaternions are not unit, so evaluate kinematics directly
        let q = UnitQuaternion::from_parts_unchecked(m, n);
        let (qd, wd) = open_loop_derivative(&BodyState::new(q, w), torque, inertia);
        (qd.as_array(), wd)
    };
    let q0 = state.q.as_array();
    let w0 = state.omega;
    let shift = |base: &[f64; 4], k: &[f64; 4], h: f64| -> (f64, Vec3) {
        (
            base[0] + h * k[0],
            Vec3::new(base[1] + h * k[1], base[2] + h * k[2], base[3] + h * k[3]),
        )
    };

    let (k1q, k1w) = deriv(q0[0], state.q.n(), w0);
    let (m, n) = shift(&q0, &k1q, 0.5 * dt);
    let (k2q, k2w) = deriv(m, n, w0 + 0.5 * dt * k1w);
    let (m, n) = shift(&q0, &k2q, 0.5 * dt);
    let (k3q, k3w) = deriv(m, n, w0 + 0.5 * dt * k2w);
    let (m, n) = shift(&q0, &k3q, dt);
    let (k4q, k4w) = deriv(m, n, w0 + dt * k3w);

    let mut q = [0.0; 4];
    for i in 0..4 {
        q[i] = q0[i] + dt / 6.0 * (k1q[i] + 2.0 * k2q[i] + 2.0 * k3q[i] + k4q[i]);
    }
    let omega = w0 + dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);

    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "attitude quaternion" });
    }
    if omega.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "angular velocity" });
    }
    let q = UnitQuaternion::from_parts_unchecked(q[0], Vec3::new(q[1], q[2], q[3]));
    if q.norm_drift() >= 1.0 {
        return Err(Error::NonFinite { what: "attitude quaternion" });
    }
    Ok(BodyState::new(q.force_normalized(), omega))
}

/// Produces torque commands from the measured state.
pub trait Controller {
    type Telemetry: Clone;

    fn command(&mut self, t: f64, state: &BodyState) -> Result<(TorqueCommand, Self::Telemetry)>;

    /// Lets a controller end the run early (e.g. once a maneuver completes).
    fn finished(&self, _t: f64) -> bool {
        false
    }
}

impl<F, T> Controller for F
where
    F: FnMut(f64, &BodyState) -> Result<(TorqueCommand, T)>,
    T: Clone,
{
    type Telemetry = T;

    fn command(&mut self, t: f64, state: &BodyState) -> Result<(TorqueCommand, T)> {
        self(t, state)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    /// Physics steps per controller invocation.
    pub decimation: usize,
    pub torque_limit: Option<f64>,
}

impl SimConfig {
    pub fn new(dt: f64, duration: f64) -> Self {
        Self {
            dt,
            duration,
            decimation: 1,
            torque_limit: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidSettings(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return Err(Error::InvalidSettings(format!(
                "duration must be non-negative, got {}",
                self.duration
            )));
        }
        if self.decimation == 0 {
            return Err(Error::InvalidSettings("decimation must be at least 1".into()));
        }
        if let Some(limit) = self.torque_limit {
            if !(limit > 0.0) {
                return Err(Error::InvalidSettings(format!("torque limit must be positive, got {limit}")));
            }
        }
        Ok(())
    }

    pub fn step_count(&self) -> usize {
        let ratio = self.duration / self.dt;
        let rounded = ratio.round();
        if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
            rounded as usize
        } else {
            ratio.ceil() as usize
        }
    }
}

/// One recorded instant: the state at `t` and the torque held over `[t, t + dt)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<T> {
    pub t: f64,
    pub state: BodyState,
    pub torque: TorqueCommand,
    pub telemetry: T,
}

/// Integrates the closed loop from `initial`, sampling once per physics step.
pub fn simulate<C: Controller>(
    initial: BodyState,
    controller: &mut C,
    inertia: &InertiaMatrix,
    config: &SimConfig,
) -> Result<Vec<Sample<C::Telemetry>>> {
    config.validate()?;
    let steps = config.step_count();
    let at = |t: f64| move |e: Error| Error::AtTime { t, source: Box::new(e) };

    let mut samples = Vec::with_capacity(steps + 1);
    let mut state = initial;
    let mut held: Option<(TorqueCommand, C::Telemetry)> = None;
    for k in 0..=steps {
        let t = k as f64 * config.dt;
        if k % config.decimation == 0 || held.is_none() {
            let (torque, telemetry) = controller.command(t, &state).map_err(at(t))?;
            let torque = match config.torque_limit {
                Some(limit) => torque.clamped(limit),
                None => torque,
            };
            if torque.tau.iter().any(|v| !v.is_finite()) {
                return Err(at(t)(Error::NonFinite { what: "torque command" }));
            }
            held = Some((torque, telemetry));
        }
        let (torque, telemetry) = held.clone().expect("command issued above");
        samples.push(Sample {
            t,
            state,
            torque,
            telemetry,
        });
        if k == steps || controller.finished(t) {
            break;
        }
        state = rk4_step(&state, &torque, inertia, config.dt).map_err(at(t))?;
    }
    Ok(samples)
}
