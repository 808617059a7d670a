//! Scenario execution: wires the reference generator, a control law, and the
//! rigid-body integrator together and records per-step telemetry.

use std::f64::consts::{PI, TAU};

use crate::control::{AttitudeController, ControlLaw, ControlOutput, ErrorState, GainSet, Sigma};
use crate::error::{Error, Result};
use crate::quat::{Vec3, UnitQuaternion};
use crate::reference::{reference_at, stage3_initial_state, ManeuverMode, ManeuverSpec, Stage};
use crate::rigid_body::{simulate, BodyState, Controller, InertiaMatrix, SimConfig, TorqueCommand, DEFAULT_DT};
use crate::stability::LyapunovPoint;

/// Evaluation window after the Stage-3 start.
pub const DEFAULT_HORIZON: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub maneuver: ManeuverSpec,
    pub law: ControlLaw,
    pub gains: GainSet,
    pub inertia: InertiaMatrix,
    pub dt: f64,
    pub horizon_after_t0: f64,
    pub seed: u64,
    pub decimation: usize,
    pub torque_limit: Option<f64>,
}

impl Scenario {
    /// Stage-3-only yaw scenario with the experiment gains for `law`.
    pub fn yaw_stage3(omega_z: f64, psi0_deg: f64, law: ControlLaw) -> Result<Self> {
        let maneuver = ManeuverSpec::yaw(omega_z, psi0_deg, ManeuverMode::Stage3Only)?;
        Ok(Self::with_defaults(ic_label(omega_z, psi0_deg), maneuver, law))
    }

    pub fn with_defaults(name: String, maneuver: ManeuverSpec, law: ControlLaw) -> Self {
        Self {
            name,
            maneuver,
            law,
            gains: default_gains(law),
            inertia: InertiaMatrix::default(),
            dt: DEFAULT_DT,
            horizon_after_t0: DEFAULT_HORIZON,
            seed: 0,
            decimation: 1,
            torque_limit: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.maneuver.validate()?;
        self.gains.validate()?;
        if !(self.horizon_after_t0 > 0.0) || !self.horizon_after_t0.is_finite() {
            return Err(Error::InvalidSettings(format!(
                "horizon after t0 must be positive, got {}",
                self.horizon_after_t0
            )));
        }
        SimConfig {
            dt: self.dt,
            duration: self.horizon_after_t0,
            decimation: self.decimation,
            torque_limit: self.torque_limit,
        }
        .validate()
    }
}

/// Benchmark runs use the high proportional gain; the other laws use the switching set.
pub fn default_gains(law: ControlLaw) -> GainSet {
    match law {
        ControlLaw::Benchmark => GainSet::benchmark_default(),
        ControlLaw::Continuous | ControlLaw::Switching => GainSet::switching_default(),
    }
}

pub fn ic_label(omega_z: f64, psi0_deg: f64) -> String {
    format!("w{omega_z}_psi{psi0_deg}")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSample {
    pub t: f64,
    pub state: BodyState,
    /// Error with `nu` set for the active σ.
    pub error: ErrorState,
    pub torque: TorqueCommand,
    pub sigma: Sigma,
    pub lambda: f64,
    pub v: f64,
    pub stage: Stage,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub scenario: String,
    pub law: ControlLaw,
    pub samples: Vec<RunSample>,
    pub t0: f64,
    pub tf: f64,
    /// RMS torque norm over `[t0, tf]` (N·m).
    pub gamma_tau: f64,
    pub switch_times: Vec<f64>,
    /// Yaw of the final attitude relative to the final reference (rad).
    pub final_yaw_error: f64,
}

impl RunResult {
    pub fn lyapunov_trace(&self) -> Vec<LyapunovPoint> {
        self.samples
            .iter()
            .map(|s| LyapunovPoint {
                t: s.t,
                sigma: s.sigma,
                lambda: s.lambda,
                v: s.v,
            })
            .collect()
    }

    /// Samples from the Stage-3 start on.
    pub fn stage3_samples(&self) -> impl Iterator<Item = &RunSample> {
        let t0 = self.t0;
        self.samples.iter().filter(move |s| s.t >= t0)
    }

    pub fn sigma_at_t0(&self) -> Option<Sigma> {
        self.stage3_samples().next().map(|s| s.sigma)
    }

    pub fn last(&self) -> Option<&RunSample> {
        self.samples.last()
    }
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// Continuous yaw reconstructed from successive wrapped readings.
#[derive(Clone, Copy, Debug, Default)]
struct YawUnwrapper {
    last: Option<f64>,
    total: f64,
}

impl YawUnwrapper {
    fn push(&mut self, yaw: f64) -> f64 {
        match self.last {
            Some(prev) => self.total += wrap_angle(yaw - prev),
            None => self.total = yaw,
        }
        self.last = Some(yaw);
        self.total
    }
}

#[derive(Clone, Copy, Debug)]
struct StepTelemetry {
    output: ControlOutput,
    stage: Stage,
    q_d: UnitQuaternion,
}

/// Drives one control law along a maneuver, detecting the Stage-3 transition.
struct TrackingController {
    inner: AttitudeController,
    maneuver: ManeuverSpec,
    t0: Option<f64>,
    horizon: f64,
    dt: f64,
    yaw: YawUnwrapper,
}

impl Controller for TrackingController {
    type Telemetry = StepTelemetry;

    fn command(&mut self, t: f64, state: &BodyState) -> Result<(TorqueCommand, StepTelemetry)> {
        let yaw = self.yaw.push(state.q.yaw());
        if self.t0.is_none() && self.maneuver.stage_at(t, None) == Stage::Spin && yaw >= self.maneuver.psi0 {
            self.t0 = Some(t);
        }
        let reference = reference_at(&self.maneuver, t, self.t0);
        let output = self.inner.compute(t, state, &reference);
        Ok((
            output.torque,
            StepTelemetry {
                output,
                stage: self.maneuver.stage_at(t, self.t0),
                q_d: reference.q_d,
            },
        ))
    }

    fn finished(&self, t: f64) -> bool {
        self.t0
            .is_some_and(|t0| t >= t0 + self.horizon - 0.5 * self.dt)
    }
}

pub fn run_scenario(sc: &Scenario) -> Result<RunResult> {
    sc.validate()?;
    let (initial, t0, duration) = match sc.maneuver.mode {
        ManeuverMode::Stage3Only => (stage3_initial_state(&sc.maneuver), Some(0.0), sc.horizon_after_t0),
        ManeuverMode::FullThreeStage => {
            let spin = sc.maneuver.psi0 / sc.maneuver.omega0.norm();
            let limit = sc.maneuver.stage1_duration + 2.0 * spin + 2.0 + sc.horizon_after_t0;
            (BodyState::at_rest(), None, limit)
        }
    };
    let mut controller = TrackingController {
        inner: AttitudeController::new(sc.law, sc.gains, sc.inertia)?,
        maneuver: sc.maneuver,
        t0,
        horizon: sc.horizon_after_t0,
        dt: sc.dt,
        yaw: YawUnwrapper::default(),
    };
    let config = SimConfig {
        dt: sc.dt,
        duration,
        decimation: sc.decimation,
        torque_limit: sc.torque_limit,
    };
    let raw = simulate(initial, &mut controller, &sc.inertia, &config)?;
    let t0 = controller
        .t0
        .ok_or(Error::TransitionNotReached { limit: duration })?;

    let samples: Vec<RunSample> = raw
        .iter()
        .map(|s| {
            let o = &s.telemetry.output;
            RunSample {
                t: s.t,
                state: s.state,
                error: o.error,
                torque: s.torque,
                sigma: o.sigma,
                lambda: o.lambda,
                v: o.v,
                stage: s.telemetry.stage,
            }
        })
        .collect();
    let last = raw.last().expect("simulate returns at least one sample");
    let tf = (t0 + sc.horizon_after_t0).min(last.t);
    let final_yaw_error = wrap_angle(last.state.q.yaw() - last.telemetry.q_d.yaw());

    let mut run = RunResult {
        scenario: sc.name.clone(),
        law: sc.law,
        samples,
        t0,
        tf,
        gamma_tau: 0.0,
        switch_times: controller.inner.switch_state().switch_times.clone(),
        final_yaw_error,
    };
    run.gamma_tau = control_effort(&run, t0, tf)?;
    Ok(run)
}

/// `Γ_τ = (1/(t_f − t₀) ∫ ‖τ‖² dt)^½` over the recorded torque.
pub fn control_effort(run: &RunResult, t0: f64, tf: f64) -> Result<f64> {
    let series: Vec<(f64, Vec3)> = run.samples.iter().map(|s| (s.t, s.torque.tau)).collect();
    rms_torque(&series, t0, tf)
}

/// Trapezoidal RMS of `‖τ‖` over `[t0, tf]`, interpolating linearly at the
/// window edges.
pub fn rms_torque(series: &[(f64, Vec3)], t0: f64, tf: f64) -> Result<f64> {
    let (start, end) = match (series.first(), series.last()) {
        (Some(a), Some(b)) => (a.0, b.0),
        _ => (f64::NAN, f64::NAN),
    };
    let slop = 1e-9 * (1.0 + tf.abs());
    if !(tf > t0) || !(start <= t0 + slop) || !(end >= tf - slop) {
        return Err(Error::WindowOutsideRun { t0, tf, start, end });
    }
    let sq = |i: usize| series[i].1.norm_squared();
    let mut integral = 0.0;
    for i in 1..series.len() {
        let (ta, tb) = (series[i - 1].0, series[i].0);
        let lo = ta.max(t0);
        let hi = tb.min(tf);
        if hi <= lo || tb <= ta {
            continue;
        }
        let (fa, fb) = (sq(i - 1), sq(i));
        let at = |t: f64| fa + (fb - fa) * (t - ta) / (tb - ta);
        integral += 0.5 * (at(lo) + at(hi)) * (hi - lo);
    }
    Ok((integral / (tf - t0)).sqrt())
}
