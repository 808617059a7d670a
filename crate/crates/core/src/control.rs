//! Attitude error and the three torque laws: the continuous PD law with
//! feedforward and feedback linearization, the `sgn{m_e}` benchmark, and the
//! Lyapunov-based switching law with its hysteresis state machine.

use std::fmt;
use std::ops::Neg;

use crate::error::{Error, Result};
use crate::quat::{UnitQuaternion, Vec3};
use crate::reference::ReferenceSample;
use crate::rigid_body::{BodyState, InertiaMatrix, TorqueCommand};
use crate::stability;

pub const DEFAULT_DELTA: f64 = 0.1;

/// Controller and Lyapunov parameters. Gains are raw scalars; no units are enforced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainSet {
    pub k_q: f64,
    pub k_omega: f64,
    pub k_n: f64,
    /// Lyapunov weight; also sets the region-of-attraction level `4c`.
    pub c: f64,
    /// Hysteresis margin on Λ.
    pub delta: f64,
}

impl GainSet {
    pub fn new(k_q: f64, k_omega: f64, k_n: f64, c: f64, delta: f64) -> Result<Self> {
        let g = Self {
            k_q,
            k_omega,
            k_n,
            c,
            delta,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("k_q", self.k_q),
            ("k_omega", self.k_omega),
            ("k_n", self.k_n),
            ("c", self.c),
            ("delta", self.delta),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositiveGain { name, value });
            }
        }
        Ok(())
    }

    /// Gains used for the switching controller in the yaw experiments.
    pub fn switching_default() -> Self {
        Self {
            k_q: 10.0,
            k_omega: 100.0,
            k_n: 10.0,
            c: 2.0,
            delta: DEFAULT_DELTA,
        }
    }

    /// Gains used for the benchmark controller in the yaw experiments.
    /// `k_n` is unused by the benchmark law and only feeds diagnostics.
    pub fn benchmark_default() -> Self {
        Self {
            k_q: 1000.0,
            k_omega: 100.0,
            ..Self::switching_default()
        }
    }

    /// `c < 4 k_n k_ω / k_q`, required for the decrease certificate.
    pub fn satisfies_p_condition(&self) -> bool {
        self.c < 4.0 * self.k_n * self.k_omega / self.k_q
    }
}

/// Switching signal σ ∈ {+1, −1}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sigma {
    Plus,
    Minus,
}

impl Sigma {
    pub fn value(self) -> f64 {
        match self {
            Sigma::Plus => 1.0,
            Sigma::Minus => -1.0,
        }
    }

    /// `sgn{x}` with `sgn{0} = +1`.
    pub fn sign_of(x: f64) -> Self {
        if x < 0.0 {
            Sigma::Minus
        } else {
            Sigma::Plus
        }
    }

    pub fn from_value(v: f64) -> Option<Self> {
        if v == 1.0 {
            Some(Sigma::Plus)
        } else if v == -1.0 {
            Some(Sigma::Minus)
        } else {
            None
        }
    }
}

impl Neg for Sigma {
    type Output = Sigma;

    fn neg(self) -> Sigma {
        match self {
            Sigma::Plus => Sigma::Minus,
            Sigma::Minus => Sigma::Plus,
        }
    }
}

impl fmt::Display for Sigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sigma::Plus => "+1",
            Sigma::Minus => "-1",
        })
    }
}

/// Attitude-error quaternion, angular-velocity error, and (once a σ is
/// chosen) the composite variable `ν_σ = ω_e + σ k_n n_e`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorState {
    pub q_e: UnitQuaternion,
    pub omega_e: Vec3,
    pub nu: Option<Vec3>,
}

impl ErrorState {
    pub fn new(q_e: UnitQuaternion, omega_e: Vec3) -> Self {
        Self {
            q_e,
            omega_e,
            nu: None,
        }
    }

    pub fn m_e(&self) -> f64 {
        self.q_e.m()
    }

    pub fn n_e(&self) -> Vec3 {
        self.q_e.n()
    }

    pub fn with_nu(mut self, sigma: Sigma, gains: &GainSet) -> Self {
        self.nu = Some(nu_sigma(&self, sigma, gains));
        self
    }

    /// `ṅ_e`: vector part of `½ [0 ω_e]ᵀ ⊗ q̄_e`.
    pub fn n_e_dot(&self) -> Vec3 {
        0.5 * (self.m_e() * self.omega_e + self.omega_e.cross(&self.n_e()))
    }

    /// `ṁ_e`: scalar part of `½ [0 ω_e]ᵀ ⊗ q̄_e`.
    pub fn m_e_dot(&self) -> f64 {
        -0.5 * self.omega_e.dot(&self.n_e())
    }
}

/// `q̄_e = q̄⁻¹ ⊗ q̄_d` and `ω_e = ω_d − ω`, without sign normalization.
pub fn attitude_error(q: &UnitQuaternion, q_d: &UnitQuaternion, omega: &Vec3, omega_d: &Vec3) -> ErrorState {
    ErrorState::new(q.inverse().mul(q_d), omega_d - omega)
}

fn linearized(inner: Vec3, omega: &Vec3, inertia: &InertiaMatrix) -> TorqueCommand {
    TorqueCommand::new(inertia.apply(&inner) + omega.cross(&inertia.apply(omega)))
}

/// `τ = J(k_q n_e + k_ω ω_e + ω̇_d) + ω × Jω`.
pub fn continuous_torque(
    e: &ErrorState,
    omega: &Vec3,
    omega_d_dot: &Vec3,
    gains: &GainSet,
    inertia: &InertiaMatrix,
) -> TorqueCommand {
    let inner = gains.k_q * e.n_e() + gains.k_omega * e.omega_e + omega_d_dot;
    linearized(inner, omega, inertia)
}

/// `τ_b = J(sgn{m_e} k_q n_e + k_ω ω_e + ω̇_d) + ω × Jω`.
pub fn benchmark_torque(
    e: &ErrorState,
    omega: &Vec3,
    omega_d_dot: &Vec3,
    gains: &GainSet,
    inertia: &InertiaMatrix,
) -> TorqueCommand {
    let s = Sigma::sign_of(e.m_e()).value();
    let inner = s * gains.k_q * e.n_e() + gains.k_omega * e.omega_e + omega_d_dot;
    linearized(inner, omega, inertia)
}

pub fn nu_sigma(e: &ErrorState, sigma: Sigma, gains: &GainSet) -> Vec3 {
    e.omega_e + sigma.value() * gains.k_n * e.n_e()
}

/// `τ_σ = J(σ k_q n_e + k_ω ν_σ + ω̇_d + σ k_n ṅ_e) + ω × Jω`.
pub fn switching_torque(
    e: &ErrorState,
    sigma: Sigma,
    omega: &Vec3,
    omega_d_dot: &Vec3,
    gains: &GainSet,
    inertia: &InertiaMatrix,
) -> TorqueCommand {
    let s = sigma.value();
    let nu = nu_sigma(e, sigma, gains);
    let inner = s * gains.k_q * e.n_e() + gains.k_omega * nu + omega_d_dot + s * gains.k_n * e.n_e_dot();
    linearized(inner, omega, inertia)
}

/// Hysteretic selection of the next σ from the switching function Λ.
pub fn next_sigma(sigma: Sigma, lambda: f64, delta: f64) -> Sigma {
    if lambda >= delta {
        Sigma::Plus
    } else if lambda <= -delta {
        Sigma::Minus
    } else {
        sigma
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwitchState {
    pub sigma: Sigma,
    pub last_lambda: f64,
    pub switch_count: usize,
    pub switch_times: Vec<f64>,
}

impl Default for SwitchState {
    fn default() -> Self {
        Self {
            sigma: Sigma::Plus,
            last_lambda: 0.0,
            switch_count: 0,
            switch_times: Vec::new(),
        }
    }
}

impl SwitchState {
    pub fn update(&mut self, lambda: f64, delta: f64, t: f64) -> Sigma {
        let next = next_sigma(self.sigma, lambda, delta);
        if next != self.sigma {
            self.switch_count += 1;
            self.switch_times.push(t);
            self.sigma = next;
        }
        self.last_lambda = lambda;
        next
    }
}

/// Pure-function form of [`SwitchState::update`].
pub fn update_sigma(state: &SwitchState, lambda: f64, delta: f64, t: f64) -> SwitchState {
    let mut next = state.clone();
    next.update(lambda, delta, t);
    next
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ControlLaw {
    Continuous,
    Benchmark,
    Switching,
}

impl ControlLaw {
    pub fn name(self) -> &'static str {
        match self {
            ControlLaw::Continuous => "continuous",
            ControlLaw::Benchmark => "benchmark",
            ControlLaw::Switching => "switching",
        }
    }
}

impl std::str::FromStr for ControlLaw {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "continuous" => Ok(ControlLaw::Continuous),
            "benchmark" => Ok(ControlLaw::Benchmark),
            "switching" => Ok(ControlLaw::Switching),
            other => Err(format!("unknown controller `{other}`")),
        }
    }
}

impl fmt::Display for ControlLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything one control step produces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlOutput {
    pub torque: TorqueCommand,
    /// Error state with `nu` set for the reported σ.
    pub error: ErrorState,
    /// Active σ (always +1 for the continuous law, `sgn{m_e}` for the benchmark).
    pub sigma: Sigma,
    pub lambda: f64,
    pub v: f64,
}

/// One controller instance serves one simulation.
#[derive(Clone, Debug)]
pub struct AttitudeController {
    law: ControlLaw,
    gains: GainSet,
    inertia: InertiaMatrix,
    switching: SwitchState,
}

impl AttitudeController {
    pub fn new(law: ControlLaw, gains: GainSet, inertia: InertiaMatrix) -> Result<Self> {
        gains.validate()?;
        Ok(Self {
            law,
            gains,
            inertia,
            switching: SwitchState::default(),
        })
    }

    pub fn law(&self) -> ControlLaw {
        self.law
    }

    pub fn gains(&self) -> &GainSet {
        &self.gains
    }

    pub fn switch_state(&self) -> &SwitchState {
        &self.switching
    }

    pub fn compute(&mut self, t: f64, state: &BodyState, reference: &ReferenceSample) -> ControlOutput {
        let g = self.gains;
        let e = attitude_error(&state.q, &reference.q_d, &state.omega, &reference.omega_d);
        let lambda = stability::switching_lambda(&e, &g);
        let (sigma, torque) = match self.law {
            ControlLaw::Continuous => (
                Sigma::Plus,
                continuous_torque(&e, &state.omega, &reference.omega_d_dot, &g, &self.inertia),
            ),
            ControlLaw::Benchmark => (
                Sigma::sign_of(e.m_e()),
                benchmark_torque(&e, &state.omega, &reference.omega_d_dot, &g, &self.inertia),
            ),
            ControlLaw::Switching => {
                let sigma = self.switching.update(lambda, g.delta, t);
                (
                    sigma,
                    switching_torque(&e, sigma, &state.omega, &reference.omega_d_dot, &g, &self.inertia),
                )
            }
        };
        ControlOutput {
            torque,
            error: e.with_nu(sigma, &g),
            sigma,
            lambda,
            v: stability::lyapunov_v(&e, sigma, &g),
        }
    }
}
