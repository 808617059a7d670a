//! Lyapunov certificates for the switched closed loop.
//!
//! The closed-loop error system for a fixed σ lives on `(q̄_e, ν_σ) ∈ S³ × ℝ³`:
//!
//! ```text
//! q̄̇_e = ½ [0, ν − σ k_n n_e]ᵀ ⊗ q̄_e
//! ν̇   = −(σ k_q n_e + k_ω ν)
//! ```
//!
//! with Lyapunov function `V_σ = ½ k_q⁻¹ ‖ν_σ‖² + 2c (1 − σ m_e)`. This module
//! evaluates `V_σ`, its exact derivative and quadratic upper bound, the
//! switching function `Λ = V₋₁ − V₊₁`, region-of-attraction membership,
//! Jacobians of the error vector field, and the closed-form saddle spectrum
//! at the unstable fixed point. It also checks recorded trajectories against
//! the exponential-rate bound and the inter-switch decrease condition.

use std::fmt;

use nalgebra::{Matrix2, Matrix3, SMatrix, SVector};

use crate::control::{nu_sigma, ErrorState, GainSet, Sigma};
use crate::quat::{skew, Vec3};

pub type ErrorVector = SVector<f64, 7>;
pub type Jacobian = SMatrix<f64, 7, 7>;

/// |V| below which an exponentially decaying trace is considered converged.
pub const CONVERGED_V: f64 = 1e-12;

/// Relative slack on the exponential envelope.
pub const EXP_RATE_TOLERANCE: f64 = 1e-6;

/// Absolute slack for integration-coupled checks on recorded traces.
pub const TRACE_TOLERANCE: f64 = 1e-6;

/// `1 − s` for `s = σ m_e`, using `‖n_e‖²/(1 + s)` near the minimum to avoid
/// cancellation.
fn one_minus(s: f64, n_sq: f64) -> f64 {
    if s > 0.0 {
        n_sq / (1.0 + s)
    } else {
        1.0 - s
    }
}

pub fn lyapunov_v(e: &ErrorState, sigma: Sigma, g: &GainSet) -> f64 {
    let nu = nu_sigma(e, sigma, g);
    0.5 / g.k_q * nu.norm_squared() + 2.0 * g.c * one_minus(sigma.value() * e.m_e(), e.n_e().norm_squared())
}

/// `−xᵀPx` with `x = (‖n_e‖, ‖ν_σ‖)`.
pub fn lyapunov_vdot_bound(e: &ErrorState, sigma: Sigma, g: &GainSet) -> f64 {
    let x = nalgebra::Vector2::new(e.n_e().norm(), nu_sigma(e, sigma, g).norm());
    -(x.transpose() * p_matrix(g).matrix * x)[(0, 0)]
}

/// Exact `V̇_σ` along the closed-loop error dynamics.
pub fn exact_vdot(e: &ErrorState, sigma: Sigma, g: &GainSet) -> f64 {
    let nu = nu_sigma(e, sigma, g);
    let n = e.n_e();
    (g.c - 1.0) * sigma.value() * nu.dot(&n) - g.k_omega / g.k_q * nu.norm_squared() - g.c * g.k_n * n.norm_squared()
}

/// `Λ = ΔV = V₋₁ − V₊₁ = −2 k_q⁻¹ k_n ω_eᵀ n_e + 4c m_e`.
pub fn switching_lambda(e: &ErrorState, g: &GainSet) -> f64 {
    -2.0 / g.k_q * g.k_n * e.omega_e.dot(&e.n_e()) + 4.0 * g.c * e.m_e()
}

/// Membership in the sublevel set `{V_σ < 4c}`.
pub fn roa_contains(e: &ErrorState, sigma: Sigma, g: &GainSet) -> bool {
    lyapunov_v(e, sigma, g) < 4.0 * g.c
}

/// Membership in the exponential-stability region `{σ m_e > 0}`.
pub fn exp_region_contains(e: &ErrorState, sigma: Sigma) -> bool {
    sigma.value() * e.m_e() > 0.0
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PMatrix {
    pub matrix: Matrix2<f64>,
}

pub fn p_matrix(g: &GainSet) -> PMatrix {
    PMatrix {
        matrix: Matrix2::new(g.c * g.k_n, -0.5 * g.c, -0.5 * g.c, g.k_omega / g.k_q),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PCertificate {
    pub p: PMatrix,
    /// Leading principal minors of P.
    pub minors: [f64; 2],
    pub positive_definite: bool,
    /// Upper bound `4 k_n k_ω / k_q` on c.
    pub c_max: f64,
    /// Lower bound on c under which `(c − 1) νᵀn ≤ c ‖ν‖‖n‖` holds for all states.
    pub c_min_for_bound: f64,
    pub bound_step_valid: bool,
}

pub fn p_matrix_certificate(g: &GainSet) -> PCertificate {
    let p = p_matrix(g);
    let minors = [p.matrix[(0, 0)], p.matrix.determinant()];
    PCertificate {
        p,
        minors,
        positive_definite: minors.iter().all(|&d| d > 0.0),
        c_max: 4.0 * g.k_n * g.k_omega / g.k_q,
        c_min_for_bound: 0.5,
        bound_step_valid: g.c >= 0.5,
    }
}

/// Packs `(m_e, n_e, ν_σ)` into the 7-dimensional error coordinates.
pub fn error_vector(e: &ErrorState, sigma: Sigma, g: &GainSet) -> ErrorVector {
    let n = e.n_e();
    let nu = nu_sigma(e, sigma, g);
    ErrorVector::from_column_slice(&[e.m_e(), n.x, n.y, n.z, nu.x, nu.y, nu.z])
}

fn split(x: &ErrorVector) -> (f64, Vec3, Vec3) {
    (x[0], Vec3::new(x[1], x[2], x[3]), Vec3::new(x[4], x[5], x[6]))
}

/// Closed-loop error vector field for a fixed σ in unconstrained coordinates.
pub fn closed_loop_field(x: &ErrorVector, sigma: Sigma, g: &GainSet) -> ErrorVector {
    let s = sigma.value();
    let (m, n, nu) = split(x);
    let w = nu - s * g.k_n * n;
    let m_dot = -0.5 * w.dot(&n);
    let n_dot = 0.5 * (m * w + w.cross(&n));
    let nu_dot = -(s * g.k_q * n + g.k_omega * nu);
    let mut out = ErrorVector::zeros();
    out[0] = m_dot;
    out.fixed_rows_mut::<3>(1).copy_from(&n_dot);
    out.fixed_rows_mut::<3>(4).copy_from(&nu_dot);
    out
}

/// Jacobian of [`closed_loop_field`] at `x`.
pub fn jacobian_at(x: &ErrorVector, sigma: Sigma, g: &GainSet) -> Jacobian {
    let s = sigma.value();
    let (m, n, nu) = split(x);
    let eye = Matrix3::identity();
    let mut a = Jacobian::zeros();
    let dm_dn = -0.5 * nu + s * g.k_n * n;
    let dm_dnu = -0.5 * n;
    a.fixed_view_mut::<1, 3>(0, 1).copy_from(&dm_dn.transpose());
    a.fixed_view_mut::<1, 3>(0, 4).copy_from(&dm_dnu.transpose());
    a.fixed_view_mut::<3, 1>(1, 0).copy_from(&(0.5 * (nu - s * g.k_n * n)));
    a.fixed_view_mut::<3, 3>(1, 1).copy_from(&(0.5 * (skew(&nu) - s * g.k_n * m * eye)));
    a.fixed_view_mut::<3, 3>(1, 4).copy_from(&(0.5 * (m * eye - skew(&n))));
    a.fixed_view_mut::<3, 3>(4, 1).copy_from(&(-s * g.k_q * eye));
    a.fixed_view_mut::<3, 3>(4, 4).copy_from(&(-g.k_omega * eye));
    a
}

pub fn general_jacobian(e: &ErrorState, sigma: Sigma, g: &GainSet) -> Jacobian {
    jacobian_at(&error_vector(e, sigma, g), sigma, g)
}

/// Jacobian at the antipodal fixed point `q̄_e = [−1 0 0 0]ᵀ, ν = 0` for σ = +1.
pub fn saddle_jacobian(g: &GainSet) -> Jacobian {
    let eye = Matrix3::identity();
    let mut a = Jacobian::zeros();
    a.fixed_view_mut::<3, 3>(1, 1).copy_from(&(0.5 * g.k_n * eye));
    a.fixed_view_mut::<3, 3>(1, 4).copy_from(&(-0.5 * eye));
    a.fixed_view_mut::<3, 3>(4, 1).copy_from(&(-g.k_q * eye));
    a.fixed_view_mut::<3, 3>(4, 4).copy_from(&(-g.k_omega * eye));
    a
}

/// The 2×2 matrix whose Kronecker product with I₃ is the 6×6 saddle block.
pub fn saddle_reduced_block(g: &GainSet) -> Matrix2<f64> {
    Matrix2::new(0.5 * g.k_n, -0.5, -g.k_q, -g.k_omega)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaddleSpectrum {
    /// Unstable eigenvalue, multiplicity 3.
    pub lambda1: f64,
    /// Stable eigenvalue, multiplicity 3.
    pub lambda2: f64,
    /// Eigenvalue of the unit-norm constraint direction, multiplicity 1.
    pub lambda0: f64,
}

/// `λ = (a ± √(a² + 2(k_q + k_n k_ω)))/2` with `a = ½k_n − k_ω`. The root of
/// smaller magnitude is recovered from the product `−½(k_q + k_n k_ω)` to
/// avoid cancellation.
pub fn saddle_eigenvalues(g: &GainSet) -> SaddleSpectrum {
    let a = 0.5 * g.k_n - g.k_omega;
    let product = -0.5 * (g.k_q + g.k_n * g.k_omega);
    let root = (a * a + 2.0 * (g.k_q + g.k_n * g.k_omega)).sqrt();
    let (lambda1, lambda2) = if a >= 0.0 {
        let l1 = 0.5 * (a + root);
        (l1, product / l1)
    } else {
        let l2 = 0.5 * (a - root);
        (product / l2, l2)
    };
    debug_assert!(lambda1 > 0.0 && lambda2 < 0.0, "saddle spectrum requires positive gains");
    SaddleSpectrum {
        lambda1,
        lambda2,
        lambda0: 0.0,
    }
}

/// First sample pair (or single sample) at which a trace check failed.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub earlier: usize,
    pub later: usize,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "samples {} -> {}: {}", self.earlier, self.later, self.detail)
    }
}

impl std::error::Error for Violation {}

/// Checks `V(t) ≤ V(t_s) e^{−2k_ω(t − t_s)} (1 + 1e-6)` for all `t_s ≤ t` on
/// `(t, V)` samples, until V falls below [`CONVERGED_V`]. Gains must satisfy
/// `c = 1` and `k_n = 4 k_ω`.
pub fn exponential_rate_check(trajectory: &[(f64, f64)], g: &GainSet) -> Result<(), Violation> {
    if (g.c - 1.0).abs() > 1e-12 || (g.k_n - 4.0 * g.k_omega).abs() > 1e-12 * g.k_omega.max(1.0) {
        return Err(Violation {
            earlier: 0,
            later: 0,
            detail: format!("rate bound needs c = 1 and k_n = 4 k_ω (c = {}, k_n = {}, k_ω = {})", g.c, g.k_n, g.k_omega),
        });
    }
    let rate = 2.0 * g.k_omega;
    let slack = EXP_RATE_TOLERANCE.ln_1p();
    // log V + 2k_ω t must never exceed its running minimum by more than the slack
    let mut best: Option<(usize, f64)> = None;
    for (i, &(t, v)) in trajectory.iter().enumerate() {
        if v <= CONVERGED_V {
            break;
        }
        let level = v.ln() + rate * t;
        if let Some((j, min)) = best {
            if level > min + slack {
                return Err(Violation {
                    earlier: j,
                    later: i,
                    detail: format!(
                        "V = {v:e} at t = {t} exceeds envelope {:e}",
                        (min - rate * t).exp()
                    ),
                });
            }
            if level < min {
                best = Some((i, level));
            }
        } else {
            best = Some((i, level));
        }
    }
    Ok(())
}

/// Per-step Lyapunov telemetry of a switching run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapunovPoint {
    pub t: f64,
    /// σ applied from this sample on.
    pub sigma: Sigma,
    pub lambda: f64,
    /// `V_σ` for the active σ.
    pub v: f64,
}

/// Indices at which σ differs from the previous sample.
pub fn switch_indices(trace: &[LyapunovPoint]) -> Vec<usize> {
    (1..trace.len()).filter(|&i| trace[i].sigma != trace[i - 1].sigma).collect()
}

/// Active `V_σ` never increases by more than `tol` per step within a σ segment.
pub fn monotone_between_switches(trace: &[LyapunovPoint], tol: f64) -> Result<(), Violation> {
    for i in 1..trace.len() {
        let (a, b) = (&trace[i - 1], &trace[i]);
        if a.sigma == b.sigma && b.v > a.v + tol {
            return Err(Violation {
                earlier: i - 1,
                later: i,
                detail: format!("V_{} rose from {:e} to {:e}", b.sigma, a.v, b.v),
            });
        }
    }
    Ok(())
}

/// Switching-trace decrease conditions for hysteresis margin `delta`:
/// every switch to σ happens with `σ Λ ≥ δ`, and whenever σ returns to a
/// value held earlier, its Lyapunov function has dropped by at least δ
/// since it was last active (within [`TRACE_TOLERANCE`]).
pub fn inter_switch_decrease_check(trace: &[LyapunovPoint], delta: f64) -> Result<(), Violation> {
    let switches = switch_indices(trace);
    for &k in &switches {
        let p = &trace[k];
        if p.sigma.value() * p.lambda < delta - TRACE_TOLERANCE {
            return Err(Violation {
                earlier: k - 1,
                later: k,
                detail: format!("switch to σ = {} with Λ = {} inside margin {delta}", p.sigma, p.lambda),
            });
        }
    }
    // segment i spans [switches[i-1], switches[i]); compare end of i with start of i + 2
    for w in 0..switches.len().saturating_sub(1) {
        let leave = switches[w] - 1;
        let back = switches[w + 1];
        let (j, l) = (&trace[leave], &trace[back]);
        debug_assert_eq!(j.sigma, l.sigma);
        if l.v - j.v > -delta + TRACE_TOLERANCE {
            return Err(Violation {
                earlier: leave,
                later: back,
                detail: format!(
                    "V_{} went from {:e} to {:e} across a switch pair; required drop {delta}",
                    l.sigma, j.v, l.v
                ),
            });
        }
    }
    Ok(())
}
