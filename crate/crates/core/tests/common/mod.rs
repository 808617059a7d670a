#![allow(dead_code)]

use attitude_core::control::{ErrorState, GainSet, Sigma};
use attitude_core::quat::{UnitQuaternion, Vec3};
use nalgebra::SVector;
use rand::Rng;

pub type X7 = SVector<f64, 7>;

pub fn random_unit_quaternion<R: Rng>(rng: &mut R) -> UnitQuaternion {
    loop {
        let v: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.1 && norm <= 1.0 {
            return UnitQuaternion::new(v[0] / norm, Vec3::new(v[1], v[2], v[3]) / norm).unwrap();
        }
    }
}

pub fn random_vec<R: Rng>(rng: &mut R, half_width: f64) -> Vec3 {
    Vec3::from_fn(|_, _| rng.gen_range(-half_width..half_width))
}

/// Gains with positive definite P and c in the range where the quadratic bound applies.
pub fn random_bound_gains<R: Rng>(rng: &mut R) -> GainSet {
    loop {
        let k_q = rng.gen_range(0.5..20.0);
        let k_omega = rng.gen_range(0.5..20.0);
        let k_n = rng.gen_range(0.5..20.0);
        let c_max: f64 = 4.0 * k_n * k_omega / k_q;
        if c_max <= 0.6 {
            continue;
        }
        let c = rng.gen_range(0.5..c_max.min(10.0));
        return GainSet::new(k_q, k_omega, k_n, c, 0.1).unwrap();
    }
}

/// Error state with the given `ν_σ`, i.e. `ω_e = ν − σ k_n n_e`.
pub fn error_with_nu(q_e: UnitQuaternion, nu: Vec3, sigma: Sigma, g: &GainSet) -> ErrorState {
    let omega_e = nu - sigma.value() * g.k_n * q_e.n();
    ErrorState::new(q_e, omega_e)
}

/// Closed-loop error dynamics written out from `q̇_e = ½ [0 ω_e] ⊗ q_e` and
/// the linearized `ν̇ = −(σ k_q n_e + k_ω ν)`.
pub fn oracle_field(x: &X7, sigma: f64, g: &GainSet) -> X7 {
    let m = x[0];
    let n = Vec3::new(x[1], x[2], x[3]);
    let nu = Vec3::new(x[4], x[5], x[6]);
    let we = nu - sigma * g.k_n * n;
    let m_dot = -0.5 * we.dot(&n);
    let n_dot = 0.5 * (m * we + we.cross(&n));
    let nu_dot = -sigma * g.k_q * n - g.k_omega * nu;
    X7::from_column_slice(&[m_dot, n_dot.x, n_dot.y, n_dot.z, nu_dot.x, nu_dot.y, nu_dot.z])
}

pub fn pack(e: &ErrorState, nu: &Vec3) -> X7 {
    let n = e.n_e();
    X7::from_column_slice(&[e.m_e(), n.x, n.y, n.z, nu.x, nu.y, nu.z])
}

/// RK4 on the oracle field, returning every state including the first.
pub fn integrate_oracle(x0: X7, sigma: f64, g: &GainSet, dt: f64, steps: usize) -> Vec<X7> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut x = x0;
    out.push(x);
    for _ in 0..steps {
        let k1 = oracle_field(&x, sigma, g);
        let k2 = oracle_field(&(x + 0.5 * dt * k1), sigma, g);
        let k3 = oracle_field(&(x + 0.5 * dt * k2), sigma, g);
        let k4 = oracle_field(&(x + dt * k3), sigma, g);
        x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.push(x);
    }
    out
}

/// `V_σ` straight from its definition.
pub fn oracle_v(x: &X7, sigma: f64, g: &GainSet) -> f64 {
    let nu = Vec3::new(x[4], x[5], x[6]);
    0.5 / g.k_q * nu.norm_squared() + 2.0 * g.c * (1.0 - sigma * x[0])
}

/// `V_σ` with `1 − s = ‖n‖²/(1 + s)` on the near side, for tiny values.
pub fn oracle_v_stable(x: &X7, sigma: f64, g: &GainSet) -> f64 {
    let s = sigma * x[0];
    let n2 = x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
    let nu = Vec3::new(x[4], x[5], x[6]);
    let one_minus = if s > 0.0 { n2 / (1.0 + s) } else { 1.0 - s };
    0.5 / g.k_q * nu.norm_squared() + 2.0 * g.c * one_minus
}
