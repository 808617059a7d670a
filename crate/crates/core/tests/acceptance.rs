//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use attitude_core::control::{ControlLaw, GainSet, Sigma};
use attitude_core::experiments::{effort_comparison, table1_reproduction, ComparisonConfig};
use attitude_core::harness::{run_scenario, Scenario};
use attitude_core::quat::{UnitQuaternion, Vec3};
use attitude_core::rigid_body::{rk4_step, BodyState, InertiaMatrix, TorqueCommand};
use attitude_core::stability::{
    closed_loop_field, exact_vdot, exponential_rate_check, general_jacobian, inter_switch_decrease_check,
    lyapunov_vdot_bound, monotone_between_switches, p_matrix_certificate, saddle_eigenvalues, saddle_jacobian,
    Jacobian,
};
use common::*;
use nalgebra::{Matrix2, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TABLE1_EXPECTED: [f64; 5] = [7.97, 7.60, 7.24, 6.10, 5.90];
const TABLE1_TOL: f64 = 0.01;

const SPECTRUM_EXPECTED: (f64, f64) = (5.0476, -100.0476);
const SPECTRUM_TOL: f64 = 1e-4;
const SPECTRUM_REL_TOL: f64 = 1e-12;
const FULL_SPECTRUM_TOL: f64 = 1e-9;

const JACOBIAN_STATES: usize = 100;
const FD_STEP: f64 = 1e-6;
const FD_TOL: f64 = 1e-5;
const SPECIALIZATION_TOL: f64 = 1e-15;

const LYAPUNOV_STATES: usize = 100_000;
const BOUND_TOL: f64 = 1e-12;
const VDOT_REL_TOL: f64 = 1e-10;
const MONOTONE_TOL: f64 = 1e-6;

const EXP_STARTS: usize = 20;
const EXP_DT: f64 = 1e-3;

const YAW_TOL_DEG: f64 = 0.5;

/// Largest mean |reduction| on agreement ICs, as a fraction of the mismatch mean.
const AGREEMENT_FRACTION: f64 = 0.5;

const DRIFT_STEPS: usize = 10_000;
const DRIFT_TOL: f64 = 1e-9;
const MOMENTUM_REL_TOL: f64 = 1e-6;
const ORDER_RANGE: (f64, f64) = (3.7, 4.3);

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn table1_gains() -> GainSet {
    GainSet::new(10.0, 100.0, 10.0, 2.0, 0.1).unwrap()
}

fn criterion_1() -> Outcome {
    let rows = table1_reproduction(&table1_gains());
    let mut worst: f64 = 0.0;
    for (row, expected) in rows.iter().zip(TABLE1_EXPECTED) {
        let err = (row.v - expected).abs();
        worst = worst.max(err);
        ensure(err <= TABLE1_TOL, || {
            format!("{{{}, {}°}}: V = {:.4}, expected {expected}", row.omega_z, row.psi0_deg, row.v)
        })?;
    }
    let vs: Vec<String> = rows.iter().map(|r| format!("{:.3}", r.v)).collect();
    Ok(format!("V(t0) = [{}], max error {worst:.4}", vs.join(", ")))
}

fn hand_saddle(k_q: f64, k_w: f64, k_n: f64) -> Jacobian {
    let mut a = Jacobian::zeros();
    for i in 0..3 {
        a[(1 + i, 1 + i)] = 0.5 * k_n;
        a[(1 + i, 4 + i)] = -0.5;
        a[(4 + i, 1 + i)] = -k_q;
        a[(4 + i, 4 + i)] = -k_w;
    }
    a
}

macro_rules! sorted_real_eigs {
    ($m:expr) => {{
        let eig = $m.eigenvalues().ok_or("real Schur decomposition failed")?;
        let mut v: Vec<f64> = eig.iter().copied().collect();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        v
    }};
}

fn criterion_2() -> Outcome {
    let g = table1_gains();
    let s = saddle_eigenvalues(&g);
    ensure(
        (s.lambda1 - SPECTRUM_EXPECTED.0).abs() <= SPECTRUM_TOL && (s.lambda2 - SPECTRUM_EXPECTED.1).abs() <= SPECTRUM_TOL,
        || format!("λ1 = {}, λ2 = {}", s.lambda1, s.lambda2),
    )?;

    let block = Matrix2::new(0.5 * g.k_n, -0.5, -g.k_q, -g.k_omega);
    let oracle = sorted_real_eigs!(block);
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    ensure(
        rel(s.lambda1, oracle[0]) <= SPECTRUM_REL_TOL && rel(s.lambda2, oracle[1]) <= SPECTRUM_REL_TOL,
        || format!("closed form ({}, {}) vs eigendecomposition {:?}", s.lambda1, s.lambda2, oracle),
    )?;

    let full = saddle_jacobian(&g);
    ensure(full == hand_saddle(g.k_q, g.k_omega, g.k_n), || "saddle Jacobian layout differs".into())?;
    let eigs = sorted_real_eigs!(full);
    let expected = [s.lambda1, s.lambda1, s.lambda1, 0.0, s.lambda2, s.lambda2, s.lambda2];
    for (got, want) in eigs.iter().zip(expected) {
        ensure((got - want).abs() <= FULL_SPECTRUM_TOL * want.abs().max(1.0), || {
            format!("7x7 spectrum {eigs:?}")
        })?;
    }

    let grid = [0.1, 1.0, 10.0, 100.0];
    let mut worst: f64 = 0.0;
    for &k_q in &grid {
        for &k_w in &grid {
            for &k_n in &grid {
                let g = GainSet::new(k_q, k_w, k_n, 1.0, 0.1).unwrap();
                let s = saddle_eigenvalues(&g);
                let product = -0.5 * (k_q + k_n * k_w);
                let err = rel(s.lambda1 * s.lambda2, product).max(
                    (s.lambda1 + s.lambda2 - (0.5 * k_n - k_w)).abs() / (0.5 * k_n + k_w),
                );
                let oracle = sorted_real_eigs!(Matrix2::new(0.5 * k_n, -0.5, -k_q, -k_w));
                let err = err.max(rel(s.lambda1, oracle[0])).max(rel(s.lambda2, oracle[1]));
                worst = worst.max(err);
                ensure(s.lambda1 > 0.0 && s.lambda2 < 0.0 && err <= SPECTRUM_REL_TOL, || {
                    format!("({k_q}, {k_w}, {k_n}): λ = ({}, {}), err {err:e}", s.lambda1, s.lambda2)
                })?;
            }
        }
    }
    Ok(format!(
        "λ1 = {:.6}, λ2 = {:.6}; grid eigensolve/product max rel err {worst:.1e}",
        s.lambda1, s.lambda2
    ))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..JACOBIAN_STATES {
        let g = random_bound_gains(&mut rng);
        let q_e = random_unit_quaternion(&mut rng);
        let nu = random_vec(&mut rng, 5.0);
        for sigma in [Sigma::Plus, Sigma::Minus] {
            let e = error_with_nu(q_e, nu, sigma, &g);
            let x = pack(&e, &nu);
            let field_err = (closed_loop_field(&x, sigma, &g) - oracle_field(&x, sigma.value(), &g)).amax();
            ensure(field_err <= 1e-12 * (1.0 + x.amax().powi(2) * g.k_n.max(g.k_q)), || {
                format!("vector field differs by {field_err:e}")
            })?;
            let jac = general_jacobian(&e, sigma, &g);
            let mut fd = Jacobian::zeros();
            for j in 0..7 {
                let mut h = X7::zeros();
                h[j] = FD_STEP;
                let col = (oracle_field(&(x + h), sigma.value(), &g) - oracle_field(&(x - h), sigma.value(), &g))
                    / (2.0 * FD_STEP);
                fd.set_column(j, &col);
            }
            let err = (jac - fd).amax();
            worst = worst.max(err);
            ensure(err <= FD_TOL, || format!("σ = {sigma}: Jacobian vs finite differences {err:e}"))?;
        }
    }

    let g = table1_gains();
    let antipode = error_with_nu(UnitQuaternion::new(-1.0, Vec3::zeros()).unwrap(), Vec3::zeros(), Sigma::Plus, &g);
    let spec = (general_jacobian(&antipode, Sigma::Plus, &g) - hand_saddle(g.k_q, g.k_omega, g.k_n)).amax();
    ensure(spec <= SPECIALIZATION_TOL, || format!("antipodal specialization off by {spec:e}"))?;
    Ok(format!(
        "{JACOBIAN_STATES} states x 2 σ, max FD error {worst:.1e}; antipodal specialization error {spec:.1e}"
    ))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut min_gap = f64::INFINITY;
    for i in 0..LYAPUNOV_STATES {
        let g = random_bound_gains(&mut rng);
        let cert = p_matrix_certificate(&g);
        ensure(cert.positive_definite && cert.bound_step_valid, || format!("sampled gains {g:?} outside P ≻ 0"))?;
        let sigma = if rng.gen_bool(0.5) { Sigma::Plus } else { Sigma::Minus };
        let q_e = random_unit_quaternion(&mut rng);
        let nu = random_vec(&mut rng, 5.0);
        let e = error_with_nu(q_e, nu, sigma, &g);
        let x = pack(&e, &nu);
        let s = sigma.value();

        let f = oracle_field(&x, s, &g);
        let nu_dot = Vec3::new(f[4], f[5], f[6]);
        let oracle_vdot = -2.0 * g.c * s * f[0] + nu.dot(&nu_dot) / g.k_q;
        let vdot = exact_vdot(&e, sigma, &g);
        let scale = 1.0 + nu.norm_squared() * g.k_omega / g.k_q + g.c * g.k_n;
        ensure((vdot - oracle_vdot).abs() <= VDOT_REL_TOL * scale, || {
            format!("state {i}: V̇ = {vdot}, chain rule gives {oracle_vdot}")
        })?;

        let (a, b) = (q_e.n().norm(), nu.norm());
        let bound = -(g.c * g.k_n * a * a - g.c * a * b + g.k_omega / g.k_q * b * b);
        let lib_bound = lyapunov_vdot_bound(&e, sigma, &g);
        ensure((bound - lib_bound).abs() <= VDOT_REL_TOL * scale, || {
            format!("state {i}: bound {lib_bound} vs {bound}")
        })?;
        ensure(vdot <= bound + BOUND_TOL, || format!("state {i}: V̇ = {vdot} above bound {bound}"))?;
        ensure(vdot < 0.0, || format!("state {i}: V̇ = {vdot} not negative"))?;
        min_gap = min_gap.min(bound - vdot);
    }

    let mut switches = Vec::new();
    for &(w, psi) in &attitude_core::experiments::TABLE1_ICS {
        let run = run_scenario(&Scenario::yaw_stage3(w, psi, ControlLaw::Switching).unwrap()).map_err(|e| e.to_string())?;
        let trace = run.lyapunov_trace();
        monotone_between_switches(&trace, MONOTONE_TOL).map_err(|v| format!("{{{w}, {psi}°}}: {v}"))?;
        inter_switch_decrease_check(&trace, run_gains_delta()).map_err(|v| format!("{{{w}, {psi}°}}: {v}"))?;
        switches.push(run.switch_times.len());
    }
    Ok(format!(
        "{LYAPUNOV_STATES} states, min(bound − V̇) = {min_gap:.2e}; trajectory switch counts {switches:?}"
    ))
}

fn run_gains_delta() -> f64 {
    GainSet::switching_default().delta
}

fn criterion_5() -> Outcome {
    let g = GainSet::new(10.0, 5.0, 20.0, 1.0, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let steps = 6000;
    let (mut converged, mut left_region) = (0, 0);
    for k in 0..EXP_STARTS {
        let mut q_e = random_unit_quaternion(&mut rng);
        if q_e.m() <= 0.0 {
            q_e = -q_e;
        }
        let nu = random_vec(&mut rng, 2.0);
        let x0 = pack(&error_with_nu(q_e, nu, Sigma::Plus, &g), &nu);
        let traj = integrate_oracle(x0, 1.0, &g, EXP_DT, steps);
        // the rate bound is stated for m_e > 0
        let inside = traj.iter().take_while(|x| x[0] > 0.0).count();
        if inside < traj.len() {
            left_region += 1;
        }
        let samples: Vec<(f64, f64)> =
            traj[..inside].iter().enumerate().map(|(i, x)| (i as f64 * EXP_DT, oracle_v_stable(x, 1.0, &g))).collect();
        exponential_rate_check(&samples, &g).map_err(|v| format!("start {k}: {v}"))?;
        if samples.last().is_some_and(|s| s.1 <= attitude_core::stability::CONVERGED_V) {
            converged += 1;
        }
    }

    for (w, psi) in [(1.0, 60.0), (0.5, 30.0), (2.0, 45.0)] {
        let mut sc = Scenario::yaw_stage3(w, psi, ControlLaw::Switching).unwrap();
        sc.gains = g;
        let run = run_scenario(&sc).map_err(|e| e.to_string())?;
        ensure(run.switch_times.is_empty() && run.samples.iter().all(|s| s.sigma == Sigma::Plus), || {
            format!("{{{w}, {psi}°}} left σ = +1")
        })?;
        let samples: Vec<(f64, f64)> =
            run.stage3_samples().take_while(|s| s.error.m_e() > 0.0).map(|s| (s.t - run.t0, s.v)).collect();
        exponential_rate_check(&samples, &g).map_err(|v| format!("plant run {{{w}, {psi}°}}: {v}"))?;
    }
    ensure(converged > 0, || "no trajectory reached the convergence floor".into())?;
    Ok(format!(
        "{EXP_STARTS} error-space starts ({converged} converged, {left_region} left m_e > 0) and 3 plant runs within the 2k_ω envelope"
    ))
}

fn criterion_6() -> Outcome {
    let mut details = Vec::new();
    for (w, psi, expected_switches) in [(2.0, 100.0, 0usize), (4.0, 100.0, 1)] {
        let run = run_scenario(&Scenario::yaw_stage3(w, psi, ControlLaw::Switching).unwrap()).map_err(|e| e.to_string())?;
        let n = run.switch_times.len();
        ensure(n == expected_switches, || format!("{{{w}, {psi}°}}: {n} switches, expected {expected_switches}"))?;
        let final_sigma = run.last().unwrap().sigma;
        if expected_switches == 1 {
            ensure(final_sigma == Sigma::Minus, || format!("{{{w}, {psi}°}} switched to {final_sigma}"))?;
        }
        ensure(run.tf >= run.t0 + 3.0 - 1e-9, || format!("run ended at {}", run.tf))?;
        let yaw = run.final_yaw_error.to_degrees();
        ensure(yaw.abs() < YAW_TOL_DEG, || format!("{{{w}, {psi}°}}: final yaw error {yaw}°"))?;
        details.push(format!("{{{w}, {psi}°}}: {n} switch(es), final σ = {final_sigma}, |ψ| = {:.2e}°", yaw.abs()));
    }
    Ok(details.join("; "))
}

fn criterion_7() -> Outcome {
    let report = effort_comparison(&ComparisonConfig::default()).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    for row in &report.rows {
        parts.push(format!("{} {:+.1}%", row.label, row.percent_reduction));
        if !row.direction_agreement {
            ensure(row.switching_better_every_repeat, || {
                format!(
                    "{}: switching {:?} vs benchmark {:?}",
                    row.label, row.switching.values, row.benchmark.values
                )
            })?;
        }
    }
    let flags: Vec<bool> = report.rows.iter().map(|r| r.direction_agreement).collect();
    ensure(flags == [false, false, false, true, true], || format!("direction agreement flags {flags:?}"))?;
    let mismatch = report.mismatch_mean_reduction().unwrap();
    let agreement = report.agreement_mean_abs_reduction().unwrap();
    ensure(mismatch > 0.0 && agreement <= AGREEMENT_FRACTION * mismatch, || {
        format!("mismatch mean reduction {mismatch:.1}%, agreement mean |reduction| {agreement:.1}%")
    })?;
    Ok(format!(
        "mismatch mean reduction {mismatch:.1}%, agreement mean |reduction| {agreement:.1}% [{}]",
        parts.join(", ")
    ))
}

fn rotation(q: &UnitQuaternion) -> Matrix3<f64> {
    let [w, x, y, z] = q.as_array();
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

fn tumble(state: BodyState, j: &InertiaMatrix, dt: f64, steps: usize) -> BodyState {
    (0..steps).fold(state, |s, _| rk4_step(&s, &TorqueCommand::zero(), j, dt).unwrap())
}

fn state_distance(a: &BodyState, b: &BodyState) -> f64 {
    let (qa, qb) = (a.q.as_array(), b.q.as_array());
    let dq = qa.iter().zip(qb).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    (dq + (a.omega - b.omega).norm_squared()).sqrt()
}

fn criterion_8() -> Outcome {
    let j = InertiaMatrix::diagonal(1.0, 2.0, 3.0).unwrap();
    let start = BodyState::new(
        UnitQuaternion::new(0.8, Vec3::new(0.2, -0.4, 0.4)).unwrap(),
        Vec3::new(1.0, 2.0, -1.5),
    );
    let h0 = rotation(&start.q) * (j.matrix() * start.omega);
    let (mut state, mut drift, mut dh): (BodyState, f64, f64) = (start, 0.0, 0.0);
    for _ in 0..DRIFT_STEPS {
        state = rk4_step(&state, &TorqueCommand::zero(), &j, 1e-3).map_err(|e| e.to_string())?;
        drift = drift.max(state.q.norm_drift());
        let h = rotation(&state.q) * (j.matrix() * state.omega);
        dh = dh.max((h - h0).norm() / h0.norm());
    }
    ensure(drift <= DRIFT_TOL, || format!("norm drift {drift:e}"))?;
    ensure(dh <= MOMENTUM_REL_TOL, || format!("momentum relative change {dh:e}"))?;

    let reference = tumble(start, &j, 1e-4, 10_000);
    let errors: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&dt| state_distance(&tumble(start, &j, dt, (1.0 / dt).round() as usize), &reference))
        .collect();
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    for &p in &orders {
        ensure(p >= ORDER_RANGE.0 && p <= ORDER_RANGE.1, || format!("observed orders {orders:?}, errors {errors:?}"))?;
    }
    Ok(format!(
        "drift {drift:.1e} over {DRIFT_STEPS} steps, momentum change {dh:.1e}, observed orders [{:.2}, {:.2}]",
        orders[0], orders[1]
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("Lyapunov values at t0", criterion_1, Duration::from_millis(1)),
        ("saddle spectrum", criterion_2, Duration::from_secs(1)),
        ("Jacobian consistency", criterion_3, Duration::from_secs(5)),
        ("Lyapunov decrease", criterion_4, Duration::from_secs(30)),
        ("exponential rate", criterion_5, Duration::from_secs(5)),
        ("switching behavior", criterion_6, Duration::from_secs(5)),
        ("energy comparison", criterion_7, Duration::from_secs(60)),
        ("numerical hygiene", criterion_8, Duration::from_secs(30)),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|msg| {
            if elapsed <= *budget {
                Ok(msg)
            } else {
                Err(format!("{msg}; took {elapsed:?}, budget {budget:?}"))
            }
        });
        match outcome {
            Ok(msg) => println!("criterion {} ({name}): PASS  {msg} [{elapsed:.2?}]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL  {msg} [{elapsed:.2?}]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
