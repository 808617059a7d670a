//! Yaw-maneuver experiments: the Stage-3 Lyapunov table, the benchmark vs
//! switching effort comparison over perturbed repeats, and a ψ₀ sweep.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::control::{attitude_error, next_sigma, ControlLaw, GainSet, Sigma};
use crate::error::Result;
use crate::harness::{ic_label, run_scenario, RunResult, Scenario, DEFAULT_HORIZON};
use crate::quat::{UnitQuaternion, Vec3};
use crate::reference::{ManeuverMode, ManeuverSpec};
use crate::rigid_body::{InertiaMatrix, DEFAULT_DT};
use crate::stability::{lyapunov_v, roa_contains, switching_lambda};

/// Stage-3 initial conditions `(ω_z rad/s, ψ₀ deg)`. The first three lead the
/// two controllers to pick opposite rotation directions.
pub const TABLE1_ICS: [(f64, f64); 5] = [(2.0, 150.0), (3.0, 120.0), (4.0, 100.0), (2.0, 100.0), (2.0, 210.0)];

/// Reported Lyapunov values at `t₀` for [`TABLE1_ICS`].
pub const TABLE1_V: [f64; 5] = [7.97, 7.60, 7.24, 6.10, 5.90];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Table1Row {
    pub omega_z: f64,
    pub psi0_deg: f64,
    pub m_e: f64,
    pub lambda: f64,
    /// σ selected from σ = +1 by the hysteresis rule.
    pub sigma: Sigma,
    pub v: f64,
    pub in_roa: bool,
}

impl Table1Row {
    pub fn direction_agreement(&self) -> bool {
        Sigma::sign_of(self.m_e) == self.sigma
    }
}

/// Closed-form Stage-3 start: `q = ψ₀ about b₃`, `ω = ω_z b₃`, identity reference.
pub fn stage3_row(omega_z: f64, psi0_deg: f64, g: &GainSet) -> Table1Row {
    let e = attitude_error(
        &UnitQuaternion::about_b3(psi0_deg.to_radians()),
        &UnitQuaternion::identity(),
        &Vec3::new(0.0, 0.0, omega_z),
        &Vec3::zeros(),
    );
    let lambda = switching_lambda(&e, g);
    let sigma = next_sigma(Sigma::Plus, lambda, g.delta);
    Table1Row {
        omega_z,
        psi0_deg,
        m_e: e.m_e(),
        lambda,
        sigma,
        v: lyapunov_v(&e, sigma, g),
        in_roa: roa_contains(&e, sigma, g),
    }
}

pub fn table1_reproduction(g: &GainSet) -> Vec<Table1Row> {
    TABLE1_ICS.iter().map(|&(w, psi)| stage3_row(w, psi, g)).collect()
}

/// Uniform trial-to-trial spread applied to each repeat's initial condition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Perturbation {
    /// Half-width on ψ₀ (deg).
    pub psi_deg: f64,
    /// Half-width on ω_z (rad/s).
    pub omega: f64,
}

impl Default for Perturbation {
    fn default() -> Self {
        Self {
            psi_deg: 1.0,
            omega: 0.05,
        }
    }
}

impl Perturbation {
    pub fn none() -> Self {
        Self {
            psi_deg: 0.0,
            omega: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonConfig {
    pub repeats: usize,
    pub perturbation: Perturbation,
    pub seed: u64,
    pub benchmark_gains: GainSet,
    pub switching_gains: GainSet,
    pub inertia: InertiaMatrix,
    pub dt: f64,
    pub horizon: f64,
    pub mode: ManeuverMode,
    pub ics: Vec<(f64, f64)>,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        Self {
            repeats: 10,
            perturbation: Perturbation::default(),
            seed: 0,
            benchmark_gains: GainSet::benchmark_default(),
            switching_gains: GainSet::switching_default(),
            inertia: InertiaMatrix::default(),
            dt: DEFAULT_DT,
            horizon: DEFAULT_HORIZON,
            mode: ManeuverMode::Stage3Only,
            ics: TABLE1_ICS.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EffortStats {
    pub values: Vec<f64>,
    pub mean: f64,
    /// Empirical (n − 1) standard deviation; zero for a single value.
    pub esd: f64,
}

impl EffortStats {
    pub fn from_values(values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let esd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { values, mean, esd }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub label: String,
    pub omega_z: f64,
    pub psi0_deg: f64,
    pub benchmark: EffortStats,
    pub switching: EffortStats,
    /// `100 (Γ_b − Γ_σ) / Γ_b` on the means.
    pub percent_reduction: f64,
    /// `sgn{m_e(t₀)} = σ(t₀⁺)` at the nominal initial condition.
    pub direction_agreement: bool,
    pub switching_switches: Vec<usize>,
    pub benchmark_sign_changes: Vec<usize>,
    /// Switching beat the benchmark in every paired repeat.
    pub switching_better_every_repeat: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub config: ComparisonConfig,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    fn mean_of(&self, agreement: bool, f: impl Fn(&ComparisonRow) -> f64) -> Option<f64> {
        let vals: Vec<f64> = self.rows.iter().filter(|r| r.direction_agreement == agreement).map(f).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    /// Mean percent reduction over initial conditions where the controllers disagree on direction.
    pub fn mismatch_mean_reduction(&self) -> Option<f64> {
        self.mean_of(false, |r| r.percent_reduction)
    }

    /// Mean |percent reduction| where they agree.
    pub fn agreement_mean_abs_reduction(&self) -> Option<f64> {
        self.mean_of(true, |r| r.percent_reduction.abs())
    }
}

fn perturbed_ic(base: (f64, f64), p: &Perturbation, seed: u64, ic_index: usize, repeat: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((ic_index as u64) << 32) | repeat as u64);
    let dw = if p.omega > 0.0 { rng.gen_range(-p.omega..=p.omega) } else { 0.0 };
    let dpsi = if p.psi_deg > 0.0 { rng.gen_range(-p.psi_deg..=p.psi_deg) } else { 0.0 };
    (base.0 + dw, base.1 + dpsi)
}

fn comparison_scenario(cfg: &ComparisonConfig, law: ControlLaw, ic: (f64, f64)) -> Result<Scenario> {
    let maneuver = ManeuverSpec::yaw(ic.0, ic.1, cfg.mode)?;
    let mut sc = Scenario::with_defaults(ic_label(ic.0, ic.1), maneuver, law);
    sc.gains = match law {
        ControlLaw::Benchmark => cfg.benchmark_gains,
        _ => cfg.switching_gains,
    };
    sc.inertia = cfg.inertia;
    sc.dt = cfg.dt;
    sc.horizon_after_t0 = cfg.horizon;
    Ok(sc)
}

fn sign_changes(run: &RunResult) -> usize {
    let s: Vec<Sigma> = run.stage3_samples().map(|s| s.sigma).collect();
    s.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Benchmark vs switching on each initial condition, `repeats` times with
/// seeded perturbations shared by both controllers within a repeat.
pub fn effort_comparison(cfg: &ComparisonConfig) -> Result<ComparisonReport> {
    let jobs: Vec<(usize, usize, ControlLaw)> = (0..cfg.ics.len())
        .flat_map(|i| {
            (0..cfg.repeats).flat_map(move |r| [(i, r, ControlLaw::Benchmark), (i, r, ControlLaw::Switching)])
        })
        .collect();
    let runs: Vec<RunResult> = jobs
        .par_iter()
        .map(|&(i, r, law)| {
            let ic = perturbed_ic(cfg.ics[i], &cfg.perturbation, cfg.seed, i, r);
            run_scenario(&comparison_scenario(cfg, law, ic)?)
        })
        .collect::<Result<_>>()?;

    let per_ic = 2 * cfg.repeats;
    let rows = cfg
        .ics
        .iter()
        .enumerate()
        .map(|(i, &(w, psi))| {
            let chunk = &runs[i * per_ic..(i + 1) * per_ic];
            let bench: Vec<&RunResult> = chunk.iter().step_by(2).collect();
            let switching: Vec<&RunResult> = chunk.iter().skip(1).step_by(2).collect();
            let b = EffortStats::from_values(bench.iter().map(|r| r.gamma_tau).collect());
            let s = EffortStats::from_values(switching.iter().map(|r| r.gamma_tau).collect());
            let better = bench.iter().zip(&switching).all(|(b, s)| s.gamma_tau < b.gamma_tau);
            ComparisonRow {
                label: ic_label(w, psi),
                omega_z: w,
                psi0_deg: psi,
                percent_reduction: 100.0 * (b.mean - s.mean) / b.mean,
                benchmark: b,
                switching: s,
                direction_agreement: stage3_row(w, psi, &cfg.switching_gains).direction_agreement(),
                switching_switches: switching.iter().map(|r| r.switch_times.len()).collect(),
                benchmark_sign_changes: bench.iter().map(|r| sign_changes(r)).collect(),
                switching_better_every_repeat: better,
            }
        })
        .collect();
    Ok(ComparisonReport {
        config: cfg.clone(),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub omega_z: f64,
    pub psi0_deg: f64,
    pub start: Table1Row,
    pub gamma_benchmark: f64,
    pub gamma_switching: f64,
    pub switches: usize,
}

impl SweepRow {
    pub fn percent_reduction(&self) -> f64 {
        100.0 * (self.gamma_benchmark - self.gamma_switching) / self.gamma_benchmark
    }
}

/// Unperturbed benchmark and switching runs over a grid of `(ω_z, ψ₀)` starts.
pub fn psi_sweep(cfg: &ComparisonConfig, grid: &[(f64, f64)]) -> Result<Vec<SweepRow>> {
    grid.par_iter()
        .map(|&(w, psi)| {
            let b = run_scenario(&comparison_scenario(cfg, ControlLaw::Benchmark, (w, psi))?)?;
            let s = run_scenario(&comparison_scenario(cfg, ControlLaw::Switching, (w, psi))?)?;
            Ok(SweepRow {
                omega_z: w,
                psi0_deg: psi,
                start: stage3_row(w, psi, &cfg.switching_gains),
                gamma_benchmark: b.gamma_tau,
                gamma_switching: s.gamma_tau,
                switches: s.switch_times.len(),
            })
        })
        .collect()
}
