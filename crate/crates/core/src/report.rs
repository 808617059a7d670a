//! Telemetry CSV export and plain-text reports.

use std::fmt::Write as _;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::{ErrorState, GainSet, Sigma};
use crate::error::{Error, Result};
use crate::experiments::{table1_reproduction, ComparisonReport, SweepRow, Table1Row};
use crate::harness::{ic_label, RunResult};
use crate::quat::{UnitQuaternion, Vec3};
use crate::stability::{exp_region_contains, p_matrix_certificate, saddle_eigenvalues, PCertificate, SaddleSpectrum};

pub const TELEMETRY_HEADER: [&str; 21] = [
    "t", "qw", "qx", "qy", "qz", "wx", "wy", "wz", "me", "nex", "ney", "nez", "wex", "wey", "wez", "taux", "tauy",
    "tauz", "sigma", "lambda", "V",
];

/// One telemetry CSV row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRow {
    pub t: f64,
    pub qw: f64,
    pub qx: f64,
    pub qy: f64,
    pub qz: f64,
    pub wx: f64,
    pub wy: f64,
    pub wz: f64,
    pub me: f64,
    pub nex: f64,
    pub ney: f64,
    pub nez: f64,
    pub wex: f64,
    pub wey: f64,
    pub wez: f64,
    pub taux: f64,
    pub tauy: f64,
    pub tauz: f64,
    pub sigma: f64,
    pub lambda: f64,
    #[serde(rename = "V")]
    pub v: f64,
}

pub fn telemetry_rows(run: &RunResult) -> Vec<TelemetryRow> {
    run.samples
        .iter()
        .map(|s| {
            let q = s.state.q.as_array();
            let (w, n, we, tau) = (s.state.omega, s.error.n_e(), s.error.omega_e, s.torque.tau);
            TelemetryRow {
                t: s.t,
                qw: q[0],
                qx: q[1],
                qy: q[2],
                qz: q[3],
                wx: w.x,
                wy: w.y,
                wz: w.z,
                me: s.error.m_e(),
                nex: n.x,
                ney: n.y,
                nez: n.z,
                wex: we.x,
                wey: we.y,
                wez: we.z,
                taux: tau.x,
                tauy: tau.y,
                tauz: tau.z,
                sigma: s.sigma.value(),
                lambda: s.lambda,
                v: s.v,
            }
        })
        .collect()
}

pub fn write_telemetry(rows: &[TelemetryRow], path: &Path) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(TELEMETRY_HEADER).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn export_run(run: &RunResult, path: &Path) -> Result<()> {
    write_telemetry(&telemetry_rows(run), path)
}

pub fn read_telemetry(path: &Path) -> Result<Vec<TelemetryRow>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err)
}

fn gains_block(out: &mut String, prefix: &str, g: &GainSet) {
    for (k, v) in [("kq", g.k_q), ("kw", g.k_omega), ("kn", g.k_n), ("c", g.c), ("delta", g.delta)] {
        let _ = writeln!(out, "{prefix}{k} = {v}");
    }
}

pub fn run_report(run: &RunResult) -> String {
    let mut out = String::new();
    let last = run.last().expect("run has samples");
    let _ = writeln!(out, "scenario = {}", run.scenario);
    let _ = writeln!(out, "controller = {}", run.law);
    let _ = writeln!(out, "t0 = {}", run.t0);
    let _ = writeln!(out, "tf = {}", run.tf);
    let _ = writeln!(out, "gamma_tau = {:e}", run.gamma_tau);
    let _ = writeln!(out, "sigma_t0 = {}", run.sigma_at_t0().map(|s| s.to_string()).unwrap_or_default());
    let _ = writeln!(out, "switches = {}", run.switch_times.len());
    let times: Vec<String> = run.switch_times.iter().map(|t| t.to_string()).collect();
    let _ = writeln!(out, "switch_times = {}", times.join(","));
    let _ = writeln!(out, "final_yaw_error_deg = {}", run.final_yaw_error.to_degrees());
    let _ = writeln!(out, "final_ne_norm = {:e}", last.error.n_e().norm());
    let _ = writeln!(out, "final_we_norm = {:e}", last.error.omega_e.norm());
    out
}

pub fn table1_text(rows: &[Table1Row]) -> String {
    let mut out = String::from("omega_z,psi0_deg,m_e,lambda,sigma,V,in_roa,direction_agreement\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.5},{:.4},{},{:.4},{},{}",
            r.omega_z,
            r.psi0_deg,
            r.m_e,
            r.lambda,
            r.sigma,
            r.v,
            r.in_roa,
            r.direction_agreement()
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub gains: GainSet,
    pub certificate: PCertificate,
    pub spectrum: SaddleSpectrum,
    pub table1: Vec<Table1Row>,
}

impl StabilityReport {
    pub fn build(g: &GainSet) -> Self {
        Self {
            gains: *g,
            certificate: p_matrix_certificate(g),
            spectrum: saddle_eigenvalues(g),
            table1: table1_reproduction(g),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# stability report\n");
        gains_block(&mut out, "", &self.gains);
        let c = &self.certificate;
        let _ = writeln!(out, "c_max = {}", c.c_max);
        let _ = writeln!(out, "c_min_for_bound = {}", c.c_min_for_bound);
        let _ = writeln!(out, "p_minor_1 = {}", c.minors[0]);
        let _ = writeln!(out, "p_minor_2 = {}", c.minors[1]);
        let _ = writeln!(out, "p_positive_definite = {}", c.positive_definite);
        let _ = writeln!(out, "bound_step_valid = {}", c.bound_step_valid);
        let _ = writeln!(out, "lambda1 = {}", self.spectrum.lambda1);
        let _ = writeln!(out, "lambda2 = {}", self.spectrum.lambda2);
        let _ = writeln!(out, "lambda0 = {}", self.spectrum.lambda0);
        let _ = writeln!(out, "roa_level = {}", 4.0 * self.gains.c);
        out.push('\n');
        out.push_str("scenario,sigma,V,in_roa,in_exp_region,lambda\n");
        for r in &self.table1 {
            let q_e = UnitQuaternion::about_b3(r.psi0_deg.to_radians()).inverse();
            let in_exp = exp_region_contains(&ErrorState::new(q_e, Vec3::zeros()), r.sigma);
            let _ = writeln!(
                out,
                "{},{},{:.4},{},{},{:.4}",
                ic_label(r.omega_z, r.psi0_deg),
                r.sigma,
                r.v,
                r.in_roa,
                in_exp,
                r.lambda
            );
        }
        out
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_default()
}

pub fn comparison_text(report: &ComparisonReport) -> String {
    let cfg = &report.config;
    let mut out = String::from("# controller comparison\n");
    let _ = writeln!(out, "repeats = {}", cfg.repeats);
    let _ = writeln!(out, "seed = {}", cfg.seed);
    let _ = writeln!(out, "perturbation_psi_deg = {}", cfg.perturbation.psi_deg);
    let _ = writeln!(out, "perturbation_omega = {}", cfg.perturbation.omega);
    let _ = writeln!(out, "dt = {}", cfg.dt);
    let _ = writeln!(out, "horizon = {}", cfg.horizon);
    gains_block(&mut out, "benchmark_", &cfg.benchmark_gains);
    gains_block(&mut out, "switching_", &cfg.switching_gains);
    let _ = writeln!(out, "mismatch_mean_reduction_percent = {}", opt(report.mismatch_mean_reduction()));
    let _ = writeln!(out, "agreement_mean_abs_reduction_percent = {}", opt(report.agreement_mean_abs_reduction()));
    out.push('\n');
    out.push_str("scenario,controller,mean_gamma,esd,percent_reduction,switches,direction_agreement\n");
    for r in &report.rows {
        let bench_changes = r.benchmark_sign_changes.iter().sum::<usize>() as f64 / r.benchmark_sign_changes.len() as f64;
        let _ = writeln!(
            out,
            "{},benchmark,{:e},{:e},,{},{}",
            r.label, r.benchmark.mean, r.benchmark.esd, bench_changes, r.direction_agreement
        );
        let switches = r.switching_switches.iter().sum::<usize>() as f64 / r.switching_switches.len() as f64;
        let _ = writeln!(
            out,
            "{},switching,{:e},{:e},{:.3},{},{}",
            r.label, r.switching.mean, r.switching.esd, r.percent_reduction, switches, r.direction_agreement
        );
    }
    out
}

pub fn sweep_text(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "omega_z,psi0_deg,sigma_t0,sgn_me,V_t0,in_roa,gamma_benchmark,gamma_switching,percent_reduction,switches\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.4},{},{:e},{:e},{:.3},{}",
            r.omega_z,
            r.psi0_deg,
            r.start.sigma,
            Sigma::sign_of(r.start.m_e),
            r.start.v,
            r.start.in_roa,
            r.gamma_benchmark,
            r.gamma_switching,
            r.percent_reduction(),
            r.switches
        );
    }
    out
}
