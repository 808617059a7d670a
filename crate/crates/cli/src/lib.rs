//! Argument parsing and command dispatch for the `attitude` binary.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use attitude_core::control::{ControlLaw, GainSet};
use attitude_core::experiments::{effort_comparison, psi_sweep, table1_reproduction, ComparisonConfig, Perturbation};
use attitude_core::harness::{default_gains, ic_label, run_scenario, Scenario, DEFAULT_HORIZON};
use attitude_core::reference::{ManeuverMode, ManeuverSpec};
use attitude_core::report::{comparison_text, export_run, run_report, sweep_text, table1_text, StabilityReport};
use attitude_core::rigid_body::{InertiaMatrix, DEFAULT_DT};
use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Simulate,
    Compare,
    Table1,
    StabilityReport,
    Sweep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Full,
    Stage3,
}

impl From<Mode> for ManeuverMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Full => ManeuverMode::FullThreeStage,
            Mode::Stage3 => ManeuverMode::Stage3Only,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "attitude", version, about = "Quaternion attitude switching-controller simulator")]
struct Args {
    command: Command,
    /// Flat TOML scenario file; flags override its values.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// continuous | benchmark | switching
    #[arg(long)]
    controller: Option<ControlLaw>,
    #[arg(long, allow_negative_numbers = true)]
    kq: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    kw: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    kn: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    /// Proportional gain of the benchmark law in `compare` and `sweep`.
    #[arg(long, allow_negative_numbers = true)]
    bench_kq: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    horizon: Option<f64>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Stage-3 start "<wz rad/s>,<psi0 deg>".
    #[arg(long, allow_hyphen_values = true)]
    ic: Option<String>,
    /// Principal inertias "<Jx>,<Jy>,<Jz>" in kg·m².
    #[arg(long, allow_hyphen_values = true)]
    inertia: Option<String>,
    /// Sweep grid "<start>,<stop>,<step>" in degrees.
    #[arg(long, allow_hyphen_values = true)]
    psi: Option<String>,
}

/// Scenario file keys. Every field is optional; flags take precedence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub controller: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ic: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kn: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bench_kq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repeats: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inertia: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi: Option<String>,
}

/// Fully resolved and validated settings for one invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct CliConfig {
    pub command: Command,
    pub name: Option<String>,
    pub out: Option<PathBuf>,
    pub law: ControlLaw,
    pub gains: GainSet,
    pub benchmark_gains: GainSet,
    pub dt: f64,
    pub horizon: f64,
    pub repeats: usize,
    pub seed: u64,
    pub mode: Mode,
    pub ic: Option<(f64, f64)>,
    pub inertia: [f64; 3],
    pub psi_grid: (f64, f64, f64),
}

#[derive(Debug)]
pub enum UsageError {
    /// Clap's own error, including `--help` and `--version` requests.
    Clap(clap::Error),
    Invalid(anyhow::Error),
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UsageError::Clap(e) => write!(f, "{e}"),
            UsageError::Invalid(e) => write!(f, "error: {e:#}"),
        }
    }
}

impl std::error::Error for UsageError {}

fn parse_list<const N: usize>(s: &str, what: &str) -> anyhow::Result<[f64; N]> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        bail!("{what} expects {N} comma-separated numbers, got {s:?}");
    }
    let mut out = [0.0f64; N];
    for (slot, p) in out.iter_mut().zip(parts) {
        *slot = p.parse().with_context(|| format!("{what}: {p:?} is not a number"))?;
        if !slot.is_finite() {
            bail!("{what}: {p:?} is not finite");
        }
    }
    Ok(out)
}

fn positive(name: &str, v: f64) -> anyhow::Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        bail!("--{name} must be positive, got {v}")
    }
}

fn load_scenario(path: &Path) -> anyhow::Result<ScenarioFile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading scenario file {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing scenario file {}", path.display()))
}

pub fn parse_args<I, T>(argv: I) -> Result<CliConfig, UsageError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = Args::try_parse_from(argv).map_err(UsageError::Clap)?;
    resolve(args).map_err(UsageError::Invalid)
}

fn resolve(a: Args) -> anyhow::Result<CliConfig> {
    let file = match &a.scenario {
        Some(p) => load_scenario(p)?,
        None => ScenarioFile::default(),
    };
    let law = match (a.controller, &file.controller) {
        (Some(l), _) => l,
        (None, Some(s)) => s.parse().map_err(|e| anyhow!("scenario controller: {e}"))?,
        (None, None) => ControlLaw::Switching,
    };

    let base = default_gains(law);
    let pick = |flag: Option<f64>, file: Option<f64>, default: f64, name: &str| {
        positive(name, flag.or(file).unwrap_or(default))
    };
    let gains = GainSet {
        k_q: pick(a.kq, file.kq, base.k_q, "kq")?,
        k_omega: pick(a.kw, file.kw, base.k_omega, "kw")?,
        k_n: pick(a.kn, file.kn, base.k_n, "kn")?,
        c: pick(a.c, file.c, base.c, "c")?,
        delta: pick(a.delta, file.delta, base.delta, "delta")?,
    };
    let bench_default = if law == ControlLaw::Benchmark { gains.k_q } else { GainSet::benchmark_default().k_q };
    let benchmark_gains = GainSet {
        k_q: pick(a.bench_kq, file.bench_kq, bench_default, "bench-kq")?,
        ..gains
    };

    let dt = pick(a.dt, file.dt, DEFAULT_DT, "dt")?;
    let horizon = pick(a.horizon, file.horizon, DEFAULT_HORIZON, "horizon")?;
    let repeats = a.repeats.or(file.repeats).unwrap_or(10);
    if repeats == 0 {
        bail!("--repeats must be at least 1");
    }
    let mode = a.mode.or(file.mode).unwrap_or(Mode::Stage3);

    let ic = match a.ic.as_deref().or(file.ic.as_deref()) {
        Some(s) => {
            let [wz, psi] = parse_list::<2>(s, "--ic")?;
            ManeuverSpec::yaw(wz, psi, mode.into()).map_err(|e| anyhow!("--ic {s:?}: {e}"))?;
            Some((wz, psi))
        }
        None => None,
    };
    let inertia = match a.inertia.as_deref().or(file.inertia.as_deref()) {
        Some(s) => {
            let j = parse_list::<3>(s, "--inertia")?;
            InertiaMatrix::diagonal(j[0], j[1], j[2]).map_err(|e| anyhow!("--inertia {s:?}: {e}"))?;
            j
        }
        None => {
            let d = InertiaMatrix::default().diagonal_entries();
            [d.x, d.y, d.z]
        }
    };
    let psi_grid = match a.psi.as_deref().or(file.psi.as_deref()) {
        Some(s) => {
            let [start, stop, step] = parse_list::<3>(s, "--psi")?;
            positive("psi step", step)?;
            if !(0.0..360.0).contains(&start) || !(0.0..360.0).contains(&stop) || stop < start {
                bail!("--psi range must satisfy 0 <= start <= stop < 360, got {s:?}");
            }
            (start, stop, step)
        }
        None => (20.0, 340.0, 20.0),
    };

    if a.command == Command::Simulate && ic.is_none() {
        bail!("simulate needs an initial condition: pass --ic \"<wz>,<psi0_deg>\" or set ic in the scenario file");
    }

    Ok(CliConfig {
        command: a.command,
        name: file.name,
        out: a.out,
        law,
        gains,
        benchmark_gains,
        dt,
        horizon,
        repeats,
        seed: a.seed.or(file.seed).unwrap_or(0),
        mode,
        ic,
        inertia,
        psi_grid,
    })
}

impl CliConfig {
    fn inertia_matrix(&self) -> InertiaMatrix {
        InertiaMatrix::diagonal(self.inertia[0], self.inertia[1], self.inertia[2]).expect("validated in parse_args")
    }

    /// Scenario-file form of the resolved settings; loading it back reproduces the run.
    pub fn echo(&self) -> ScenarioFile {
        let g = &self.gains;
        let [jx, jy, jz] = self.inertia;
        ScenarioFile {
            name: self.name.clone(),
            controller: Some(self.law.name().to_string()),
            ic: self.ic.map(|(w, p)| format!("{w},{p}")),
            mode: Some(self.mode),
            kq: Some(g.k_q),
            kw: Some(g.k_omega),
            kn: Some(g.k_n),
            c: Some(g.c),
            delta: Some(g.delta),
            bench_kq: Some(self.benchmark_gains.k_q),
            dt: Some(self.dt),
            horizon: Some(self.horizon),
            repeats: Some(self.repeats),
            seed: Some(self.seed),
            inertia: Some(format!("{jx},{jy},{jz}")),
            psi: Some(format!("{},{},{}", self.psi_grid.0, self.psi_grid.1, self.psi_grid.2)),
        }
    }

    fn comparison_config(&self) -> ComparisonConfig {
        ComparisonConfig {
            repeats: self.repeats,
            perturbation: Perturbation::default(),
            seed: self.seed,
            benchmark_gains: self.benchmark_gains,
            switching_gains: self.gains,
            inertia: self.inertia_matrix(),
            dt: self.dt,
            horizon: self.horizon,
            mode: self.mode.into(),
            ..ComparisonConfig::default()
        }
    }
}

fn write_outputs(dir: &Path, cfg: &CliConfig, report: &str) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let echo = toml::to_string(&cfg.echo()).context("serializing scenario echo")?;
    fs::write(dir.join("scenario.toml"), echo).with_context(|| format!("writing {}", dir.display()))?;
    fs::write(dir.join("report.txt"), report).with_context(|| format!("writing {}", dir.display()))?;
    Ok(())
}

/// Runs the command and returns what should be printed on stdout.
pub fn run(cfg: &CliConfig) -> anyhow::Result<String> {
    match cfg.command {
        Command::Simulate => {
            let (wz, psi) = cfg.ic.expect("checked in parse_args");
            let maneuver = ManeuverSpec::yaw(wz, psi, cfg.mode.into())?;
            let name = cfg.name.clone().unwrap_or_else(|| ic_label(wz, psi));
            let mut sc = Scenario::with_defaults(name.clone(), maneuver, cfg.law);
            sc.gains = cfg.gains;
            sc.inertia = cfg.inertia_matrix();
            sc.dt = cfg.dt;
            sc.horizon_after_t0 = cfg.horizon;
            sc.seed = cfg.seed;
            let run = run_scenario(&sc)?;
            let report = run_report(&run);
            let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(format!("{name}_{}", cfg.law)));
            write_outputs(&dir, cfg, &report)?;
            export_run(&run, &dir.join("telemetry.csv"))?;
            Ok(report)
        }
        Command::Compare => {
            let report = comparison_text(&effort_comparison(&cfg.comparison_config())?);
            let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("runs").join("compare"));
            write_outputs(&dir, cfg, &report)?;
            Ok(report)
        }
        Command::Table1 => {
            let text = table1_text(&table1_reproduction(&cfg.gains));
            if let Some(dir) = &cfg.out {
                write_outputs(dir, cfg, &text)?;
            }
            Ok(text)
        }
        Command::StabilityReport => {
            let text = StabilityReport::build(&cfg.gains).to_text();
            if let Some(dir) = &cfg.out {
                write_outputs(dir, cfg, &text)?;
            }
            Ok(text)
        }
        Command::Sweep => {
            let wz = cfg.ic.map_or(2.0, |ic| ic.0);
            let (start, stop, step) = cfg.psi_grid;
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            let grid: Vec<(f64, f64)> = (0..count).map(|i| (wz, start + i as f64 * step)).collect();
            let text = sweep_text(&psi_sweep(&cfg.comparison_config(), &grid)?);
            if let Some(dir) = &cfg.out {
                write_outputs(dir, cfg, &text)?;
            }
            Ok(text)
        }
    }
}
