//! Experiment configuration, parameter sweeps, decay fits and persistence.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hamiltonians::{self, Hamiltonian, LocalHamiltonian, LocalHamiltonianSpec};
use crate::metrics::{self, BoundInputs, ErrorReport};
use crate::propagator::{self, EvolveOptions};
use crate::schedules::{Schedule, ScheduleBank};
use crate::spectral::{self, ResolventConvention, TargetHint};
use crate::superadiabatic::{self, ExpandOptions};

/// Values of δ below this are treated as the integrator floor.
pub const DELTA_FLOOR: f64 = 1e-12;
pub const MAX_GROVER_QUBITS: usize = 8;
pub const MAX_RANDOM_QUBITS: usize = 6;
const PHASE_PANELS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HamiltonianConfig {
    Grover {
        n: usize,
        #[serde(default)]
        marked: usize,
    },
    XToZ {
        n: usize,
        #[serde(default = "one")]
        coupling: f64,
    },
    #[serde(rename = "random-2local")]
    Random2Local {
        n: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    Spec {
        spec: LocalHamiltonianSpec,
    },
}

fn one() -> f64 {
    1.0
}

impl HamiltonianConfig {
    fn qubits(&self) -> usize {
        match self {
            Self::Grover { n, .. } | Self::XToZ { n, .. } | Self::Random2Local { n, .. } => *n,
            Self::Spec { spec } => spec.n,
        }
    }

    fn with_qubits(&self, n: usize) -> Result<Self> {
        let mut out = self.clone();
        match &mut out {
            Self::Grover { n: m, .. } | Self::XToZ { n: m, .. } | Self::Random2Local { n: m, .. } => *m = n,
            Self::Spec { .. } => {
                return Err(Error::Config("an explicit spec cannot be swept over n".into()));
            }
        }
        Ok(out)
    }

    /// Builds the Hamiltonian; `schedule` is ignored for explicit specs.
    pub fn build(&self, schedule: &Schedule, seed: u64, bank: &ScheduleBank) -> Result<Box<dyn Hamiltonian>> {
        Ok(match self {
            Self::Grover { n, marked } => Box::new(hamiltonians::grover(*n, *marked, schedule.clone())?),
            Self::XToZ { n, coupling } => Box::new(hamiltonians::x_to_z(*n, *coupling, schedule.clone())?),
            Self::Random2Local { n, seed: s } => {
                Box::new(hamiltonians::random_two_local(*n, s.unwrap_or(seed), schedule)?)
            }
            Self::Spec { spec } => Box::new(LocalHamiltonian::resolve(spec, bank)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub family: String,
    #[serde(rename = "Nb", default)]
    pub nb: Option<usize>,
    #[serde(default)]
    pub gamma: Option<f64>,
}

impl ScheduleConfig {
    pub fn build(&self, nb: Option<usize>, bank: &ScheduleBank) -> Result<Schedule> {
        let mut params = Map::new();
        if let Some(nb) = nb.or(self.nb) {
            params.insert("Nb".into(), Value::from(nb));
        }
        if let Some(g) = self.gamma {
            params.insert("gamma".into(), Value::from(g));
        }
        bank.build(&self.family, &params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "N")]
    VanishingDerivatives,
    #[serde(rename = "T")]
    Time,
    #[serde(rename = "q")]
    Dilation,
    #[serde(rename = "n")]
    Qubits,
}

impl SweepVariable {
    pub fn label(self) -> &'static str {
        match self {
            Self::VanishingDerivatives => "N",
            Self::Time => "T",
            Self::Dilation => "q",
            Self::Qubits => "n",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

impl SweepConfig {
    /// `points` values from `start` to `stop`, geometrically spaced if `log`.
    pub fn range(variable: SweepVariable, start: f64, stop: f64, points: usize, log: bool) -> Self {
        let values = (0..points)
            .map(|k| {
                let s = if points == 1 { 0.0 } else { k as f64 / (points - 1) as f64 };
                if log {
                    start * (stop / start).powf(s)
                } else {
                    start + (stop - start) * s
                }
            })
            .collect();
        Self { variable, values }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub hamiltonian: HamiltonianConfig,
    pub schedule: ScheduleConfig,
    pub sweep: SweepConfig,
    #[serde(default = "default_q")]
    pub q: f64,
    /// Fixed total time; otherwise each point uses `theorem1_time`.
    #[serde(rename = "T", default)]
    pub t: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_q() -> f64 {
    2.0
}

fn default_tol() -> f64 {
    1e-10
}

fn default_grid_points() -> usize {
    superadiabatic::DEFAULT_GRID_POINTS
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.sweep.values.is_empty() {
            return bad("sweep range is empty".into());
        }
        if self.sweep.values.iter().any(|v| !v.is_finite()) {
            return bad("sweep values must be finite".into());
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive".into());
        }
        if self.grid_points < superadiabatic::MIN_GRID_POINTS {
            return bad(format!("grid_points must be at least {}", superadiabatic::MIN_GRID_POINTS));
        }
        if let Some(t) = self.t {
            if !(t > 0.0) {
                return bad("T must be positive".into());
            }
        }
        let integral = |v: f64| v >= 0.0 && v.fract() == 0.0;
        match self.sweep.variable {
            SweepVariable::VanishingDerivatives | SweepVariable::Qubits => {
                if !self.sweep.values.iter().all(|&v| integral(v)) {
                    return bad(format!("{} values must be non-negative integers", self.sweep.variable.label()));
                }
            }
            SweepVariable::Time => {
                if self.sweep.values.iter().any(|&v| !(v > 0.0)) {
                    return bad("T values must be positive".into());
                }
            }
            SweepVariable::Dilation => {
                if self.sweep.values.iter().any(|&v| !(v > 1.0)) {
                    return bad("q values must exceed 1".into());
                }
            }
        }
        if self.t.is_none() && self.sweep.variable != SweepVariable::Time && !(self.q > 1.0) {
            return bad("q must exceed 1".into());
        }
        if self.sweep.variable == SweepVariable::VanishingDerivatives {
            if matches!(self.hamiltonian, HamiltonianConfig::Spec { .. }) {
                return bad("an explicit spec fixes its schedules and cannot be swept over N".into());
            }
            if self.sweep.values.iter().any(|&v| v < 1.0) {
                return bad("N values must be at least 1".into());
            }
        }
        if self.sweep.variable == SweepVariable::Qubits {
            let cap = match self.hamiltonian {
                HamiltonianConfig::Grover { .. } | HamiltonianConfig::XToZ { .. } => MAX_GROVER_QUBITS,
                HamiltonianConfig::Random2Local { .. } => MAX_RANDOM_QUBITS,
                HamiltonianConfig::Spec { .. } => return bad("an explicit spec cannot be swept over n".into()),
            };
            if self.sweep.values.iter().any(|&v| v < 1.0 || v as usize > cap) {
                return bad(format!("n values must lie in 1..={cap}"));
            }
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON encoding,
    /// excluding the output directory.
    pub fn hash(&self) -> String {
        let canonical = Self {
            output: None,
            ..self.clone()
        };
        let text = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// One evaluated sweep point. Numeric fields are `None` when the point
/// failed; `error` then carries the message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub config_hash: String,
    pub variable: String,
    pub x: f64,
    #[serde(rename = "N")]
    pub n_vanishing: Option<usize>,
    pub q: Option<f64>,
    #[serde(rename = "T")]
    pub t: Option<f64>,
    pub epsilon: Option<f64>,
    pub n: usize,
    pub xi: Option<f64>,
    pub d: Option<f64>,
    pub delta_measured: Option<f64>,
    pub delta_bound: Option<f64>,
    pub bound_kind: String,
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    pub fidelity: Option<f64>,
    pub censored: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub n_vanishing: usize,
    pub q: Option<f64>,
    pub t: f64,
    pub epsilon: f64,
    pub xi: f64,
    pub d: f64,
    pub report: ErrorReport,
    pub delta_bound: f64,
    pub bound_kind: String,
}

/// Simulates one point: tracks the target, picks `T`, evolves from
/// `ϑ̂Φ(0)` and evaluates the metrics.
///
/// `ϑ̂` is the unit-modulus initial phase of the superadiabatic expansion of
/// order `Nb − 1`, which makes the dynamical phase the correct reference
/// for `ψ(1)`.
pub fn simulate_point(
    h: &dyn Hamiltonian,
    nb: usize,
    timing: Timing,
    tol: f64,
    grid_points: usize,
    gamma: f64,
) -> Result<PointResult> {
    let grid = Grid::new(grid_points)?;
    let frames = spectral::track(h, &grid, TargetHint::Ground, ResolventConvention::WithI)?;
    let unit = h.energy_unit();
    let gaps = spectral::gap_profile(&frames, unit)?;
    let d = gaps.summary().delta * unit;
    let xi = hamiltonians::norm_profile(h, &grid)?.beta * unit;
    let n_vanishing = match timing {
        Timing::Theorem { n_vanishing, .. } => n_vanishing,
        Timing::Fixed { .. } => nb,
    };
    let inputs = BoundInputs {
        n_vanishing,
        q: match timing {
            Timing::Theorem { q, .. } => q,
            Timing::Fixed { .. } => 2.0,
        },
        gamma,
        xi,
        d,
        j: unit,
        ..BoundInputs::default()
    };
    let (t, q) = match timing {
        Timing::Theorem { q, .. } => (metrics::theorem1_time(&inputs)?, Some(q)),
        Timing::Fixed { t } => (t, None),
    };
    let eps = propagator::epsilon_for(t, unit)?;
    let order = nb.max(1) - 1;
    let opts = ExpandOptions {
        gamma,
        ..ExpandOptions::default()
    };
    let series = superadiabatic::expand(h, &frames, order, &opts)?;
    let theta = series.initial_phase(eps);
    let theta_hat = if theta.norm() > 0.0 { theta / theta.norm() } else { Complex64::new(1.0, 0.0) };
    let psi0 = frames[0].phi() * theta_hat;
    let result = propagator::evolve(h, &psi0, t, &[0.0, 1.0], &EvolveOptions::with_tol(tol))?;
    let phase = propagator::energy_integral_gauss(h, &frames, PHASE_PANELS)? / eps;
    let state = series.assemble_with_phase(grid.len() - 1, eps, phase)?;
    let report = metrics::error_report(&result, &frames, &psi0, phase, Some(&state))?;
    let (delta_bound, bound_kind) = match timing {
        Timing::Theorem { q, .. } => (metrics::theorem1_error_bound(n_vanishing, q, gamma)?, "theorem1"),
        Timing::Fixed { .. } => (metrics::corollary_exponential(t, &inputs)?.envelope, "exponential"),
    };
    Ok(PointResult {
        n_vanishing,
        q,
        t,
        epsilon: eps,
        xi,
        d,
        report,
        delta_bound,
        bound_kind: bound_kind.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Timing {
    /// `T = (q/γ)Nξ²/d³`.
    Theorem { n_vanishing: usize, q: f64 },
    Fixed { t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub rows: Vec<SweepRow>,
    /// Wall time per row in seconds; written to JSON only.
    pub wall_times: Vec<f64>,
    pub fit: Option<FitResult>,
}

/// Runs every sweep point (in parallel). Point failures are recorded in the
/// row and do not stop the sweep.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepTable> {
    config.validate()?;
    let bank = ScheduleBank::with_builtins();
    let hash = config.hash();
    let evaluated: Vec<(SweepRow, f64)> = config
        .sweep
        .values
        .par_iter()
        .map(|&x| {
            let start = Instant::now();
            let row = sweep_row(config, &bank, &hash, x);
            (row, start.elapsed().as_secs_f64())
        })
        .collect();
    let (rows, wall_times): (Vec<_>, Vec<_>) = evaluated.into_iter().unzip();
    let fit = match config.sweep.variable {
        SweepVariable::VanishingDerivatives | SweepVariable::Time => fit_rows(&rows).ok(),
        _ => None,
    };
    Ok(SweepTable {
        config: config.clone(),
        config_hash: hash,
        rows,
        wall_times,
        fit,
    })
}

fn sweep_row(config: &ExperimentConfig, bank: &ScheduleBank, hash: &str, x: f64) -> SweepRow {
    let mut row = SweepRow {
        config_hash: hash.to_string(),
        variable: config.sweep.variable.label().to_string(),
        x,
        n_vanishing: None,
        q: None,
        t: None,
        epsilon: None,
        n: config.hamiltonian.qubits(),
        xi: None,
        d: None,
        delta_measured: None,
        delta_bound: None,
        bound_kind: String::new(),
        delta1: None,
        delta2: None,
        fidelity: None,
        censored: None,
        error: None,
    };
    let outcome = (|| -> Result<PointResult> {
        let (ham, nb_override) = match config.sweep.variable {
            SweepVariable::Qubits => (config.hamiltonian.with_qubits(x as usize)?, None),
            SweepVariable::VanishingDerivatives => (config.hamiltonian.clone(), Some(x as usize)),
            _ => (config.hamiltonian.clone(), None),
        };
        let schedule = config.schedule.build(nb_override, bank)?;
        let h = ham.build(&schedule, config.seed, bank)?;
        let nb = schedule.nb();
        let timing = match (config.sweep.variable, config.t) {
            (SweepVariable::Time, _) => Timing::Fixed { t: x },
            (_, Some(t)) => Timing::Fixed { t },
            (SweepVariable::Dilation, None) => Timing::Theorem { n_vanishing: nb, q: x },
            (_, None) => Timing::Theorem {
                n_vanishing: nb,
                q: config.q,
            },
        };
        simulate_point(h.as_ref(), nb, timing, config.tol, config.grid_points, schedule.gamma())
    })();
    match outcome {
        Ok(p) => {
            if config.sweep.variable == SweepVariable::Qubits {
                row.n = x as usize;
            }
            row.n_vanishing = Some(p.n_vanishing);
            row.q = p.q;
            row.t = Some(p.t);
            row.epsilon = Some(p.epsilon);
            row.xi = Some(p.xi);
            row.d = Some(p.d);
            row.delta_measured = Some(p.report.delta);
            row.delta_bound = Some(p.delta_bound);
            row.bound_kind = p.bound_kind;
            row.delta1 = p.report.delta1;
            row.delta2 = p.report.delta2;
            row.fidelity = Some(p.report.fidelity);
            row.censored = Some(p.report.delta < DELTA_FLOOR);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

fn fit_rows(rows: &[SweepRow]) -> Result<FitResult> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| r.delta_measured.map(|d| (r.x, d)))
        .unzip();
    fit_decay(&xs, &ys)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Half-width of the 95% confidence interval on the slope.
    pub ci95: f64,
    pub used: usize,
    pub censored: usize,
}

impl FitResult {
    /// Whether the slope is at most `limit` within the confidence interval.
    pub fn slope_at_most(&self, limit: f64) -> bool {
        self.slope - self.ci95 <= limit
    }
}

/// Ordinary least squares of `ln δ` against `x`, excluding rows with
/// `δ < DELTA_FLOOR`.
pub fn fit_decay(xs: &[f64], deltas: &[f64]) -> Result<FitResult> {
    if xs.len() != deltas.len() {
        return Err(Error::InvalidInput("x and δ columns differ in length".into()));
    }
    let kept: Vec<(f64, f64)> = xs
        .iter()
        .zip(deltas)
        .filter(|(_, d)| **d >= DELTA_FLOOR && d.is_finite())
        .map(|(x, d)| (*x, d.ln()))
        .collect();
    let censored = xs.len() - kept.len();
    let n = kept.len();
    if n < 4 {
        return Err(Error::InvalidInput(format!(
            "need at least 4 rows above the floor, have {n} ({censored} censored)"
        )));
    }
    let nf = n as f64;
    let mx = kept.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = kept.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = kept.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = kept.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = kept.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("x column is constant".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = kept.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    let se = (sse / (nf - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 2.0)
        .map_err(|e| Error::InvalidInput(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(FitResult {
        slope,
        intercept,
        r2,
        ci95: t * se,
        used: n,
        censored,
    })
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            out.serialize(row).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `sweep.csv` and `sweep.json` into `dir`, each through a
    /// temporary file and a rename.
    pub fn persist(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let csv_path = dir.join("sweep.csv");
        let json_path = dir.join("sweep.json");
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        write_atomic(&csv_path, &buf)?;
        write_atomic(&json_path, serde_json::to_string_pretty(self)?.as_bytes())?;
        Ok((csv_path, json_path))
    }
}

/// Writes `bytes` to `path` via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
