use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adiabat::harness::{self, ExperimentConfig, HamiltonianConfig, ScheduleConfig};
use adiabat::hamiltonians::{self, Pauli, PauliString};
use adiabat::linalg;
use adiabat::metrics::{self, BoundInputs};
use adiabat::opensys::{self, DensityState, JointHamiltonian, Theorem2Options};
use adiabat::schedules::DEFAULT_GAMMA;
use adiabat::spectral;
use adiabat::superadiabatic::{self, ExpandOptions};
use adiabat::{Error, Grid, Hamiltonian, ResolventConvention, ScheduleBank, TargetHint};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "adiabat", version, about = "Adiabatic evolution experiments and error bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Integrator tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the first point of an experiment configuration.
    Simulate(Common),
    /// Run a full sweep and write sweep.csv and sweep.json.
    Sweep(Common),
    /// Closed-form time and error bounds.
    Bound(Common),
    /// Superadiabatic expansion diagnostics.
    Superadiabatic(Common),
    /// System-bath simulation against the open-system bound.
    Opensys(Common),
    /// Quick invariant suite.
    Check(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(c) => simulate(&c),
        Command::Sweep(c) => sweep(&c),
        Command::Bound(c) => bound(&c),
        Command::Superadiabatic(c) => expansion(&c),
        Command::Opensys(c) => open_system(&c),
        Command::Check(c) => check(&c),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}

fn read_config<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> adiabat::Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
        }
    }
}

fn experiment(c: &Common) -> adiabat::Result<ExperimentConfig> {
    let path = c.config.as_deref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = c.tol {
        cfg.tol = tol;
    }
    if let Some(out) = &c.out {
        cfg.output = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(value: &Value, out: Option<&Path>, name: &str) -> adiabat::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        harness::write_atomic(&dir.join(name), text.as_bytes())?;
    }
    // a closed pipe on stdout is not a failure
    let _ = writeln!(io::stdout().lock(), "{text}");
    Ok(())
}

fn simulate(c: &Common) -> adiabat::Result<()> {
    let mut cfg = experiment(c)?;
    cfg.sweep.values.truncate(1);
    let table = harness::run_sweep(&cfg)?;
    let row = &table.rows[0];
    if let Some(e) = &row.error {
        return Err(Error::Numerical(format!("{}={}: {e}", row.variable, row.x)));
    }
    emit(&serde_json::to_value(row)?, cfg.output.as_deref(), "simulate.json")
}

fn sweep(c: &Common) -> adiabat::Result<()> {
    let cfg = experiment(c)?;
    let table = harness::run_sweep(&cfg)?;
    let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("."));
    let (csv_path, json_path) = table.persist(&dir)?;
    for row in &table.rows {
        match (&row.error, row.delta_measured, row.delta_bound) {
            (Some(e), ..) => println!("{}={:<10} error: {e}", row.variable, row.x),
            (None, Some(d), Some(b)) => println!("{}={:<10} δ={d:.3e} bound={b:.3e}", row.variable, row.x),
            _ => {}
        }
    }
    if let Some(fit) = &table.fit {
        println!(
            "fit: slope {:.4} ± {:.4}, r² {:.4} ({} used, {} censored)",
            fit.slope, fit.ci95, fit.r2, fit.used, fit.censored
        );
    }
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    if table.rows.iter().all(|r| r.error.is_some()) {
        return Err(Error::Numerical("every sweep point failed".into()));
    }
    Ok(())
}

fn bound(c: &Common) -> adiabat::Result<()> {
    let inputs: BoundInputs = read_config(c.config.as_deref())?;
    inputs.validate()?;
    let t = metrics::theorem1_time(&inputs)?;
    let envelope = metrics::corollary_exponential(t, &inputs)?;
    let value = json!({
        "inputs": inputs,
        "T": t,
        "delta_bound": metrics::theorem1_error_bound(inputs.n_vanishing, inputs.q, inputs.gamma)?,
        "exponential_c": envelope.c,
        "exponential_envelope": envelope.envelope,
        "fixed_error_T": metrics::corollary_fixed_error(&inputs)?,
        "jrs_bound": metrics::jrs_error_bound(inputs.q),
    });
    emit(&value, c.out.as_deref(), "bound.json")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ExpansionConfig {
    hamiltonian: HamiltonianConfig,
    schedule: ScheduleConfig,
    #[serde(rename = "N")]
    order: usize,
    #[serde(default = "default_grid")]
    grid_points: usize,
    #[serde(default)]
    seed: u64,
}

fn default_grid() -> usize {
    superadiabatic::DEFAULT_GRID_POINTS
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        Self {
            hamiltonian: HamiltonianConfig::XToZ { n: 1, coupling: 0.0 },
            schedule: ScheduleConfig {
                family: "smooth_poly".into(),
                nb: Some(2),
                gamma: None,
            },
            order: 2,
            grid_points: default_grid(),
            seed: 0,
        }
    }
}

fn expansion(c: &Common) -> adiabat::Result<()> {
    let mut cfg: ExpansionConfig = read_config(c.config.as_deref())?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    let bank = ScheduleBank::with_builtins();
    let schedule = cfg.schedule.build(None, &bank)?;
    let h = cfg.hamiltonian.build(&schedule, cfg.seed, &bank)?;
    let frames = spectral::track(h.as_ref(), &Grid::new(cfg.grid_points)?, TargetHint::Ground, ResolventConvention::WithI)?;
    let opts = ExpandOptions {
        gamma: schedule.gamma(),
        ..ExpandOptions::default()
    };
    let mut series = superadiabatic::expand(h.as_ref(), &frames, cfg.order, &opts)?;
    let boundary = superadiabatic::boundary_vanishing(&series, schedule.nb());
    let (a_numeric, a_analytic) = series.a_bound()?;
    let value = json!({
        "config": cfg,
        "Nb": schedule.nb(),
        "A": series.a(),
        "beta": series.beta(),
        "A_N_numeric": a_numeric,
        "A_N_analytic": a_analytic,
        "noise": series.noise(),
        "boundary": boundary,
    });
    if let Some(dir) = &c.out {
        fs::create_dir_all(dir)?;
        let mut buf = Vec::new();
        series.write_csv(&mut buf)?;
        harness::write_atomic(&dir.join("superadiabatic.csv"), &buf)?;
    }
    emit(&value, c.out.as_deref(), "superadiabatic.json")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct OpenSystemConfig {
    system: HamiltonianConfig,
    schedule: ScheduleConfig,
    #[serde(default = "one")]
    bath_qubits: usize,
    #[serde(default)]
    seed: u64,
    /// Strength of the Z⊗Z coupling between the last system qubit and the
    /// first bath qubit.
    #[serde(default = "default_coupling")]
    coupling: f64,
    #[serde(rename = "N", default = "one")]
    n_vanishing: usize,
    #[serde(default = "default_q")]
    q: f64,
    #[serde(default = "default_tol")]
    tol: f64,
}

fn one() -> usize {
    1
}

fn default_coupling() -> f64 {
    0.1
}

fn default_q() -> f64 {
    2.0
}

fn default_tol() -> f64 {
    1e-10
}

impl Default for OpenSystemConfig {
    fn default() -> Self {
        Self {
            system: HamiltonianConfig::XToZ { n: 1, coupling: 0.0 },
            schedule: ScheduleConfig {
                family: "smooth_poly".into(),
                nb: Some(2),
                gamma: None,
            },
            bath_qubits: 1,
            seed: 7,
            coupling: default_coupling(),
            n_vanishing: 1,
            q: default_q(),
            tol: default_tol(),
        }
    }
}

fn open_system(c: &Common) -> adiabat::Result<()> {
    let mut cfg: OpenSystemConfig = read_config(c.config.as_deref())?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = c.tol {
        cfg.tol = tol;
    }
    let bank = ScheduleBank::with_builtins();
    let schedule = cfg.schedule.build(None, &bank)?;
    let system = cfg.system.build(&schedule, cfg.seed, &bank)?;
    let sq = qubits(system.dim())?;
    let bath = opensys::random_bath(cfg.bath_qubits, cfg.seed)?;
    let mut letters = vec![Pauli::I; sq + cfg.bath_qubits];
    letters[sq - 1] = Pauli::Z;
    letters[sq] = Pauli::Z;
    let coupling = PauliString::new(letters)?.matrix() * linalg::c(cfg.coupling);
    let (_, vecs) = linalg::hermitian_eigen(&bath)?;
    let bath_state = DensityState::pure(&vecs.column(0).into_owned())?;
    let joint = JointHamiltonian::new(system, bath, coupling)?.with_seed(cfg.seed);
    let opts = Theorem2Options {
        tol: cfg.tol,
        gamma: schedule.gamma(),
        ..Theorem2Options::default()
    };
    let report = opensys::theorem2_report(&joint, &bath_state, cfg.n_vanishing, cfg.q, &opts)?;
    emit(&serde_json::to_value(&report)?, c.out.as_deref(), "opensys.json")
}

fn qubits(dim: usize) -> adiabat::Result<usize> {
    if dim.is_power_of_two() && dim > 1 {
        Ok(dim.trailing_zeros() as usize)
    } else {
        Err(Error::Config(format!("system dimension {dim} is not a qubit register")))
    }
}

fn check(c: &Common) -> adiabat::Result<()> {
    let tol = c.tol.unwrap_or(1e-10);
    let mut checks: Vec<(&str, bool, String)> = Vec::new();

    let mut worst = 0.0_f64;
    for n in 1..=6 {
        for k in 0..=10 {
            let x = k as f64 / 10.0;
            let (e, _) = linalg::hermitian_eigen(&hamiltonians::grover_hamiltonian(n, 0, x)?)?;
            worst = worst.max((e[1] - e[0] - metrics::grover_gap(n, x, 1.0)?).abs());
        }
    }
    checks.push(("grover gap", worst <= tol, format!("{worst:.1e}")));

    let counts_ok = (1..=6usize).all(|n| {
        let l = n.min(2);
        hamiltonians::count_parameters(n, l).ok() == Some(PauliString::enumerate(n, l).len() as u64)
    });
    checks.push(("parameter count", counts_ok, "n = 1..6".into()));

    let h = hamiltonians::x_to_z(2, 1.0, adiabat::Schedule::smooth_poly(2))?;
    let frames = spectral::track(&h, &Grid::new(257)?, TargetHint::Ground, ResolventConvention::WithI)?;
    let mut gh = 0.0_f64;
    for f in &frames {
        let hm = h.at(f.tau, 0)?;
        let res = f.gr() * (hm - linalg::identity(f.dim()) * linalg::c(f.energy())) - f.pperp() * linalg::I;
        gh = gh.max(res.norm());
    }
    checks.push(("resolvent identity", gh <= 1e-9, format!("{gh:.1e}")));
    let report = spectral::corollary_bounds(&h, &frames)?;
    let ratio = report.checks.iter().map(|c| c.ratio).fold(0.0, f64::max);
    checks.push(("derivative bounds", report.all_hold(), format!("max ratio {ratio:.3}")));

    let frames = spectral::track(&h, &Grid::new(1025)?, TargetHint::Ground, ResolventConvention::WithI)?;
    let series = superadiabatic::expand(&h, &frames, 1, &ExpandOptions::default())?;
    let b = superadiabatic::boundary_vanishing(&series, 2);
    checks.push(("boundary vanishing", b.pass, format!("{:?}", b.entries.iter().map(|e| e.at_zero.max(e.at_one)).collect::<Vec<_>>())));

    let bound = metrics::theorem1_error_bound(3, 2.0, DEFAULT_GAMMA)?;
    checks.push(("bound monotone", bound < metrics::theorem1_error_bound(2, 2.0, DEFAULT_GAMMA)?, format!("{bound:.3e}")));

    let mut failed = 0;
    for (name, ok, detail) in &checks {
        println!("{} {name}: {detail}", if *ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    if failed > 0 {
        return Err(Error::Numerical(format!("{failed} invariant checks failed")));
    }
    Ok(())
}
