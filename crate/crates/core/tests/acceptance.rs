//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::f64::consts::LN_2;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use adiabat::harness::{self, ExperimentConfig, HamiltonianConfig, ScheduleConfig, SweepConfig, SweepVariable};
use adiabat::hamiltonians::{self, Pauli, PauliString, ScheduledSum};
use adiabat::linalg::{self, c};
use adiabat::metrics;
use adiabat::opensys::{self, DensityState, JointHamiltonian, Theorem2Options};
use adiabat::propagator::{self, EvolveOptions};
use adiabat::schedules::DEFAULT_GAMMA;
use adiabat::spectral::{self, richardson_derivative};
use adiabat::superadiabatic::{self, ExpandOptions};
use adiabat::{CMat, CVec, Grid, Hamiltonian, ResolventConvention, Schedule, SpectralFrame, TargetHint};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

struct Criterion {
    id: usize,
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn track(h: &dyn Hamiltonian, points: usize) -> Vec<SpectralFrame> {
    spectral::track(h, &Grid::new(points).unwrap(), TargetHint::Ground, ResolventConvention::WithI).unwrap()
}

fn qubit(schedule: Schedule) -> ScheduledSum {
    hamiltonians::x_to_z(1, 0.0, schedule).unwrap()
}

fn two_qubit(schedule: Schedule) -> ScheduledSum {
    hamiltonians::x_to_z(2, 1.0, schedule).unwrap()
}

fn exponential_in_n() -> Outcome {
    let cfg = ExperimentConfig {
        hamiltonian: HamiltonianConfig::XToZ { n: 2, coupling: 1.0 },
        schedule: ScheduleConfig {
            family: "smooth_poly".into(),
            nb: None,
            gamma: Some(DEFAULT_GAMMA),
        },
        sweep: SweepConfig::range(SweepVariable::VanishingDerivatives, 1.0, 5.0, 5, false),
        q: 2.0,
        t: None,
        tol: 1e-12,
        grid_points: superadiabatic::DEFAULT_GRID_POINTS,
        seed: 0,
        output: None,
    };
    let table = harness::run_sweep(&cfg).map_err(|e| e.to_string())?;
    let mut deltas = Vec::new();
    for row in &table.rows {
        if let Some(e) = &row.error {
            return Err(format!("N={}: {e}", row.x));
        }
        let (d, b) = (row.delta_measured.unwrap(), row.delta_bound.unwrap());
        ensure(d <= b, || format!("N={}: δ={d:.3e} exceeds bound {b:.3e}", row.x))?;
        deltas.push(d);
    }
    let fit = table.fit.ok_or("fit unavailable")?;
    ensure(fit.slope_at_most(-LN_2), || format!("slope {:.3} ± {:.3} above −ln 2", fit.slope, fit.ci95))?;
    let listed: Vec<String> = deltas.iter().map(|d| format!("{d:.2e}")).collect();
    Ok(format!(
        "slope {:.3} ± {:.3} ({} rows, {} censored), δ = [{}]",
        fit.slope,
        fit.ci95,
        fit.used,
        fit.censored,
        listed.join(", ")
    ))
}

fn exponential_in_t() -> Outcome {
    let cfg = ExperimentConfig {
        hamiltonian: HamiltonianConfig::XToZ { n: 2, coupling: 1.0 },
        schedule: ScheduleConfig {
            family: "smooth_poly".into(),
            nb: Some(3),
            gamma: Some(DEFAULT_GAMMA),
        },
        sweep: SweepConfig::range(SweepVariable::Time, 5.0, 50.0, 11, true),
        q: 2.0,
        t: None,
        tol: 1e-12,
        grid_points: superadiabatic::DEFAULT_GRID_POINTS,
        seed: 0,
        output: None,
    };
    let table = harness::run_sweep(&cfg).map_err(|e| e.to_string())?;
    for row in &table.rows {
        if let Some(e) = &row.error {
            return Err(format!("JT={}: {e}", row.x));
        }
        let (d, b) = (row.delta_measured.unwrap(), row.delta_bound.unwrap());
        if d > harness::DELTA_FLOOR {
            ensure(d <= b, || format!("JT={:.2}: δ={d:.3e} exceeds envelope {b:.3e}", row.x))?;
        }
    }
    let fit = table.fit.ok_or("fit unavailable")?;
    ensure(fit.slope < 0.0, || format!("slope {:.4} not negative", fit.slope))?;
    ensure(fit.r2 >= 0.95, || format!("r² = {:.4} below 0.95", fit.r2))?;
    let first = table.rows.first().unwrap().delta_measured.unwrap();
    let last = table.rows.last().unwrap().delta_measured.unwrap();
    Ok(format!("slope {:.4}/T, r² = {:.5}, δ from {first:.2e} to {last:.2e}", fit.slope, fit.r2))
}

fn superadiabatic_closure() -> Outcome {
    let t = 30.0;
    let mut lines = Vec::new();
    for order in 1..=3usize {
        let h = qubit(Schedule::smooth_poly(order + 1));
        let frames = track(&h, superadiabatic::DEFAULT_GRID_POINTS);
        let mut series = superadiabatic::expand(&h, &frames, order, &ExpandOptions::default()).map_err(|e| e.to_string())?;
        let eps = propagator::epsilon_for(t, h.energy_unit()).unwrap();
        let psi0 = series.assemble_with_phase(0, eps, 0.0).unwrap().vector;
        let result = propagator::evolve(&h, &psi0, t, &[0.0, 1.0], &EvolveOptions::with_tol(1e-12)).map_err(|e| e.to_string())?;
        let phase = propagator::energy_integral_gauss(&h, &frames, 256).unwrap() / eps;
        let last = frames.len() - 1;
        let state = series.assemble_with_phase(last, eps, phase).unwrap();
        let report = metrics::error_report(&result, &frames, &psi0, phase, Some(&state)).map_err(|e| e.to_string())?;
        let (a_numeric, _) = series.a_bound().map_err(|e| e.to_string())?;
        let bound = a_numeric * eps.powi(order as i32 + 1);
        let (d1, d2) = (report.delta1.unwrap(), report.delta2.unwrap());
        ensure(d1 <= bound, || format!("N={order}: δ₁={d1:.3e} > A_N ε^(N+1) = {bound:.3e}"))?;
        ensure(d2 <= 1e-6, || format!("N={order}: δ₂={d2:.3e} > 1e-6"))?;
        lines.push(format!("N={order}: δ₁={d1:.2e} ≤ {bound:.2e}, δ₂={d2:.1e}"));
    }
    Ok(lines.join("; "))
}

fn boundary_vanishing() -> Outcome {
    let mut worst = 0.0_f64;
    for (label, build) in [
        ("1-qubit", qubit as fn(Schedule) -> ScheduledSum),
        ("2-qubit", two_qubit as fn(Schedule) -> ScheduledSum),
    ] {
        for nb in 1..=4usize {
            let h = build(Schedule::smooth_poly(nb));
            let frames = track(&h, superadiabatic::DEFAULT_GRID_POINTS);
            let series = superadiabatic::expand(&h, &frames, nb - 1, &ExpandOptions::default()).map_err(|e| e.to_string())?;
            let report = superadiabatic::boundary_vanishing(&series, nb);
            for e in &report.entries {
                worst = worst.max(e.at_zero).max(e.at_one);
            }
            ensure(report.pass && report.entries.len() == nb, || format!("{label} Nb={nb}: {:?}", report.entries))?;
        }
    }
    let h = qubit(Schedule::linear());
    let frames = track(&h, superadiabatic::DEFAULT_GRID_POINTS);
    let series = superadiabatic::expand(&h, &frames, 0, &ExpandOptions::default()).map_err(|e| e.to_string())?;
    let linear = series.psi_perp(1)[0].norm();
    ensure(linear > 1e-3, || format!("linear ‖ψ₁⊥(0)‖ = {linear:.3e}"))?;
    Ok(format!("max endpoint ‖ψ_j⊥‖ = {worst:.1e}; linear ‖ψ₁⊥(0)‖ = {linear:.3}"))
}

fn grover_gap() -> Outcome {
    let mut worst = 0.0_f64;
    for n in 1..=6usize {
        let mut min_gap = f64::INFINITY;
        for k in 0..=10 {
            let x = k as f64 / 10.0;
            let (e, _) = linalg::hermitian_eigen(&hamiltonians::grover_hamiltonian(n, 0, x).unwrap()).unwrap();
            let gap = e[1] - e[0];
            let formula = metrics::grover_gap(n, x, 1.0).unwrap();
            worst = worst.max((gap - formula).abs());
            ensure((gap - formula).abs() <= 1e-10, || format!("n={n} x={x}: {gap} vs {formula}"))?;
            min_gap = min_gap.min(gap);
        }
        let expected = 2f64.powf(-(n as f64) / 2.0);
        ensure((min_gap - expected).abs() <= 1e-10, || format!("n={n}: min gap {min_gap} vs {expected}"))?;
    }
    Ok(format!("max deviation {worst:.1e} over 66 points"))
}

fn parameter_counting() -> Outcome {
    for n in 1..=6usize {
        let l = n.min(2);
        let counted = hamiltonians::count_parameters(n, l).map_err(|e| e.to_string())?;
        let enumerated = PauliString::enumerate(n, l).len() as u64;
        let formula = ((9 * n * n - 3 * n + 2) / 2) as u64;
        ensure(counted == formula && counted == enumerated, || {
            format!("n={n}: count {counted}, enumeration {enumerated}, formula {formula}")
        })?;
    }
    Ok("n = 1..6 agree with (9n²−3n+2)/2 and enumeration".into())
}

fn analytic_suite() -> Outcome {
    let instances: Vec<(&str, Box<dyn Hamiltonian>)> = vec![
        ("qubit-linear", Box::new(qubit(Schedule::linear()))),
        ("x-to-z-2", Box::new(two_qubit(Schedule::smooth_poly(2)))),
        ("grover-3", Box::new(hamiltonians::grover(3, 5, Schedule::smooth_poly(2)).unwrap())),
        ("random-3", Box::new(hamiltonians::random_two_local(3, 11, &Schedule::smooth_poly(1)).unwrap())),
    ];
    let (mut gh, mut gb, mut star, mut hf, mut ratio) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for (label, h) in &instances {
        let frames = track(h.as_ref(), 513);
        for f in &frames {
            let hm = h.at(f.tau, 0).unwrap();
            let dim = f.dim();
            let gr = f.gr();
            let pperp = f.pperp();
            let res = &gr * (&hm - linalg::identity(dim) * c(f.energy())) - &pperp * linalg::I;
            gh = gh.max(res.norm());
            gb = gb.max((linalg::spectral_norm(&gr).unwrap() * f.gap() - 1.0).abs());
            star = star.max((&gr * &pperp - &gr).norm()).max((&pperp * &gr - &gr).norm());
        }
        ensure(gh <= 1e-9, || format!("{label}: GH residual {gh:.2e}"))?;
        ensure(gb <= 1e-10, || format!("{label}: ‖G_r‖Δ₀ − 1 = {gb:.2e}"))?;
        ensure(star <= 1e-10, || format!("{label}: G_r P⊥ residual {star:.2e}"))?;
        for k in (1..frames.len() - 1).step_by(32) {
            let f = &frames[k];
            let hdot = h.at(f.tau, 1).unwrap();
            let hddot = h.at(f.tau, 2).unwrap();
            let phidot = spectral::target_derivative(f, &hdot);
            let edot = spectral::hellmann_feynman(f, &hdot, &hddot, &phidot).edot;
            let energy = |t: f64| -> adiabat::Result<f64> { Ok(linalg::hermitian_eigen(&h.at(t, 0)?)?.0[0]) };
            let fd: f64 = richardson_derivative(f.tau, 1e-3, energy).unwrap();
            let err = (edot - fd).abs() / (1.0 + edot.abs());
            hf = hf.max(err);
            ensure(err <= 1e-6, || format!("{label} τ={}: Ė={edot} vs {fd}", f.tau))?;
        }
        let report = spectral::corollary_bounds(h.as_ref(), &frames).map_err(|e| e.to_string())?;
        for check in &report.checks {
            ratio = ratio.max(check.ratio);
        }
        ensure(report.all_hold(), || format!("{label}: {:?}", report.checks))?;
    }
    Ok(format!(
        "GH {gh:.1e}, G-bound {gb:.1e}, G_rP⊥ {star:.1e}, Hellmann–Feynman {hf:.1e}, max bound ratio {ratio:.3}"
    ))
}

fn jrs_cross_check() -> Outcome {
    let h = qubit(Schedule::smooth_poly(1));
    let frames = track(&h, 1025);
    let mut lines = Vec::new();
    for q in [2.0, 4.0, 8.0] {
        let t = metrics::jrs_time(&h, &frames, q, 1).map_err(|e| e.to_string())?.integral;
        let psi0 = frames[0].phi();
        let result = propagator::evolve(&h, &psi0, t, &[0.0, 1.0], &EvolveOptions::with_tol(1e-12)).map_err(|e| e.to_string())?;
        let eps = result.epsilon;
        let phase = propagator::energy_integral_gauss(&h, &frames, 256).unwrap() / eps;
        let report = metrics::error_report(&result, &frames, &psi0, phase, None).map_err(|e| e.to_string())?;
        let bound = metrics::jrs_error_bound(q);
        ensure(report.delta <= bound, || format!("q={q}: δ={:.3e} > {bound}", report.delta))?;
        lines.push(format!("q={q}: T={t:.1}, δ={:.2e}", report.delta));
    }
    Ok(lines.join("; "))
}

fn zz_coupling(system_qubits: usize, strength: f64) -> CMat {
    let mut letters = vec![Pauli::I; system_qubits + 1];
    letters[system_qubits - 1] = Pauli::Z;
    letters[system_qubits] = Pauli::Z;
    PauliString::new(letters).unwrap().matrix() * c(strength)
}

fn open_system() -> Outcome {
    let mut lines = Vec::new();
    let instances = [
        ("1+1", qubit(Schedule::smooth_poly(2)), 1usize),
        ("2+1", two_qubit(Schedule::smooth_poly(2)), 2usize),
    ];
    for (label, system, sq) in instances {
        let seed = 7;
        let bath = opensys::random_bath(1, seed).unwrap();
        let (_, v) = linalg::hermitian_eigen(&bath).unwrap();
        let joint = JointHamiltonian::new(system, bath, zz_coupling(sq, 0.1)).unwrap().with_seed(seed);
        let bath_state = DensityState::pure(&v.column(0).into_owned()).unwrap();
        for (n, q) in [(1usize, 2.0), (2, 2.0)] {
            let r = opensys::theorem2_report(&joint, &bath_state, n, q, &Theorem2Options::default()).map_err(|e| e.to_string())?;
            ensure(r.delta_s <= r.delta_sb + 1e-10, || format!("{label} N={n}: δ_S={} > δ_SB={}", r.delta_s, r.delta_sb))?;
            lines.push(format!("{label} N={n}: δ_S={:.2e} ≤ δ_SB={:.2e}", r.delta_s, r.delta_sb));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut margin = f64::NEG_INFINITY;
    for k in 0..100 {
        let dims = if k % 2 == 0 { (2, 2) } else { (4, 2) };
        let dim = dims.0 * dims.1;
        let r1 = DensityState::random(dim, 1 + k % dim, &mut rng);
        let r2 = DensityState::random(dim, 1 + (k / 2) % dim, &mut rng);
        let joint = opensys::trace_distance(&r1, &r2).unwrap();
        let reduced = opensys::trace_distance(
            &opensys::partial_trace_bath(&r1, dims).unwrap(),
            &opensys::partial_trace_bath(&r2, dims).unwrap(),
        )
        .unwrap();
        margin = margin.max(reduced - joint);
        ensure(reduced <= joint + 1e-12, || format!("pair {k}: {reduced} > {joint}"))?;
    }
    lines.push(format!("contractivity max(D_S − D_SB) = {margin:.2e} over 100 pairs"));
    Ok(lines.join("; "))
}

fn integrator_quality() -> Outcome {
    let h = hamiltonians::random_two_local(2, 8, &Schedule::smooth_poly(1)).unwrap();
    let (_, stats) = propagator::evolve_operator(&h, 30.0, &[0.0, 0.5, 1.0], &EvolveOptions::with_tol(1e-12)).map_err(|e| e.to_string())?;
    ensure(stats.max_unitarity_defect <= 1e-10, || format!("unitarity defect {:.2e}", stats.max_unitarity_defect))?;

    let q = qubit(Schedule::smooth_poly(2));
    let psi0 = CVec::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
    let t = 20.0;
    let reference = propagator::evolve(&q, &psi0, t, &[0.0, 1.0], &EvolveOptions::with_tol(1e-14)).unwrap();
    let errs: Vec<f64> = [40.0, 80.0, 160.0]
        .iter()
        .map(|n| {
            let r = propagator::evolve(&q, &psi0, t, &[0.0, 1.0], &EvolveOptions::fixed(1.0 / n)).unwrap();
            (r.final_state() - reference.final_state()).norm()
        })
        .collect();
    let slopes: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    ensure(slopes.iter().all(|s| (s - 4.0).abs() <= 0.3), || format!("convergence slopes {slopes:?}"))?;

    let lin = qubit(Schedule::linear());
    let g0 = track(&lin, 3)[0].phi();
    let t = 50.0;
    let dense = propagator::rk4_reference(&lin, &g0, 1.0 / t, 1_000_000).unwrap();
    let r = propagator::evolve(&lin, &g0, t, &[0.0, 1.0], &EvolveOptions::with_tol(1e-12)).unwrap();
    let agreement = (r.final_state() - &dense).norm();
    ensure(agreement <= 1e-7, || format!("reference disagreement {agreement:.2e}"))?;
    ensure(r.stats.max_unitarity_defect <= 1e-10, || format!("unitarity defect {:.2e}", r.stats.max_unitarity_defect))?;
    Ok(format!(
        "unitarity defect {:.1e}, slopes {}, reference disagreement {agreement:.1e}",
        stats.max_unitarity_defect.max(r.stats.max_unitarity_defect),
        slopes.iter().map(|s| format!("{s:.2}")).collect::<Vec<_>>().join("/")
    ))
}

fn main() -> ExitCode {
    let minutes = |m: u64| Duration::from_secs(60 * m);
    let criteria = [
        Criterion { id: 1, name: "exponential decay in N", limit: minutes(10), run: exponential_in_n },
        Criterion { id: 2, name: "exponential decay in T", limit: minutes(10), run: exponential_in_t },
        Criterion { id: 3, name: "superadiabatic closure", limit: minutes(5), run: superadiabatic_closure },
        Criterion { id: 4, name: "boundary vanishing", limit: minutes(2), run: boundary_vanishing },
        Criterion { id: 5, name: "Grover gap formula", limit: minutes(1), run: grover_gap },
        Criterion { id: 6, name: "parameter counting", limit: Duration::from_secs(10), run: parameter_counting },
        Criterion { id: 7, name: "analytic identities and bounds", limit: minutes(2), run: analytic_suite },
        Criterion { id: 8, name: "JRS cross-check", limit: minutes(5), run: jrs_cross_check },
        Criterion { id: 9, name: "open system", limit: minutes(5), run: open_system },
        Criterion { id: 10, name: "integrator quality", limit: minutes(2), run: integrator_quality },
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in criteria.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > c.limit => Err(format!("{detail}; runtime {elapsed:.1?} over {:?}", c.limit)),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {:>2} {} ({elapsed:.1?}): {detail}", c.id, c.name),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {} ({elapsed:.1?}): {detail}", c.id, c.name);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
