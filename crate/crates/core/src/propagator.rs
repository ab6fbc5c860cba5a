//! Unitary integration of `iε ∂ψ/∂τ = H(τ)ψ`.
//!
//! Steps use the fourth-order commutator-free exponential scheme with two
//! Gauss nodes; step sizes are adapted by step doubling and a PI
//! controller.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{gauss_legendre, Grid};
use crate::hamiltonians::Hamiltonian;
use crate::linalg::{c, CMat, CVec, I};
use crate::spectral::{decompose, SpectralFrame, TargetHint};

const SQRT3: f64 = 1.732_050_807_568_877_2;
const C1: f64 = 0.5 - SQRT3 / 6.0;
const C2: f64 = 0.5 + SQRT3 / 6.0;
const A1: f64 = 0.25 + SQRT3 / 6.0;
const A2: f64 = 0.25 - SQRT3 / 6.0;

/// Largest dimension for which trajectories can be exported.
pub const TRAJECTORY_EXPORT_MAX_DIM: usize = 16;

/// PI step-size controller constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Controller {
    pub safety: f64,
    pub alpha: f64,
    pub beta: f64,
    pub max_factor: f64,
    pub min_factor: f64,
}

impl Default for Controller {
    fn default() -> Self {
        Self {
            safety: 0.9,
            alpha: 0.7 / 5.0,
            beta: 0.4 / 5.0,
            max_factor: 5.0,
            min_factor: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// Local error tolerance per step (state norm 1).
    pub tol: f64,
    pub max_steps: usize,
    pub h_init: Option<f64>,
    pub h_min: f64,
    /// Fixed step in τ; disables adaptivity.
    pub fixed_step: Option<f64>,
    pub controller: Controller,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_steps: 5_000_000,
            h_init: None,
            h_min: 1e-13,
            fixed_step: None,
            controller: Controller::default(),
        }
    }
}

impl EvolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    pub fn fixed(step: f64) -> Self {
        Self {
            fixed_step: Some(step),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub max_unitarity_defect: f64,
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub taus: Vec<f64>,
    pub psi: Vec<CVec>,
    /// Physical run time `T` in units of `1/J`.
    pub t: f64,
    pub epsilon: f64,
    pub energy_unit: f64,
    /// `(1/ε)∫₀^τ E` per sample once attached.
    pub dynamical_phase: Option<Vec<f64>>,
    pub stats: StepStats,
}

impl EvolutionResult {
    pub fn final_state(&self) -> &CVec {
        self.psi.last().expect("non-empty trajectory")
    }

    pub fn attach_dynamical_phase(&mut self, frames: &[SpectralFrame]) -> Result<()> {
        check_same_taus(&self.taus, frames)?;
        self.dynamical_phase = Some(phase_profile(frames, self.epsilon)?);
        Ok(())
    }

    /// CSV with columns `tau, re_k, im_k…, norm_defect`.
    pub fn write_trajectory_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let dim = self.psi.first().map(|v| v.len()).unwrap_or(0);
        if dim > TRAJECTORY_EXPORT_MAX_DIM {
            return Err(Error::InvalidInput(format!(
                "trajectory export is limited to dimension {TRAJECTORY_EXPORT_MAX_DIM}, got {dim}"
            )));
        }
        let mut header = vec!["tau".to_string()];
        for k in 0..dim {
            header.push(format!("re_{k}"));
            header.push(format!("im_{k}"));
        }
        header.push("norm_defect".into());
        writeln!(w, "{}", header.join(","))?;
        for (tau, psi) in self.taus.iter().zip(&self.psi) {
            let mut row = vec![format!("{tau:.17e}")];
            for z in psi.iter() {
                row.push(format!("{:.17e}", z.re));
                row.push(format!("{:.17e}", z.im));
            }
            row.push(format!("{:.3e}", (psi.norm() - 1.0).abs()));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// `ε = 1/(J·T)`.
pub fn epsilon_for(t: f64, energy_unit: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("run time must be > 0, got {t}")));
    }
    Ok(1.0 / (energy_unit * t))
}

fn one_norm(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(−i·s·H)·V` by a Taylor series on sub-steps of norm at most 1.
pub fn expm_apply(h: &CMat, s: f64, v: &CMat) -> CMat {
    let norm = one_norm(h) * s.abs();
    let substeps = norm.ceil().max(1.0) as usize;
    let step = s / substeps as f64;
    let a = h.map(|z| -I * z * step);
    let mut out = v.clone();
    for _ in 0..substeps {
        let mut term = out.clone();
        let mut acc = out.clone();
        for k in 1..40 {
            term = (&a * term).unscale(k as f64);
            acc += &term;
            if term.norm() <= 1e-18 * acc.norm() {
                break;
            }
        }
        out = acc;
    }
    out
}

fn cf4_step<H: Hamiltonian + ?Sized>(h: &H, tau: f64, dt: f64, eps: f64, state: &CMat) -> Result<CMat> {
    let h1 = h.at(tau + C1 * dt, 0)?;
    let h2 = h.at(tau + C2 * dt, 0)?;
    let first = &h1 * c(A1) + &h2 * c(A2);
    let second = &h1 * c(A2) + &h2 * c(A1);
    let s = dt / eps;
    let mid = expm_apply(&first, s, state);
    Ok(expm_apply(&second, s, &mid))
}

fn unitarity_defect(state: &CMat) -> f64 {
    if state.ncols() == 1 {
        (state.norm() - 1.0).abs()
    } else {
        let gram = state.adjoint() * state;
        (gram - CMat::identity(state.ncols(), state.ncols())).norm()
    }
}

fn check_monotone(output: &[f64]) -> Result<f64> {
    if output.len() < 2 {
        return Err(Error::InvalidInput("need at least a start and an end time".into()));
    }
    let dir = (output[1] - output[0]).signum();
    if dir == 0.0 || output.windows(2).any(|w| (w[1] - w[0]) * dir <= 0.0) {
        return Err(Error::InvalidInput("output times must be strictly monotone".into()));
    }
    if output.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("output times must be finite".into()));
    }
    Ok(dir)
}

/// Propagates `state` (columns evolved independently) through the output
/// times; `output[0]` is the start. Returns the state at every output time.
pub fn propagate<H: Hamiltonian + ?Sized>(
    h: &H,
    state: &CMat,
    eps: f64,
    output: &[f64],
    opts: &EvolveOptions,
) -> Result<(Vec<CMat>, StepStats)> {
    if state.nrows() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: state.nrows(),
        });
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!("epsilon must be > 0, got {eps}")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be > 0, got {}", opts.tol)));
    }
    let dir = check_monotone(output)?;
    let mut stats = StepStats::default();
    let mut y = state.clone();
    let mut tau = output[0];
    let mut out = Vec::with_capacity(output.len());
    out.push(y.clone());

    let mut h_prop = match (opts.fixed_step, opts.h_init) {
        (Some(step), _) => step.abs(),
        (None, Some(h0)) => h0.abs(),
        (None, None) => {
            let scale = one_norm(&h.at(tau, 0)?).max(1e-3);
            (0.1 * eps / scale).min((output[output.len() - 1] - output[0]).abs())
        }
    };
    if !(h_prop > 0.0) {
        return Err(Error::InvalidInput("step size must be > 0".into()));
    }
    let mut err_prev = opts.tol;
    let ctl = opts.controller;

    for &target in &output[1..] {
        while (target - tau) * dir > 0.0 {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(Error::MaxSteps {
                    max_steps: opts.max_steps,
                    tau,
                });
            }
            let remaining = (target - tau).abs();
            let last = h_prop >= remaining * (1.0 - 1e-12);
            let dt = if last { remaining } else { h_prop } * dir;
            if opts.fixed_step.is_some() {
                y = cf4_step(h, tau, dt, eps, &y)?;
                stats.accepted += 1;
            } else {
                let big = cf4_step(h, tau, dt, eps, &y)?;
                let half = cf4_step(h, tau, 0.5 * dt, eps, &y)?;
                let fine = cf4_step(h, tau + 0.5 * dt, 0.5 * dt, eps, &half)?;
                let err = (&fine - &big).norm() / 15.0;
                let ratio = if err > 0.0 { opts.tol / err } else { f64::INFINITY };
                if err <= opts.tol {
                    y = fine;
                    stats.accepted += 1;
                    let factor = (ctl.safety * ratio.powf(ctl.alpha) * (err_prev / opts.tol).powf(ctl.beta))
                        .clamp(ctl.min_factor, ctl.max_factor);
                    err_prev = err.max(1e-3 * opts.tol);
                    let next = dt.abs() * factor;
                    h_prop = if last { h_prop.max(next) } else { next };
                } else {
                    stats.rejected += 1;
                    let factor = (ctl.safety * ratio.powf(1.0 / 5.0)).clamp(ctl.min_factor, 0.9);
                    h_prop = dt.abs() * factor;
                    if h_prop < opts.h_min {
                        return Err(Error::StepUnderflow { tau, h: h_prop });
                    }
                    continue;
                }
            }
            tau = if last { target } else { tau + dt };
            if y.ncols() == 1 {
                stats.max_unitarity_defect = stats.max_unitarity_defect.max(unitarity_defect(&y));
            }
        }
        stats.max_unitarity_defect = stats.max_unitarity_defect.max(unitarity_defect(&y));
        out.push(y.clone());
    }
    Ok((out, stats))
}

/// Evolves `psi0` from `output[0]` through the output times for physical
/// run time `t` (ε = 1/(J·T)).
pub fn evolve<H: Hamiltonian + ?Sized>(
    h: &H,
    psi0: &CVec,
    t: f64,
    output: &[f64],
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    let eps = epsilon_for(t, h.energy_unit())?;
    let state = CMat::from_column_slice(psi0.len(), 1, psi0.as_slice());
    let (states, stats) = propagate(h, &state, eps, output, opts)?;
    Ok(EvolutionResult {
        taus: output.to_vec(),
        psi: states.into_iter().map(|m| m.column(0).into_owned()).collect(),
        t,
        epsilon: eps,
        energy_unit: h.energy_unit(),
        dynamical_phase: None,
        stats,
    })
}

/// Evolves the ground state of `H(0)` over `grid`.
pub fn evolve_ground<H: Hamiltonian + ?Sized>(h: &H, t: f64, grid: &Grid, opts: &EvolveOptions) -> Result<EvolutionResult> {
    let frame = decompose(&h.at(0.0, 0)?, 0.0, &TargetHint::Ground, Default::default())?;
    evolve(h, &frame.phi(), t, &grid.taus(), opts)
}

/// Time-evolution operator from `output[0]` to each output time.
pub fn evolve_operator<H: Hamiltonian + ?Sized>(
    h: &H,
    t: f64,
    output: &[f64],
    opts: &EvolveOptions,
) -> Result<(Vec<CMat>, StepStats)> {
    let eps = epsilon_for(t, h.energy_unit())?;
    propagate(h, &CMat::identity(h.dim(), h.dim()), eps, output, opts)
}

fn check_same_taus(taus: &[f64], frames: &[SpectralFrame]) -> Result<()> {
    if taus.len() != frames.len() || taus.iter().zip(frames).any(|(t, f)| (t - f.tau).abs() > 1e-12) {
        return Err(Error::GridMismatch(format!(
            "trajectory has {} samples, frames have {}",
            taus.len(),
            frames.len()
        )));
    }
    Ok(())
}

fn frames_grid(frames: &[SpectralFrame]) -> Result<Grid> {
    let grid = Grid::new(frames.len())?;
    if frames.iter().enumerate().any(|(k, f)| (f.tau - grid.tau(k)).abs() > 1e-12) {
        return Err(Error::GridMismatch("frames are not on a uniform grid over [0, 1]".into()));
    }
    Ok(grid)
}

/// Running dynamical phase `(1/ε)∫₀^τ E` on the frames' grid.
pub fn phase_profile(frames: &[SpectralFrame], eps: f64) -> Result<Vec<f64>> {
    let grid = frames_grid(frames)?;
    let energies: Vec<f64> = frames.iter().map(SpectralFrame::energy).collect();
    Ok(grid
        .cumulative_integral(&energies)?
        .into_iter()
        .map(|v| v / eps)
        .collect())
}

/// `(1/ε)∫₀¹ E` by Simpson quadrature over the frames shared with `result`.
pub fn dynamical_phase(result: &EvolutionResult, frames: &[SpectralFrame]) -> Result<f64> {
    check_same_taus(&result.taus, frames)?;
    let grid = frames_grid(frames)?;
    let energies: Vec<f64> = frames.iter().map(SpectralFrame::energy).collect();
    Ok(grid.integrate(&energies)? / result.epsilon)
}

/// `∫₀¹ E` by composite Gauss–Legendre quadrature on panels of the frames'
/// grid, re-diagonalizing `H` at every node. The target at a node is the
/// level with maximal overlap with the nearest frame's target.
pub fn energy_integral_gauss<H: Hamiltonian + ?Sized>(h: &H, frames: &[SpectralFrame], panels: usize) -> Result<f64> {
    let grid = frames_grid(frames)?;
    let panels = panels.clamp(1, grid.len() - 1);
    let (nodes, weights) = gauss_legendre(10);
    let mut total = 0.0;
    for p in 0..panels {
        let a = p as f64 / panels as f64;
        let b = (p + 1) as f64 / panels as f64;
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in nodes.iter().zip(&weights) {
            let tau = mid + half * x;
            let nearest = ((tau / grid.step()).round() as usize).min(grid.len() - 1);
            let hint = TargetHint::Vector(frames[nearest].phi());
            let frame = decompose(&h.at(tau, 0)?, tau, &hint, frames[0].convention)?;
            total += w * half * frame.energy();
        }
    }
    Ok(total)
}

/// Classical fourth-order Runge–Kutta with a fixed number of steps; used as
/// an independent reference.
pub fn rk4_reference<H: Hamiltonian + ?Sized>(h: &H, psi0: &CVec, eps: f64, steps: usize) -> Result<CVec> {
    let dt = 1.0 / steps as f64;
    let rhs = |tau: f64, y: &CVec| -> Result<CVec> { Ok(h.at(tau, 0)? * y * (-I / eps)) };
    let mut y = psi0.clone();
    for k in 0..steps {
        let tau = k as f64 * dt;
        let k1 = rhs(tau, &y)?;
        let k2 = rhs(tau + 0.5 * dt, &(&y + &k1 * c(0.5 * dt)))?;
        let k3 = rhs(tau + 0.5 * dt, &(&y + &k2 * c(0.5 * dt)))?;
        let k4 = rhs(tau + dt, &(&y + &k3 * c(dt)))?;
        y += (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * c(dt / 6.0);
    }
    Ok(y)
}
