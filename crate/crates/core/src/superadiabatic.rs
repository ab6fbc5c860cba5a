//! Superadiabatic expansion around the tracked eigenvector.
//!
//! The state is expanded as
//! `Ψ_N = e^{−i∫E/ε}(Σ_{j≤N} ε^j(f_j Φ + ψ_j⊥) + ε^{N+1} ψ_{N+1}⊥)` with
//! `ψ_j⊥ = G_r(f_{j−1}Φ̇ + P⊥ψ̇_{j−1}⊥)` and `ḟ_j = ⟨Φ̇|ψ_j⊥⟩`.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hamiltonians::Hamiltonian;
use crate::linalg::{self, c, CVec};
use crate::schedules::DEFAULT_GAMMA;
use crate::spectral::{self, ResolventConvention, SpectralFrame};

pub const MAX_ORDER: usize = 6;
pub const MIN_GRID_POINTS: usize = 512;
pub const DEFAULT_GRID_POINTS: usize = 2049;
pub const BOUNDARY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpandOptions {
    /// Relative differentiation-noise budget.
    pub noise_tol: f64,
    /// Analyticity strip height used by the analytic bounds.
    pub gamma: f64,
}

impl Default for ExpandOptions {
    fn default() -> Self {
        Self {
            noise_tol: 1e-6,
            gamma: DEFAULT_GAMMA,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExpansionSeries {
    grid: Grid,
    order: usize,
    frames: Vec<SpectralFrame>,
    phi_dot: Vec<CVec>,
    /// `psi_perp[j][k]` for `j = 0..=N+1`; `j = 0` is identically zero.
    psi_perp: Vec<Vec<CVec>>,
    /// `f[j][k]` for `j = 0..=N`.
    f: Vec<Vec<Complex64>>,
    c: Vec<Complex64>,
    /// Noise estimate of each `ψ̇_j⊥`, `j = 1..=N`, relative to its scale.
    noise: Vec<f64>,
    a: f64,
    beta: f64,
    gamma: f64,
    noise_tol: f64,
}

/// Computes the expansion through `ψ_{N+1}⊥` on gauge-fixed frames.
pub fn expand<H: Hamiltonian + ?Sized>(
    h: &H,
    frames: &[SpectralFrame],
    order: usize,
    opts: &ExpandOptions,
) -> Result<ExpansionSeries> {
    if frames.len() < MIN_GRID_POINTS {
        return Err(Error::InvalidInput(format!(
            "expansion needs at least {MIN_GRID_POINTS} grid points, got {}",
            frames.len()
        )));
    }
    if order > MAX_ORDER {
        return Err(Error::InvalidInput(format!("expansion order {order} exceeds {MAX_ORDER}")));
    }
    if !(opts.gamma > 0.0) || !(opts.noise_tol > 0.0) {
        return Err(Error::InvalidInput("gamma and noise_tol must be positive".into()));
    }
    if frames.iter().any(|f| f.convention != ResolventConvention::WithI) {
        return Err(Error::InvalidInput("expansion requires the G_r convention with the factor i".into()));
    }
    let grid = Grid::new(frames.len())?;
    for (k, f) in frames.iter().enumerate() {
        if (f.tau - grid.tau(k)).abs() > 1e-12 {
            return Err(Error::GridMismatch(format!("frame {k} at τ={} is off the uniform grid", f.tau)));
        }
    }
    let gaps = spectral::gap_profile(frames, h.energy_unit())?;
    let derived = frames
        .par_iter()
        .map(|f| -> Result<(CVec, f64)> {
            let hdot = h.at(f.tau, 1)?;
            Ok((spectral::target_derivative(f, &hdot), linalg::operator_norm(&hdot)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let beta = derived.iter().fold(0.0_f64, |m, d| m.max(d.1));
    let phi_dot: Vec<CVec> = derived.into_iter().map(|d| d.0).collect();
    let dim = frames[0].dim();
    let n = frames.len();

    let mut series = ExpansionSeries {
        grid,
        order,
        frames: frames.to_vec(),
        phi_dot,
        psi_perp: vec![vec![CVec::zeros(dim); n]],
        f: vec![vec![c(1.0); n]],
        c: vec![c(0.0)],
        noise: Vec::new(),
        a: gaps.a,
        beta,
        gamma: opts.gamma,
        noise_tol: opts.noise_tol,
    };
    for j in 1..=order + 1 {
        let prev_dot = series.psi_perp_dot(j - 1)?;
        let f_prev = &series.f[j - 1];
        let psi: Vec<CVec> = (0..n)
            .into_par_iter()
            .map(|k| {
                let fr = &series.frames[k];
                let src = &series.phi_dot[k] * f_prev[k] + fr.apply_pperp(&prev_dot[k]);
                fr.apply_gr(&src)
            })
            .collect();
        series.psi_perp.push(psi);
        if j <= order {
            let integrand: Vec<Complex64> = (0..n)
                .map(|k| series.phi_dot[k].dotc(&series.psi_perp[j][k]))
                .collect();
            let running = series.grid.cumulative_integral(&integrand)?;
            let cj = -running[n - 1];
            series.f.push(running.iter().map(|v| v + cj).collect());
            series.c.push(cj);
        }
    }
    Ok(series)
}

impl ExpansionSeries {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn frames(&self) -> &[SpectralFrame] {
        &self.frames
    }

    pub fn phi_dot(&self) -> &[CVec] {
        &self.phi_dot
    }

    /// `ψ_j⊥` on the grid, `0 ≤ j ≤ N+1`.
    pub fn psi_perp(&self, j: usize) -> &[CVec] {
        &self.psi_perp[j]
    }

    /// `f_j` on the grid, `0 ≤ j ≤ N`.
    pub fn f(&self, j: usize) -> &[Complex64] {
        &self.f[j]
    }

    /// Integration constants `c_j`; `f_j = ∫_0^τ⟨Φ̇|ψ_j⊥⟩ + c_j`.
    pub fn constants(&self) -> &[Complex64] {
        &self.c
    }

    /// Relative noise estimates of the grid derivatives taken so far.
    pub fn noise(&self) -> &[f64] {
        &self.noise
    }

    /// `1/Δ` over the grid.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// `sup‖Ḣ‖` over the grid.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `ψ̇_j⊥` by refined grid differentiation, failing with
    /// [`Error::OrderUnreachable`] when the noise estimate exceeds the budget.
    pub fn psi_perp_dot(&mut self, j: usize) -> Result<Vec<CVec>> {
        let values = &self.psi_perp[j];
        let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.norm()));
        if scale == 0.0 {
            return Ok(values.clone());
        }
        let (deriv, noise) = self.grid.derivative_refined(values)?;
        let dscale = deriv.iter().fold(0.0_f64, |m, v| m.max(v.norm())).max(scale);
        let rel = noise / dscale;
        if j > 0 {
            if self.noise.len() < j {
                self.noise.resize(j, 0.0);
            }
            self.noise[j - 1] = rel;
        }
        if rel > self.noise_tol {
            return Err(Error::OrderUnreachable {
                order: j,
                noise: rel,
                limit: self.noise_tol,
            });
        }
        Ok(deriv)
    }

    /// `ϑ = Σ_{j≤N} ε^j f_j(0)`.
    pub fn initial_phase(&self, eps: f64) -> Complex64 {
        self.f
            .iter()
            .enumerate()
            .map(|(j, fj)| fj[0] * eps.powi(j as i32))
            .sum()
    }

    /// Running `∫_0^τ E` on the grid.
    pub fn energy_integral(&self) -> Result<Vec<f64>> {
        let e: Vec<f64> = self.frames.iter().map(SpectralFrame::energy).collect();
        self.grid.cumulative_integral(&e)
    }

    /// `Ψ_N(τ, ε)` at a grid point.
    pub fn assemble_state(&self, tau: f64, eps: f64) -> Result<SuperadiabaticState> {
        let k = self
            .grid
            .index_of(tau)
            .ok_or_else(|| Error::InvalidInput(format!("τ={tau} is not a grid point")))?;
        let phase = self.energy_integral()?[k] / eps;
        self.assemble_with_phase(k, eps, phase)
    }

    /// `Ψ_N` at grid index `k` with a caller-supplied dynamical phase
    /// `(1/ε)∫_0^τ E`.
    pub fn assemble_with_phase(&self, k: usize, eps: f64, dynamical_phase: f64) -> Result<SuperadiabaticState> {
        if !(eps > 0.0) {
            return Err(Error::InvalidInput("ε must be positive".into()));
        }
        if k >= self.grid.len() {
            return Err(Error::InvalidInput(format!("grid index {k} out of range")));
        }
        let phi = self.frames[k].phi();
        let mut amp = &phi * self.f[0][k];
        let mut w = 1.0;
        for j in 1..=self.order + 1 {
            w *= eps;
            amp += &self.psi_perp[j][k] * c(w);
            if j <= self.order {
                amp += &phi * (self.f[j][k] * w);
            }
        }
        let vector = &amp * Complex64::from_polar(1.0, -dynamical_phase);
        Ok(SuperadiabaticState {
            tau: self.grid.tau(k),
            eps,
            order: self.order,
            vector,
            amplitude: amp,
            dynamical_phase,
        })
    }

    /// Numeric `A_N = ∫‖ψ̇_{N+1}⊥‖` and the analytic bound on it.
    pub fn a_bound(&mut self) -> Result<(f64, f64)> {
        let top = self.order + 1;
        let d = self.psi_perp_dot(top)?;
        let norms: Vec<f64> = d.iter().map(|v| v.norm()).collect();
        let numeric = self.grid.integrate(&norms)?;
        Ok((numeric, a_bound_analytic(self.order, self.a, self.beta, self.gamma)))
    }

    /// `ψ_j⊥` from each of the three equivalent recursion forms.
    pub fn recursion_forms(&mut self, j: usize) -> Result<[Vec<CVec>; 3]> {
        if j == 0 || j > self.order + 1 {
            return Err(Error::InvalidInput(format!("recursion order {j} out of range")));
        }
        let prev_dot = self.psi_perp_dot(j - 1)?;
        let (gr_dot, _) = spectral::gr_derivatives(&self.frames)?;
        let n = self.grid.len();
        let f_prev = &self.f[j - 1];
        let mut forms: [Vec<CVec>; 3] = Default::default();
        for k in 0..n {
            let fr = &self.frames[k];
            let phi_term = &self.phi_dot[k] * f_prev[k];
            forms[0].push(fr.apply_gr(&fr.apply_pperp(&(&phi_term + &prev_dot[k]))));
            forms[1].push(fr.apply_gr(&(&phi_term + &prev_dot[k])));
            forms[2].push(fr.apply_gr(&prev_dot[k]) - &gr_dot[k] * fr.phi() * f_prev[k]);
        }
        Ok(forms)
    }

    /// Writes `tau,j,psi_perp_norm,f_j` rows for every order; `f_j` is the
    /// modulus and is empty for `j = N+1`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "tau,j,psi_perp_norm,f_j")?;
        for j in 1..=self.order + 1 {
            for k in 0..self.grid.len() {
                let f = if j <= self.order {
                    format!("{:e}", self.f[j][k].norm())
                } else {
                    String::new()
                };
                writeln!(w, "{},{},{:e},{}", self.grid.tau(k), j, self.psi_perp[j][k].norm(), f)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SuperadiabaticState {
    pub tau: f64,
    pub eps: f64,
    pub order: usize,
    /// `Ψ_N(τ, ε)` including the dynamical phase.
    pub vector: CVec,
    /// `e^{i∫E/ε} Ψ_N(τ, ε)`.
    pub amplitude: CVec,
    /// `(1/ε)∫_0^τ E`.
    pub dynamical_phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEntry {
    pub j: usize,
    pub at_zero: f64,
    pub at_one: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryVanishingReport {
    pub nb: usize,
    pub tol: f64,
    pub entries: Vec<BoundaryEntry>,
    pub pass: bool,
}

/// Endpoint norms `‖ψ_j⊥(0)‖`, `‖ψ_j⊥(1)‖` for `1 ≤ j ≤ min(Nb, N+1)`.
pub fn boundary_vanishing(series: &ExpansionSeries, nb: usize) -> BoundaryVanishingReport {
    let last = series.grid.len() - 1;
    let entries: Vec<BoundaryEntry> = (1..=nb.min(series.order + 1))
        .map(|j| BoundaryEntry {
            j,
            at_zero: series.psi_perp[j][0].norm(),
            at_one: series.psi_perp[j][last].norm(),
        })
        .collect();
    let pass = entries.iter().all(|e| e.at_zero <= BOUNDARY_TOL && e.at_one <= BOUNDARY_TOL);
    BoundaryVanishingReport {
        nb,
        tol: BOUNDARY_TOL,
        entries,
        pass,
    }
}

/// `C(N) = Π_{j=1}^{N−1}(1 + γ(j−1)^{j−1}/j^j)` with `0⁰ = 1`.
pub fn c_constant(n: usize, gamma: f64) -> f64 {
    (1..n)
        .map(|j| {
            let jf = j as f64;
            1.0 + gamma * (jf - 1.0).powi(j as i32 - 1) / jf.powi(j as i32)
        })
        .product()
}

/// `(N+1)^{γ+1}`, an upper bound on [`c_constant`].
pub fn c_constant_upper(n: usize, gamma: f64) -> f64 {
    (n as f64 + 1.0).powf(gamma + 1.0)
}

/// `g(N) = ((N−1)/γ)^{N−1}` with `g(1) = 1`.
pub fn g_factor(n: usize, gamma: f64) -> f64 {
    if n <= 1 {
        1.0
    } else {
        ((n as f64 - 1.0) / gamma).powi(n as i32 - 1)
    }
}

/// Induction bound `‖ψ_N⊥‖ ≤ C(N)g(N)A^{3N−1}β^{2N−1}`.
pub fn psi_perp_bound(n: usize, a: f64, beta: f64, gamma: f64) -> f64 {
    let ni = n as i32;
    c_constant(n, gamma) * g_factor(n, gamma) * a.powi(3 * ni - 1) * beta.powi(2 * ni - 1)
}

/// `(N+2)^{γ+1}((N+1)A³β²/γ)^{N+1}`.
pub fn a_bound_analytic(order: usize, a: f64, beta: f64, gamma: f64) -> f64 {
    let n = order as f64;
    (n + 2.0).powf(gamma + 1.0) * ((n + 1.0) * a.powi(3) * beta.powi(2) / gamma).powi(order as i32 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{self, ScheduledSum};
    use crate::schedules::Schedule;
    use crate::spectral::TargetHint;

    fn frames_for(h: &ScheduledSum, points: usize) -> Vec<SpectralFrame> {
        spectral::track(h, &Grid::new(points).unwrap(), TargetHint::Ground, ResolventConvention::WithI).unwrap()
    }

    fn qubit(schedule: Schedule) -> ScheduledSum {
        hamiltonians::x_to_z(1, 0.0, schedule).unwrap()
    }

    fn series(h: &ScheduledSum, order: usize, points: usize) -> ExpansionSeries {
        expand(h, &frames_for(h, points), order, &ExpandOptions::default()).unwrap()
    }

    #[test]
    fn constant_hamiltonian_gives_trivial_series() {
        let h = qubit(Schedule::constant(0.3));
        let mut s = series(&h, 3, 513);
        for j in 1..=4 {
            assert!(s.psi_perp(j).iter().all(|v| v.norm() == 0.0));
        }
        for j in 1..=3 {
            assert!(s.f(j).iter().all(|v| v.norm() == 0.0));
        }
        assert!(s.f(0).iter().all(|v| *v == c(1.0)));
        assert_eq!(s.a_bound().unwrap().0, 0.0);
        assert!(boundary_vanishing(&s, 3).pass);
    }

    #[test]
    fn first_order_is_resolvent_on_phi_dot() {
        let h = qubit(Schedule::linear());
        let s = series(&h, 1, 1025);
        let bound = s.a() * s.a() * s.beta();
        for (k, fr) in s.frames().iter().enumerate() {
            let hdot = h.at(fr.tau, 1).unwrap();
            let direct = fr.gr() * spectral::target_derivative(fr, &hdot);
            assert!((&s.psi_perp(1)[k] - direct).norm() < 1e-12);
            assert!(s.psi_perp(1)[k].norm() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn orders_are_orthogonal_to_target() {
        let h = qubit(Schedule::smooth_poly(4));
        let s = series(&h, 2, DEFAULT_GRID_POINTS);
        for j in 1..=3 {
            for (k, fr) in s.frames().iter().enumerate() {
                assert!(fr.phi().dotc(&s.psi_perp(j)[k]).norm() <= 1e-8);
            }
        }
    }

    #[test]
    fn f_vanishes_at_final_time_and_matches_direct_quadrature() {
        let h = hamiltonians::x_to_z(2, 0.5, Schedule::smooth_poly(3)).unwrap();
        let s = series(&h, 2, DEFAULT_GRID_POINTS);
        let last = s.grid().len() - 1;
        for j in 1..=2 {
            assert!(s.f(j)[last].norm() <= 1e-8);
            let integrand: Vec<Complex64> =
                (0..=last).map(|k| s.phi_dot()[k].dotc(&s.psi_perp(j)[k])).collect();
            let total = s.grid().integrate(&integrand).unwrap();
            assert!((s.f(j)[0] + total).norm() < 1e-10);
        }
    }

    #[test]
    fn first_order_correction_is_imaginary() {
        // ⟨Φ̇|G_r|Φ̇⟩ is i times a real number for the i-convention.
        let h = qubit(Schedule::smooth_poly(2));
        let s = series(&h, 1, 1025);
        assert!(s.f(1).iter().all(|v| v.re.abs() < 1e-12));
        assert!(s.f(1)[0].im.abs() > 1e-3);
    }

    #[test]
    fn boundary_norms_vanish_for_flattened_schedules() {
        for nb in 1..=4 {
            let h = qubit(Schedule::smooth_poly(nb));
            let s = series(&h, nb - 1, DEFAULT_GRID_POINTS);
            let report = boundary_vanishing(&s, nb);
            assert_eq!(report.entries.len(), nb);
            assert!(report.pass, "Nb={nb}: {report:?}");
        }
        let h = qubit(Schedule::linear());
        let s = series(&h, 0, 1025);
        let report = boundary_vanishing(&s, 1);
        assert!(!report.pass);
        assert!(report.entries[0].at_zero > 1e-3);
    }

    #[test]
    fn first_order_analytic_bounds() {
        let h = qubit(Schedule::smooth_poly(3));
        let mut s = series(&h, 2, DEFAULT_GRID_POINTS);
        let (a, beta, gamma) = (s.a(), s.beta(), s.gamma());
        let dot = s.psi_perp_dot(1).unwrap();
        assert!(dot.iter().all(|v| v.norm() <= 14.0 * a.powi(3) * beta * beta));
        for j in 1..=3 {
            let bound = psi_perp_bound(j, a, beta, gamma);
            assert!(s.psi_perp(j).iter().all(|v| v.norm() <= bound), "j={j}");
        }
        let (numeric, analytic) = s.a_bound().unwrap();
        assert!(numeric > 0.0 && numeric < analytic);
    }

    #[test]
    fn recursion_forms_agree_in_the_interior() {
        let h = qubit(Schedule::smooth_poly(3));
        let mut s = series(&h, 2, DEFAULT_GRID_POINTS);
        for j in 1..=3 {
            let forms = s.recursion_forms(j).unwrap();
            let n = s.grid().len();
            for k in 8..n - 8 {
                let scale = 1.0 + s.psi_perp(j)[k].norm();
                for form in &forms {
                    assert!((&form[k] - &s.psi_perp(j)[k]).norm() <= 1e-6 * scale, "j={j} k={k}");
                }
            }
        }
    }

    #[test]
    fn initial_state_is_phase_times_target() {
        let h = qubit(Schedule::smooth_poly(3));
        let s = series(&h, 2, DEFAULT_GRID_POINTS);
        let eps = 1e-3;
        let init = s.assemble_state(0.0, eps).unwrap();
        let theta = s.initial_phase(eps);
        assert!((theta.norm() - 1.0).abs() < 1e-8);
        assert!((init.vector.norm() - 1.0).abs() < 1e-8);
        assert!((&init.vector - s.frames()[0].phi() * theta).norm() < 1e-6);
        let end = s.assemble_state(1.0, eps).unwrap();
        assert!((&end.amplitude - s.frames().last().unwrap().phi()).norm() < 1e-6);
    }

    #[test]
    fn truncation_and_leading_order() {
        let h = qubit(Schedule::linear());
        let s = series(&h, 0, 1025);
        let k = 400;
        let tau = s.grid().tau(k);
        let st = s.assemble_state(tau, 0.05).unwrap();
        let expect = s.frames()[k].phi() + &s.psi_perp(1)[k] * c(0.05);
        assert!((&st.amplitude - expect).norm() < 1e-14);
        let tiny = s.assemble_state(tau, 1e-12).unwrap();
        assert!((&tiny.amplitude - s.frames()[k].phi()).norm() < 1e-10);
    }

    #[test]
    fn norm_deviation_is_first_order_in_eps() {
        let h = qubit(Schedule::linear());
        let s = series(&h, 1, 1025);
        let k = 512;
        let dev = |eps: f64| (s.assemble_state(s.grid().tau(k), eps).unwrap().amplitude.norm() - 1.0).abs();
        let (d1, d2, d3) = (dev(0.04), dev(0.02), dev(0.01));
        let slope = ((d1 / d3).ln()) / 4f64.ln();
        assert!(d1 > d2 && d2 > d3);
        // ψ_1⊥ ⟂ Φ and f_1 is imaginary, so the deviation is in fact O(ε²).
        assert!(slope > 0.9, "slope {slope}");
    }

    #[test]
    fn grid_convergence_of_constants() {
        let h = qubit(Schedule::smooth_poly(3));
        let coarse = series(&h, 2, 1025);
        let fine = series(&h, 2, DEFAULT_GRID_POINTS);
        for j in 1..=2 {
            assert!((coarse.f(j)[0] - fine.f(j)[0]).norm() < 1e-8 * (1.0 + fine.f(j)[0].norm()));
        }
    }

    #[test]
    fn constants_and_factors() {
        let g = DEFAULT_GAMMA;
        assert_eq!(c_constant(1, g), 1.0);
        assert!((c_constant(2, g) - (1.0 + g)).abs() < 1e-15);
        for n in 1..8 {
            let ratio = c_constant(n + 1, g) / c_constant(n, g);
            let nf = n as f64;
            let expect = 1.0 + g * (nf - 1.0).powi(n as i32 - 1) / nf.powi(n as i32);
            assert!((ratio - expect).abs() < 1e-14);
            assert!(c_constant(n, g) <= c_constant_upper(n, g));
        }
        assert_eq!(g_factor(1, g), 1.0);
        assert!((g_factor(3, g) - 28.0 * 28.0).abs() < 1e-9);
        let expect = 3f64.powf(g + 1.0) * 224f64.powi(2);
        assert!((a_bound_analytic(1, 2.0, 1.0, g) - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn rejects_bad_inputs() {
        let h = qubit(Schedule::linear());
        let frames = frames_for(&h, 257);
        assert!(expand(&h, &frames, 1, &ExpandOptions::default()).is_err());
        let frames = frames_for(&h, 513);
        assert!(expand(&h, &frames, 7, &ExpandOptions::default()).is_err());
        let s = expand(&h, &frames, 1, &ExpandOptions::default()).unwrap();
        assert!(s.assemble_state(0.1234567, 0.1).is_err());
    }

    #[test]
    fn noise_budget_is_enforced() {
        let h = qubit(Schedule::smooth_poly(4));
        let frames = frames_for(&h, 513);
        let opts = ExpandOptions {
            noise_tol: 1e-14,
            ..ExpandOptions::default()
        };
        match expand(&h, &frames, 3, &opts) {
            Err(Error::OrderUnreachable { .. }) => {}
            other => panic!("expected OrderUnreachable, got {other:?}"),
        }
    }

    #[test]
    fn csv_has_one_row_per_order_and_point() {
        let h = qubit(Schedule::smooth_poly(2));
        let s = series(&h, 1, 513);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("tau,j,psi_perp_norm,f_j"));
        assert_eq!(text.lines().count(), 1 + 2 * 513);
    }
}
