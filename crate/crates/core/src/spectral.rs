//! Instantaneous eigensystems along a τ-grid: target tracking, gauge fixing,
//! gap profiles and the reduced resolvent.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fd_weights, Grid, GridValue};
use crate::hamiltonians::Hamiltonian;
use crate::linalg::{self, c, CMat, CVec, I};

/// Target gaps below this are treated as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

/// Minimum overlap accepted when matching a target across frames.
pub const MIN_TRACKING_OVERLAP: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Phase convention of the reduced resolvent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolventConvention {
    /// `G_r = i·[H − E]_r⁻¹`, for which `G_r(H − E) = i·P⊥`.
    #[default]
    WithI,
    /// `G_r = Σ_{j≠t} |Φ_j⟩⟨Φ_j| / (E_j − E)` without the factor `i`.
    Printed,
}

impl ResolventConvention {
    pub fn factor(self) -> Complex64 {
        match self {
            ResolventConvention::WithI => I,
            ResolventConvention::Printed => c(1.0),
        }
    }
}

/// How the target level is selected in the first frame.
#[derive(Debug, Clone)]
pub enum TargetHint {
    Ground,
    Level(usize),
    /// Level with maximal overlap with the given vector.
    Vector(CVec),
}

/// Eigensystem of `H(τ)` with a tracked target level.
///
/// Energies and eigenvectors are stored in ascending order; `target` indexes
/// the tracked level.
#[derive(Debug, Clone)]
pub struct SpectralFrame {
    pub tau: f64,
    pub energies: Vec<f64>,
    pub vectors: CMat,
    pub target: usize,
    pub convention: ResolventConvention,
}

impl SpectralFrame {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energy(&self) -> f64 {
        self.energies[self.target]
    }

    pub fn phi(&self) -> CVec {
        self.vectors.column(self.target).into_owned()
    }

    /// `min_{j≠t} |E_j − E_t|`.
    pub fn gap(&self) -> f64 {
        self.nearest_level().map(|(_, g)| g).unwrap_or(f64::INFINITY)
    }

    /// Index and distance of the level closest to the target.
    pub fn nearest_level(&self) -> Option<(usize, f64)> {
        let e = self.energy();
        self.energies
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != self.target)
            .map(|(j, ej)| (j, (ej - e).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn projector(&self) -> CMat {
        let phi = self.phi();
        linalg::outer(&phi, &phi)
    }

    pub fn pperp(&self) -> CMat {
        linalg::identity(self.dim()) - self.projector()
    }

    fn resolvent_weights(&self) -> Vec<Complex64> {
        let e = self.energy();
        let factor = self.convention.factor();
        self.energies
            .iter()
            .enumerate()
            .map(|(j, ej)| if j == self.target { c(0.0) } else { factor / (ej - e) })
            .collect()
    }

    /// Dense reduced resolvent.
    pub fn gr(&self) -> CMat {
        let w = self.resolvent_weights();
        let mut scaled = self.vectors.clone();
        for (j, wj) in w.iter().enumerate() {
            let mut col = scaled.column_mut(j);
            col *= *wj;
        }
        scaled * self.vectors.adjoint()
    }

    /// `G_r·v` without forming the matrix.
    pub fn apply_gr(&self, v: &CVec) -> CVec {
        let mut coeffs = self.vectors.adjoint() * v;
        for (cj, wj) in coeffs.iter_mut().zip(self.resolvent_weights()) {
            *cj *= wj;
        }
        &self.vectors * coeffs
    }

    /// `P⊥·v`.
    pub fn apply_pperp(&self, v: &CVec) -> CVec {
        let phi = self.vectors.column(self.target);
        let overlap = phi.dotc(v);
        v - phi * overlap
    }

    fn rephase_target(&mut self, phase: Complex64) {
        let mut col = self.vectors.column_mut(self.target);
        col *= phase;
    }
}

fn select_target(energies: &[f64], vectors: &CMat, hint: &TargetHint, tau: f64) -> Result<usize> {
    match hint {
        TargetHint::Ground => Ok(0),
        TargetHint::Level(k) if *k < energies.len() => Ok(*k),
        TargetHint::Level(k) => Err(Error::InvalidInput(format!(
            "target level {k} out of range for dimension {}",
            energies.len()
        ))),
        TargetHint::Vector(v) => {
            if v.len() != vectors.nrows() {
                return Err(Error::DimensionMismatch {
                    expected: vectors.nrows(),
                    found: v.len(),
                });
            }
            let (best, overlap) = (0..vectors.ncols())
                .map(|j| (j, vectors.column(j).dotc(v).norm()))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty basis");
            if overlap < MIN_TRACKING_OVERLAP {
                return Err(Error::TrackingLost { tau, overlap });
            }
            Ok(best)
        }
    }
}

fn frame_from_eigen(
    tau: f64,
    energies: Vec<f64>,
    vectors: CMat,
    hint: &TargetHint,
    convention: ResolventConvention,
) -> Result<SpectralFrame> {
    let target = select_target(&energies, &vectors, hint, tau)?;
    let frame = SpectralFrame {
        tau,
        energies,
        vectors,
        target,
        convention,
    };
    let gap = frame.gap();
    if gap <= DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateTarget { tau, gap });
    }
    Ok(frame)
}

/// Full eigendecomposition of `h` with the target chosen by `hint`.
pub fn decompose(h: &CMat, tau: f64, hint: &TargetHint, convention: ResolventConvention) -> Result<SpectralFrame> {
    let (energies, vectors) = linalg::hermitian_eigen(h)?;
    frame_from_eigen(tau, energies, vectors, hint, convention)
}

/// Frame of `h` at `tau` whose target is matched to `reference` and phased
/// so that `⟨reference|Φ⟩` is real positive.
pub fn aligned_frame<H: Hamiltonian + ?Sized>(
    h: &H,
    tau: f64,
    reference: &CVec,
    convention: ResolventConvention,
) -> Result<SpectralFrame> {
    let mut frame = decompose(&h.at(tau, 0)?, tau, &TargetHint::Vector(reference.clone()), convention)?;
    let ov = frame.vectors.column(frame.target).dotc(reference);
    frame.rephase_target(ov / ov.norm());
    Ok(frame)
}

/// Decomposes `H` on every grid point (in parallel), tracks the target by
/// maximal overlap and fixes the gauge.
pub fn track<H: Hamiltonian + ?Sized>(
    h: &H,
    grid: &Grid,
    hint: TargetHint,
    convention: ResolventConvention,
) -> Result<Vec<SpectralFrame>> {
    let taus = grid.taus();
    let eigen = taus
        .par_iter()
        .map(|&tau| linalg::hermitian_eigen(&h.at(tau, 0)?))
        .collect::<Result<Vec<_>>>()?;
    let mut frames: Vec<SpectralFrame> = Vec::with_capacity(taus.len());
    for (tau, (energies, vectors)) in taus.into_iter().zip(eigen) {
        let hint = match frames.last() {
            None => hint.clone(),
            Some(prev) => TargetHint::Vector(prev.phi()),
        };
        frames.push(frame_from_eigen(tau, energies, vectors, &hint, convention)?);
    }
    fix_gauge(&frames)
}

fn is_uniform(frames: &[SpectralFrame]) -> bool {
    if frames.len() < 5 {
        return false;
    }
    let n = frames.len();
    let h = 1.0 / (n - 1) as f64;
    frames.first().map(|f| f.tau) == Some(0.0)
        && frames
            .iter()
            .enumerate()
            .all(|(k, f)| (f.tau - k as f64 * h).abs() <= 1e-12)
}

/// Parallel-transport gauge.
///
/// Each eigenvector is rephased so that consecutive overlaps are real
/// positive. On uniform grids covering `[0, 1]` the target is then refined
/// by integrating the residual connection `Im⟨Φ|Φ̇⟩`, which removes the
/// second-order error of the discrete transport. The phase of the first
/// frame is kept.
pub fn fix_gauge(frames: &[SpectralFrame]) -> Result<Vec<SpectralFrame>> {
    let mut out = frames.to_vec();
    for k in 1..out.len() {
        let (head, tail) = out.split_at_mut(k);
        let prev = &head[k - 1];
        let cur = &mut tail[0];
        let ov = cur.vectors.column(cur.target).dotc(&prev.vectors.column(prev.target));
        if ov.norm() < MIN_TRACKING_OVERLAP {
            return Err(Error::GridTooCoarse {
                tau: cur.tau,
                overlap: ov.norm(),
            });
        }
        for j in 0..cur.dim() {
            let ov = if j == cur.target {
                ov
            } else if j < prev.dim() && j != prev.target {
                cur.vectors.column(j).dotc(&prev.vectors.column(j))
            } else {
                continue;
            };
            if ov.norm() > 1e-8 {
                let mut col = cur.vectors.column_mut(j);
                col *= ov / ov.norm();
            }
        }
    }
    if is_uniform(&out) {
        let grid = Grid::new(out.len())?;
        let phis: Vec<CVec> = out.iter().map(SpectralFrame::phi).collect();
        let dphi = grid.derivative(&phis)?;
        let connection: Vec<f64> = phis.iter().zip(&dphi).map(|(p, d)| p.dotc(d).im).collect();
        let theta = grid.cumulative_integral(&connection)?;
        for (frame, th) in out.iter_mut().zip(theta) {
            frame.rephase_target(Complex64::from_polar(1.0, -th));
        }
    }
    Ok(out)
}

/// Δ₀(τ) along the grid with its minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapProfile {
    pub taus: Vec<f64>,
    pub delta0: Vec<f64>,
    /// Index of the level closest to the target at each sample.
    pub emin_index: Vec<usize>,
    pub delta: f64,
    pub a: f64,
    pub d: f64,
    pub argmin_tau: f64,
}

/// Summary document `{Delta, A, d, argmin_tau}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    #[serde(rename = "Delta")]
    pub delta: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub d: f64,
    pub argmin_tau: f64,
}

pub fn gap_profile(frames: &[SpectralFrame], energy_unit: f64) -> Result<GapProfile> {
    if frames.len() < 2 {
        return Err(Error::InvalidInput("gap profile needs at least 2 frames".into()));
    }
    let mut taus = Vec::with_capacity(frames.len());
    let mut delta0 = Vec::with_capacity(frames.len());
    let mut emin_index = Vec::with_capacity(frames.len());
    for f in frames {
        let (j, gap) = f
            .nearest_level()
            .ok_or_else(|| Error::InvalidInput("gap undefined for a 1-dimensional space".into()))?;
        if gap <= 0.0 {
            return Err(Error::GapClosed { tau: f.tau, gap });
        }
        taus.push(f.tau);
        delta0.push(gap);
        emin_index.push(j);
    }
    let (kmin, &delta) = delta0
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    Ok(GapProfile {
        argmin_tau: taus[kmin],
        taus,
        delta0,
        emin_index,
        delta,
        a: 1.0 / delta,
        d: energy_unit * delta,
    })
}

impl GapProfile {
    pub fn summary(&self) -> GapSummary {
        GapSummary {
            delta: self.delta,
            a: self.a,
            d: self.d,
            argmin_tau: self.argmin_tau,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "tau,delta0,Emin_index")?;
        for ((t, d), j) in self.taus.iter().zip(&self.delta0).zip(&self.emin_index) {
            writeln!(w, "{t:.17e},{d:.17e},{j}")?;
        }
        Ok(())
    }
}

/// `|Φ̇⟩ = i·G_r·Ḣ·|Φ⟩` in the parallel-transport gauge.
pub fn target_derivative(frame: &SpectralFrame, hdot: &CMat) -> CVec {
    frame.apply_gr(&(hdot * frame.phi())) * I
}

#[derive(Debug, Clone)]
pub struct EnergyDerivatives {
    pub edot: f64,
    pub eddot: f64,
    /// `P⊥|Φ̈⟩`.
    pub pperp_phi_ddot: CVec,
}

/// `Ė`, `Ë` and `P⊥|Φ̈⟩` from `Ḣ`, `Ḧ` and `|Φ̇⟩`.
pub fn hellmann_feynman(frame: &SpectralFrame, hdot: &CMat, hddot: &CMat, phidot: &CVec) -> EnergyDerivatives {
    let phi = frame.phi();
    let hdot_phi = hdot * &phi;
    let edot = phi.dotc(&hdot_phi).re;
    let eddot = (phidot.dotc(&hdot_phi) + hdot_phi.dotc(phidot) + phi.dotc(&(hddot * &phi))).re;
    // i·P⊥Φ̈ = −G_r(Ḧ − Ë)Φ − 2G_r(Ḣ − Ė)Φ̇
    let first = hddot * &phi - &phi * c(eddot);
    let second = hdot * phidot - phidot * c(edot);
    let rhs = frame.apply_gr(&first) + frame.apply_gr(&second) * c(2.0);
    EnergyDerivatives {
        edot,
        eddot,
        pperp_phi_ddot: rhs * I,
    }
}

/// `k`-th derivative at `center` from samples at `center + m·h`,
/// `m = −half..=half`, using Fornberg weights.
pub fn stencil_derivative<T, F>(center: f64, h: f64, order: usize, half: usize, mut f: F) -> Result<T>
where
    T: GridValue,
    F: FnMut(f64) -> Result<T>,
{
    let nodes: Vec<f64> = (0..=2 * half).map(|m| m as f64 - half as f64).collect();
    let weights = fd_weights(0.0, &nodes, order);
    let scale = h.powi(-(order as i32));
    let mut acc: Option<T> = None;
    for (m, w) in nodes.iter().zip(weights) {
        let v = f(center + m * h)?;
        match acc.as_mut() {
            None => acc = Some(v.scaled(w * scale)),
            Some(a) => a.add_scaled(w * scale, &v),
        }
    }
    Ok(acc.expect("non-empty stencil"))
}

/// First derivative by the 5-point central stencil with one Richardson step
/// against spacing `2h`.
pub fn richardson_derivative<T, F>(center: f64, h: f64, mut f: F) -> Result<T>
where
    T: GridValue,
    F: FnMut(f64) -> Result<T>,
{
    let fine = stencil_derivative(center, h, 1, 2, &mut f)?;
    let wide = stencil_derivative(center, 2.0 * h, 1, 2, &mut f)?;
    let mut r = fine.scaled(16.0 / 15.0);
    r.add_scaled(-1.0 / 15.0, &wide);
    Ok(r)
}

/// `Ġ_r` on every frame by grid differentiation of the dense resolvent.
/// Returns the derivatives and the differentiation noise estimate.
pub fn gr_derivatives(frames: &[SpectralFrame]) -> Result<(Vec<CMat>, f64)> {
    let grid = Grid::new(frames.len())?;
    let grs: Vec<CMat> = frames.par_iter().map(SpectralFrame::gr).collect();
    grid.derivative_refined(&grs)
}

/// Measured side, bound and ratio of one norm inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub ratio: f64,
}

impl BoundCheck {
    fn new(name: &str, measured: f64, bound: f64) -> Self {
        let ratio = if bound > 0.0 {
            measured / bound
        } else if measured == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        Self {
            name: name.into(),
            measured,
            bound,
            ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorollaryReport {
    pub a: f64,
    pub beta: f64,
    pub eta: f64,
    pub checks: Vec<BoundCheck>,
}

impl CorollaryReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.ratio <= 1.0)
    }
}

/// Evaluates `‖Φ̇‖ ≤ Aβ`, `‖Ṗ⊥‖ ≤ 2Aβ`, `‖P⊥Φ̈‖ ≤ 6A²β² + 2Aη`,
/// `|Ė| ≤ β` and `‖Ġ_r P⊥‖ ≤ 4A²β` on gauge-fixed frames. Norm suprema are
/// taken over the frames' grid.
pub fn corollary_bounds<H: Hamiltonian + ?Sized>(h: &H, frames: &[SpectralFrame]) -> Result<CorollaryReport> {
    let gaps = gap_profile(frames, h.energy_unit())?;
    let (gr_dot, _) = gr_derivatives(frames)?;
    let per_frame = frames
        .par_iter()
        .zip(gr_dot.par_iter())
        .map(|(f, grd)| -> Result<[f64; 7]> {
            let hdot = h.at(f.tau, 1)?;
            let hddot = h.at(f.tau, 2)?;
            let phidot = target_derivative(f, &hdot);
            let hf = hellmann_feynman(f, &hdot, &hddot, &phidot);
            let phi = f.phi();
            let pdot = linalg::outer(&phidot, &phi) + linalg::outer(&phi, &phidot);
            Ok([
                linalg::operator_norm(&hdot)?,
                linalg::operator_norm(&hddot)?,
                phidot.norm(),
                linalg::spectral_norm(&pdot)?,
                hf.pperp_phi_ddot.norm(),
                hf.edot.abs(),
                linalg::spectral_norm(&(grd * f.pperp()))?,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let sup = |i: usize| per_frame.iter().fold(0.0_f64, |acc, v| acc.max(v[i]));
    let (beta, eta, a) = (sup(0), sup(1), gaps.a);
    Ok(CorollaryReport {
        a,
        beta,
        eta,
        checks: vec![
            BoundCheck::new("phi_dot", sup(2), a * beta),
            BoundCheck::new("pperp_dot", sup(3), 2.0 * a * beta),
            BoundCheck::new("pperp_phi_ddot", sup(4), 6.0 * a * a * beta * beta + 2.0 * a * eta),
            BoundCheck::new("e_dot", sup(5), beta),
            BoundCheck::new("gr_dot_pperp", sup(6), 4.0 * a * a * beta),
        ],
    })
}
