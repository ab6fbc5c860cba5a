//! Error metrics for a simulated trajectory and closed-form time/error bounds.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hamiltonians::Hamiltonian;
use crate::linalg::{self, CVec};
use crate::propagator::EvolutionResult;
use crate::spectral::SpectralFrame;
use crate::superadiabatic::SuperadiabaticState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// `‖ψ(1) − e^{iχ}Φ(1)‖`.
    pub delta: f64,
    /// `‖ψ(1) − Ψ_N(1)‖`.
    pub delta1: Option<f64>,
    /// `‖e^{i∫E/ε}Ψ_N(1) − Φ(1)‖`.
    pub delta2: Option<f64>,
    /// `|⟨ψ(1)|Φ(1)⟩|`.
    pub fidelity: f64,
    /// `arccos(fidelity)`.
    pub fs_distance: f64,
}

/// `‖ψ − e^{−iφ}Φ‖` for a dynamical phase `φ = (1/ε)∫E`.
pub fn delta(psi: &CVec, phi: &CVec, dynamical_phase: f64) -> f64 {
    (psi - phi * Complex64::from_polar(1.0, -dynamical_phase)).norm()
}

/// `|⟨ψ|Φ⟩|`, clamped to `[0, 1]`.
pub fn fidelity(psi: &CVec, phi: &CVec) -> f64 {
    phi.dotc(psi).norm().min(1.0)
}

/// Fubini–Study distance `arccos(fidelity)`.
pub fn fs_distance(fidelity: f64) -> f64 {
    fidelity.clamp(0.0, 1.0).acos()
}

/// Metrics at the final sample of `result`.
///
/// `initial` is the prescribed initial state. The reference `e^{iχ}Φ(1)`
/// carries the global phase of `ψ(0)` relative to `initial`, so multiplying
/// the initial state by a phase leaves every metric unchanged.
/// `dynamical_phase` is `(1/ε)∫_0^1 E`; `superadiabatic` is `Ψ_N(1)` built
/// with that same phase.
pub fn error_report(
    result: &EvolutionResult,
    frames: &[SpectralFrame],
    initial: &CVec,
    dynamical_phase: f64,
    superadiabatic: Option<&SuperadiabaticState>,
) -> Result<ErrorReport> {
    let last = frames.last().ok_or_else(|| Error::InvalidInput("no frames".into()))?;
    let t_end = *result.taus.last().ok_or_else(|| Error::InvalidInput("empty trajectory".into()))?;
    if (last.tau - t_end).abs() > 1e-12 {
        return Err(Error::GridMismatch(format!(
            "trajectory ends at τ={t_end}, frames at τ={}",
            last.tau
        )));
    }
    let psi0 = &result.psi[0];
    let psi1 = result.final_state();
    if psi1.len() != last.dim() || initial.len() != psi0.len() {
        return Err(Error::DimensionMismatch {
            expected: last.dim(),
            found: psi1.len(),
        });
    }
    let ov = initial.dotc(psi0);
    let u = if ov.norm() > 0.0 { ov / ov.norm() } else { Complex64::new(1.0, 0.0) };
    let phi = last.phi() * u;
    let fid = fidelity(psi1, &phi);
    let (delta1, delta2) = match superadiabatic {
        Some(s) => {
            if (s.tau - t_end).abs() > 1e-12 {
                return Err(Error::GridMismatch(format!("Ψ_N evaluated at τ={}", s.tau)));
            }
            (
                Some((psi1 - &s.vector * u).norm()),
                Some((&s.amplitude - last.phi()).norm()),
            )
        }
        None => (None, None),
    };
    Ok(ErrorReport {
        delta: delta(psi1, &phi, dynamical_phase),
        delta1,
        delta2,
        fidelity: fid,
        fs_distance: fs_distance(fid),
    })
}

/// Inputs of the closed-form bounds. Energies (`xi`, `d`) are dimensional;
/// `j` is the energy unit. Missing fields take their defaults when
/// deserialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundInputs {
    /// Number of vanishing endpoint derivatives.
    #[serde(rename = "N")]
    pub n_vanishing: usize,
    pub q: f64,
    pub gamma: f64,
    /// `sup‖ḣ‖`.
    pub xi: f64,
    /// Minimum gap.
    pub d: f64,
    #[serde(rename = "J")]
    pub j: f64,
    /// System size.
    pub n: usize,
    /// Dynamical critical exponent.
    pub z: f64,
    /// Multiplicity used by the JRS time.
    pub m: usize,
    pub delta_u: f64,
}

impl Default for BoundInputs {
    fn default() -> Self {
        Self {
            n_vanishing: 1,
            q: 2.0,
            gamma: crate::schedules::DEFAULT_GAMMA,
            xi: 1.0,
            d: 1.0,
            j: 1.0,
            n: 1,
            z: 1.0,
            m: 1,
            delta_u: 0.5,
        }
    }
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidInput("gamma must be positive".into()));
        }
        if !(self.d > 0.0) || !(self.xi >= 0.0) || !(self.j > 0.0) {
            return Err(Error::InvalidInput("d and J must be positive, xi non-negative".into()));
        }
        if self.m == 0 {
            return Err(Error::InvalidInput("m must be at least 1".into()));
        }
        Ok(())
    }

    /// `ξ/J`.
    pub fn xi_dimensionless(&self) -> f64 {
        self.xi / self.j
    }

    /// `d/J`.
    pub fn d_dimensionless(&self) -> f64 {
        self.d / self.j
    }
}

/// `T = (q/γ) N ξ²/d³`.
pub fn theorem1_time(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    if !(inputs.q > 1.0) {
        return Err(Error::InvalidInput(format!("time dilation q={} must exceed 1", inputs.q)));
    }
    Ok(inputs.q / inputs.gamma * inputs.n_vanishing as f64 * inputs.xi.powi(2) / inputs.d.powi(3))
}

/// `(N+1)^{γ+1} q^{−N}`.
pub fn theorem1_error_bound(n_vanishing: usize, q: f64, gamma: f64) -> Result<f64> {
    if !(q > 1.0) {
        return Err(Error::InvalidInput(format!("time dilation q={q} must exceed 1")));
    }
    Ok((n_vanishing as f64 + 1.0).powf(gamma + 1.0) * q.powi(-(n_vanishing as i32)))
}

/// Bound on `δ₁` for an expansion of `order` at total time `t`:
/// `(order+2)^{γ+1}((order+1)ξ²/(γTd³))^{order+1}`.
pub fn delta1_bound(order: usize, t: f64, inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    if !(t > 0.0) {
        return Err(Error::InvalidInput("T must be positive".into()));
    }
    let n = order as f64;
    let base = (n + 1.0) * inputs.xi.powi(2) / (inputs.gamma * t * inputs.d.powi(3));
    Ok((n + 2.0).powf(inputs.gamma + 1.0) * base.powi(order as i32 + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialEnvelope {
    pub c: f64,
    pub envelope: f64,
}

/// `c = γd³/(eξ²)` and `(cT+1)^{γ+1}e^{−cT}`.
pub fn corollary_exponential(t: f64, inputs: &BoundInputs) -> Result<ExponentialEnvelope> {
    inputs.validate()?;
    if !(t >= 0.0) {
        return Err(Error::InvalidInput("T must be non-negative".into()));
    }
    if !(inputs.xi > 0.0) {
        return Err(Error::InvalidInput("xi must be positive".into()));
    }
    let c = inputs.gamma * inputs.d.powi(3) / (std::f64::consts::E * inputs.xi.powi(2));
    Ok(ExponentialEnvelope {
        c,
        envelope: (c * t + 1.0).powf(inputs.gamma + 1.0) * (-c * t).exp(),
    })
}

/// `T = δ_u^{−1/N}(1/γ)N(N+1)^{(γ+1)/N}ξ²/d³`.
pub fn corollary_fixed_error(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    if !(inputs.delta_u > 0.0 && inputs.delta_u < 1.0) {
        return Err(Error::InvalidInput(format!("target error {} must lie in (0, 1)", inputs.delta_u)));
    }
    if inputs.n_vanishing == 0 {
        return Err(Error::InvalidInput("N must be at least 1".into()));
    }
    let n = inputs.n_vanishing as f64;
    Ok(inputs.delta_u.powf(-1.0 / n) / inputs.gamma
        * n
        * (n + 1.0).powf((inputs.gamma + 1.0) / n)
        * inputs.xi.powi(2)
        / inputs.d.powi(3))
}

/// The dilation `q` implied by a total time `t` through `T = (q/γ)Nξ²/d³`.
pub fn implied_q(t: f64, inputs: &BoundInputs) -> f64 {
    t * inputs.gamma * inputs.d.powi(3) / (inputs.n_vanishing as f64 * inputs.xi.powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JrsTime {
    /// `q∫(m‖ḧ‖/d₀² + 7m√m‖ḣ‖²/d₀³)dτ`.
    pub integral: f64,
    /// `7m√m q ξ²/d³`.
    pub sup: f64,
}

/// JRS times from per-point profiles of `‖ḣ‖`, `‖ḧ‖` and `d₀` on a uniform
/// grid over `[0, 1]`.
pub fn jrs_time_from_profiles(hdot: &[f64], hddot: &[f64], d0: &[f64], q: f64, m: usize) -> Result<JrsTime> {
    if hdot.len() != hddot.len() || hdot.len() != d0.len() {
        return Err(Error::GridMismatch("profiles differ in length".into()));
    }
    if m == 0 || !(q > 0.0) {
        return Err(Error::InvalidInput("need m ≥ 1 and q > 0".into()));
    }
    if d0.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::GapClosed {
            tau: f64::NAN,
            gap: d0.iter().cloned().fold(f64::INFINITY, f64::min),
        });
    }
    let grid = Grid::new(hdot.len())?;
    let mf = m as f64;
    let w = 7.0 * mf * mf.sqrt();
    let integrand: Vec<f64> = (0..hdot.len())
        .map(|k| mf * hddot[k] / d0[k].powi(2) + w * hdot[k].powi(2) / d0[k].powi(3))
        .collect();
    let xi = hdot.iter().cloned().fold(0.0, f64::max);
    let d = d0.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(JrsTime {
        integral: q * grid.integrate(&integrand)?,
        sup: w * q * xi.powi(2) / d.powi(3),
    })
}

/// JRS times for `h` on the frames' grid, in dimensional units.
pub fn jrs_time<H: Hamiltonian + ?Sized>(h: &H, frames: &[SpectralFrame], q: f64, m: usize) -> Result<JrsTime> {
    let unit = h.energy_unit();
    let rows = frames
        .par_iter()
        .map(|f| -> Result<(f64, f64, f64)> {
            Ok((
                unit * linalg::operator_norm(&h.at(f.tau, 1)?)?,
                unit * linalg::operator_norm(&h.at(f.tau, 2)?)?,
                unit * f.gap(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let hdot: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let hddot: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let d0: Vec<f64> = rows.iter().map(|r| r.2).collect();
    jrs_time_from_profiles(&hdot, &hddot, &d0, q, m)
}

/// JRS error guarantee `q^{−2}`.
pub fn jrs_error_bound(q: f64) -> f64 {
    q.powi(-2)
}

/// `T = (q/γ) N (sup|ξ̇_σ|)²/J³ · n^{4−3z}`.
pub fn qpt_time(inputs: &BoundInputs, sup_coeff_rate: f64) -> Result<f64> {
    inputs.validate()?;
    if !(inputs.z > 0.0) {
        return Err(Error::InvalidInput("z must be positive".into()));
    }
    Ok(inputs.q / inputs.gamma * inputs.n_vanishing as f64 * sup_coeff_rate.powi(2) / inputs.j.powi(3)
        * (inputs.n as f64).powf(4.0 - 3.0 * inputs.z))
}

/// `d₀ = J√(2^{−n} + 4(1−2^{−n})(x−1/2)²)`.
pub fn grover_gap(n: usize, x: f64, j: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidInput(format!("x={x} outside [0, 1]")));
    }
    let p = 0.5f64.powi(n as i32);
    Ok(j * (p + 4.0 * (1.0 - p) * (x - 0.5).powi(2)).sqrt())
}

/// Pure-state trace distance from the vector distance, `D = δ√(1−δ²/4)`.
pub fn trace_distance_from_delta(delta: f64) -> f64 {
    delta * (1.0 - delta * delta / 4.0).max(0.0).sqrt()
}
