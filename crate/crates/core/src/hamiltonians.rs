//! Dense time-dependent n-qubit Hamiltonians and their τ-derivatives.
//!
//! All operators here are dimensionless (`H = h/J`); coefficient functions
//! are expressed in units of the energy unit `J`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{self, c, CMat, CVec, I};
use crate::schedules::{Schedule, ScheduleBank};

/// Largest supported qubit count (dense matrices of dimension `2^10`).
pub const MAX_QUBITS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product of single-qubit Paulis; the first letter acts on the most
/// significant qubit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::InvalidInput("Pauli string must act on n >= 1 qubits".into()));
        }
        Ok(Self { letters })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            letters: vec![Pauli::I; n.max(1)],
        }
    }

    /// Single letter `p` on qubit `q` (0 = most significant), identity elsewhere.
    pub fn single(n: usize, q: usize, p: Pauli) -> Self {
        let mut s = Self::identity(n);
        s.letters[q] = p;
        s
    }

    pub fn n(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn weight(&self) -> usize {
        self.letters.iter().filter(|&&p| p != Pauli::I).count()
    }

    /// Bit mask of flipped basis states and the phase applied to column `r`.
    fn flip_mask(&self) -> usize {
        let n = self.n();
        self.letters
            .iter()
            .enumerate()
            .filter(|(_, p)| matches!(p, Pauli::X | Pauli::Y))
            .fold(0, |m, (q, _)| m | (1 << (n - 1 - q)))
    }

    fn column_phase(&self, r: usize) -> Complex64 {
        let n = self.n();
        let mut phase = c(1.0);
        for (q, p) in self.letters.iter().enumerate() {
            let bit = (r >> (n - 1 - q)) & 1;
            let sign = if bit == 1 { -1.0 } else { 1.0 };
            match p {
                Pauli::I | Pauli::X => {}
                Pauli::Z => phase *= sign,
                Pauli::Y => phase *= I * sign,
            }
        }
        phase
    }

    /// Adds `coeff·σ` into `m`.
    pub fn accumulate(&self, coeff: f64, m: &mut CMat) {
        let mask = self.flip_mask();
        for r in 0..m.ncols() {
            m[(r ^ mask, r)] += self.column_phase(r) * coeff;
        }
    }

    pub fn matrix(&self) -> CMat {
        let dim = 1usize << self.n();
        let mut m = CMat::zeros(dim, dim);
        self.accumulate(1.0, &mut m);
        m
    }

    /// All strings on `n` qubits with weight at most `max_weight`.
    pub fn enumerate(n: usize, max_weight: usize) -> Vec<PauliString> {
        let total = 4usize.pow(n as u32);
        (0..total)
            .map(|mut code| {
                let letters = (0..n)
                    .map(|_| {
                        let p = Pauli::ALL[code % 4];
                        code /= 4;
                        p
                    })
                    .collect();
                PauliString { letters }
            })
            .filter(|s| s.weight() <= max_weight)
            .collect()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.letters {
            write!(f, "{}", p.letter())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|ch| match ch.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::InvalidInput(format!("invalid Pauli letter `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        PauliString::new(letters)
    }
}

impl Serialize for PauliString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Dense matrix of a Pauli string.
pub fn pauli_matrix(p: &PauliString) -> CMat {
    p.matrix()
}

/// Hilbert–Schmidt coefficients `Tr(σM)/2^n` for every string on `n` qubits
/// (entries below `1e-14` are dropped).
pub fn pauli_decompose(m: &CMat) -> Result<Vec<(PauliString, Complex64)>> {
    let dim = m.nrows();
    if !dim.is_power_of_two() || dim < 2 || m.ncols() != dim {
        return Err(Error::InvalidInput(format!("{dim}x{} is not an n-qubit operator", m.ncols())));
    }
    let n = dim.trailing_zeros() as usize;
    let mut out = Vec::new();
    for s in PauliString::enumerate(n, n) {
        let mask = s.flip_mask();
        // Tr(σM) = Σ_r σ[r, r^mask]·M[r^mask, r]; σ is Hermitian so σ[r, r^mask] = conj(phase of column r).
        let tr: Complex64 = (0..dim)
            .map(|r| s.column_phase(r).conj() * m[(r ^ mask, r)])
            .sum();
        let coeff = tr / dim as f64;
        if coeff.norm() > 1e-14 {
            out.push((s, coeff));
        }
    }
    Ok(out)
}

/// `Σ_{j=0}^{L} C(n,j)·3^j`, the number of real parameters of an L-local
/// Hamiltonian on `n` qubits.
pub fn count_parameters(n: usize, l: usize) -> Result<u64> {
    if l > n {
        return Err(Error::InvalidInput(format!("locality L={l} exceeds n={n}")));
    }
    let mut binom: u64 = 1;
    let mut total: u64 = 0;
    for j in 0..=l {
        if j > 0 {
            binom = binom * (n - j + 1) as u64 / j as u64;
        }
        total += binom * 3u64.pow(j as u32);
    }
    Ok(total)
}

/// A dimensionless Hermitian family `H(τ)` with derivative access.
pub trait Hamiltonian: Send + Sync {
    fn dim(&self) -> usize;

    /// Energy unit `J` converting `H` to physical units.
    fn energy_unit(&self) -> f64 {
        1.0
    }

    /// `∂ᵏH/∂τᵏ` at `tau`. Evaluation slightly outside `[0, 1]` is allowed
    /// for families that extend analytically.
    fn at(&self, tau: f64, k: usize) -> Result<CMat>;
}

impl<T: Hamiltonian + ?Sized> Hamiltonian for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn energy_unit(&self) -> f64 {
        (**self).energy_unit()
    }
    fn at(&self, tau: f64, k: usize) -> Result<CMat> {
        (**self).at(tau, k)
    }
}

impl<T: Hamiltonian + ?Sized> Hamiltonian for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn energy_unit(&self) -> f64 {
        (**self).energy_unit()
    }
    fn at(&self, tau: f64, k: usize) -> Result<CMat> {
        (**self).at(tau, k)
    }
}

impl<T: Hamiltonian + ?Sized> Hamiltonian for std::sync::Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn energy_unit(&self) -> f64 {
        (**self).energy_unit()
    }
    fn at(&self, tau: f64, k: usize) -> Result<CMat> {
        (**self).at(tau, k)
    }
}

/// Scalar coefficient `offset + scale·x(τ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub schedule: Schedule,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub offset: f64,
}

fn one() -> f64 {
    1.0
}

impl Coefficient {
    pub fn new(schedule: Schedule) -> Self {
        Self {
            schedule,
            scale: 1.0,
            offset: 0.0,
        }
    }

    /// `1 − x(τ)`.
    pub fn complement(schedule: Schedule) -> Self {
        Self {
            schedule,
            scale: -1.0,
            offset: 1.0,
        }
    }

    pub fn eval(&self, tau: f64, k: usize) -> Result<f64> {
        let x = self.schedule.eval(tau, k)?;
        Ok(if k == 0 { self.offset + self.scale * x } else { self.scale * x })
    }
}

/// `H(τ) = Σ_i c_i(τ)·A_i` over fixed dense Hermitian operators.
#[derive(Debug, Clone)]
pub struct ScheduledSum {
    parts: Vec<(CMat, Coefficient)>,
    energy_unit: f64,
}

impl ScheduledSum {
    pub fn new(parts: Vec<(CMat, Coefficient)>) -> Result<Self> {
        let dim = parts
            .first()
            .map(|(m, _)| m.nrows())
            .ok_or_else(|| Error::InvalidInput("empty Hamiltonian".into()))?;
        for (m, _) in &parts {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: m.nrows().max(m.ncols()),
                });
            }
            let scale = 1.0 + linalg::operator_norm(m).unwrap_or(0.0);
            if linalg::hermiticity_defect(m) > 1e-12 * scale {
                return Err(Error::InvalidInput("operator is not Hermitian".into()));
            }
        }
        Ok(Self {
            parts,
            energy_unit: 1.0,
        })
    }

    /// `(1 − x(τ))·H0 + x(τ)·H1`.
    pub fn interpolate(h0: CMat, h1: CMat, schedule: Schedule) -> Result<Self> {
        Self::new(vec![
            (h0, Coefficient::complement(schedule.clone())),
            (h1, Coefficient::new(schedule)),
        ])
    }

    pub fn with_energy_unit(mut self, j: f64) -> Result<Self> {
        if !(j > 0.0 && j.is_finite()) {
            return Err(Error::InvalidInput(format!("energy unit must be > 0, got {j}")));
        }
        self.energy_unit = j;
        Ok(self)
    }

    pub fn parts(&self) -> &[(CMat, Coefficient)] {
        &self.parts
    }

    /// The schedule with the fewest vanishing endpoint derivatives, which
    /// governs the boundary behavior of `H`.
    pub fn governing_schedule(&self) -> &Schedule {
        self.parts
            .iter()
            .map(|(_, c)| &c.schedule)
            .filter(|s| !matches!(s.family(), crate::schedules::Family::Constant { .. }))
            .min_by_key(|s| s.nb())
            .unwrap_or(&self.parts[0].1.schedule)
    }
}

impl Hamiltonian for ScheduledSum {
    fn dim(&self) -> usize {
        self.parts[0].0.nrows()
    }

    fn energy_unit(&self) -> f64 {
        self.energy_unit
    }

    fn at(&self, tau: f64, k: usize) -> Result<CMat> {
        let dim = self.dim();
        let mut out = CMat::zeros(dim, dim);
        for (m, coeff) in &self.parts {
            let w = coeff.eval(tau, k)?;
            if w != 0.0 {
                out += m.scale(w);
            }
        }
        Ok(out)
    }
}

/// A term of a [`LocalHamiltonianSpec`]: Pauli word, schedule id and the
/// schedule parameters (plus optional affine `scale`/`offset`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSpec {
    pub pauli: String,
    pub schedule: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

/// Serializable description of an L-local interpolation Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalHamiltonianSpec {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "J", default = "one")]
    pub j: f64,
    pub terms: Vec<TermSpec>,
}

#[derive(Debug, Clone)]
struct ResolvedTerm {
    pauli: PauliString,
    coeff: Coefficient,
}

/// A [`LocalHamiltonianSpec`] with all schedule references resolved.
#[derive(Debug, Clone)]
pub struct LocalHamiltonian {
    n: usize,
    l: usize,
    j: f64,
    terms: Vec<ResolvedTerm>,
}

fn affine_param(params: &Map<String, Value>, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| Error::InvalidInput(format!("parameter `{key}` must be a number"))),
    }
}

impl LocalHamiltonian {
    pub fn resolve(spec: &LocalHamiltonianSpec, bank: &ScheduleBank) -> Result<Self> {
        if spec.n == 0 || spec.n > MAX_QUBITS {
            return Err(Error::InvalidInput(format!(
                "qubit count must be in 1..={MAX_QUBITS}, got {}",
                spec.n
            )));
        }
        if spec.l > spec.n {
            return Err(Error::InvalidInput(format!("locality L={} exceeds n={}", spec.l, spec.n)));
        }
        if !(spec.j > 0.0 && spec.j.is_finite()) {
            return Err(Error::InvalidInput(format!("J must be > 0, got {}", spec.j)));
        }
        let mut terms = Vec::with_capacity(spec.terms.len());
        for t in &spec.terms {
            let pauli: PauliString = t.pauli.parse()?;
            if pauli.n() != spec.n {
                return Err(Error::InvalidInput(format!(
                    "term `{}` acts on {} qubits, expected {}",
                    t.pauli,
                    pauli.n(),
                    spec.n
                )));
            }
            if pauli.weight() > spec.l {
                return Err(Error::InvalidInput(format!(
                    "term `{}` has weight {} > L={}",
                    t.pauli,
                    pauli.weight(),
                    spec.l
                )));
            }
            let schedule = bank.build(&t.schedule, &t.params)?;
            let coeff = Coefficient {
                schedule,
                scale: affine_param(&t.params, "scale", 1.0)?,
                offset: affine_param(&t.params, "offset", 0.0)?,
            };
            terms.push(ResolvedTerm { pauli, coeff });
        }
        Ok(Self {
            n: spec.n,
            l: spec.l,
            j: spec.j,
            terms,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn locality(&self) -> usize {
        self.l
    }

    /// `max_σ |ξ_σ(τ)|` over the terms.
    pub fn max_coefficient(&self, tau: f64) -> Result<f64> {
        self.terms
            .iter()
            .map(|t| t.coeff.eval(tau, 0).map(f64::abs))
            .try_fold(0.0_f64, |acc, v| v.map(|v| acc.max(v)))
    }

    /// Smallest declared `Nb` and `γ` across non-constant terms.
    pub fn schedule_summary(&self) -> Option<(usize, f64)> {
        let mut it = self
            .terms
            .iter()
            .map(|t| &t.coeff.schedule)
            .filter(|s| !matches!(s.family(), crate::schedules::Family::Constant { .. }));
        let first = it.next()?;
        Some(it.fold((first.nb(), first.gamma()), |(nb, g), s| (nb.min(s.nb()), g.min(s.gamma()))))
    }
}

impl Hamiltonian for LocalHamiltonian {
    fn dim(&self) -> usize {
        1 << self.n
    }

    fn energy_unit(&self) -> f64 {
        self.j
    }

    fn at(&self, tau: f64, k: usize) -> Result<CMat> {
        let dim = self.dim();
        let mut out = CMat::zeros(dim, dim);
        for t in &self.terms {
            let w = t.coeff.eval(tau, k)?;
            if w != 0.0 {
                t.pauli.accumulate(w, &mut out);
            }
        }
        Ok(out)
    }
}

/// `Σ_σ ξ_σ⁽ᵏ⁾(τ)·σ` for a spec; `τ` must lie in `[0, 1]`.
pub fn assemble(spec: &LocalHamiltonianSpec, bank: &ScheduleBank, tau: f64, k: usize) -> Result<CMat> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidInput(format!("tau={tau} outside [0,1]")));
    }
    LocalHamiltonian::resolve(spec, bank)?.at(tau, k)
}

/// Uniform superposition `Σ_i |i⟩/√(2^n)`.
pub fn uniform_state(n: usize) -> CVec {
    let dim = 1usize << n;
    CVec::from_element(dim, c(1.0 / (dim as f64).sqrt()))
}

/// Grover endpoint operators `(I − |φ⟩⟨φ|, I − |m⟩⟨m|)`.
pub fn grover_endpoints(n: usize, m: usize) -> Result<(CMat, CMat)> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::InvalidInput(format!("qubit count must be in 1..={MAX_QUBITS}")));
    }
    let dim = 1usize << n;
    if m >= dim {
        return Err(Error::InvalidInput(format!("marked index {m} out of range for n={n}")));
    }
    let phi = uniform_state(n);
    let h0 = linalg::identity(dim) - linalg::outer(&phi, &phi);
    let mut h1 = linalg::identity(dim);
    h1[(m, m)] = c(0.0);
    Ok((h0, h1))
}

/// `(1−x)(I − |φ⟩⟨φ|) + x(I − |m⟩⟨m|)`.
pub fn grover_hamiltonian(n: usize, m: usize, x: f64) -> Result<CMat> {
    let (h0, h1) = grover_endpoints(n, m)?;
    Ok(h0.scale(1.0 - x) + h1.scale(x))
}

/// Grover search driven by `schedule`.
pub fn grover(n: usize, m: usize, schedule: Schedule) -> Result<ScheduledSum> {
    let (h0, h1) = grover_endpoints(n, m)?;
    ScheduledSum::interpolate(h0, h1, schedule)
}

/// Endpoints of the transverse-field to Ising interpolation on an open chain:
/// `H0 = −Σ X_i`, `H1 = −Σ Z_i − coupling·Σ Z_i Z_{i+1}`.
pub fn x_to_z_endpoints(n: usize, coupling: f64) -> Result<(CMat, CMat)> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::InvalidInput(format!("qubit count must be in 1..={MAX_QUBITS}")));
    }
    let dim = 1usize << n;
    let mut h0 = CMat::zeros(dim, dim);
    let mut h1 = CMat::zeros(dim, dim);
    for q in 0..n {
        PauliString::single(n, q, Pauli::X).accumulate(-1.0, &mut h0);
        PauliString::single(n, q, Pauli::Z).accumulate(-1.0, &mut h1);
        if q + 1 < n && coupling != 0.0 {
            let mut zz = PauliString::single(n, q, Pauli::Z);
            zz.letters[q + 1] = Pauli::Z;
            zz.accumulate(-coupling, &mut h1);
        }
    }
    Ok((h0, h1))
}

pub fn x_to_z(n: usize, coupling: f64, schedule: Schedule) -> Result<ScheduledSum> {
    let (h0, h1) = x_to_z_endpoints(n, coupling)?;
    ScheduledSum::interpolate(h0, h1, schedule)
}

/// Random 2-local spec: every weight-1 and nearest-neighbour weight-2 string
/// gets coefficient `a·(1−x(τ)) + b·x(τ)` with `a, b` uniform in `[−1, 1]`.
pub fn random_two_local(n: usize, seed: u64, schedule: &Schedule) -> Result<ScheduledSum> {
    use rand::{Rng, SeedableRng};
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::InvalidInput(format!("qubit count must be in 1..={MAX_QUBITS}")));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let dim = 1usize << n;
    let mut h0 = CMat::zeros(dim, dim);
    let mut h1 = CMat::zeros(dim, dim);
    let strings = PauliString::enumerate(n, 2.min(n)).into_iter().filter(|s| {
        let support: Vec<usize> = (0..s.n()).filter(|&q| s.letters[q] != Pauli::I).collect();
        match support.len() {
            1 => true,
            2 => support[1] == support[0] + 1,
            _ => false,
        }
    });
    for s in strings {
        s.accumulate(rng.gen_range(-1.0..1.0), &mut h0);
        s.accumulate(rng.gen_range(-1.0..1.0), &mut h1);
    }
    ScheduledSum::interpolate(h0, h1, schedule.clone())
}

/// Grid-sampled sup norms of `Ḣ` and `Ḧ`.
///
/// The sup is taken over the grid only, so the values are lower estimates of
/// the true suprema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormProfile {
    pub beta: f64,
    pub eta: f64,
    pub xi: f64,
    pub grid: Grid,
}

/// Minimum number of grid points accepted by [`norm_profile`].
pub const NORM_PROFILE_MIN_POINTS: usize = 64;

pub fn norm_profile<H: Hamiltonian + ?Sized>(h: &H, grid: &Grid) -> Result<NormProfile> {
    if grid.len() < NORM_PROFILE_MIN_POINTS {
        return Err(Error::InvalidInput(format!(
            "norm profile needs at least {NORM_PROFILE_MIN_POINTS} grid points, got {}",
            grid.len()
        )));
    }
    let norms = grid
        .taus()
        .par_iter()
        .map(|&tau| -> Result<(f64, f64)> {
            Ok((
                linalg::operator_norm(&h.at(tau, 1)?)?,
                linalg::operator_norm(&h.at(tau, 2)?)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let beta = norms.iter().fold(0.0_f64, |a, n| a.max(n.0));
    let eta = norms.iter().fold(0.0_f64, |a, n| a.max(n.1));
    Ok(NormProfile {
        beta,
        eta,
        xi: h.energy_unit() * beta,
        grid: *grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(p: Pauli) -> CMat {
        let v = |re: f64, im: f64| Complex64::new(re, im);
        match p {
            Pauli::I => CMat::from_row_slice(2, 2, &[v(1., 0.), v(0., 0.), v(0., 0.), v(1., 0.)]),
            Pauli::X => CMat::from_row_slice(2, 2, &[v(0., 0.), v(1., 0.), v(1., 0.), v(0., 0.)]),
            Pauli::Y => CMat::from_row_slice(2, 2, &[v(0., 0.), v(0., -1.), v(0., 1.), v(0., 0.)]),
            Pauli::Z => CMat::from_row_slice(2, 2, &[v(1., 0.), v(0., 0.), v(0., 0.), v(-1., 0.)]),
        }
    }

    fn brute_kron(s: &PauliString) -> CMat {
        s.letters()
            .iter()
            .skip(1)
            .fold(single(s.letters()[0]), |acc, &p| acc.kronecker(&single(p)))
    }

    #[test]
    fn pauli_examples() {
        let x: PauliString = "X".parse().unwrap();
        assert_eq!(pauli_matrix(&x), single(Pauli::X));
        let ii: PauliString = "II".parse().unwrap();
        assert_eq!(pauli_matrix(&ii), linalg::identity(4));
        let zz: PauliString = "ZZ".parse().unwrap();
        let d = pauli_matrix(&zz);
        let diag: Vec<f64> = (0..4).map(|i| d[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, -1.0, -1.0, 1.0]);
        assert_eq!(zz.weight(), 2);
        assert!("XQ".parse::<PauliString>().is_err());
    }

    #[test]
    fn monomial_form_matches_kronecker_products() {
        for s in PauliString::enumerate(3, 3) {
            let m = s.matrix();
            assert_eq!(m, brute_kron(&s), "{s}");
            assert!(linalg::hermiticity_defect(&m) == 0.0);
            let u = &m * &m;
            assert!((u - linalg::identity(8)).norm() < 1e-15);
            let tr: Complex64 = (0..8).map(|i| m[(i, i)]).sum();
            if s.weight() == 0 {
                assert_eq!(tr, c(8.0));
            } else {
                assert_eq!(tr, c(0.0));
            }
        }
    }

    #[test]
    fn decomposition_recovers_coefficients() {
        let mut m = CMat::zeros(8, 8);
        "XZI".parse::<PauliString>().unwrap().accumulate(0.7, &mut m);
        "IYY".parse::<PauliString>().unwrap().accumulate(-1.3, &mut m);
        let dec = pauli_decompose(&m).unwrap();
        assert_eq!(dec.len(), 2);
        for (s, v) in dec {
            let expect = if s.to_string() == "XZI" { 0.7 } else { -1.3 };
            assert!((v - c(expect)).norm() < 1e-14);
        }
    }

    #[test]
    fn count_parameters_examples() {
        assert_eq!(count_parameters(1, 1).unwrap(), 4);
        assert_eq!(count_parameters(2, 2).unwrap(), 16);
        assert_eq!(count_parameters(3, 0).unwrap(), 1);
        assert!(count_parameters(2, 3).is_err());
        for n in 2..=6u64 {
            let direct = PauliString::enumerate(n as usize, 2).len() as u64;
            assert_eq!(count_parameters(n as usize, 2).unwrap(), direct);
            assert_eq!(direct, (9 * n * n - 3 * n + 2) / 2);
        }
    }

    fn linear_spec() -> LocalHamiltonianSpec {
        serde_json::from_value(serde_json::json!({
            "n": 1, "L": 1, "J": 1.0,
            "terms": [
                {"pauli": "X", "schedule": "linear", "params": {"scale": -1.0, "offset": 1.0}},
                {"pauli": "Z", "schedule": "linear"}
            ]
        }))
        .unwrap()
    }

    #[test]
    fn assemble_examples() {
        let bank = ScheduleBank::with_builtins();
        let spec = linear_spec();
        let h0 = single(Pauli::X);
        let h1 = single(Pauli::Z);
        assert_eq!(assemble(&spec, &bank, 0.0, 0).unwrap(), h0);
        for tau in [0.0, 0.37, 1.0] {
            assert_eq!(assemble(&spec, &bank, tau, 1).unwrap(), &h1 - &h0);
        }
        let spec2: LocalHamiltonianSpec = serde_json::from_value(serde_json::json!({
            "n": 2, "L": 1, "J": 2.0,
            "terms": [
                {"pauli": "XI", "schedule": "polynomial", "params": {"coeffs": [0.0, 0.0, 1.0]}},
                {"pauli": "IZ", "schedule": "constant", "params": {"value": 1.0}}
            ]
        }))
        .unwrap();
        let d = assemble(&spec2, &bank, 0.5, 1).unwrap();
        assert!((d - brute_kron(&"XI".parse().unwrap())).norm() < 1e-15);
        assert!(assemble(&spec2, &bank, 1.5, 0).is_err());

        let mut bad = spec2.clone();
        bad.terms[0].schedule = "missing".into();
        assert!(matches!(assemble(&bad, &bank, 0.5, 0), Err(Error::UnknownSchedule(_))));
        let mut heavy = spec2.clone();
        heavy.terms[0].pauli = "XX".into();
        assert!(LocalHamiltonian::resolve(&heavy, &bank).is_err());
        let mut rational = spec2;
        rational.terms[0].schedule = "rational_x1".into();
        assert!(matches!(
            assemble(&rational, &bank, 0.5, 9),
            Err(Error::UnsupportedDerivative { .. })
        ));
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = linear_spec();
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"L\":1") && text.contains("\"J\":1.0"));
        let back: LocalHamiltonianSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }

    fn grover_gap_oracle(n: usize, x: f64) -> f64 {
        let inv = 0.5f64.powi(n as i32);
        (inv + 4.0 * (1.0 - inv) * (x - 0.5).powi(2)).sqrt()
    }

    #[test]
    fn grover_examples() {
        let h = grover_hamiltonian(1, 0, 0.0).unwrap();
        let (vals, _) = linalg::hermitian_eigen(&h).unwrap();
        assert!(vals[0].abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        let h = grover_hamiltonian(2, 3, 1.0).unwrap();
        assert_eq!(h[(3, 3)], c(0.0));
        let (vals, _) = linalg::hermitian_eigen(&grover_hamiltonian(2, 0, 0.5).unwrap()).unwrap();
        assert!((vals[1] - vals[0] - 0.5).abs() < 1e-12);
        assert!(grover_hamiltonian(2, 4, 0.5).is_err());
    }

    #[test]
    fn grover_gap_matches_closed_form() {
        for n in 1..=6 {
            for i in 0..=10 {
                let x = i as f64 / 10.0;
                let (vals, _) = linalg::hermitian_eigen(&grover_hamiltonian(n, (7 * n) % (1 << n), x).unwrap()).unwrap();
                assert!(vals[0].abs() < 1e-10 || (0.0 < x && x < 1.0));
                let gap = vals[1] - vals[0];
                assert!((gap - grover_gap_oracle(n, x)).abs() < 1e-10, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn norm_profile_examples() {
        let grid = Grid::new(101).unwrap();
        let constant = ScheduledSum::new(vec![(single(Pauli::Z), Coefficient::new(Schedule::constant(2.0)))]).unwrap();
        let p = norm_profile(&constant, &grid).unwrap();
        assert_eq!((p.beta, p.eta), (0.0, 0.0));

        let (h0, h1) = x_to_z_endpoints(1, 0.0).unwrap();
        let diff = linalg::operator_norm(&(&h1 - &h0)).unwrap();
        let lin = ScheduledSum::interpolate(h0.clone(), h1.clone(), Schedule::linear())
            .unwrap()
            .with_energy_unit(3.0)
            .unwrap();
        let p = norm_profile(&lin, &grid).unwrap();
        assert!((p.beta - diff).abs() < 1e-12 && p.eta == 0.0);
        assert!((p.xi - 3.0 * p.beta).abs() < 1e-12);

        let smooth = ScheduledSum::interpolate(h0, h1, Schedule::smooth_poly(1)).unwrap();
        let p = norm_profile(&smooth, &grid).unwrap();
        assert!((p.beta - 1.5 * diff).abs() < 1e-12);
        assert!(p.eta > 0.0);
        assert!(norm_profile(&smooth, &Grid::new(10).unwrap()).is_err());
    }

    #[test]
    fn random_two_local_is_local() {
        let h = random_two_local(4, 11, &Schedule::smooth_poly(2)).unwrap();
        for tau in [0.0, 0.3, 1.0] {
            let m = h.at(tau, 0).unwrap();
            for (s, _) in pauli_decompose(&m).unwrap() {
                assert!(s.weight() <= 2, "{s}");
            }
        }
    }

    use proptest::prelude::*;

    fn arb_spec() -> impl Strategy<Value = LocalHamiltonianSpec> {
        (1usize..=3, 0usize..=3).prop_flat_map(|(n, l)| {
            let l = l.min(n);
            let words = PauliString::enumerate(n, l);
            let count = words.len();
            let term = (
                prop::sample::select(vec!["linear", "beta", "rational_x0", "rational_x1", "constant"]),
                -2.0f64..2.0,
                0usize..4,
            );
            (
                prop::sample::subsequence(words, 1..=count.min(5)),
                prop::collection::vec(term, 5),
            )
                .prop_map(move |(words, params)| {
                    let terms = words
                        .iter()
                        .zip(params)
                        .map(|(w, (sched, scale, nb))| TermSpec {
                            pauli: w.to_string(),
                            schedule: sched.to_string(),
                            params: serde_json::json!({"scale": scale, "Nb": nb, "value": scale})
                                .as_object()
                                .unwrap()
                                .clone(),
                        })
                        .collect();
                    LocalHamiltonianSpec { n, l, j: 1.0, terms }
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn assembled_operators_are_hermitian_and_local(spec in arb_spec(), tau in 0.0f64..=1.0, k in 0usize..3) {
            let bank = ScheduleBank::with_builtins();
            let m = assemble(&spec, &bank, tau, k).unwrap();
            let norm = linalg::operator_norm(&m).unwrap();
            prop_assert!(linalg::hermiticity_defect(&m) <= 1e-12 * (1.0 + norm));
            for (s, _) in pauli_decompose(&m).unwrap() {
                prop_assert!(s.weight() <= spec.l);
            }
            if k == 0 {
                let h = LocalHamiltonian::resolve(&spec, &bank).unwrap();
                let count = count_parameters(spec.n, spec.l).unwrap() as f64;
                prop_assert!(norm <= count * h.max_coefficient(tau).unwrap() * (1.0 + 1e-12) + 1e-12);
            }
        }
    }
}
