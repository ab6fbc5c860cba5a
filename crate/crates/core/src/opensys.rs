//! Joint system–bath evolution and trace-distance bounds for the reduced
//! system state.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hamiltonians::{Hamiltonian, LocalHamiltonian, LocalHamiltonianSpec};
use crate::linalg::{self, c, CMat, CVec};
use crate::metrics::{self, BoundInputs};
use crate::propagator::{self, EvolveOptions, StepStats};
use crate::schedules::ScheduleBank;
use crate::spectral::{self, ResolventConvention, TargetHint};

pub const MAX_JOINT_DIM: usize = 1024;
pub const DENSITY_TOL: f64 = 1e-10;

/// Row-major real and imaginary parts of a Hermitian matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseHermitian {
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Option<Vec<Vec<f64>>>,
}

impl DenseHermitian {
    pub fn from_matrix(m: &CMat) -> Self {
        let rows = |f: fn(&Complex64) -> f64| (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect();
        Self {
            re: rows(|z| z.re),
            im: Some(rows(|z| z.im)),
        }
    }

    pub fn to_matrix(&self) -> Result<CMat> {
        let n = self.re.len();
        if n == 0 || self.re.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("dense matrix must be square and non-empty".into()));
        }
        if let Some(im) = &self.im {
            if im.len() != n || im.iter().any(|r| r.len() != n) {
                return Err(Error::InvalidInput("imaginary part has the wrong shape".into()));
            }
        }
        let m = CMat::from_fn(n, n, |i, j| {
            let im = self.im.as_ref().map(|v| v[i][j]).unwrap_or(0.0);
            Complex64::new(self.re[i][j], im)
        });
        let defect = linalg::hermiticity_defect(&m);
        if defect > 1e-12 {
            return Err(Error::InvalidInput(format!("matrix is not Hermitian (defect {defect:e})")));
        }
        Ok(m)
    }
}

/// Serializable joint Hamiltonian `h_S(τ)⊗I + I⊗h_B + h_SB`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub system: LocalHamiltonianSpec,
    pub bath: DenseHermitian,
    pub coupling: DenseHermitian,
}

impl JointSpec {
    pub fn resolve(&self, bank: &ScheduleBank) -> Result<JointHamiltonian<LocalHamiltonian>> {
        let system = LocalHamiltonian::resolve(&self.system, bank)?;
        JointHamiltonian::new(system, self.bath.to_matrix()?, self.coupling.to_matrix()?)
    }
}

/// `H_S(τ)⊗I_B + I_S⊗H_B + H_SB`; bath and coupling are constant.
#[derive(Debug, Clone)]
pub struct JointHamiltonian<H> {
    system: H,
    bath: CMat,
    coupling: CMat,
    static_part: CMat,
    dims: (usize, usize),
    seed: Option<u64>,
}

impl<H: Hamiltonian> JointHamiltonian<H> {
    pub fn new(system: H, bath: CMat, coupling: CMat) -> Result<Self> {
        let ds = system.dim();
        let db = bath.nrows();
        if bath.ncols() != db || db == 0 {
            return Err(Error::InvalidInput("bath Hamiltonian must be square".into()));
        }
        let dim = ds * db;
        if dim > MAX_JOINT_DIM {
            return Err(Error::InvalidInput(format!("joint dimension {dim} exceeds {MAX_JOINT_DIM}")));
        }
        if coupling.nrows() != dim || coupling.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: coupling.nrows(),
            });
        }
        for (name, m) in [("bath", &bath), ("coupling", &coupling)] {
            if linalg::hermiticity_defect(m) > 1e-12 {
                return Err(Error::InvalidInput(format!("{name} Hamiltonian is not Hermitian")));
            }
        }
        let static_part = linalg::kron(&linalg::identity(ds), &bath) + &coupling;
        Ok(Self {
            system,
            bath,
            coupling,
            static_part,
            dims: (ds, db),
            seed: None,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn system(&self) -> &H {
        &self.system
    }

    pub fn bath(&self) -> &CMat {
        &self.bath
    }

    pub fn coupling(&self) -> &CMat {
        &self.coupling
    }

    /// `(d_S, d_B)`.
    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }
}

impl<H: Hamiltonian> Hamiltonian for JointHamiltonian<H> {
    fn dim(&self) -> usize {
        self.dims.0 * self.dims.1
    }

    fn energy_unit(&self) -> f64 {
        self.system.energy_unit()
    }

    fn at(&self, tau: f64, k: usize) -> Result<CMat> {
        let hs = linalg::kron(&self.system.at(tau, k)?, &linalg::identity(self.dims.1));
        Ok(if k == 0 { hs + &self.static_part } else { hs })
    }
}

/// Random Hermitian bath on `qubits` qubits with spectral norm 1.
pub fn random_bath(qubits: usize, seed: u64) -> Result<CMat> {
    if qubits == 0 || qubits > 3 {
        return Err(Error::InvalidInput("bath must have 1 to 3 qubits".into()));
    }
    let dim = 1usize << qubits;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = CMat::from_fn(dim, dim, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let h = (&a + a.adjoint()) * c(0.5);
    let norm = linalg::spectral_norm(&h)?;
    Ok(h / c(norm))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    rho: CMat,
}

impl DensityState {
    /// Validated density matrix: Hermitian, unit trace and positive
    /// semidefinite within [`DENSITY_TOL`].
    pub fn new(rho: CMat) -> Result<Self> {
        let s = Self { rho };
        s.validate(DENSITY_TOL)?;
        Ok(s)
    }

    /// Wraps a matrix without checks; used for numerically evolved states.
    pub fn from_matrix_unchecked(rho: CMat) -> Self {
        Self { rho }
    }

    pub fn pure(psi: &CVec) -> Result<Self> {
        let n = psi.norm();
        if !(n > 0.0) {
            return Err(Error::InvalidInput("zero state vector".into()));
        }
        let v = psi / c(n);
        Self::new(linalg::outer(&v, &v))
    }

    pub fn product(a: &DensityState, b: &DensityState) -> Self {
        Self {
            rho: linalg::kron(&a.rho, &b.rho),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            rho: linalg::identity(dim) / c(dim as f64),
        }
    }

    /// `WW†/tr(WW†)` for a random complex `dim×rank` matrix `W`.
    pub fn random<R: Rng>(dim: usize, rank: usize, rng: &mut R) -> Self {
        let w = CMat::from_fn(dim, rank.max(1), |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let rho = &w * w.adjoint();
        let tr = rho.trace().re;
        Self { rho: rho / c(tr) }
    }

    pub fn matrix(&self) -> &CMat {
        &self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace_defect(&self) -> f64 {
        (self.rho.trace() - c(1.0)).norm()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let (e, _) = linalg::hermitian_eigen(&self.hermitian_part())?;
        Ok(e[0])
    }

    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.rho.nrows() != self.rho.ncols() || self.rho.nrows() == 0 {
            return Err(Error::InvalidInput("density matrix must be square".into()));
        }
        let herm = linalg::hermiticity_defect(&self.rho);
        if herm > tol {
            return Err(Error::InvalidInput(format!("density matrix not Hermitian (defect {herm:e})")));
        }
        if self.trace_defect() > tol {
            return Err(Error::InvalidInput(format!("trace defect {:e}", self.trace_defect())));
        }
        let min = self.min_eigenvalue()?;
        if min < -tol {
            return Err(Error::InvalidInput(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    fn hermitian_part(&self) -> CMat {
        (&self.rho + self.rho.adjoint()) * c(0.5)
    }

    /// `W` with `ρ = WW†`, dropping eigenvalues below `1e-14`.
    fn factor(&self) -> Result<CMat> {
        let (e, v) = linalg::hermitian_eigen(&self.hermitian_part())?;
        let keep: Vec<usize> = (0..e.len()).filter(|&k| e[k] > 1e-14).collect();
        let mut w = CMat::zeros(self.dim(), keep.len());
        for (col, &k) in keep.iter().enumerate() {
            w.set_column(col, &(v.column(k) * c(e[k].sqrt())));
        }
        Ok(w)
    }
}

/// `Tr_B ρ` for `ρ` on `C^{d_S}⊗C^{d_B}`.
pub fn partial_trace_bath(rho: &DensityState, dims: (usize, usize)) -> Result<DensityState> {
    let (ds, db) = dims;
    if ds * db != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: ds * db,
            found: rho.dim(),
        });
    }
    let m = &rho.rho;
    let reduced = CMat::from_fn(ds, ds, |i, j| (0..db).map(|b| m[(i * db + b, j * db + b)]).sum());
    Ok(DensityState { rho: reduced })
}

/// `½‖ρ₁ − ρ₂‖₁`.
pub fn trace_distance(r1: &DensityState, r2: &DensityState) -> Result<f64> {
    if r1.dim() != r2.dim() {
        return Err(Error::DimensionMismatch {
            expected: r1.dim(),
            found: r2.dim(),
        });
    }
    let diff = &r1.rho - &r2.rho;
    let herm = (&diff + diff.adjoint()) * c(0.5);
    let (e, _) = linalg::hermitian_eigen(&herm)?;
    Ok(0.5 * e.iter().map(|x| x.abs()).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum JointPath {
    /// Pure-state dilation when the initial state has rank one, conjugation
    /// otherwise.
    #[default]
    Auto,
    Pure,
    Conjugation,
}

#[derive(Debug, Clone)]
pub struct JointTrajectory {
    pub taus: Vec<f64>,
    pub states: Vec<DensityState>,
    pub path: JointPath,
    pub stats: StepStats,
}

impl JointTrajectory {
    pub fn final_state(&self) -> &DensityState {
        self.states.last().expect("trajectory has at least one sample")
    }
}

/// `ρ(τ) = U(τ)ρ(0)U(τ)†` over total time `t`.
pub fn joint_evolve<H: Hamiltonian>(
    h: &JointHamiltonian<H>,
    t: f64,
    initial: &DensityState,
    output: &[f64],
    opts: &EvolveOptions,
    path: JointPath,
) -> Result<JointTrajectory> {
    if initial.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: initial.dim(),
        });
    }
    initial.validate(DENSITY_TOL)?;
    let eps = propagator::epsilon_for(t, h.energy_unit())?;
    let factor = initial.factor()?;
    let path = match path {
        JointPath::Auto if factor.ncols() == 1 => JointPath::Pure,
        JointPath::Auto => JointPath::Conjugation,
        JointPath::Pure if factor.ncols() != 1 => {
            return Err(Error::InvalidInput("pure-state path needs a rank-one initial state".into()));
        }
        p => p,
    };
    let (states, stats) = match path {
        JointPath::Pure => propagator::propagate(h, &factor, eps, output, opts)?,
        _ => {
            let (ops, stats) = propagator::propagate(h, &linalg::identity(h.dim()), eps, output, opts)?;
            let w0 = initial.matrix();
            (ops.into_iter().map(|u| &u * w0 * u.adjoint()).collect(), stats)
        }
    };
    let states = match path {
        JointPath::Pure => states.into_iter().map(|w| DensityState::from_matrix_unchecked(&w * w.adjoint())).collect(),
        _ => states.into_iter().map(DensityState::from_matrix_unchecked).collect(),
    };
    Ok(JointTrajectory {
        taus: output.to_vec(),
        states,
        path,
        stats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Options {
    pub grid_points: usize,
    pub tol: f64,
    pub gamma: f64,
}

impl Default for Theorem2Options {
    fn default() -> Self {
        Self {
            grid_points: 513,
            tol: 1e-10,
            gamma: crate::schedules::DEFAULT_GAMMA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Report {
    #[serde(rename = "delta_S")]
    pub delta_s: f64,
    #[serde(rename = "delta_SB")]
    pub delta_sb: f64,
    /// `(N+1)^{γ+1}q^{−N}`.
    pub bound: f64,
    /// Minimum gap of the joint target level, in units of energy.
    pub joint_gap: f64,
    pub system_gap: f64,
    /// Total time from the joint gap.
    pub t: f64,
    /// Total time the isolated system would need.
    pub system_t: f64,
    pub seed: Option<u64>,
    pub holds: bool,
}

/// Simulates the joint system from `Φ_S(0)⊗ρ_B` for the `theorem1_time`
/// built from the joint gap, and compares the reduced and joint distances
/// to the adiabatic references.
///
/// The joint target is the joint eigenstate continuously connected to
/// `Φ_S(0)⊗(bath ground state)`.
pub fn theorem2_report<H: Hamiltonian>(
    h: &JointHamiltonian<H>,
    bath_state: &DensityState,
    n_vanishing: usize,
    q: f64,
    opts: &Theorem2Options,
) -> Result<Theorem2Report> {
    let (ds, db) = h.dims();
    if bath_state.dim() != db {
        return Err(Error::DimensionMismatch {
            expected: db,
            found: bath_state.dim(),
        });
    }
    let grid = Grid::new(opts.grid_points)?;
    let unit = h.energy_unit();
    let sys_frames = spectral::track(h.system(), &grid, TargetHint::Ground, ResolventConvention::WithI)?;
    let phi0 = sys_frames[0].phi();
    let (be, bv) = linalg::hermitian_eigen(h.bath())?;
    let bath_ground = bv.column(0).into_owned();
    if be.len() > 1 && be[1] - be[0] <= spectral::DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateTarget {
            tau: 0.0,
            gap: be[1] - be[0],
        });
    }
    let joint_hint = TargetHint::Vector(phi0.kronecker(&bath_ground));
    let joint_frames = spectral::track(h, &grid, joint_hint, ResolventConvention::WithI)?;
    let joint_gap = unit * joint_frames.iter().map(|f| f.gap()).fold(f64::INFINITY, f64::min);
    let system_gap = unit * sys_frames.iter().map(|f| f.gap()).fold(f64::INFINITY, f64::min);
    if !(joint_gap > 0.0) {
        return Err(Error::GapClosed {
            tau: f64::NAN,
            gap: joint_gap,
        });
    }
    let xi = unit * crate::hamiltonians::norm_profile(h.system(), &grid)?.beta;
    let mut inputs = BoundInputs {
        n_vanishing,
        q,
        gamma: opts.gamma,
        xi,
        d: joint_gap,
        j: unit,
        ..BoundInputs::default()
    };
    let t = metrics::theorem1_time(&inputs)?;
    inputs.d = system_gap;
    let system_t = metrics::theorem1_time(&inputs)?;
    let bound = metrics::theorem1_error_bound(n_vanishing, q, opts.gamma)?;

    let initial = DensityState::product(&DensityState::pure(&phi0)?, bath_state);
    let traj = joint_evolve(
        h,
        t,
        &initial,
        &[0.0, 1.0],
        &EvolveOptions::with_tol(opts.tol),
        JointPath::Auto,
    )?;
    let rho = traj.final_state();
    let target = DensityState::pure(&sys_frames.last().expect("non-empty grid").phi())?;
    let eps = propagator::epsilon_for(t, unit)?;
    let ub = linalg::expm_hermitian(h.bath(), 1.0 / eps)?;
    let bath_t = DensityState::from_matrix_unchecked(&ub * bath_state.matrix() * ub.adjoint());
    let delta_s = trace_distance(&partial_trace_bath(rho, (ds, db))?, &target)?;
    let delta_sb = trace_distance(rho, &DensityState::product(&target, &bath_t))?;
    Ok(Theorem2Report {
        delta_s,
        delta_sb,
        bound,
        joint_gap,
        system_gap,
        t,
        system_t,
        seed: h.seed(),
        holds: delta_s <= delta_sb + 1e-10,
    })
}
