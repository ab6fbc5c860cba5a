#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod harness;
pub mod hamiltonians;
pub mod linalg;
pub mod metrics;
pub mod opensys;
pub mod propagator;
pub mod schedules;
pub mod spectral;
pub mod superadiabatic;

pub use error::{Error, Result};
pub use grid::Grid;
pub use hamiltonians::{Hamiltonian, LocalHamiltonian, LocalHamiltonianSpec, PauliString, ScheduledSum};
pub use linalg::{CMat, CVec};
pub use propagator::{EvolutionResult, EvolveOptions};
pub use schedules::{Schedule, ScheduleBank};
pub use spectral::{ResolventConvention, SpectralFrame, TargetHint};
pub use superadiabatic::{ExpandOptions, ExpansionSeries, SuperadiabaticState};
pub use harness::{ExperimentConfig, FitResult};
pub use metrics::{BoundInputs, ErrorReport};
