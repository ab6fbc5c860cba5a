//! Fixtures shared by the benchmarks.

use adiabat::hamiltonians::{self, ScheduledSum};
use adiabat::{Grid, ResolventConvention, Schedule, SpectralFrame, TargetHint};

/// Transverse-field to ZZ-coupled instance used throughout the benchmarks.
pub fn x_to_z(n: usize, nb: usize) -> ScheduledSum {
    hamiltonians::x_to_z(n, 1.0, Schedule::smooth_poly(nb)).expect("valid instance")
}

pub fn frames(h: &ScheduledSum, points: usize) -> Vec<SpectralFrame> {
    let grid = Grid::new(points).expect("valid grid");
    adiabat::spectral::track(h, &grid, TargetHint::Ground, ResolventConvention::WithI).expect("gapped instance")
}
