//! Matrix product states and finite-system DMRG with open boundaries.

mod dmrg;
mod mpo;
mod mps;

pub use dmrg::{
    dmrg_excited, dmrg_excited_from, dmrg_ground, dmrg_ground_from, dmrg_lowest_two, DmrgConfig, DmrgPair,
    DmrgReport, DmrgRun, NEAR_DEGENERATE_GAP, ORTHOGONALITY_BOUND,
};
pub use mpo::{MatrixProductOperator, MpoSite};
pub use mps::{MatrixProductState, Tensor3};

use nalgebra::DMatrix;

use crate::error::Result;
use crate::measure::DensityMatrix;
use crate::scalar::Real;

/// Reduced density matrix of two adjacent sites.
pub fn mps_rdm<T: Real>(mps: &MatrixProductState<T>, sites: (usize, usize)) -> Result<DensityMatrix<T>> {
    mps.rdm(sites)
}

pub fn mps_local_expectation<T: Real>(mps: &MatrixProductState<T>, site: usize, op: &DMatrix<T>) -> Result<T> {
    mps.local_expectation(site, op)
}
