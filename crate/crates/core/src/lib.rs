//! Spin-chain ground states, two-site entanglement and finite-size scaling
//! near first-order quantum phase transitions.
//!
//! The numerical core is generic over the scalar type ([`Real`], implemented
//! for `f32` and `f64`); the `*F64` aliases below name the usual
//! double-precision instantiations.

pub mod eigensolve;
pub mod entanglement;
pub mod error;
pub mod fss;
pub mod hilbert;
pub mod measure;
pub mod mpsdmrg;
pub mod pipeline;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{Cx, Real};

pub type SpinChainSpecF64 = hilbert::SpinChainSpec<f64>;
pub type SparseOperatorF64 = hilbert::SparseOperator<f64>;
pub type PureStateF64 = eigensolve::PureState<f64>;
pub type EigenResultF64 = eigensolve::EigenResult<f64>;
pub type DensityMatrixF64 = measure::DensityMatrix<f64>;
pub type MatrixProductStateF64 = mpsdmrg::MatrixProductState<f64>;
