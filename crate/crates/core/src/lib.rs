//! Real interpolation with a functional parameter, made computable on finite
//! windows: quasi-concave parameter functions, discretizing sequences,
//! K-functionals of sequence couples, discrete interpolation norms, and the
//! stability experiments built on top of them.

// `!(x > 0.0)` is used deliberately so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod discretize;
pub mod error;
pub mod exponent;
pub mod grid;
pub mod kfunc;
pub mod qcfn;
pub mod report;
pub mod spaces;
pub mod stability;
pub mod vector;

pub use discretize::{BlockPartition, DiscretizingSequence, Zone};
pub use error::{Error, Result};
pub use exponent::Exponent;
pub use grid::{ProbeGrid, Window};
pub use kfunc::{KFunctional, StepFunction, WeightedSeqCouple};
pub use qcfn::{FnSpec, QuasiConcaveFn};
pub use spaces::{BlockSpace, NormReport};
pub use stability::Triple;
pub use vector::SeqVector;
