//! Recursive Fourier Sampling: promise-consistent instance construction and
//! three solver tracks (classical queries, statevector simulation with phase
//! kickback, and a symbolic conjugate-pair track), all with exact query
//! accounting.

pub mod bitmath;
pub mod checks;
pub mod classical;
pub mod conjugate;
pub mod error;
pub mod instance;
pub mod quantum;
pub mod statevector;
pub mod translate;

pub use bitmath::{BitString, SignSpectrum, TruthTable};
pub use error::{Error, Result};
pub use instance::{FSTree, FSTreeConfig, GFamily, OracleKey, QueryLedger};
