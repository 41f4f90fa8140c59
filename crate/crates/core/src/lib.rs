//! Collective dynamics of molecular polaritons with a systematic `1/N`
//! expansion around the infinite-ensemble limit.

pub mod cute;
pub mod dynamics;
pub mod error;
pub mod fockspace;
pub mod linalg;
pub mod oracle;
pub mod perturbation;
pub mod sparse;
pub mod vibronic;

pub type C64 = num_complex::Complex64;

pub use cute::{BlockHamiltonian, CavityParams, Partition};
pub use error::{Error, Result};
pub use fockspace::{Ensemble, SymBasis, SymState};
pub use sparse::SparseMatrix;
pub use vibronic::{MolecularModel, VibrationalMode, VibronicStructure};
