use thiserror::Error;

/// Errors raised by the polariton engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} size {size} exceeds the configured cap {cap}")]
    SizeGuard {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{what} index {index} out of range 0..{len}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("{0} requires a finite number of molecules")]
    InfiniteEnsemble(&'static str),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("state is not permutation symmetric (residual norm {0:.3e})")]
    NotSymmetric(f64),

    #[error("initial state carries weight {0:.3e} outside the zeroth block")]
    OutsideZerothBlock(f64),

    #[error("eigenstate {index} is not dark: photonic weight {weight:.3e} >= {threshold:.1e}")]
    NotDark {
        index: usize,
        weight: f64,
        threshold: f64,
    },

    #[error("frequency {omega} exceeds the Nyquist limit {nyquist} of the time grid")]
    GridTooCoarse { omega: f64, nyquist: f64 },

    #[error("malformed matrix file: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
