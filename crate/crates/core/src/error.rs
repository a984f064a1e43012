use thiserror::Error;

/// Errors raised while building, reducing or running frame-derived SSMs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid of {points} points is too coarse for {required} (need at least {min_points})")]
    ResolutionTooCoarse {
        points: usize,
        min_points: usize,
        required: String,
    },

    #[error("unsupported wavelet configuration: {0}")]
    UnsupportedFamily(String),

    #[error("frame Gram matrix has numerical rank {rank}, expected {expected}")]
    RankDeficientFrame { rank: usize, expected: usize },

    #[error("frame has no dual functions; call compute_dual_frame first")]
    MissingDuals,

    #[error("frame has no derivatives; call frame_derivative first")]
    MissingDerivatives,

    #[error("timescale theta must be positive, got {0}")]
    NonpositiveTheta(f64),

    #[error("step size must be positive, got {0}")]
    NonpositiveStep(f64),

    #[error("eigenvalue iteration did not converge after {iterations} sweeps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("eigenvector matrix is singular; the matrix is not diagonalizable (condition ~ {0:e})")]
    NotDiagonalizable(f64),

    #[error("discarded modes carry input mass {mass:e} (limit {limit:e})")]
    InconsistentPartition { mass: f64, limit: f64 },

    #[error("complex eigenvalue at index {0} has no adjacent conjugate partner")]
    UnpairedComplexEigenvalue(usize),

    #[error("output has imaginary residue {residue:e} (limit {limit:e})")]
    ImaginaryResidue { residue: f64, limit: f64 },

    #[error("delay {delay} must be shorter than the sequence length {length}")]
    DelayExceedsLength { delay: usize, length: usize },

    #[error("readout Gram matrix is ill-conditioned (condition {0:e}); increase the ridge")]
    IllConditionedGram(f64),

    #[error("state and frame do not belong together: {0}")]
    SpeciesFrameMismatch(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Failures of a numerical check or algorithm, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficientFrame { .. }
                | Error::NoConvergence { .. }
                | Error::NotDiagonalizable(_)
                | Error::InconsistentPartition { .. }
                | Error::UnpairedComplexEigenvalue(_)
                | Error::ImaginaryResidue { .. }
                | Error::IllConditionedGram(_)
        )
    }
}
