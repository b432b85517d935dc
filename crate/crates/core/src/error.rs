use thiserror::Error;

/// Errors raised by the numerical engine.
///
/// Values carried for diagnostics are stored as `f64` regardless of the scalar
/// type the computation ran in.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("beta must be nonzero")]
    ZeroBeta,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("band continuity violated at k = {k}: jump {jump:.3e} exceeds bound {bound:.3e}")]
    Continuity { k: f64, jump: f64, bound: f64 },

    #[error("band loop is not closed")]
    OpenLoop,

    #[error("reference energy lies {distance:.3e} from the spectrum (minimum {tolerance:.1e})")]
    ReferenceOnSpectrum { distance: f64, tolerance: f64 },

    #[error("winding number {value} is not an integer (residue {residue:.3})")]
    NonIntegerWinding { value: f64, residue: f64 },

    #[error("Wasserstein metric is singular at mu = {mu}: exceptional point at mu = {nearest_ep}")]
    Singularity { mu: f64, nearest_ep: f64 },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("no interior minimum in [{lo}, {hi}]")]
    NoInteriorMinimum { lo: f64, hi: f64 },

    #[error("eigensolver did not converge after {iterations} iterations")]
    EigenNonConvergence { iterations: usize },

    #[error("eigenpair residual {residual:.3e} exceeds {tolerance:.1e}")]
    EigenResidual { residual: f64, tolerance: f64 },

    #[error("cavity response diverges: t*exp(Im E) = {gain} >= 1")]
    UnstableCavity { gain: f64 },

    #[error("least-squares fit did not converge: {0}")]
    FitNonConvergence(String),

    #[error("clip constant {clip} exceeds the field modulus at {pixels} pixel(s)")]
    Clipping { clip: f64, pixels: usize },

    #[error("first diffraction order overlaps the zero order: {0}")]
    Aliasing(String),

    #[error("i/o failure: {0}")]
    Io(String),
}

impl Error {
    /// Argument and i/o problems as opposed to failures of a computation.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidArgument(_) | Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
