use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ansatz does not close under the Hamiltonian: residual {residual:.3e} on term {term}")]
    AnsatzNotClosed { term: String, residual: f64 },

    #[error("drive evaluation failed at t = {t}: {reason}")]
    DriveEvaluation { t: f64, reason: String },

    #[error("invalid integration window: {0}")]
    InvalidWindow(String),

    #[error("integration did not converge: half-step deviation {deviation:.3e} exceeds {tolerance:.1e}")]
    NonConvergence { deviation: f64, tolerance: f64 },

    #[error("time {t} outside window [{t0}, {t1}]")]
    OutOfRange { t: f64, t0: f64, t1: f64 },

    #[error("degenerate denominator E^2 - DF = {0:.3e}")]
    DegenerateDenominator(f64),

    #[error("quadratic form is not elliptic: DF - E^2 = {0:.3e}")]
    NonElliptic(f64),

    #[error("alpha/rho Newton iteration failed after {iterations} iterations, residual {residual:.3e}")]
    NewtonNonConvergence { iterations: usize, residual: f64 },

    #[error("no real zero-diagonal logarithm for reduction matrix (trace {0:.6})")]
    NoLogarithm(f64),

    #[error("wavefunctions live on different grids")]
    GridMismatch,

    #[error("operator degree {degree} exceeds limit {limit}")]
    DegreeTooHigh { degree: u32, limit: u32 },

    #[error("basis state n = {n} is not resolved by the grid (needs {needed:.2}, have {available:.2})")]
    UnresolvedState { n: usize, needed: f64, available: f64 },

    #[error("grid must have a power-of-two number of points >= 16, got {0}")]
    InvalidGrid(usize),

    #[error("wavepacket touched the boundary: interior mass fraction {fraction:.3e} at t = {t}")]
    BoundaryContact { t: f64, fraction: f64 },

    #[error("imaginary residue {residue:.3e} of the phase integrand at t = {t}")]
    ImaginaryResidue { t: f64, residue: f64 },

    #[error("truncation loss {loss:.3e} exceeds bound {bound:.1e}")]
    Truncation { loss: f64, bound: f64 },

    #[error("harmonic term present; linear-branch states need a pure linear potential")]
    HarmonicTermPresent,

    #[error("invariant annihilates the state (norm {0:.3e})")]
    Annihilated(f64),

    #[error("time series mismatch: {0}")]
    SeriesMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
