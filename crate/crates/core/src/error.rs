//! Error type shared by the whole toolkit.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, TomoError>;

/// Unified error type for tomographic transforms, kernels and operator
/// reconstruction.
#[derive(Debug, Error)]
pub enum TomoError {
    /// A coordinate interval is empty, inverted or non-finite.
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),

    /// A sample/node count is too small or absurdly large.
    #[error("invalid count: {0}")]
    InvalidCount(String),

    /// A Fock-space dimension is unusable for the requested object.
    #[error("invalid dimension: {0}")]
    InvalidDim(String),

    /// Significant mass sits outside the sampled region, so the requested
    /// transform would silently truncate it.
    #[error("support truncated by the sampled region: {0}")]
    TruncatedSupport(String),

    /// The direction (mu, nu) is too short to define a line of integration.
    #[error("degenerate direction: |(mu, nu)| = {r} is below {min}")]
    DegenerateDirection { r: f64, min: f64 },

    /// Too few projection angles for a stable inversion.
    #[error("insufficient angles: got {got}, need at least {need}")]
    InsufficientAngles { got: usize, need: usize },

    /// The tomogram sampling step cannot represent the target grid's bandwidth.
    #[error("aliased spectrum: sample step {dx} exceeds the limit {limit}")]
    AliasedSpectrum { dx: f64, limit: f64 },

    /// The window has a vanishing unit-frequency Fourier coefficient, so its
    /// normalization constant does not exist.
    #[error("singular window: {0}")]
    SingularWindow(String),

    /// The window is too narrow for the lattice that should resolve it.
    #[error("unresolved window: {0}")]
    UnresolvedWindow(String),

    /// An extrapolated limit failed to settle within the requested tolerance.
    #[error("non-convergent: residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    NonConvergent { residual: f64, tolerance: f64 },

    /// Two tomograms (or a tomogram and a target grid) live on lattices that
    /// cannot be combined.
    #[error("incompatible lattices: {0}")]
    IncompatibleLattices(String),

    /// Truncating a state to the finite Fock space loses more probability than
    /// allowed.
    #[error("truncation leakage {leakage:.3e} exceeds threshold {threshold:.3e}")]
    LeakageExceeded { leakage: f64, threshold: f64 },

    /// Calibration constants disagree across references or damping levels.
    #[error("calibration unstable: spread {spread:.3e} exceeds {limit:.3e}")]
    CalibrationUnstable { spread: f64, limit: f64 },

    /// The integrator cannot reach the requested accuracy at the given
    /// resolution.
    #[error("resolution limit: {0}")]
    ResolutionLimit(String),

    /// The operation is not defined for the requested scheme.
    #[error("unsupported scheme: {0}")]
    UnsupportedScheme(String),

    /// Malformed textual input (CSV, ranges, ...).
    #[error("parse error: {0}")]
    Parse(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Malformed JSON input.
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
