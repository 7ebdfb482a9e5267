//! Numerical toolkit for generalized phase-space tomography.
//!
//! The crate implements three tomographic maps on the plane — the symplectic
//! (line-integral) map, its finite-resolution "thick" variant, and the
//! quadratic (circle-integral) map — together with their inverses, the
//! composition kernels that implement a non-commutative product of tomographic
//! symbols, and a truncated-Fock operator backend in which every classical map
//! has a quantizer/dequantizer realization.
//!
//! Layout:
//! - [`quadrature`]: deterministic integration rules, damped oscillatory
//!   integration with Richardson extrapolation, and smooth delta test functions.
//! - [`phase_space`]: uniform grids, state specifications and their Wigner
//!   functions, moments.
//! - [`tomogram`]: tomogram containers on polar and center lattices, CSV I/O.
//! - [`symplectic`]: forward line-integral transform and filtered
//!   back-projection inverse.
//! - [`thick`]: window profiles, finite-thickness forward map, normalization
//!   constants.
//! - [`quadratic`]: circle-integral forward map, oscillatory inverse with
//!   calibration.
//! - [`operators`]: truncated-Fock matrices, displacement/parity machinery,
//!   Weyl symbols, scheme quantizers and dequantizers, operator reconstruction.
//! - [`kernels`]: composition kernels for all schemes — closed forms and a
//!   generic Gaussian-block evaluator with matched regularization.
//! - [`star`]: FFT-based star product of symplectic tomographic symbols.
//! - [`verification`]: self-check suites used by the CLI and the acceptance
//!   tests.

pub mod error;
pub mod kernels;
pub mod operators;
pub mod star;
pub mod verification;
pub mod phase_space;
pub mod poly;
pub mod quadratic;
pub mod quadrature;
pub mod symplectic;
pub mod thick;
pub mod tomogram;

pub use error::{Result, TomoError};
