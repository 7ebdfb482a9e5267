//! Truncated Fock-space operators: ladder/displacement machinery, Weyl
//! symbols and their inverse, scheme-specific quantizer/dequantizer operator
//! families, operator symbols on tomographic points, and operator
//! reconstruction from tomograms.
//!
//! All matrices live on the first `dim` number states. Truncation is a
//! controlled approximation, not an error: state constructors that can
//! measure the weight they lose past the cutoff report it
//! ([`TomoError::LeakageExceeded`]), while displacement-type operators stay
//! well defined at every argument because their matrix elements against the
//! retained basis decay factorially.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::kernels::SchemeKernel;
use crate::phase_space::{Grid, PhaseSpaceFunction, StateSpec};
use crate::poly::hermite_functions;
use crate::quadratic::{x_reduced, DAMPING_LEVELS};
use crate::quadrature::richardson_to_zero;
use crate::symplectic::{angle_spectrum, ramp_filter, MIN_DIRECTION};
use crate::thick::window_normalization;
use crate::tomogram::{TomogramFile, TomographicPoint};

/// Smallest Fock-space dimension the constructors accept.
pub const MIN_DIM: usize = 2;

/// Probability weight a state may lose past the truncation cutoff before
/// [`state_density`] refuses to build it.
pub const LEAKAGE_THRESHOLD: f64 = 1e-6;

/// Relative magnitude a phase-space function may retain at its grid boundary
/// before [`weyl_reconstruct`] refuses the integral.
const BOUNDARY_RATIO: f64 = 1e-6;

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < MIN_DIM {
        return Err(TomoError::InvalidDim(format!(
            "Fock-space dimension must be at least {MIN_DIM}, got {dim}"
        )));
    }
    Ok(())
}

/// A dense operator on the first `dim` number states.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    mat: DMatrix<Complex64>,
}

/// Serialized layout: `{"dim": N, "re": [[..]], "im": [[..]]}` with
/// row-major `N x N` real and imaginary parts.
#[derive(Serialize, Deserialize)]
struct OperatorData {
    dim: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl Operator {
    /// Wraps a square matrix of size at least [`MIN_DIM`].
    pub fn from_matrix(mat: DMatrix<Complex64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(TomoError::InvalidDim(format!(
                "operator matrix must be square, got {} x {}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        check_dim(mat.nrows())?;
        Ok(Operator { mat })
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Operator { mat: DMatrix::from_element(dim, dim, zero()) })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Operator { mat: DMatrix::identity(dim, dim) })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.mat
    }

    /// Hermitian adjoint.
    pub fn dagger(&self) -> Operator {
        Operator { mat: self.mat.adjoint() }
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Frobenius distance to another operator of the same dimension.
    pub fn frobenius_distance(&self, other: &Operator) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(TomoError::IncompatibleLattices(format!(
                "operator dimensions differ: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok((&self.mat - &other.mat).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
    }

    /// Frobenius norm of `A - A^dagger`; zero for Hermitian operators.
    pub fn hermiticity_defect(&self) -> f64 {
        (&self.mat - self.mat.adjoint()).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, z: Complex64) -> Operator {
        Operator { mat: self.mat.map(|v| v * z) }
    }

    /// Matrix product `self * other`; dimensions must match.
    pub fn product(&self, other: &Operator) -> Result<Operator> {
        if self.dim() != other.dim() {
            return Err(TomoError::IncompatibleLattices(format!(
                "operator dimensions differ: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(Operator { mat: &self.mat * &other.mat })
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        if self.dim() != other.dim() {
            return Err(TomoError::IncompatibleLattices(format!(
                "operator dimensions differ: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(Operator { mat: &self.mat + &other.mat })
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator> {
        if self.dim() != other.dim() {
            return Err(TomoError::IncompatibleLattices(format!(
                "operator dimensions differ: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(Operator { mat: &self.mat - &other.mat })
    }

    pub fn to_json(&self) -> String {
        let dim = self.dim();
        let row = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..dim).map(|i| (0..dim).map(|j| f(&self.mat[(i, j)])).collect()).collect()
        };
        let data = OperatorData { dim, re: row(|v| v.re), im: row(|v| v.im) };
        serde_json::to_string_pretty(&data).expect("operator serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let data: OperatorData = serde_json::from_str(text)?;
        check_dim(data.dim)?;
        let shape_ok = |m: &Vec<Vec<f64>>| m.len() == data.dim && m.iter().all(|r| r.len() == data.dim);
        if !shape_ok(&data.re) || !shape_ok(&data.im) {
            return Err(TomoError::Parse(format!(
                "operator matrix rows do not match dim = {}",
                data.dim
            )));
        }
        let mat = DMatrix::from_fn(data.dim, data.dim, |i, j| {
            Complex64::new(data.re[i][j], data.im[i][j])
        });
        Ok(Operator { mat })
    }
}

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: &Operator, b: &Operator) -> Result<Complex64> {
    if a.dim() != b.dim() {
        return Err(TomoError::IncompatibleLattices(format!(
            "operator dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let n = a.dim();
    let mut acc = zero();
    for i in 0..n {
        for j in 0..n {
            acc += a.matrix()[(i, j)] * b.matrix()[(j, i)];
        }
    }
    Ok(acc)
}

/// Lowering operator `a`, with `a |n> = sqrt(n) |n-1>`.
pub fn lowering(dim: usize) -> Result<Operator> {
    check_dim(dim)?;
    let mat = DMatrix::from_fn(dim, dim, |i, j| {
        if j == i + 1 {
            Complex64::new((j as f64).sqrt(), 0.0)
        } else {
            zero()
        }
    });
    Ok(Operator { mat })
}

/// The ladder pair `(a, a^dagger)`.
pub fn ladder_ops(dim: usize) -> Result<(Operator, Operator)> {
    let a = lowering(dim)?;
    let adag = a.dagger();
    Ok((a, adag))
}

/// Position quadrature `q = (a + a^dagger)/sqrt(2)`.
pub fn position(dim: usize) -> Result<Operator> {
    let (a, adag) = ladder_ops(dim)?;
    Ok(a.add(&adag)?.scaled(Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)))
}

/// Momentum quadrature `p = (a - a^dagger)/(i sqrt(2))`.
pub fn momentum(dim: usize) -> Result<Operator> {
    let (a, adag) = ladder_ops(dim)?;
    Ok(a.sub(&adag)?.scaled(Complex64::new(0.0, -std::f64::consts::FRAC_1_SQRT_2)))
}

/// Number operator `a^dagger a = diag(0, 1, ...)`.
pub fn number(dim: usize) -> Result<Operator> {
    check_dim(dim)?;
    let mat = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex64::new(i as f64, 0.0)
        } else {
            zero()
        }
    });
    Ok(Operator { mat })
}

/// Parity `(-1)^n` — diagonal, involutive, conjugating `a` to `-a`.
pub fn parity(dim: usize) -> Result<Operator> {
    check_dim(dim)?;
    let mat = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex64::new(if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
        } else {
            zero()
        }
    });
    Ok(Operator { mat })
}

/// Displacement operator `D(beta) = exp(beta a^dagger - conj(beta) a)`.
///
/// Evaluated through the normal-ordered factorization
/// `exp(-|beta|^2/2) exp(beta a^dagger) exp(-conj(beta) a)`: both factors are
/// triangular with finitely many terms per retained matrix element, so every
/// entry below the cutoff is exact — no additional truncation error beyond
/// working on `dim` states is introduced, and the builder accepts any `beta`.
pub fn displacement(beta: Complex64, dim: usize) -> Result<Operator> {
    check_dim(dim)?;
    // Lower factor L[m][n] = beta^{m-n} sqrt(m!/n!) / (m-n)!   (m >= n),
    // built down each column by L[m][n] = L[m-1][n] * beta sqrt(m)/(m-n).
    let mut lower = DMatrix::from_element(dim, dim, zero());
    for n in 0..dim {
        lower[(n, n)] = Complex64::new(1.0, 0.0);
        for m in (n + 1)..dim {
            lower[(m, n)] = lower[(m - 1, n)] * beta * (m as f64).sqrt() / (m - n) as f64;
        }
    }
    // Upper factor U[m][n] = (-conj(beta))^{n-m} sqrt(n!/m!) / (n-m)!  (n >= m),
    // built along each row by U[m][n] = U[m][n-1] * (-conj(beta)) sqrt(n)/(n-m).
    let mut upper = DMatrix::from_element(dim, dim, zero());
    let neg_conj = -beta.conj();
    for m in 0..dim {
        upper[(m, m)] = Complex64::new(1.0, 0.0);
        for n in (m + 1)..dim {
            upper[(m, n)] = upper[(m, n - 1)] * neg_conj * (n as f64).sqrt() / (n - m) as f64;
        }
    }
    let scale = Complex64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
    Ok(Operator { mat: (lower * upper).map(|v| v * scale) })
}

/// Phase-space point operator `(1/pi) D(2 alpha) P` with
/// `alpha = (q + i p)/sqrt(2)` and `P` the parity — the kernel whose traces
/// produce Weyl symbols and whose phase-space integrals rebuild operators.
pub fn weyl_quantizer(q: f64, p: f64, dim: usize) -> Result<Operator> {
    let alpha = Complex64::new(q, p) * std::f64::consts::FRAC_1_SQRT_2;
    let d = displacement(alpha * 2.0, dim)?;
    let pi_op = parity(dim)?;
    Ok(d.product(&pi_op)?.scaled(Complex64::new(std::f64::consts::FRAC_1_PI, 0.0)))
}

/// Weyl symbol of `a` at a phase-space point: `2 pi Tr(A W(q, p))` with
/// `W` the point operator of [`weyl_quantizer`]. For a density matrix this
/// is `2 pi` times its Wigner function.
pub fn weyl_symbol(a: &Operator, q: f64, p: f64) -> Result<Complex64> {
    let w = weyl_quantizer(q, p, a.dim())?;
    Ok(trace_product(a, &w)? * (2.0 * std::f64::consts::PI))
}

/// Weyl symbol sampled on a grid.
pub fn weyl_symbol_grid(a: &Operator, grid: &Grid) -> Result<PhaseSpaceFunction> {
    let mut values = DMatrix::from_element(grid.nq(), grid.np(), zero());
    for i in 0..grid.nq() {
        for j in 0..grid.np() {
            values[(i, j)] = weyl_symbol(a, grid.q(i), grid.p(j))?;
        }
    }
    PhaseSpaceFunction::from_samples(grid, values)
}

/// Rebuilds an operator from its Weyl symbol:
/// `A = integral f(q, p) W(q, p) dq dp` (trapezoid over the symbol's grid).
///
/// Fails with [`TomoError::TruncatedSupport`] when the symbol has not decayed
/// at its grid boundary — the integral would silently lose weight.
pub fn weyl_reconstruct(f: &PhaseSpaceFunction, dim: usize) -> Result<Operator> {
    check_dim(dim)?;
    let ratio = f.boundary_ratio();
    if ratio > BOUNDARY_RATIO {
        return Err(TomoError::TruncatedSupport(format!(
            "symbol boundary magnitude is {ratio:.2e} of its peak"
        )));
    }
    let grid = f.grid();
    let (nq, np) = (grid.nq(), grid.np());
    let cell = grid.dq() * grid.dp();
    let peak = f.values().iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    let mut acc = DMatrix::from_element(dim, dim, zero());
    for i in 0..nq {
        let wq = if i == 0 || i == nq - 1 { 0.5 } else { 1.0 };
        for j in 0..np {
            let v = f.values()[(i, j)];
            if v.norm() < 1e-14 * peak {
                continue;
            }
            let wp = if j == 0 || j == np - 1 { 0.5 } else { 1.0 };
            let w = weyl_quantizer(grid.q(i), grid.p(j), dim)?;
            let weight = v * (wq * wp * cell);
            acc += w.matrix().map(|m| m * weight);
        }
    }
    Operator::from_matrix(acc)
}

/// Density matrix of a state specification on `dim` number states.
///
/// Traces are exactly one by construction: the retained amplitudes are
/// renormalized after the leakage check, so downstream identities see a unit
/// trace rather than `1 - leakage`. Classical Gaussian densities have no
/// Fock representation and are rejected.
pub fn state_density(spec: &StateSpec, dim: usize) -> Result<Operator> {
    check_dim(dim)?;
    spec.validate()?;
    match spec {
        StateSpec::Coherent { .. } => {
            let alpha = spec.alpha().expect("coherent spec");
            let mut psi = DVector::from_element(dim, zero());
            let mut amp = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
            for n in 0..dim {
                if n > 0 {
                    amp *= alpha / (n as f64).sqrt();
                }
                psi[n] = amp;
            }
            let kept = psi.iter().map(|v| v.norm_sqr()).sum::<f64>();
            let leakage = (1.0 - kept).max(0.0);
            if leakage > LEAKAGE_THRESHOLD {
                return Err(TomoError::LeakageExceeded { leakage, threshold: LEAKAGE_THRESHOLD });
            }
            let psi = psi.map(|v| v / kept.sqrt());
            let mat = DMatrix::from_fn(dim, dim, |i, j| psi[i] * psi[j].conj());
            Ok(Operator { mat })
        }
        StateSpec::Fock { n } => {
            if *n >= dim {
                return Err(TomoError::InvalidDim(format!(
                    "number state {n} does not fit in {dim} retained levels"
                )));
            }
            let mut mat = DMatrix::from_element(dim, dim, zero());
            mat[(*n, *n)] = Complex64::new(1.0, 0.0);
            Ok(Operator { mat })
        }
        StateSpec::Thermal { nbar } => {
            if *nbar == 0.0 {
                return state_density(&StateSpec::Fock { n: 0 }, dim);
            }
            let x = nbar / (1.0 + nbar);
            // Tail mass of the full geometric distribution past the cutoff.
            let leakage = x.powi(dim as i32);
            if leakage > LEAKAGE_THRESHOLD {
                return Err(TomoError::LeakageExceeded { leakage, threshold: LEAKAGE_THRESHOLD });
            }
            let weights: Vec<f64> = (0..dim).map(|n| x.powi(n as i32)).collect();
            let total: f64 = weights.iter().sum();
            let mut mat = DMatrix::from_element(dim, dim, zero());
            for (n, w) in weights.iter().enumerate() {
                mat[(n, n)] = Complex64::new(w / total, 0.0);
            }
            Ok(Operator { mat })
        }
        StateSpec::GaussianClassical { .. } => Err(TomoError::UnsupportedScheme(
            "classical Gaussian densities have no Fock-space density matrix".into(),
        )),
    }
}

/// Which member of a scheme's operator pair to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuantizerKind {
    /// Dual family: paired with tomogram values to rebuild the operator.
    Dual,
    /// Symbol family: traced against an operator to produce its tomogram
    /// value at the point.
    Symbol,
}

/// Displaced core of the quadratic dual family: the phase-space Gaussian
/// chirp `exp(-i (q^2 + p^2))` carried to an operator through the point
/// kernel is `(1 - i)/2 * (-i)^n` on the number basis, and this builds its
/// displacement `D(alpha) core D(alpha)^dagger` with exact truncated entries.
/// Conjugating the number-phase cycle through a displacement collapses in
/// closed form,
/// `D(a) (-i)^n D(a)^dagger = e^{-i|a|^2} D(a (1 + i)) (-i)^n`,
/// so each entry is one displacement entry times a phase — there is no
/// intermediate resolution of the identity to truncate. A literal triple
/// product in the truncated space instead loses the above-cutoff part of the
/// displaced basis states and corrupts entries near the cutoff at first order
/// in `|alpha|`.
fn displaced_chirp_core(alpha: Complex64, dim: usize) -> Result<Operator> {
    let cycle = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, -1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 1.0),
    ];
    let d = displacement(alpha * Complex64::new(1.0, 1.0), dim)?;
    let phase = Complex64::new(0.5, -0.5) * Complex64::from_polar(1.0, -alpha.norm_sqr());
    let mat = DMatrix::from_fn(dim, dim, |i, j| d.matrix()[(i, j)] * cycle[j % 4] * phase);
    Ok(Operator { mat })
}

/// Symbol operator of the line scheme: the spectral density of the rotated
/// quadrature `mu q + nu p` at value `X`, i.e. `(1/r) |s><s|` with
/// `s = X / r` expressed through the truncated quadrature eigenbasis.
fn line_symbol_operator(x: &TomographicPoint, dim: usize) -> Result<Operator> {
    let r = x.r();
    if r < MIN_DIRECTION {
        return Err(TomoError::DegenerateDirection { r, min: MIN_DIRECTION });
    }
    let theta = x.nu.atan2(x.mu);
    let s = x.x / r;
    let psi = hermite_functions(dim - 1, s);
    let v: Vec<Complex64> = (0..dim)
        .map(|n| Complex64::from_polar(psi[n], n as f64 * theta))
        .collect();
    let mat = DMatrix::from_fn(dim, dim, |i, j| v[i] * v[j].conj() / r);
    Ok(Operator { mat })
}

/// Relative Frobenius change between angle refinements below which the
/// circle average counts as converged. The trapezoid rule on the circle
/// converges spectrally (a few hundred angles suffice for every radius the
/// toolkit exercises), but point-operator entries at large displacements
/// carry cancellation noise of order `kappa * eps`: when the Fock index is
/// near `|beta|^2 / 2`, the normal-ordered sum behind an entry has
/// alternating terms up to ~1e13 times the result, leaving ~1e-8 relative
/// noise that no amount of angular averaging removes. The threshold sits an
/// order above that floor and several orders below any tolerance consumers
/// rely on.
const CIRCLE_AVERAGE_TOL: f64 = 1e-7;

/// Symbol operator of the circle scheme: the uniform average of point
/// operators over the circle of squared radius `X` centered at `(mu, nu)`,
/// `(1/2) int_0^{2pi} W(mu + sqrt(X) cos t, nu + sqrt(X) sin t) dt`.
/// Zero for `X < 0` (the circle is empty); `pi W(mu, nu)` at `X = 0`.
fn circle_symbol_operator(x: &TomographicPoint, dim: usize) -> Result<Operator> {
    if x.x < 0.0 {
        return Operator::zeros(dim);
    }
    let radius = x.x.sqrt();
    let mut previous: Option<DMatrix<Complex64>> = None;
    let mut n_ang = 64usize;
    loop {
        let mut acc = DMatrix::from_element(dim, dim, zero());
        let dt = 2.0 * std::f64::consts::PI / n_ang as f64;
        for k in 0..n_ang {
            let t = dt * k as f64;
            let w = weyl_quantizer(x.mu + radius * t.cos(), x.nu + radius * t.sin(), dim)?;
            acc += w.matrix();
        }
        acc *= Complex64::new(0.5 * dt, 0.0);
        let norm = acc.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if let Some(prev) = &previous {
            let change = (&acc - prev).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            if change <= CIRCLE_AVERAGE_TOL * (1.0 + norm) {
                return Ok(Operator { mat: acc });
            }
        }
        if n_ang >= 4096 {
            let prev = previous.expect("at least one refinement before the cap");
            let change = (&acc - &prev).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            return Err(TomoError::NonConvergent {
                residual: change / (1.0 + norm),
                tolerance: CIRCLE_AVERAGE_TOL,
            });
        }
        previous = Some(acc);
        n_ang *= 2;
    }
}

/// The operator pair attached to a scheme at a tomographic point.
///
/// For each scheme the symbol operator reproduces the classical forward
/// transform (`Tr(rho . symbol)` equals the transform of the state's Wigner
/// function), and the dual operator rebuilds operators from tomograms via
/// `A = 2 pi int w(x) dual(x) dx`. The thick scheme's pair requires inverting
/// its window on the operator side and is deliberately not provided.
pub fn scheme_quantizer(
    scheme: &SchemeKernel,
    kind: QuantizerKind,
    x: &TomographicPoint,
    dim: usize,
) -> Result<Operator> {
    check_dim(dim)?;
    match (scheme, kind) {
        (SchemeKernel::Symplectic, QuantizerKind::Symbol) => line_symbol_operator(x, dim),
        (SchemeKernel::Symplectic, QuantizerKind::Dual) => {
            // (1/4 pi^2) e^{iX} D((nu - i mu)/sqrt(2)).
            let beta = Complex64::new(x.nu, -x.mu) * std::f64::consts::FRAC_1_SQRT_2;
            let d = displacement(beta, dim)?;
            let scale = Complex64::from_polar(1.0 / (4.0 * std::f64::consts::PI.powi(2)), x.x);
            Ok(d.scaled(scale))
        }
        (SchemeKernel::Quadratic, QuantizerKind::Symbol) => circle_symbol_operator(x, dim),
        (SchemeKernel::Quadratic, QuantizerKind::Dual) => {
            // (1/pi^2) e^{iX} D(alpha_c) core D(alpha_c)^dagger, the
            // displaced chirp core, with alpha_c = (mu + i nu)/sqrt(2).
            let alpha = Complex64::new(x.mu, x.nu) * std::f64::consts::FRAC_1_SQRT_2;
            let block = displaced_chirp_core(alpha, dim)?;
            let scale = Complex64::from_polar(1.0 / std::f64::consts::PI.powi(2), x.x);
            Ok(block.scaled(scale))
        }
        (SchemeKernel::Thick(window), _) => {
            // Make sure the window itself is usable before refusing, so the
            // caller learns about a singular window first.
            window_normalization(window)?;
            Err(TomoError::UnsupportedScheme(
                "the thick scheme's operator pair needs the window deconvolved on the operator side; build the ideal pair and convolve tomograms instead".into(),
            ))
        }
    }
}

/// Tomographic symbol of an operator at a point: `Tr(A . symbol(x))`.
pub fn tomographic_symbol(
    a: &Operator,
    scheme: &SchemeKernel,
    x: &TomographicPoint,
) -> Result<Complex64> {
    let phi = scheme_quantizer(scheme, QuantizerKind::Symbol, x, a.dim())?;
    trace_product(a, &phi)
}

/// Entrywise Richardson extrapolation of damped operator approximants to the
/// undamped limit; `s2` holds the squared damping levels.
fn richardson_operator(s2: &[f64], ops: &[Operator]) -> Result<(Operator, f64)> {
    let dim = ops[0].dim();
    let mut mat = DMatrix::from_element(dim, dim, zero());
    let mut residual = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            let samples: Vec<Complex64> = ops.iter().map(|op| op.matrix()[(i, j)]).collect();
            let (v, r) = richardson_to_zero(s2, &samples)?;
            mat[(i, j)] = v;
            residual = residual.max(r);
        }
    }
    Ok((Operator { mat }, residual))
}

/// Rebuilds an operator from a tomogram: `A = 2 pi int w(x) dual(x) dx`,
/// organized per scheme.
///
/// * Line scheme (`w` on a polar lattice): the X-integral is performed in
///   Fourier space with a ramp filter — the same filtered rows as the
///   classical inverse — and each angle contributes a function of the
///   rotated quadrature, summed over the angle lattice.
/// * Circle scheme (`w` on a center lattice): the X-reduced tomogram is
///   integrated against displaced chirp cores with Gaussian damping in the
///   center variables, extrapolated to zero damping. Requires the same
///   calibration constant as the classical inverse.
///
/// The tomogram layout must match the scheme; the thick scheme is not
/// supported on the operator side.
pub fn operator_from_tomogram(
    w: &TomogramFile,
    scheme: &SchemeKernel,
    dim: usize,
    calib: Option<f64>,
) -> Result<Operator> {
    check_dim(dim)?;
    match (scheme, w) {
        (SchemeKernel::Symplectic, TomogramFile::Polar(t)) => {
            // A = (1/2 pi) int_0^pi dtheta int dr |r| F_theta(r) e^{i r q_theta}
            // with F_theta the X-Fourier transform of the tomogram row. The
            // frequency operator e^{i r q} is the displacement D(i r/sqrt(2))
            // — its truncated entries are exact — and conjugating it to the
            // rotated quadrature q_theta is an entrywise phase in the number
            // basis, so the angle integral collapses into per-frequency
            // angular Fourier coefficients of the spectrum.
            let spectrum = angle_spectrum(t)?;
            let n_freq = spectrum.rs.len();
            let d_theta = spectrum.theta_step;
            // coeff[(k, d + dim - 1)] = sum_theta dtheta F_theta(r_k) e^{i d theta}.
            let n_diag = 2 * dim - 1;
            let mut coeff = DMatrix::from_element(n_freq, n_diag, zero());
            for (j, &theta) in spectrum.thetas.iter().enumerate() {
                for slot in 0..n_diag {
                    let phase =
                        Complex64::from_polar(d_theta, (slot as f64 - (dim - 1) as f64) * theta);
                    for k in 0..n_freq {
                        coeff[(k, slot)] += spectrum.f[(k, j)] * phase;
                    }
                }
            }
            let mut acc = DMatrix::from_element(dim, dim, zero());
            let scale = spectrum.dr / (2.0 * std::f64::consts::PI);
            for (k, &r) in spectrum.rs.iter().enumerate() {
                let ramp = ramp_filter(r, spectrum.r_max);
                if ramp == 0.0 {
                    continue;
                }
                let d_op =
                    displacement(Complex64::new(0.0, r * std::f64::consts::FRAC_1_SQRT_2), dim)?;
                for a in 0..dim {
                    for b in 0..dim {
                        let slot = a + dim - 1 - b;
                        acc[(a, b)] +=
                            d_op.matrix()[(a, b)] * coeff[(k, slot)] * (ramp * scale);
                    }
                }
            }
            Operator::from_matrix(acc)
        }
        (SchemeKernel::Quadratic, TomogramFile::Center(t)) => {
            let c = calib.ok_or_else(|| {
                TomoError::InvalidBounds(
                    "circle-scheme operator reconstruction needs a calibration constant".into(),
                )
            })?;
            let s = x_reduced(t);
            let peak = s.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
            let (mus, nus) = (t.mus(), t.nus());
            let cell = t.mu_step() * t.nu_step();
            let mut approximants = Vec::with_capacity(DAMPING_LEVELS.len());
            for &sigma in &DAMPING_LEVELS {
                let mut acc = DMatrix::from_element(dim, dim, zero());
                for (im, &mu) in mus.iter().enumerate() {
                    let wm = if im == 0 || im == mus.len() - 1 { 0.5 } else { 1.0 };
                    for (inu, &nu) in nus.iter().enumerate() {
                        let sv = s[(im, inu)];
                        if sv.norm() < 1e-12 * peak {
                            continue;
                        }
                        let wn = if inu == 0 || inu == nus.len() - 1 { 0.5 } else { 1.0 };
                        let damp = (-0.5 * sigma * sigma * (mu * mu + nu * nu)).exp();
                        let alpha =
                            Complex64::new(mu, nu) * std::f64::consts::FRAC_1_SQRT_2;
                        let block = displaced_chirp_core(alpha, dim)?;
                        let weight = sv * (damp * wm * wn * cell);
                        acc += block.matrix().map(|m| m * weight);
                    }
                }
                // 2 pi pairing weight times the calibrated dual prefactor
                // c / pi in place of its conventional value.
                acc *= Complex64::new(2.0 * c, 0.0);
                approximants.push(Operator { mat: acc });
            }
            let s2: Vec<f64> = DAMPING_LEVELS.iter().map(|s| s * s).collect();
            let (op, residual) = richardson_operator(&s2, &approximants)?;
            let scale = op.frobenius_norm().max(f64::MIN_POSITIVE);
            if residual > 0.25 * scale {
                return Err(TomoError::NonConvergent {
                    residual: residual / scale,
                    tolerance: 0.25,
                });
            }
            Ok(op)
        }
        (SchemeKernel::Thick(_), _) => Err(TomoError::UnsupportedScheme(
            "thick-scheme tomograms cannot be inverted directly to operators; deconvolve the window first".into(),
        )),
        (SchemeKernel::Symplectic, TomogramFile::Center(_)) => Err(TomoError::IncompatibleLattices(
            "line-scheme reconstruction needs a polar (X, theta) tomogram".into(),
        )),
        (SchemeKernel::Quadratic, TomogramFile::Polar(_)) => Err(TomoError::IncompatibleLattices(
            "circle-scheme reconstruction needs a center (X, mu, nu) tomogram".into(),
        )),
    }
}
