//! Deterministic integration rules with paired-resolution error estimates,
//! damped oscillatory integration with Richardson extrapolation, and smooth
//! delta test functions.
//!
//! These routines are the numerical oracle for the rest of the crate: every
//! closed-form constant elsewhere is cross-checked against integrals computed
//! here.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, TomoError};

/// Hard cap on the total number of tensor-product nodes in one call.
const MAX_TOTAL_NODES: usize = 200_000_000;

/// One-dimensional integration rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    /// Composite trapezoid on a uniform grid including both endpoints.
    Trapezoid,
    /// Gauss–Legendre on a bounded interval.
    GaussLegendre,
    /// Gauss–Hermite over the whole real line. The rule integrates
    /// `exp(-x^2) * g(x)`; the integrand supplied by the caller is `g`.
    GaussHermite,
}

/// A single integration axis: an interval plus a rule and a node count.
#[derive(Clone, Copy, Debug)]
pub struct Axis {
    lo: f64,
    hi: f64,
    n: usize,
    rule: Rule,
}

impl Axis {
    /// Uniform trapezoid rule on `[lo, hi]` with `n >= 2` nodes.
    pub fn trapezoid(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::bounded(lo, hi, n, Rule::Trapezoid)
    }

    /// Gauss–Legendre rule on `[lo, hi]` with `n >= 2` nodes.
    pub fn gauss_legendre(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::bounded(lo, hi, n, Rule::GaussLegendre)
    }

    /// Gauss–Hermite rule on the real line with `n >= 2` nodes. The weight
    /// `exp(-x^2)` is part of the rule, not of the integrand.
    pub fn hermite(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(TomoError::InvalidCount(format!(
                "hermite rule needs at least 2 nodes, got {n}"
            )));
        }
        Ok(Axis { lo: f64::NEG_INFINITY, hi: f64::INFINITY, n, rule: Rule::GaussHermite })
    }

    fn bounded(lo: f64, hi: f64, n: usize, rule: Rule) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(TomoError::InvalidBounds(format!(
                "need finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        if n < 2 {
            return Err(TomoError::InvalidCount(format!(
                "axis needs at least 2 nodes, got {n}"
            )));
        }
        Ok(Axis { lo, hi, n, rule })
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.n
    }

    /// True if the axis has no nodes (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Nodes and weights of the rule on this axis.
    pub fn nodes_weights(&self) -> (Vec<f64>, Vec<f64>) {
        match self.rule {
            Rule::Trapezoid => {
                let h = (self.hi - self.lo) / (self.n as f64 - 1.0);
                let nodes: Vec<f64> = (0..self.n).map(|i| self.lo + h * i as f64).collect();
                let mut weights = vec![h; self.n];
                weights[0] = 0.5 * h;
                weights[self.n - 1] = 0.5 * h;
                (nodes, weights)
            }
            Rule::GaussLegendre => {
                let (t, w) = gauss_legendre_unit(self.n);
                let c = 0.5 * (self.hi - self.lo);
                let m = 0.5 * (self.hi + self.lo);
                (
                    t.iter().map(|ti| m + c * ti).collect(),
                    w.iter().map(|wi| c * wi).collect(),
                )
            }
            Rule::GaussHermite => gauss_hermite(self.n),
        }
    }

    /// The same axis at roughly half the resolution (used for the paired
    /// error estimate).
    fn halved(&self) -> Axis {
        let n = match self.rule {
            // Keep endpoint nesting: 2m+1 -> m+1.
            Rule::Trapezoid => (self.n / 2 + 1).max(2),
            _ => (self.n / 2).max(2),
        };
        Axis { n, ..*self }
    }
}

/// Result of a quadrature call: the value and a paired-resolution error
/// estimate (absolute, heuristic).
#[derive(Clone, Copy, Debug)]
pub struct Estimate {
    pub value: Complex64,
    pub error_estimate: f64,
}

/// Tensor-product quadrature of `f` over the given axes.
///
/// The error estimate is `|I_full - I_half|`, where `I_half` uses every axis
/// at roughly half resolution. If `tol` is given and the estimate exceeds it,
/// the call fails with [`TomoError::ResolutionLimit`].
pub fn integrate_nd<F>(axes: &[Axis], tol: Option<f64>, f: F) -> Result<Estimate>
where
    F: Fn(&[f64]) -> Complex64,
{
    if axes.is_empty() {
        return Err(TomoError::InvalidCount("integrate_nd needs at least one axis".into()));
    }
    let total: usize = axes.iter().map(|a| a.n).try_fold(1usize, |acc, n| acc.checked_mul(n))
        .ok_or_else(|| TomoError::InvalidCount("node count overflow".into()))?;
    if total > MAX_TOTAL_NODES {
        return Err(TomoError::InvalidCount(format!(
            "{total} tensor-product nodes exceed the cap {MAX_TOTAL_NODES}"
        )));
    }
    let fine = tensor_sum(axes, &f);
    let coarse_axes: Vec<Axis> = axes.iter().map(|a| a.halved()).collect();
    let coarse = tensor_sum(&coarse_axes, &f);
    let err = (fine - coarse).norm();
    if let Some(t) = tol {
        if err > t {
            return Err(TomoError::ResolutionLimit(format!(
                "error estimate {err:.3e} exceeds tolerance {t:.3e}"
            )));
        }
    }
    Ok(Estimate { value: fine, error_estimate: err })
}

fn tensor_sum<F>(axes: &[Axis], f: &F) -> Complex64
where
    F: Fn(&[f64]) -> Complex64,
{
    let nw: Vec<(Vec<f64>, Vec<f64>)> = axes.iter().map(|a| a.nodes_weights()).collect();
    let d = axes.len();
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0f64; d];
    let mut acc = Complex64::new(0.0, 0.0);
    'outer: loop {
        let mut w = 1.0f64;
        for k in 0..d {
            x[k] = nw[k].0[idx[k]];
            w *= nw[k].1[idx[k]];
        }
        acc += f(&x) * w;
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < nw[k].0.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == d {
                break 'outer;
            }
        }
    }
    acc
}

/// Composite Gauss–Legendre nodes/weights: `panels` equal panels on `[a, b]`,
/// each carrying an `order`-point rule. Useful for integrands with moderate
/// local structure (window convolutions, annuli).
pub fn composite_gauss_legendre(a: f64, b: f64, panels: usize, order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(TomoError::InvalidBounds(format!("need finite a < b, got [{a}, {b}]")));
    }
    if panels == 0 || order < 2 {
        return Err(TomoError::InvalidCount(format!(
            "need panels >= 1 and order >= 2, got {panels} x {order}"
        )));
    }
    let (t, w) = gauss_legendre_unit(order);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + h * p as f64;
        let m = lo + 0.5 * h;
        let c = 0.5 * h;
        for k in 0..order {
            nodes.push(m + c * t[k]);
            weights.push(c * w[k]);
        }
    }
    Ok((nodes, weights))
}

/// Gauss–Legendre nodes/weights on `[-1, 1]` by Newton iteration on the
/// Legendre recurrence.
fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let m = n.div_ceil(2);
    for i in 1..=m {
        // Tricomi-style initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        // Evaluates (P_n(x), P_n'(x)) through the Legendre recurrence.
        let eval = |x: f64| -> (f64, f64) {
            let mut p0 = 1.0f64;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
        };
        for _ in 0..100 {
            let (p, dp) = eval(x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 5e-16 {
                break;
            }
        }
        let (_, dp) = eval(x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i - 1] = -x;
        nodes[n - i] = x;
        weights[i - 1] = w;
        weights[n - i] = w;
    }
    if n % 2 == 1 {
        // The middle node is exactly zero; the loop above computed it with
        // full precision already, but make it exact.
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss–Hermite nodes/weights (weight `exp(-x^2)`, physicists' convention)
/// via the Golub–Welsch eigenproblem on the Jacobi matrix.
fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = j.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Polynomial extrapolation (Neville) of samples `(s_i, v_i)` to `s = 0`.
///
/// Returns the extrapolated value and a residual — the change produced by the
/// final extrapolation order, used as a heuristic error estimate. The `s_i`
/// must be positive and pairwise distinct.
pub fn richardson_to_zero(s: &[f64], v: &[Complex64]) -> Result<(Complex64, f64)> {
    if s.len() != v.len() || s.is_empty() {
        return Err(TomoError::InvalidCount(
            "richardson_to_zero needs equally many (>=1) nodes and values".into(),
        ));
    }
    for (i, &si) in s.iter().enumerate() {
        if !si.is_finite() || si <= 0.0 {
            return Err(TomoError::InvalidBounds(format!("scale s[{i}] = {si} must be > 0")));
        }
        for &sj in &s[..i] {
            if (si - sj).abs() < 1e-300 {
                return Err(TomoError::InvalidBounds("scales must be pairwise distinct".into()));
            }
        }
    }
    let n = s.len();
    if n == 1 {
        return Ok((v[0], v[0].norm()));
    }
    // t[i] holds T_{i, j} for the current column j.
    let mut t: Vec<Complex64> = v.to_vec();
    let mut best_prev = t[0];
    for j in 1..n {
        for i in 0..n - j {
            t[i] = (t[i + 1] * s[i] - t[i] * s[i + j]) / (s[i] - s[i + j]);
        }
        if j == n - 1 {
            return Ok((t[0], (t[0] - best_prev).norm()));
        }
        best_prev = t[0];
    }
    unreachable!()
}

/// Result of a damped oscillatory integration.
#[derive(Clone, Debug)]
pub struct DampedSeries {
    /// Damping widths, strongest first.
    pub sigmas: Vec<f64>,
    /// Integral value at each damping width.
    pub values: Vec<Complex64>,
    /// Richardson limit at zero damping.
    pub value: Complex64,
    /// Heuristic residual of the extrapolation.
    pub residual: f64,
}

/// Integrates an oscillatory `f` over the axes by inserting a Gaussian damper
/// `exp(-sigma^2 |x|^2 / 2)` at each width in `sigmas` and extrapolating the
/// results to zero damping (Richardson in `sigma^2`).
///
/// `sigmas` must be positive and strictly decreasing. If `tol` is given and
/// the extrapolation residual exceeds it, the call fails with
/// [`TomoError::NonConvergent`].
pub fn oscillatory_integrate<F>(
    axes: &[Axis],
    sigmas: &[f64],
    tol: Option<f64>,
    f: F,
) -> Result<DampedSeries>
where
    F: Fn(&[f64]) -> Complex64,
{
    if sigmas.is_empty() {
        return Err(TomoError::InvalidCount("need at least one damping width".into()));
    }
    for w in sigmas.windows(2) {
        if !(w[1] > 0.0 && w[1] < w[0]) {
            return Err(TomoError::InvalidBounds(
                "damping widths must be positive and strictly decreasing".into(),
            ));
        }
    }
    if sigmas[0] <= 0.0 {
        return Err(TomoError::InvalidBounds("damping widths must be positive".into()));
    }
    let mut values = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let s2 = sigma * sigma;
        let est = integrate_nd(axes, None, |x| {
            let r2: f64 = x.iter().map(|xi| xi * xi).sum();
            f(x) * (-0.5 * s2 * r2).exp()
        })?;
        values.push(est.value);
    }
    let scales: Vec<f64> = sigmas.iter().map(|s| s * s).collect();
    let (value, residual) = richardson_to_zero(&scales, &values)?;
    if let Some(t) = tol {
        if residual > t {
            return Err(TomoError::NonConvergent { residual, tolerance: t });
        }
    }
    Ok(DampedSeries { sigmas: sigmas.to_vec(), values, value, residual })
}

/// A unit-mass Gaussian test function of width `eps`, used to smear
/// distribution-valued quantities:
/// `g_eps(x) = exp(-x^2 / (2 eps^2)) / (eps sqrt(2 pi))`.
#[derive(Clone, Copy, Debug)]
pub struct TestFunction {
    eps: f64,
}

impl TestFunction {
    /// Width of the test function.
    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Value at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let u = x / self.eps;
        (-0.5 * u * u).exp() / (self.eps * (2.0 * std::f64::consts::PI).sqrt())
    }

    /// Fourier transform `integral g_eps(x) exp(-i k x) dx = exp(-eps^2 k^2 / 2)`
    /// (real and even in `k`).
    pub fn fourier(&self, k: f64) -> f64 {
        (-0.5 * self.eps * self.eps * k * k).exp()
    }

    /// Radius beyond which the test function is numerically negligible.
    pub fn radius(&self) -> f64 {
        8.0 * self.eps
    }
}

/// Builds the unit-mass Gaussian test function of width `eps > 0`.
pub fn delta_smear(eps: f64) -> Result<TestFunction> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(TomoError::InvalidBounds(format!("test width must be > 0, got {eps}")));
    }
    Ok(TestFunction { eps })
}
