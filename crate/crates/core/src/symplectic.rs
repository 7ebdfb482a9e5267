//! The line-integral (homogeneous) tomographic map and its filtered
//! back-projection inverse.
//!
//! Forward: `w(X, mu, nu) = integral f(q, p) delta(X - mu q - nu p) dq dp`.
//! The map is homogeneous of degree -1, `w(s X, s mu, s nu) = w(X, mu, nu)/|s|`,
//! which the implementation guarantees by construction: every direction is
//! reduced to the unit circle before integrating.
//!
//! Inverse: `f(q, p) = (1/4 pi^2) integral w(X, mu, nu)
//! exp(i (X - mu q - nu p)) dX dmu dnu`, evaluated in the angle-reduced form
//! `f = (1/2 pi) integral_0^pi g(q cos t + p sin t, t) dt` where `g` is the
//! ramp-filtered tomogram row.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Result, TomoError};
use crate::phase_space::{Grid, PhaseSpaceFunction, StateSpec};
use crate::poly::hermite_functions;
use crate::tomogram::{PolarTomogram, Range};

/// Directions shorter than this are rejected as degenerate.
pub const MIN_DIRECTION: f64 = 1e-12;

/// Minimal number of angles accepted by the inverse.
pub const MIN_ANGLES: usize = 8;

/// Relative boundary magnitude above which a field/tomogram counts as
/// truncated by its lattice.
pub(crate) const TRUNCATION_RATIO: f64 = 1e-5;

/// Line integral of `f` along `mu q + nu p = X` for a unit direction
/// `(cos theta, sin theta)`. Uses the field's closed form when it has one,
/// bilinear interpolation of the samples otherwise.
fn line_integral_unit(f: &PhaseSpaceFunction, s: f64, theta: f64) -> Complex64 {
    let grid = f.grid();
    let (ct, st) = (theta.cos(), theta.sin());
    // Points on the line: (q, p) = s (ct, st) + t (-st, ct).
    // Clip the parameter t against the grid rectangle.
    let (qmin, qmax) = grid.q_bounds();
    let (pmin, pmax) = grid.p_bounds();
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    // q(t) = s ct - t st in [qmin, qmax]; p(t) = s st + t ct in [pmin, pmax].
    let clips = [(-st, s * ct, qmin, qmax), (ct, s * st, pmin, pmax)];
    for (a, b, lo, hi) in clips {
        if a.abs() < 1e-15 {
            if b < lo || b > hi {
                return Complex64::new(0.0, 0.0);
            }
        } else {
            let (ta, tb) = ((lo - b) / a, (hi - b) / a);
            let (ta, tb) = if ta <= tb { (ta, tb) } else { (tb, ta) };
            t0 = t0.max(ta);
            t1 = t1.min(tb);
        }
    }
    if t0 >= t1 {
        return Complex64::new(0.0, 0.0);
    }
    let step = 0.5 * grid.dq().min(grid.dp());
    let n = (((t1 - t0) / step).ceil() as usize).max(2);
    let h = (t1 - t0) / n as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..=n {
        let t = t0 + h * k as f64;
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        acc += f.eval(s * ct - t * st, s * st + t * ct) * (w * h);
    }
    acc
}

/// Forward transform at a single phase-space covector `(X, mu, nu)`.
///
/// The direction is normalized first, so the degree -1 homogeneity is exact.
pub fn radon_forward(f: &PhaseSpaceFunction, x: f64, mu: f64, nu: f64) -> Result<Complex64> {
    let r = mu.hypot(nu);
    if r < MIN_DIRECTION {
        return Err(TomoError::DegenerateDirection { r, min: MIN_DIRECTION });
    }
    Ok(line_integral_unit(f, x / r, nu.atan2(mu)) / r)
}

/// Forward transform sampled on a polar lattice.
///
/// Fails with [`TomoError::TruncatedSupport`] when `f` does not vanish at the
/// boundary of its grid — the line integrals would silently lose mass.
pub fn radon_forward_grid(
    f: &PhaseSpaceFunction,
    xs: Range,
    thetas: &[f64],
) -> Result<PolarTomogram> {
    let ratio = f.boundary_ratio();
    if ratio > TRUNCATION_RATIO {
        return Err(TomoError::TruncatedSupport(format!(
            "field boundary magnitude is {ratio:.2e} of its peak"
        )));
    }
    let x_nodes = xs.nodes();
    let values = DMatrix::from_fn(x_nodes.len(), thetas.len(), |i, j| {
        line_integral_unit(f, x_nodes[i], thetas[j])
    });
    PolarTomogram::new(x_nodes, thetas.to_vec(), values)
}

/// Closed-form tomogram of a state spec at `(X, mu, nu)` — the oracle used to
/// validate the numerical forward transform.
///
/// Gaussian specs project to Gaussians: the marginal of direction `(mu, nu)`
/// has mean `mu <q> + nu <p>` and variance `mu^2 Vq + 2 mu nu Cqp + nu^2 Vp`.
/// Number states use the oscillator eigenfunctions:
/// `w = psi_n(X/r)^2 / r` with `r = |(mu, nu)|`.
pub fn analytic_tomogram(spec: &StateSpec, x: f64, mu: f64, nu: f64) -> Result<f64> {
    let r = mu.hypot(nu);
    if r < MIN_DIRECTION {
        return Err(TomoError::DegenerateDirection { r, min: MIN_DIRECTION });
    }
    if let Some((mean, cov)) = spec.gaussian_moments() {
        let m = mu * mean[0] + nu * mean[1];
        let v = mu * mu * cov[0][0] + 2.0 * mu * nu * cov[0][1] + nu * nu * cov[1][1];
        let d = x - m;
        Ok((-0.5 * d * d / v).exp() / (2.0 * std::f64::consts::PI * v).sqrt())
    } else if let StateSpec::Fock { n } = spec {
        let psi = hermite_functions(*n, x / r);
        Ok(psi[*n] * psi[*n] / r)
    } else {
        Err(TomoError::UnsupportedScheme("no closed-form tomogram for this spec".into()))
    }
}

/// Ramp filter with a raised-cosine rolloff above `0.8 * r_max`.
pub(crate) fn ramp_filter(r: f64, r_max: f64) -> f64 {
    let a = r.abs();
    if a <= 0.8 * r_max {
        a
    } else if a <= r_max {
        let t = (a - 0.8 * r_max) / (0.2 * r_max);
        a * (0.5 * std::f64::consts::PI * t).cos().powi(2)
    } else {
        0.0
    }
}

/// Folds a full-circle tomogram onto `[0, pi)` using
/// `w(X, theta + pi) = w(-X, theta)`; returns a half-turn tomogram.
fn fold_half_turn(t: &PolarTomogram) -> Result<PolarTomogram> {
    let n_theta = t.thetas().len();
    if n_theta % 2 != 0 {
        return Err(TomoError::IncompatibleLattices(
            "full-circle lattice needs an even number of angles to fold".into(),
        ));
    }
    let half = n_theta / 2;
    let nx = t.xs().len();
    let mut values = DMatrix::from_element(nx, half, Complex64::new(0.0, 0.0));
    for j in 0..half {
        for i in 0..nx {
            // Mirror in X: the lattice is uniform, so index nx-1-i negates x
            // when the lattice is symmetric. Verify symmetry once below.
            values[(i, j)] = (t.values()[(i, j)] + t.values()[(nx - 1 - i, j + half)]) * 0.5;
        }
    }
    let xs = t.xs();
    if (xs[0] + xs[nx - 1]).abs() > 1e-9 * (1.0 + xs[nx - 1].abs()) {
        return Err(TomoError::IncompatibleLattices(
            "folding a full-circle tomogram needs an X lattice symmetric about 0".into(),
        ));
    }
    PolarTomogram::new(xs.to_vec(), t.thetas()[..half].to_vec(), values)
}

/// Ramp-filtered tomogram rows synthesized on a dense `s`-lattice, one row
/// per angle of a half-turn tomogram. This is the angle-resolved core shared
/// by the filtered back-projection and by operator reconstruction, which
/// consume the same rows with different weights.
pub(crate) struct FilteredRows {
    g: DMatrix<Complex64>,
    s0: f64,
    ds: f64,
    thetas: Vec<f64>,
    theta_step: f64,
}

impl FilteredRows {
    pub(crate) fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub(crate) fn theta_step(&self) -> f64 {
        self.theta_step
    }

    /// Row `j` at abscissa `s`, by linear interpolation on the dense lattice
    /// (zero outside the synthesized window, where the rows have decayed).
    pub(crate) fn eval(&self, j: usize, s: f64) -> Complex64 {
        let n = self.g.nrows();
        let u = (s - self.s0) / self.ds;
        if !(0.0..=(n - 1) as f64).contains(&u) {
            return Complex64::new(0.0, 0.0);
        }
        let k = (u.floor() as usize).min(n - 2);
        let frac = u - k as f64;
        self.g[(k, j)] * (1.0 - frac) + self.g[(k + 1, j)] * frac
    }
}

/// Validates an inversion input and reduces it to a half-turn tomogram:
/// the angle lattice must openly cover `[0, pi)` (a full-circle lattice is
/// folded) with at least [`MIN_ANGLES`] angles, and the tomogram must decay
/// at its X boundary.
fn validated_half_turn(tomogram: &PolarTomogram) -> Result<PolarTomogram> {
    let span = tomogram.theta_span();
    let two_pi = 2.0 * std::f64::consts::PI;
    let t = if (span - two_pi).abs() < 1e-6 {
        fold_half_turn(tomogram)?
    } else if (span - std::f64::consts::PI).abs() < 1e-6 {
        tomogram.clone()
    } else {
        return Err(TomoError::IncompatibleLattices(format!(
            "inverse needs an open uniform angle lattice covering pi or 2 pi, got span {span}"
        )));
    };
    let n_theta = t.thetas().len();
    if n_theta < MIN_ANGLES {
        return Err(TomoError::InsufficientAngles { got: n_theta, need: MIN_ANGLES });
    }
    let edge = t.x_boundary_ratio();
    if edge > TRUNCATION_RATIO {
        return Err(TomoError::TruncatedSupport(format!(
            "tomogram X-boundary magnitude is {edge:.2e} of its peak"
        )));
    }
    Ok(t)
}

/// Per-angle X-Fourier transforms of a half-turn tomogram on the uniform
/// signed-frequency lattice of its zero-padded FFT:
/// `f[(k, j)] ~= int w(X, theta_j) e^{-i r_k X} dX`.
pub(crate) struct AngleSpectrum {
    /// `m x n_theta` spectra in FFT index order.
    pub f: DMatrix<Complex64>,
    /// Signed frequency of each row of `f`.
    pub rs: Vec<f64>,
    /// Frequency step.
    pub dr: f64,
    /// Nyquist limit of the X lattice; entries beyond it are meaningless.
    pub r_max: f64,
    pub thetas: Vec<f64>,
    pub theta_step: f64,
}

/// Computes [`AngleSpectrum`] after the same validation as the filtered
/// inverse. The zero padding matches the filtered rows, so consumers of both
/// see the same frequency resolution.
pub(crate) fn angle_spectrum(tomogram: &PolarTomogram) -> Result<AngleSpectrum> {
    let t = validated_half_turn(tomogram)?;
    let nx = t.xs().len();
    let n_theta = t.thetas().len();
    let dx = t.x_step();
    let m = (16 * nx).next_power_of_two();
    let offset = (m - nx) / 2;
    let s0 = t.xs()[0] - offset as f64 * dx;
    let dr = 2.0 * std::f64::consts::PI / (m as f64 * dx);
    let r_max = std::f64::consts::PI / dx;

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(m);
    let mut f = DMatrix::from_element(m, n_theta, Complex64::new(0.0, 0.0));
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    let rs: Vec<f64> =
        (0..m).map(|k| if k <= m / 2 { k as f64 * dr } else { (k as f64 - m as f64) * dr }).collect();
    for j in 0..n_theta {
        buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for i in 0..nx {
            buf[offset + i] = t.values()[(i, j)];
        }
        fft.process(&mut buf);
        for k in 0..m {
            // The raw DFT carries 1/dx and a phase anchored at the padded
            // lattice origin relative to the continuous transform.
            f[(k, j)] = buf[k] * Complex64::from_polar(dx, -rs[k] * s0);
        }
    }
    Ok(AngleSpectrum { f, rs, dr, r_max, thetas: t.thetas().to_vec(), theta_step: t.theta_step() })
}

/// Validates a tomogram for filtered inversion and computes its ramp-filtered
/// rows `g(s, theta) = (1/2 pi) int |r| F_theta(r) e^{i r s} dr`, where
/// `F_theta` is the X-Fourier transform of the tomogram at fixed angle.
///
/// Requirements as for [`validated_half_turn`], plus an X step no coarser
/// than `dx_limit` when one is given.
pub(crate) fn filtered_rows(
    tomogram: &PolarTomogram,
    dx_limit: Option<f64>,
) -> Result<FilteredRows> {
    let t = validated_half_turn(tomogram)?;
    let n_theta = t.thetas().len();
    let dx = t.x_step();
    if let Some(limit) = dx_limit {
        if dx > limit * (1.0 + 1e-12) {
            return Err(TomoError::AliasedSpectrum { dx, limit });
        }
    }
    let two_pi = 2.0 * std::f64::consts::PI;

    let nx = t.xs().len();
    // 16x spectral oversampling, power-of-two for the FFT. The generous
    // padding keeps the rectangle-rule bias of the sampled ramp (which scales
    // as the square of the frequency step) below the round-trip tolerances.
    let m = (16 * nx).next_power_of_two();
    // Output refinement: the filtered rows are synthesized on a grid `refine`
    // times denser than the tomogram, so the linear interpolation used during
    // back-projection stays below the round-trip tolerances as well.
    let refine = 4;
    let mu = m * refine;
    let offset = (m - nx) / 2;
    let s0 = t.xs()[0] - offset as f64 * dx;
    let ds = dx / refine as f64;
    let r_max = std::f64::consts::PI / dx;
    let dr = two_pi / (m as f64 * dx);

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(m);
    let ifft = planner.plan_fft_inverse(mu);

    // Filtered rows g(s_j, theta): pad, transform, apply the ramp, then embed
    // the spectrum in a `refine` times longer array to synthesize g on the
    // dense s-grid.
    let mut g = DMatrix::from_element(mu, n_theta, Complex64::new(0.0, 0.0));
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    let mut dense = vec![Complex64::new(0.0, 0.0); mu];
    for j in 0..n_theta {
        buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for i in 0..nx {
            buf[offset + i] = t.values()[(i, j)];
        }
        fft.process(&mut buf);
        dense.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for k in 0..m {
            let r = if k <= m / 2 { k as f64 * dr } else { (k as f64 - m as f64) * dr };
            let filtered = buf[k] * ramp_filter(r, r_max);
            // Embed at the same signed frequency in the longer spectrum.
            let idx = if k <= m / 2 { k } else { mu - (m - k) };
            dense[idx] = filtered;
        }
        ifft.process(&mut dense);
        // Scales: the forward FFT carries dx exp(-i r x0) relative to the
        // continuous transform, the r-integral carries (1/2 pi) dr, and the
        // phases cancel on the aligned s-grid; everything combines to 1/m.
        for i in 0..mu {
            g[(i, j)] = dense[i] / m as f64;
        }
    }

    Ok(FilteredRows { g, s0, ds, thetas: t.thetas().to_vec(), theta_step: t.theta_step() })
}

/// Filtered back-projection inverse of a line-integral tomogram.
///
/// Requirements: at least [`MIN_ANGLES`] uniform angles covering `[0, pi)`
/// openly (a full-circle lattice is folded automatically), an X step no
/// coarser than the target grid step, and a tomogram that decays at its X
/// boundary.
pub fn radon_inverse(tomogram: &PolarTomogram, grid: &Grid) -> Result<PhaseSpaceFunction> {
    let limit = grid.dq().min(grid.dp());
    let rows = filtered_rows(tomogram, Some(limit))?;

    // Back-projection: f(q, p) = (1/2 pi) sum_theta g(q cos + p sin) dtheta.
    let scale = rows.theta_step() / (2.0 * std::f64::consts::PI);
    let mut values = DMatrix::from_element(grid.nq(), grid.np(), Complex64::new(0.0, 0.0));
    for (j, &theta) in rows.thetas().iter().enumerate() {
        let (ct, st) = (theta.cos(), theta.sin());
        for iq in 0..grid.nq() {
            let q = grid.q(iq);
            for ip in 0..grid.np() {
                let s = q * ct + grid.p(ip) * st;
                values[(iq, ip)] += rows.eval(j, s) * scale;
            }
        }
    }
    PhaseSpaceFunction::from_samples(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::make_grid;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn vacuum_field() -> PhaseSpaceFunction {
        let grid = make_grid(-5.0, 5.0, -5.0, 5.0, 101, 101).unwrap();
        PhaseSpaceFunction::from_state(&StateSpec::Coherent { alpha: [0.0, 0.0] }, &grid).unwrap()
    }

    #[test]
    fn vacuum_marginal_at_origin_direction_q() {
        // w(0, 1, 0) = 1/sqrt(pi) for the vacuum state.
        let w = radon_forward(&vacuum_field(), 0.0, 1.0, 0.0).unwrap();
        assert!((w.re - 0.564_189_583_547_756_3).abs() < 1e-9, "w = {}", w.re);
        assert!(w.im.abs() < 1e-15);
    }

    #[test]
    fn scaling_the_covector_rescales_the_value() {
        // w(0, 2, 0) = w(0, 1, 0) / 2 — exactly, by construction.
        let f = vacuum_field();
        let w1 = radon_forward(&f, 0.0, 1.0, 0.0).unwrap();
        let w2 = radon_forward(&f, 0.0, 2.0, 0.0).unwrap();
        assert!((w2.re - w1.re / 2.0).abs() < 1e-15);
        assert!((w2.re - 0.282).abs() < 2e-3);
    }

    #[test]
    fn degenerate_direction_rejected() {
        let f = vacuum_field();
        assert!(matches!(
            radon_forward(&f, 0.0, 0.0, 0.0),
            Err(TomoError::DegenerateDirection { .. })
        ));
    }

    #[test]
    fn numeric_forward_matches_closed_form() {
        let spec = StateSpec::Coherent { alpha: [1.0, 0.5] };
        let grid = make_grid(-6.0, 6.0, -6.0, 6.0, 121, 121).unwrap();
        let f = PhaseSpaceFunction::from_state(&spec, &grid).unwrap();
        // A sample-only copy exercises the bilinear fallback.
        let sampled = PhaseSpaceFunction::from_samples(&grid, f.values().clone()).unwrap();
        let mut worst_analytic = 0.0f64;
        let mut worst_sampled = 0.0f64;
        for &theta in &[0.0f64, 0.7, 1.9, 2.9] {
            for k in -10..=10 {
                let x = 0.35 * k as f64;
                let (mu, nu) = (theta.cos(), theta.sin());
                let exact = analytic_tomogram(&spec, x, mu, nu).unwrap();
                let a = radon_forward(&f, x, mu, nu).unwrap().re;
                let b = radon_forward(&sampled, x, mu, nu).unwrap().re;
                worst_analytic = worst_analytic.max((a - exact).abs());
                worst_sampled = worst_sampled.max((b - exact).abs());
            }
        }
        assert!(worst_analytic < 1e-9, "closed-form path deviates by {worst_analytic}");
        assert!(worst_sampled < 2e-3, "bilinear path deviates by {worst_sampled}");
    }

    #[test]
    fn fock_closed_form_tomogram() {
        // |1>: w(X, 1, 0) = 2 X^2 exp(-X^2) / sqrt(pi).
        let w = analytic_tomogram(&StateSpec::Fock { n: 1 }, 1.0, 1.0, 0.0).unwrap();
        assert!((w - 2.0 * (-1.0f64).exp() / PI.sqrt()).abs() < 1e-14);
        // Homogeneity of the closed form.
        let w2 = analytic_tomogram(&StateSpec::Fock { n: 1 }, 2.0, 2.0, 0.0).unwrap();
        assert!((w2 - w / 2.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_round_trip_vacuum() {
        let spec = StateSpec::Coherent { alpha: [0.0, 0.0] };
        let grid = make_grid(-4.0, 4.0, -4.0, 4.0, 81, 81).unwrap();
        let f = PhaseSpaceFunction::from_state(&spec, &grid).unwrap();
        let thetas = Range::new(0.0, PI, 32).unwrap().nodes_open();
        let tomogram = radon_forward_grid(&f, Range::new(-6.0, 6.0, 121).unwrap(), &thetas).unwrap();
        let back = radon_inverse(&tomogram, &grid).unwrap();
        let err = back.rel_l2_distance(&f).unwrap();
        assert!(err < 1e-3, "relative L2 error {err}");
        // Spot value at the origin: 1/pi.
        assert!((back.values()[(40, 40)].re - 1.0 / PI).abs() < 1e-4);
    }

    #[test]
    fn inverse_validations() {
        let f = vacuum_field();
        let thetas4 = Range::new(0.0, PI, 4).unwrap().nodes_open();
        let t = radon_forward_grid(&f, Range::new(-6.0, 6.0, 121).unwrap(), &thetas4).unwrap();
        let grid = make_grid(-4.0, 4.0, -4.0, 4.0, 81, 81).unwrap();
        assert!(matches!(
            radon_inverse(&t, &grid),
            Err(TomoError::InsufficientAngles { got: 4, need: 8 })
        ));

        let thetas = Range::new(0.0, PI, 16).unwrap().nodes_open();
        let coarse = radon_forward_grid(&f, Range::new(-6.0, 6.0, 25).unwrap(), &thetas).unwrap();
        assert!(matches!(radon_inverse(&coarse, &grid), Err(TomoError::AliasedSpectrum { .. })));

        let narrow = radon_forward_grid(&f, Range::new(-1.0, 1.0, 41).unwrap(), &thetas).unwrap();
        assert!(matches!(radon_inverse(&narrow, &grid), Err(TomoError::TruncatedSupport(_))));
    }

    #[test]
    fn forward_rejects_truncated_field() {
        let grid = make_grid(-1.0, 1.0, -1.0, 1.0, 21, 21).unwrap();
        let f = PhaseSpaceFunction::from_state(&StateSpec::Coherent { alpha: [0.0, 0.0] }, &grid)
            .unwrap();
        let thetas = Range::new(0.0, PI, 8).unwrap().nodes_open();
        assert!(matches!(
            radon_forward_grid(&f, Range::new(-2.0, 2.0, 41).unwrap(), &thetas),
            Err(TomoError::TruncatedSupport(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn homogeneity_under_rescaling(
            x in -2.0f64..2.0,
            theta in 0.0f64..PI,
            lambda in prop::sample::select(vec![-2.0f64, 0.5, 3.0]),
        ) {
            let f = vacuum_field();
            let (mu, nu) = (theta.cos(), theta.sin());
            let base = radon_forward(&f, x, mu, nu).unwrap();
            let scaled = radon_forward(&f, lambda * x, lambda * mu, lambda * nu).unwrap();
            let expected = base / lambda.abs();
            prop_assert!((scaled - expected).norm() <= 1e-6 * (1.0 + expected.norm()));
        }
    }
}
