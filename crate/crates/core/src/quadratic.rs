//! Circle-average (quadratic) tomography.
//!
//! The forward map averages a phase-space function over circles: the slice
//! condition `X = (q - mu)^2 + (p - nu)^2` reduces to
//! `w(X, mu, nu) = (1/2) integral_0^{2pi} f(mu + sqrt(X) cos t, nu + sqrt(X)
//! sin t) dt` for `X > 0` (the 1/2 is the Jacobian of the squared radius) and
//! to zero for `X <= 0`.
//!
//! The inverse is the oscillatory transform
//! `f(q,p) = (c/pi) integral w(X, mu, nu) exp(i[X - (q-mu)^2 - (p-nu)^2])
//! dX dmu dnu`, regularized by a Gaussian damping `exp(-s^2 (mu^2+nu^2)/2)`
//! and extrapolated to `s -> 0`. The transform carries a conventional `1/pi`
//! prefactor; the completeness constant `c` multiplying it is calibrated
//! empirically ([`calibrate_inverse_constant`]) and lands near `1/pi`, i.e.
//! the exact inverse carries `1/pi^2` in total.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, TomoError};
use crate::phase_space::{Grid, PhaseSpaceFunction, StateSpec};
use crate::quadrature::richardson_to_zero;
use crate::tomogram::{CenterTomogram, Range};

/// Damping levels used by the regularized inverse before extrapolation.
pub const DAMPING_LEVELS: [f64; 3] = [0.4, 0.2, 0.1];

/// Circle average of `f` for squared radius `x` around center `(mu, nu)`.
///
/// Exactly zero for `x <= 0`. Uses the periodic trapezoid rule with adaptive
/// doubling (spectrally accurate for smooth integrands). Fields without an
/// analytic backing can only be averaged while the circle stays inside their
/// grid; otherwise the call fails with [`TomoError::TruncatedSupport`].
pub fn circle_forward(f: &PhaseSpaceFunction, x: f64, mu: f64, nu: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    let r = x.sqrt();
    if f.analytic().is_none() {
        let (qlo, qhi) = f.grid().q_bounds();
        let (plo, phi) = f.grid().p_bounds();
        if mu - r < qlo || mu + r > qhi || nu - r < plo || nu + r > phi {
            return Err(TomoError::TruncatedSupport(format!(
                "circle of radius {r:.3} around ({mu:.3}, {nu:.3}) exits the sampled region"
            )));
        }
    }
    let average = |n: usize| -> f64 {
        let mut acc = 0.0;
        for k in 0..n {
            let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            acc += f.eval(mu + r * t.cos(), nu + r * t.sin()).re;
        }
        acc / n as f64
    };
    let mut n = 32usize.max((8.0 * r).ceil() as usize);
    let mut prev = average(n);
    loop {
        n *= 2;
        let next = average(n);
        if (next - prev).abs() <= 1e-12 * (1.0 + next.abs()) || n >= 4096 {
            // Jacobian 1/2 of the squared-radius delta times the angular
            // measure 2*pi*average/2pi collapses to pi * average.
            return Ok(std::f64::consts::PI * next);
        }
        prev = next;
    }
}

/// Tabulates the circle transform on an `(X, mu, nu)` lattice.
pub fn circle_forward_grid(
    f: &PhaseSpaceFunction,
    xs: Range,
    mus: Range,
    nus: Range,
) -> Result<CenterTomogram> {
    let x_nodes = xs.nodes();
    let mu_nodes = mus.nodes();
    let nu_nodes = nus.nodes();
    let mut values =
        vec![Complex64::new(0.0, 0.0); x_nodes.len() * mu_nodes.len() * nu_nodes.len()];
    let mut idx = 0;
    for &x in &x_nodes {
        for &mu in &mu_nodes {
            for &nu in &nu_nodes {
                values[idx] = Complex64::new(circle_forward(f, x, mu, nu)?, 0.0);
                idx += 1;
            }
        }
    }
    CenterTomogram::new(x_nodes, mu_nodes, nu_nodes, values)
}

/// The X-integrated tomogram `S(mu, nu) = integral w(X, mu, nu) exp(iX) dX`
/// (trapezoid over the lattice, rows below `1e-8 * max |w|` dropped).
///
/// The transform is zero AT `X = 0` by convention but tends to `pi f(mu, nu)`
/// as `X -> 0+`; when the lattice starts exactly at zero, the first row is
/// replaced by its parabolic extrapolation from the next three rows so the
/// trapezoid sees the one-sided limit instead of the convention value.
pub(crate) fn x_reduced(w: &CenterTomogram) -> DMatrix<Complex64> {
    let xs = w.xs();
    let (nmu, nnu) = (w.mus().len(), w.nus().len());
    let peak = w
        .values()
        .iter()
        .map(|v| v.norm())
        .fold(0.0f64, f64::max);
    let fix_origin = xs[0] == 0.0 && xs.len() >= 4;
    let row_value = |ix: usize, im: usize, inu: usize| -> Complex64 {
        if ix == 0 && fix_origin {
            w.value(1, im, inu) * 3.0 - w.value(2, im, inu) * 3.0 + w.value(3, im, inu)
        } else {
            w.value(ix, im, inu)
        }
    };
    let mut s = DMatrix::from_element(nmu, nnu, Complex64::new(0.0, 0.0));
    for (ix, &x) in xs.iter().enumerate() {
        let mut row_peak = 0.0f64;
        for im in 0..nmu {
            for inu in 0..nnu {
                row_peak = row_peak.max(row_value(ix, im, inu).norm());
            }
        }
        if row_peak < 1e-8 * peak {
            continue;
        }
        let trap = if ix == 0 || ix == xs.len() - 1 { 0.5 } else { 1.0 };
        let weight = Complex64::new(0.0, x).exp() * (trap * w.x_step());
        for im in 0..nmu {
            for inu in 0..nnu {
                s[(im, inu)] += row_value(ix, im, inu) * weight;
            }
        }
    }
    s
}

/// Single-damping-level inverse (see module docs); `sigma > 0`.
///
/// Exposed mainly for convergence studies; [`quadratic_inverse`] extrapolates
/// over [`DAMPING_LEVELS`].
pub fn quadratic_inverse_damped(
    w: &CenterTomogram,
    grid: &Grid,
    sigma: f64,
    c: f64,
) -> Result<PhaseSpaceFunction> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(TomoError::InvalidBounds(format!(
            "damping level must be > 0, got {sigma}"
        )));
    }
    let s = x_reduced(w);
    Ok(assemble_inverse(&s, w, grid, sigma, c))
}

/// Dense factorized evaluation of the damped inverse from the X-reduced
/// tomogram: `f = (c/pi) e^{-i(q^2+p^2)} M_q S M_p^T` with
/// `M_q[i,k] = exp(2i q_i mu_k) exp(-i mu_k^2) exp(-sigma^2 mu_k^2 / 2) dmu`.
fn assemble_inverse(
    s: &DMatrix<Complex64>,
    w: &CenterTomogram,
    grid: &Grid,
    sigma: f64,
    c: f64,
) -> PhaseSpaceFunction {
    let phase_matrix = |outs: &[f64], centers: &[f64], step: f64| -> DMatrix<Complex64> {
        DMatrix::from_fn(outs.len(), centers.len(), |i, k| {
            let m = centers[k];
            let damp = (-0.5 * sigma * sigma * m * m).exp();
            // Trapezoid end weights on the center lattice.
            let trap = if k == 0 || k == centers.len() - 1 { 0.5 } else { 1.0 };
            Complex64::new(0.0, 2.0 * outs[i] * m - m * m).exp() * (damp * trap * step)
        })
    };
    let qs: Vec<f64> = (0..grid.nq()).map(|i| grid.q(i)).collect();
    let ps: Vec<f64> = (0..grid.np()).map(|j| grid.p(j)).collect();
    let mq = phase_matrix(&qs, w.mus(), w.mu_step());
    let mp = phase_matrix(&ps, w.nus(), w.nu_step());
    let inner = &mq * s * mp.transpose();
    let scale = c / std::f64::consts::PI;
    let values = DMatrix::from_fn(grid.nq(), grid.np(), |i, j| {
        let chirp = Complex64::new(0.0, -(qs[i] * qs[i] + ps[j] * ps[j])).exp();
        inner[(i, j)] * chirp * scale
    });
    PhaseSpaceFunction::from_samples(grid, values).expect("grid-shaped values")
}

/// Regularized inverse extrapolated over [`DAMPING_LEVELS`].
///
/// Fails with [`TomoError::NonConvergent`] when the extrapolation residual is
/// large against the reconstruction scale, or when restricting the `(mu, nu)`
/// lattice to its central half changes the result substantially (the lattice
/// does not cover the state).
pub fn quadratic_inverse(w: &CenterTomogram, grid: &Grid, c: f64) -> Result<PhaseSpaceFunction> {
    let full = extrapolated_inverse(w, grid, c)?;
    // Domain-coverage check on the half lattice.
    let half = w.central_half()?;
    let half_inv = extrapolated_inverse(&half, grid, c)?;
    let scale = full
        .values()
        .iter()
        .map(|v| v.norm())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for (a, b) in full.values().iter().zip(half_inv.values().iter()) {
        worst = worst.max((a - b).norm());
    }
    if worst > 0.25 * scale {
        return Err(TomoError::NonConvergent {
            residual: worst / scale,
            tolerance: 0.25,
        });
    }
    Ok(full)
}

fn extrapolated_inverse(w: &CenterTomogram, grid: &Grid, c: f64) -> Result<PhaseSpaceFunction> {
    let s = x_reduced(w);
    let mut fields = Vec::with_capacity(DAMPING_LEVELS.len());
    for &sigma in &DAMPING_LEVELS {
        fields.push(assemble_inverse(&s, w, grid, sigma, c));
    }
    // Pointwise Richardson extrapolation in sigma^2 -> 0.
    let s2: Vec<f64> = DAMPING_LEVELS.iter().map(|s| s * s).collect();
    let mut values = DMatrix::from_element(grid.nq(), grid.np(), Complex64::new(0.0, 0.0));
    let mut residual = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..grid.nq() {
        for j in 0..grid.np() {
            let samples: Vec<Complex64> = fields.iter().map(|f| f.values()[(i, j)]).collect();
            let (v, r) = richardson_to_zero(&s2, &samples)?;
            values[(i, j)] = v;
            residual = residual.max(r);
            scale = scale.max(v.norm());
        }
    }
    if residual > 0.25 * scale.max(f64::MIN_POSITIVE) {
        return Err(TomoError::NonConvergent {
            residual: residual / scale.max(f64::MIN_POSITIVE),
            tolerance: 0.25,
        });
    }
    PhaseSpaceFunction::from_samples(grid, values)
}

/// Default forward lattice for calibration/round-trip work around states with
/// support inside `|z| <~ radius`.
pub fn default_lattice(radius: f64) -> Result<(Range, Range, Range)> {
    let span = radius + 1.0;
    let reach = 2.0 * span + 1.0;
    let x_max = reach * reach;
    let dx = 0.25;
    let n_x = (x_max / dx).round() as usize + 1;
    let n_c = (2.0 * span / 0.25).round() as usize + 1;
    Ok((
        Range::new(0.0, x_max, n_x)?,
        Range::new(-span, span, n_c)?,
        Range::new(-span, span, n_c)?,
    ))
}

/// Least-squares completeness constant for the regularized inverse measured
/// on a reference state: runs forward + inverse with `c = 1` and projects the
/// reference onto the reconstruction.
pub fn calibrate_inverse_constant(reference: &StateSpec) -> Result<f64> {
    let grid = crate::phase_space::make_grid(-3.5, 3.5, -3.5, 3.5, 57, 57)?;
    let f = PhaseSpaceFunction::from_state(reference, &grid)?;
    let (xs, mus, nus) = default_lattice(3.5)?;
    let w = circle_forward_grid(&f, xs, mus, nus)?;
    let rec = quadratic_inverse(&w, &grid, 1.0)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in f.values().iter().zip(rec.values().iter()) {
        num += (a.conj() * b).re;
        den += (b.conj() * b).re;
    }
    if den <= 0.0 {
        return Err(TomoError::NonConvergent {
            residual: f64::INFINITY,
            tolerance: 1.0,
        });
    }
    Ok(num / den)
}

/// Calibrates on several reference states and checks their constants agree
/// within 5%; returns the first reference's constant.
pub fn calibrate_inverse_checked(references: &[StateSpec]) -> Result<f64> {
    let mut first = None;
    for reference in references {
        let c = calibrate_inverse_constant(reference)?;
        match first {
            None => first = Some(c),
            Some(c0) => {
                let spread = (c - c0).abs() / c0.abs();
                if spread > 0.05 {
                    return Err(TomoError::CalibrationUnstable { spread, limit: 0.05 });
                }
            }
        }
    }
    first.ok_or_else(|| TomoError::InvalidCount("no reference states supplied".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::make_grid;
    use std::f64::consts::PI;

    fn state_fn(spec: StateSpec) -> PhaseSpaceFunction {
        let grid = make_grid(-5.0, 5.0, -5.0, 5.0, 81, 81).unwrap();
        PhaseSpaceFunction::from_state(&spec, &grid).unwrap()
    }

    fn vacuum() -> PhaseSpaceFunction {
        state_fn(StateSpec::Coherent { alpha: [0.0, 0.0] })
    }

    #[test]
    fn vacuum_circle_average_is_exponential() {
        let f = vacuum();
        for x in [0.25, 1.0, 2.5, 9.0] {
            let v = circle_forward(&f, x, 0.0, 0.0).unwrap();
            assert!((v - (-x).exp()).abs() < 1e-12, "X = {x}: {v}");
        }
        assert!((circle_forward(&f, 1.0, 0.0, 0.0).unwrap() - 0.367_879_441_171_442_3).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_squared_radius_gives_zero() {
        let f = vacuum();
        assert_eq!(circle_forward(&f, -1.0, 0.3, -0.4).unwrap(), 0.0);
        assert_eq!(circle_forward(&f, 0.0, 0.3, -0.4).unwrap(), 0.0);
    }

    #[test]
    fn fock_one_circle_average() {
        // W_1 = (2(q^2+p^2) - 1) e^{-(q^2+p^2)} / pi averaged over the circle
        // of squared radius X around the origin: (2X - 1) e^{-X}.
        let f = state_fn(StateSpec::Fock { n: 1 });
        for x in [0.3, 1.0, 4.0] {
            let v = circle_forward(&f, x, 0.0, 0.0).unwrap();
            assert!((v - (2.0 * x - 1.0) * (-x).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn x_mass_is_unity() {
        // integral_0^inf w(X, 0, 0) dX = 1 for the unit-mass vacuum,
        // sampled by the midpoint rule (X = 0 itself is a convention zero).
        let f = vacuum();
        let n = 720;
        let dx = 36.0 / n as f64;
        let mut mass = 0.0;
        for i in 0..n {
            mass += circle_forward(&f, (i as f64 + 0.5) * dx, 0.0, 0.0).unwrap();
        }
        mass *= dx;
        assert!((mass - 1.0).abs() < 1e-3, "mass = {mass}");
    }

    #[test]
    fn translation_covariance() {
        // Averaging a displaced state equals averaging the original around
        // the displaced center.
        let shifted = state_fn(StateSpec::Coherent { alpha: [1.0, 0.0] });
        let base = vacuum();
        let d = 2.0f64.sqrt();
        for (x, mu, nu) in [(1.0, 0.0, 0.0), (2.0, 0.5, -1.0), (6.25, -1.0, 2.0)] {
            let a = circle_forward(&shifted, x, mu, nu).unwrap();
            let b = circle_forward(&base, x, mu - d, nu).unwrap();
            assert!((a - b).abs() < 1e-6, "({x}, {mu}, {nu}): {a} vs {b}");
        }
    }

    #[test]
    fn rotation_invariance_about_origin() {
        let f = vacuum();
        let base = circle_forward(&f, 2.0, 1.3, 0.0).unwrap();
        for k in 1..6 {
            let t = k as f64;
            let v = circle_forward(&f, 2.0, 1.3 * t.cos(), 1.3 * t.sin()).unwrap();
            assert!((v - base).abs() < 1e-10);
        }
    }

    #[test]
    fn sampled_field_requires_contained_circle() {
        let f = vacuum();
        let sampled =
            PhaseSpaceFunction::from_samples(f.grid(), f.values().clone()).unwrap();
        assert!(circle_forward(&sampled, 1.0, 0.0, 0.0).is_ok());
        let res = circle_forward(&sampled, 16.0, 3.0, 0.0);
        assert!(matches!(res, Err(TomoError::TruncatedSupport(_))));
    }

    #[test]
    fn zero_tomogram_inverts_to_zero() {
        let xs = Range::new(0.0, 4.0, 17).unwrap();
        let cs = Range::new(-2.0, 2.0, 9).unwrap();
        let n = 17 * 9 * 9;
        let w = CenterTomogram::new(
            xs.nodes(),
            cs.nodes(),
            cs.nodes(),
            vec![Complex64::new(0.0, 0.0); n],
        )
        .unwrap();
        let grid = make_grid(-2.0, 2.0, -2.0, 2.0, 21, 21).unwrap();
        let rec = quadratic_inverse_damped(&w, &grid, 0.2, 1.0).unwrap();
        assert!(rec.values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn vacuum_round_trip_with_calibrated_constant() {
        let grid = make_grid(-3.0, 3.0, -3.0, 3.0, 49, 49).unwrap();
        let f = PhaseSpaceFunction::from_state(&StateSpec::Coherent { alpha: [0.0, 0.0] }, &grid)
            .unwrap();
        let (xs, mus, nus) = default_lattice(3.0).unwrap();
        let w = circle_forward_grid(&f, xs, mus, nus).unwrap();
        let c = calibrate_inverse_constant(&StateSpec::Coherent { alpha: [0.0, 0.0] }).unwrap();
        assert!(
            (c - 1.0 / PI).abs() < 0.05 / PI,
            "calibrated constant {c} strays from 1/pi = {}",
            1.0 / PI
        );
        let rec = quadratic_inverse(&w, &grid, c).unwrap();
        let err = f.rel_l2_distance(&rec).unwrap();
        assert!(err < 5e-2, "round-trip rel L2 = {err}");
    }

    #[test]
    fn displaced_round_trip_peaks_at_displaced_center() {
        let grid = make_grid(-2.0, 4.0, -3.0, 3.0, 49, 49).unwrap();
        let spec = StateSpec::Coherent { alpha: [1.0, 0.0] };
        let f = PhaseSpaceFunction::from_state(&spec, &grid).unwrap();
        let (xs, mus, nus) = default_lattice(3.5).unwrap();
        let w = circle_forward_grid(&f, xs, mus, nus).unwrap();
        let rec = quadratic_inverse(&w, &grid, 1.0 / PI).unwrap();
        let mut best = (0usize, 0usize, 0.0f64);
        for i in 0..grid.nq() {
            for j in 0..grid.np() {
                let v = rec.values()[(i, j)].re;
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        let (q, p) = (grid.q(best.0), grid.p(best.1));
        assert!(
            (q - 2.0f64.sqrt()).abs() <= grid.dq() && p.abs() <= grid.dp(),
            "peak at ({q}, {p})"
        );
    }

    #[test]
    fn calibration_stable_across_references() {
        let refs = [
            StateSpec::Coherent { alpha: [0.0, 0.0] },
            StateSpec::Coherent { alpha: [1.0, 0.0] },
        ];
        let c = calibrate_inverse_checked(&refs).unwrap();
        assert!((c - 1.0 / PI).abs() < 0.05 / PI);
    }
}
