//! Finite-thickness line-integral tomography.
//!
//! A window profile `Xi` replaces the sharp slice: the thick tomogram is the
//! X-convolution of the ideal one, `w_Xi(X, mu, nu) = integral Xi(Y)
//! w(X - Y, mu, nu) dY`. The inverse and the composition kernels compensate
//! the window through the normalization constant
//! `N_Xi = 1 / integral Xi(z) exp(i z) dz`, which exists iff the window's
//! unit-frequency Fourier coefficient does not vanish.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::phase_space::PhaseSpaceFunction;
use crate::quadrature::composite_gauss_legendre;
use crate::symplectic::radon_forward;
use crate::tomogram::{PolarTomogram, Range};

/// Slice profile of the thick transform.
///
/// The rectangular window is the bare indicator of `[-delta/2, delta/2]`
/// (mass `delta`); the Gaussian window is the unit-mass density with standard
/// deviation `sigma`; a custom window is given by samples over an ascending
/// lattice and interpolated linearly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Window {
    Rectangular {
        delta: f64,
    },
    Gaussian {
        sigma: f64,
    },
    Custom {
        #[serde(rename = "Y")]
        ys: Vec<f64>,
        #[serde(rename = "Xi")]
        xi: Vec<f64>,
    },
}

impl Window {
    /// Parses a JSON description, e.g. `{"kind": "rectangular", "delta": 2.0}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let w: Window = serde_json::from_str(text)?;
        w.validate()?;
        Ok(w)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("window serializes")
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Window::Rectangular { delta } => {
                if !(delta.is_finite() && *delta > 0.0) {
                    return Err(TomoError::InvalidBounds(format!(
                        "rectangular width must be > 0, got {delta}"
                    )));
                }
            }
            Window::Gaussian { sigma } => {
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(TomoError::InvalidBounds(format!(
                        "gaussian width must be > 0, got {sigma}"
                    )));
                }
            }
            Window::Custom { ys, xi } => {
                if ys.len() != xi.len() || ys.len() < 2 {
                    return Err(TomoError::InvalidCount(format!(
                        "custom window needs matching sample arrays of length >= 2, got {} / {}",
                        ys.len(),
                        xi.len()
                    )));
                }
                if ys.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(TomoError::InvalidBounds(
                        "custom window lattice must be strictly ascending".into(),
                    ));
                }
                if xi.iter().any(|v| !v.is_finite()) {
                    return Err(TomoError::InvalidBounds(
                        "custom window samples must be finite".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Profile value at `z` (zero outside the support).
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            Window::Rectangular { delta } => {
                if z.abs() <= 0.5 * delta {
                    1.0
                } else {
                    0.0
                }
            }
            Window::Gaussian { sigma } => {
                let u = z / sigma;
                (-0.5 * u * u).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            Window::Custom { ys, xi } => {
                if z < ys[0] || z > ys[ys.len() - 1] {
                    return 0.0;
                }
                let i = match ys.binary_search_by(|probe| probe.total_cmp(&z)) {
                    Ok(i) => return xi[i],
                    Err(i) => i - 1,
                };
                let t = (z - ys[i]) / (ys[i + 1] - ys[i]);
                xi[i] * (1.0 - t) + xi[i + 1] * t
            }
        }
    }

    /// Interval outside which the profile is (numerically) zero.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Window::Rectangular { delta } => (-0.5 * delta, 0.5 * delta),
            Window::Gaussian { sigma } => (-8.0 * sigma, 8.0 * sigma),
            Window::Custom { ys, .. } => (ys[0], ys[ys.len() - 1]),
        }
    }

    /// A width scale used to decide whether a lattice resolves the window.
    pub fn width(&self) -> f64 {
        match self {
            Window::Rectangular { delta } => *delta,
            Window::Gaussian { sigma } => *sigma,
            Window::Custom { ys, .. } => ys[ys.len() - 1] - ys[0],
        }
    }

    /// Window mass `integral Xi(z) dz` (exactly `delta` and 1 for the closed
    /// forms).
    pub fn mass(&self) -> f64 {
        match self {
            Window::Rectangular { delta } => *delta,
            Window::Gaussian { .. } => 1.0,
            Window::Custom { ys, xi } => {
                let mut acc = 0.0;
                for i in 0..ys.len() - 1 {
                    acc += 0.5 * (xi[i] + xi[i + 1]) * (ys[i + 1] - ys[i]);
                }
                acc
            }
        }
    }

    /// Fourier coefficient `integral Xi(z) exp(i k z) dz`.
    ///
    /// Closed forms for the rectangular and Gaussian windows; composite
    /// Gauss–Legendre over the sample segments for custom windows (exact to
    /// machine precision for a piecewise-linear profile).
    pub fn fourier(&self, k: f64) -> Complex64 {
        match self {
            Window::Rectangular { delta } => {
                let half = 0.5 * delta;
                if k.abs() < 1e-12 {
                    Complex64::new(*delta, 0.0)
                } else {
                    Complex64::new(2.0 * (k * half).sin() / k, 0.0)
                }
            }
            Window::Gaussian { sigma } => Complex64::new((-0.5 * sigma * sigma * k * k).exp(), 0.0),
            Window::Custom { ys, .. } => {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..ys.len() - 1 {
                    let (nodes, weights) =
                        composite_gauss_legendre(ys[i], ys[i + 1], 1, 8).expect("valid segment");
                    for (z, w) in nodes.iter().zip(&weights) {
                        acc += Complex64::new(0.0, k * z).exp() * (self.eval(*z) * w);
                    }
                }
                acc
            }
        }
    }
}

/// Normalization constant `N_Xi = 1 / integral Xi(z) exp(i z) dz`.
///
/// Fails with [`TomoError::SingularWindow`] when the coefficient vanishes —
/// e.g. a rectangular window of width `2 pi k`.
pub fn window_normalization(window: &Window) -> Result<Complex64> {
    window.validate()?;
    let coeff = window.fourier(1.0);
    let scale = window.mass().abs().max(f64::MIN_POSITIVE);
    if coeff.norm() < 1e-12 * scale {
        return Err(TomoError::SingularWindow(format!(
            "unit-frequency coefficient {:.3e} vanishes relative to the window mass {:.3e}",
            coeff.norm(),
            scale
        )));
    }
    Ok(coeff.finv())
}

/// Quadrature nodes covering the window support densely enough for its
/// structure and for an ideal tomogram of width >~ 0.3.
pub(crate) fn window_nodes(window: &Window) -> Result<(Vec<f64>, Vec<f64>)> {
    let (lo, hi) = window.support();
    let panels = (((hi - lo) / 0.2).ceil() as usize).clamp(4, 400);
    composite_gauss_legendre(lo, hi, panels, 12)
}

/// Thick forward transform at a single point:
/// `w_Xi(X, mu, nu) = integral Xi(Y) w(X - Y, mu, nu) dY`.
pub fn thick_forward(
    f: &PhaseSpaceFunction,
    window: &Window,
    x: f64,
    mu: f64,
    nu: f64,
) -> Result<Complex64> {
    window.validate()?;
    let (nodes, weights) = window_nodes(window)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for (y, w) in nodes.iter().zip(&weights) {
        let xi = window.eval(*y);
        if xi != 0.0 {
            acc += radon_forward(f, x - y, mu, nu)? * (xi * w);
        }
    }
    Ok(acc)
}

/// Thick forward transform on a polar lattice, computed by convolving an
/// ideal tomogram built on an extended X range.
pub fn thick_forward_grid(
    f: &PhaseSpaceFunction,
    window: &Window,
    xs: Range,
    thetas: &[f64],
) -> Result<PolarTomogram> {
    window.validate()?;
    let (lo, hi) = window.support();
    let dx = (xs.hi - xs.lo) / (xs.n as f64 - 1.0);
    // Ideal tomogram on a lattice extended by the window support and refined
    // 2x, so the interpolation below stays well below the window scale.
    let fine_dx = 0.5 * dx;
    let ext_lo = xs.lo - hi - fine_dx;
    let ext_hi = xs.hi - lo + fine_dx;
    let n_fine = ((ext_hi - ext_lo) / fine_dx).round() as usize + 1;
    let ideal = crate::symplectic::radon_forward_grid(
        f,
        Range::new(ext_lo, ext_lo + fine_dx * (n_fine as f64 - 1.0), n_fine)?,
        thetas,
    )?;
    let thick = thick_from_ideal(&ideal, window)?;
    // Restrict the convolved tomogram back to the requested lattice.
    let x_nodes = xs.nodes();
    let mut values = DMatrix::from_element(x_nodes.len(), thetas.len(), Complex64::new(0.0, 0.0));
    let fine_xs = thick.xs();
    for (i, &x) in x_nodes.iter().enumerate() {
        let u = (x - fine_xs[0]) / thick.x_step();
        let k = u.round() as usize;
        debug_assert!((u - k as f64).abs() < 1e-6, "requested lattice must align");
        for j in 0..thetas.len() {
            values[(i, j)] = thick.values()[(k, j)];
        }
    }
    PolarTomogram::new(x_nodes, thetas.to_vec(), values)
}

/// Interpolates column `j` of a tomogram at fractional row index `u`
/// (Catmull-Rom where a four-point stencil fits, linear at the edges).
fn interp_column(t: &PolarTomogram, j: usize, u: f64) -> Complex64 {
    let n = t.xs().len();
    let k = (u.floor() as usize).min(n - 2);
    let s = u - k as f64;
    let v = t.values();
    if k == 0 || k + 2 >= n {
        return v[(k, j)] * (1.0 - s) + v[(k + 1, j)] * s;
    }
    let (m0, m1, m2, m3) = (v[(k - 1, j)], v[(k, j)], v[(k + 1, j)], v[(k + 2, j)]);
    let a = (m2 - m0) * 0.5;
    let b = m0 - m1 * 2.5 + m2 * 2.0 - m3 * 0.5;
    let c = (m3 - m0) * 0.5 + (m1 - m2) * 1.5;
    m1 + (a + (b + c * s) * s) * s
}

/// Convolves an ideal tomogram with the window along X.
///
/// The lattice must resolve the window: its step has to be smaller than the
/// window width, otherwise the call fails with
/// [`TomoError::UnresolvedWindow`]. Near the lattice ends the convolution
/// window is clipped; callers should provide an X range extended by the
/// window support, as [`thick_forward_grid`] does.
pub fn thick_from_ideal(ideal: &PolarTomogram, window: &Window) -> Result<PolarTomogram> {
    window.validate()?;
    let dx = ideal.x_step();
    if window.width() < dx {
        return Err(TomoError::UnresolvedWindow(format!(
            "window width {:.3e} is below the lattice step {dx:.3e}",
            window.width()
        )));
    }
    let (nodes, weights) = window_nodes(window)?;
    let xs = ideal.xs();
    let n_theta = ideal.thetas().len();
    let mut values = DMatrix::from_element(xs.len(), n_theta, Complex64::new(0.0, 0.0));
    for (i, &x) in xs.iter().enumerate() {
        for j in 0..n_theta {
            let mut acc = Complex64::new(0.0, 0.0);
            for (y, w) in nodes.iter().zip(&weights) {
                let xi = window.eval(*y);
                if xi == 0.0 {
                    continue;
                }
                let u = (x - y - xs[0]) / dx;
                if u < 0.0 || u > (xs.len() - 1) as f64 {
                    continue;
                }
                acc += interp_column(ideal, j, u) * (xi * w);
            }
            values[(i, j)] = acc;
        }
    }
    PolarTomogram::new(xs.to_vec(), ideal.thetas().to_vec(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::{make_grid, PhaseSpaceFunction, StateSpec};
    use crate::quadrature::{integrate_nd, Axis};
    use std::f64::consts::PI;

    fn vacuum() -> PhaseSpaceFunction {
        let grid = make_grid(-5.0, 5.0, -5.0, 5.0, 101, 101).unwrap();
        PhaseSpaceFunction::from_state(&StateSpec::Coherent { alpha: [0.0, 0.0] }, &grid).unwrap()
    }

    #[test]
    fn normalization_closed_forms() {
        // Rectangular width pi: 1 / (2 sin(pi/2)) = 1/2.
        let n = window_normalization(&Window::Rectangular { delta: PI }).unwrap();
        assert!((n.re - 0.5).abs() < 1e-15 && n.im.abs() < 1e-15);
        // Gaussian sigma = 1: exp(1/2).
        let n = window_normalization(&Window::Gaussian { sigma: 1.0 }).unwrap();
        assert!((n.re - 0.5f64.exp()).abs() < 1e-14);
        assert!((n.re - 1.648_721_270_700_128).abs() < 1e-12);
    }

    #[test]
    fn full_turn_rectangle_is_singular() {
        let res = window_normalization(&Window::Rectangular { delta: 2.0 * PI });
        assert!(matches!(res, Err(TomoError::SingularWindow(_))));
    }

    #[test]
    fn normalization_identity_against_quadrature() {
        // N * integral Xi exp(iz) dz = 1, with the integral done numerically.
        let windows = [
            Window::Rectangular { delta: 2.0 },
            Window::Rectangular { delta: PI },
            Window::Gaussian { sigma: 0.5 },
            Window::Gaussian { sigma: 1.0 },
        ];
        for w in windows {
            let n = window_normalization(&w).unwrap();
            let (lo, hi) = w.support();
            let ax = Axis::gauss_legendre(lo, hi, 400).unwrap();
            let integral = integrate_nd(&[ax], None, |z| {
                Complex64::new(0.0, z[0]).exp() * w.eval(z[0])
            })
            .unwrap();
            let product = n * integral.value;
            assert!(
                (product - Complex64::new(1.0, 0.0)).norm() < 1e-8,
                "window {w:?}: N * coeff = {product}"
            );
        }
    }

    #[test]
    fn thick_vacuum_rectangular_is_erf() {
        // Width-2 rectangle at (0, 1, 0): integral_{-1}^{1} exp(-Y^2)/sqrt(pi)
        // = erf(1).
        let v = thick_forward(&vacuum(), &Window::Rectangular { delta: 2.0 }, 0.0, 1.0, 0.0)
            .unwrap();
        assert!((v.re - 0.842_700_792_949_714_9).abs() < 1e-9, "got {}", v.re);
    }

    #[test]
    fn thick_vacuum_gaussian_closed_form() {
        // Gaussian window sigma: the convolution of N(0, 1/2) with N(0, s^2)
        // evaluated at 0 is 1/sqrt(pi (1 + 2 s^2)).
        let v = thick_forward(&vacuum(), &Window::Gaussian { sigma: 1.0 }, 0.0, 1.0, 0.0).unwrap();
        assert!((v.re - 1.0 / (3.0 * PI).sqrt()).abs() < 1e-9, "got {}", v.re);
        assert!((v.re - 0.325_735_007_935_279_9).abs() < 1e-9);
    }

    #[test]
    fn custom_window_replicates_rectangle() {
        // A piecewise-linear profile that equals the indicator of [-1, 1]
        // except for steep 1e-6 ramps at the edges.
        let eps = 1e-6;
        let ys = vec![-1.0 - eps, -1.0, 1.0, 1.0 + eps];
        let xi = vec![0.0, 1.0, 1.0, 0.0];
        let custom = Window::Custom { ys, xi };
        let n_custom = window_normalization(&custom).unwrap();
        let n_rect = window_normalization(&Window::Rectangular { delta: 2.0 }).unwrap();
        assert!((n_custom - n_rect).norm() < 1e-5);
        let v = thick_forward(&vacuum(), &custom, 0.3, 1.0, 0.0).unwrap();
        let r = thick_forward(&vacuum(), &Window::Rectangular { delta: 2.0 }, 0.3, 1.0, 0.0)
            .unwrap();
        assert!((v - r).norm() < 1e-5);
    }

    #[test]
    fn lattice_convolution_matches_point_convolution() {
        let f = vacuum();
        let window = Window::Gaussian { sigma: 0.4 };
        let thetas = vec![0.0, 1.1];
        let t = thick_forward_grid(&f, &window, Range::new(-4.0, 4.0, 81).unwrap(), &thetas)
            .unwrap();
        for (i, &x) in t.xs().iter().enumerate().step_by(10) {
            for (j, &theta) in thetas.iter().enumerate() {
                let point =
                    thick_forward(&f, &window, x, theta.cos(), theta.sin()).unwrap();
                assert!(
                    (t.values()[(i, j)] - point).norm() < 2e-5,
                    "x = {x}, theta = {theta}"
                );
            }
        }
    }

    #[test]
    fn thick_mass_is_window_mass() {
        // integral w_Xi dX = mass(Xi) * mass(f) = delta for the unit-mass
        // vacuum state.
        let f = vacuum();
        let window = Window::Rectangular { delta: 2.0 };
        let t = thick_forward_grid(&f, &window, Range::new(-6.0, 6.0, 241).unwrap(), &[0.7])
            .unwrap();
        let dx = t.x_step();
        let mut mass = 0.0;
        for i in 0..t.xs().len() {
            let w = if i == 0 || i == t.xs().len() - 1 { 0.5 } else { 1.0 };
            mass += w * t.values()[(i, 0)].re;
        }
        mass *= dx;
        assert!((mass - 2.0).abs() < 1e-6, "mass = {mass}");
    }

    #[test]
    fn narrow_rectangle_converges_to_ideal_slice() {
        // (Xi * w)(X) / delta -> w(X) quadratically as delta -> 0.
        let f = vacuum();
        let sup_err = |delta: f64| -> f64 {
            let window = Window::Rectangular { delta };
            let mut worst = 0.0f64;
            for k in -8..=8 {
                let x = 0.25 * k as f64;
                let thick =
                    thick_forward(&f, &window, x, 1.0, 0.0).unwrap().re / delta;
                let ideal = radon_forward(&f, x, 1.0, 0.0).unwrap().re;
                worst = worst.max((thick - ideal).abs());
            }
            worst
        };
        let e1 = sup_err(0.5);
        let e2 = sup_err(0.25);
        let e3 = sup_err(0.125);
        assert!(e2 < 0.5 * e1, "e1 = {e1}, e2 = {e2}");
        assert!(e3 < 0.5 * e2, "e2 = {e2}, e3 = {e3}");
        assert!(e3 < 4e-3);
    }

    #[test]
    fn unresolved_window_rejected() {
        let f = vacuum();
        let thetas = vec![0.0];
        let ideal = crate::symplectic::radon_forward_grid(
            &f,
            Range::new(-5.0, 5.0, 101).unwrap(),
            &thetas,
        )
        .unwrap();
        let res = thick_from_ideal(&ideal, &Window::Rectangular { delta: 0.05 });
        assert!(matches!(res, Err(TomoError::UnresolvedWindow(_))));
    }

    #[test]
    fn window_json_round_trip() {
        let w = Window::from_json(r#"{"kind": "rectangular", "delta": 2.0}"#).unwrap();
        assert_eq!(w, Window::Rectangular { delta: 2.0 });
        let w = Window::from_json(r#"{"kind": "gaussian", "sigma": 0.5}"#).unwrap();
        assert_eq!(w, Window::Gaussian { sigma: 0.5 });
        let w = Window::from_json(r#"{"kind": "custom", "Y": [-1, 0, 1], "Xi": [0, 1, 0]}"#)
            .unwrap();
        assert!(matches!(w, Window::Custom { .. }));
        let back = Window::from_json(&w.to_json()).unwrap();
        assert_eq!(back, w);
        assert!(Window::from_json(r#"{"kind": "rectangular", "delta": -1.0}"#).is_err());
        assert!(Window::from_json(r#"{"kind": "custom", "Y": [0, 1], "Xi": [1]}"#).is_err());
    }
}
