//! Phase-space grids, state specifications and their Wigner functions.
//!
//! Conventions: phase-space coordinates are `(q, p)`, the coherent amplitude
//! is `alpha = (q + i p) / sqrt(2)`, and every Wigner function integrates to
//! one with the plain measure `dq dp`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::poly::laguerre;

/// A uniform rectangular grid in `(q, p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    qmin: f64,
    qmax: f64,
    pmin: f64,
    pmax: f64,
    nq: usize,
    np: usize,
}

/// Builds a uniform grid with `nq x np` nodes covering
/// `[qmin, qmax] x [pmin, pmax]` (endpoints included).
pub fn make_grid(qmin: f64, qmax: f64, pmin: f64, pmax: f64, nq: usize, np: usize) -> Result<Grid> {
    if !(qmin.is_finite() && qmax.is_finite() && qmin < qmax) {
        return Err(TomoError::InvalidBounds(format!("q range [{qmin}, {qmax}] is empty")));
    }
    if !(pmin.is_finite() && pmax.is_finite() && pmin < pmax) {
        return Err(TomoError::InvalidBounds(format!("p range [{pmin}, {pmax}] is empty")));
    }
    if nq < 2 || np < 2 {
        return Err(TomoError::InvalidCount(format!(
            "grid needs at least 2 nodes per axis, got {nq} x {np}"
        )));
    }
    Ok(Grid { qmin, qmax, pmin, pmax, nq, np })
}

impl Grid {
    pub fn nq(&self) -> usize {
        self.nq
    }

    pub fn np(&self) -> usize {
        self.np
    }

    pub fn dq(&self) -> f64 {
        (self.qmax - self.qmin) / (self.nq as f64 - 1.0)
    }

    pub fn dp(&self) -> f64 {
        (self.pmax - self.pmin) / (self.np as f64 - 1.0)
    }

    pub fn q(&self, i: usize) -> f64 {
        self.qmin + self.dq() * i as f64
    }

    pub fn p(&self, j: usize) -> f64 {
        self.pmin + self.dp() * j as f64
    }

    pub fn q_bounds(&self) -> (f64, f64) {
        (self.qmin, self.qmax)
    }

    pub fn p_bounds(&self) -> (f64, f64) {
        (self.pmin, self.pmax)
    }

    /// Half-diagonal of the covered rectangle, measured from its center.
    pub fn half_diagonal(&self) -> f64 {
        let hq = 0.5 * (self.qmax - self.qmin);
        let hp = 0.5 * (self.pmax - self.pmin);
        (hq * hq + hp * hp).sqrt()
    }

    /// Center of the covered rectangle.
    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.qmin + self.qmax), 0.5 * (self.pmin + self.pmax))
    }
}

/// Declarative description of a state (or classical density) whose Wigner
/// function has a closed form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateSpec {
    /// Coherent state with amplitude `alpha = [re, im]`.
    Coherent { alpha: [f64; 2] },
    /// Number state `|n>`.
    Fock { n: usize },
    /// Thermal state with mean occupation `nbar >= 0`.
    Thermal { nbar: f64 },
    /// Classical Gaussian density with the given mean and covariance.
    GaussianClassical { mean: [f64; 2], cov: [[f64; 2]; 2] },
}

impl StateSpec {
    /// Parses a JSON description, e.g.
    /// `{"kind": "coherent", "alpha": [1.0, 0.0]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: StateSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Serializes back to JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("state spec serializes")
    }

    /// Checks parameter ranges.
    pub fn validate(&self) -> Result<()> {
        match self {
            StateSpec::Coherent { alpha } => {
                if !(alpha[0].is_finite() && alpha[1].is_finite()) {
                    return Err(TomoError::InvalidBounds("coherent amplitude must be finite".into()));
                }
            }
            StateSpec::Fock { .. } => {}
            StateSpec::Thermal { nbar } => {
                if !(nbar.is_finite() && *nbar >= 0.0) {
                    return Err(TomoError::InvalidBounds(format!(
                        "thermal occupation must be >= 0, got {nbar}"
                    )));
                }
            }
            StateSpec::GaussianClassical { cov, .. } => {
                let (a, b, c, d) = (cov[0][0], cov[0][1], cov[1][0], cov[1][1]);
                if (b - c).abs() > 1e-12 * (1.0 + b.abs().max(c.abs())) {
                    return Err(TomoError::InvalidBounds("covariance must be symmetric".into()));
                }
                if !(a > 0.0 && d > 0.0 && a * d - b * c > 0.0) {
                    return Err(TomoError::InvalidBounds(
                        "covariance must be positive definite".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Coherent amplitude as a complex number, if this is a coherent spec.
    pub fn alpha(&self) -> Option<Complex64> {
        match self {
            StateSpec::Coherent { alpha } => Some(Complex64::new(alpha[0], alpha[1])),
            _ => None,
        }
    }

    /// Mean and covariance for Gaussian specs (`None` for number states).
    pub fn gaussian_moments(&self) -> Option<([f64; 2], [[f64; 2]; 2])> {
        match self {
            StateSpec::Coherent { alpha } => {
                let m = [std::f64::consts::SQRT_2 * alpha[0], std::f64::consts::SQRT_2 * alpha[1]];
                Some((m, [[0.5, 0.0], [0.0, 0.5]]))
            }
            StateSpec::Thermal { nbar } => {
                let v = nbar + 0.5;
                Some(([0.0, 0.0], [[v, 0.0], [0.0, v]]))
            }
            StateSpec::GaussianClassical { mean, cov } => Some((*mean, *cov)),
            StateSpec::Fock { .. } => None,
        }
    }

    /// Wigner function at `(q, p)`.
    pub fn wigner(&self, q: f64, p: f64) -> f64 {
        use std::f64::consts::PI;
        match self {
            StateSpec::Coherent { alpha } => {
                let dq = q - std::f64::consts::SQRT_2 * alpha[0];
                let dp = p - std::f64::consts::SQRT_2 * alpha[1];
                (-(dq * dq + dp * dp)).exp() / PI
            }
            StateSpec::Fock { n } => {
                let r2 = q * q + p * p;
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                sign / PI * laguerre(*n, 2.0 * r2) * (-r2).exp()
            }
            StateSpec::Thermal { nbar } => {
                let s = 2.0 * nbar + 1.0;
                (-(q * q + p * p) / s).exp() / (PI * s)
            }
            StateSpec::GaussianClassical { mean, cov } => {
                let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
                let dq = q - mean[0];
                let dp = p - mean[1];
                // Inverse covariance applied to (dq, dp).
                let iq = (cov[1][1] * dq - cov[0][1] * dp) / det;
                let ip = (-cov[1][0] * dq + cov[0][0] * dp) / det;
                (-0.5 * (dq * iq + dp * ip)).exp() / (2.0 * PI * det.sqrt())
            }
        }
    }
}

/// First and second moments of a phase-space density, plus a truncation flag.
#[derive(Clone, Copy, Debug)]
pub struct Moments {
    pub mass: f64,
    pub mean_q: f64,
    pub mean_p: f64,
    pub var_q: f64,
    pub var_p: f64,
    pub cov_qp: f64,
    /// True when the density does not vanish at the grid boundary, i.e. the
    /// moments above are likely biased by truncation.
    pub truncated: bool,
}

/// A (possibly complex) function sampled on a [`Grid`], with an optional
/// closed-form backing used for off-grid evaluation.
#[derive(Clone, Debug)]
pub struct PhaseSpaceFunction {
    grid: Grid,
    /// Row index runs over q, column index over p.
    values: DMatrix<Complex64>,
    analytic: Option<StateSpec>,
}

impl PhaseSpaceFunction {
    /// Samples the Wigner function of `spec` on `grid`, keeping the closed
    /// form for off-grid evaluation.
    pub fn from_state(spec: &StateSpec, grid: &Grid) -> Result<Self> {
        spec.validate()?;
        let values = DMatrix::from_fn(grid.nq, grid.np, |i, j| {
            Complex64::new(spec.wigner(grid.q(i), grid.p(j)), 0.0)
        });
        Ok(PhaseSpaceFunction { grid: grid.clone(), values, analytic: Some(spec.clone()) })
    }

    /// Samples an arbitrary closure on `grid` (no closed-form backing).
    pub fn from_fn<F>(grid: &Grid, f: F) -> Self
    where
        F: Fn(f64, f64) -> Complex64,
    {
        let values = DMatrix::from_fn(grid.nq, grid.np, |i, j| f(grid.q(i), grid.p(j)));
        PhaseSpaceFunction { grid: grid.clone(), values, analytic: None }
    }

    /// Wraps existing samples. The matrix must be `nq x np`.
    pub fn from_samples(grid: &Grid, values: DMatrix<Complex64>) -> Result<Self> {
        if values.nrows() != grid.nq || values.ncols() != grid.np {
            return Err(TomoError::IncompatibleLattices(format!(
                "samples are {} x {}, grid is {} x {}",
                values.nrows(),
                values.ncols(),
                grid.nq,
                grid.np
            )));
        }
        Ok(PhaseSpaceFunction { grid: grid.clone(), values, analytic: None })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<Complex64> {
        &self.values
    }

    /// The closed-form backing, when the field was built from a state spec.
    pub fn analytic(&self) -> Option<&StateSpec> {
        self.analytic.as_ref()
    }

    /// Evaluates at an arbitrary point: closed form when available, otherwise
    /// bilinear interpolation (zero outside the grid).
    pub fn eval(&self, q: f64, p: f64) -> Complex64 {
        if let Some(spec) = &self.analytic {
            return Complex64::new(spec.wigner(q, p), 0.0);
        }
        self.eval_bilinear(q, p)
    }

    /// Bilinear interpolation of the samples; zero outside the grid.
    pub fn eval_bilinear(&self, q: f64, p: f64) -> Complex64 {
        let g = &self.grid;
        let fq = (q - g.qmin) / g.dq();
        let fp = (p - g.pmin) / g.dp();
        if fq < 0.0 || fp < 0.0 || fq > (g.nq - 1) as f64 || fp > (g.np - 1) as f64 {
            return Complex64::new(0.0, 0.0);
        }
        let i = (fq.floor() as usize).min(g.nq - 2);
        let j = (fp.floor() as usize).min(g.np - 2);
        let tq = fq - i as f64;
        let tp = fp - j as f64;
        let v00 = self.values[(i, j)];
        let v10 = self.values[(i + 1, j)];
        let v01 = self.values[(i, j + 1)];
        let v11 = self.values[(i + 1, j + 1)];
        v00 * ((1.0 - tq) * (1.0 - tp))
            + v10 * (tq * (1.0 - tp))
            + v01 * ((1.0 - tq) * tp)
            + v11 * (tq * tp)
    }

    /// Trapezoid mass `integral f dq dp` over the grid.
    pub fn mass(&self) -> Complex64 {
        let g = &self.grid;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..g.nq {
            let wq = if i == 0 || i == g.nq - 1 { 0.5 } else { 1.0 };
            for j in 0..g.np {
                let wp = if j == 0 || j == g.np - 1 { 0.5 } else { 1.0 };
                acc += self.values[(i, j)] * (wq * wp);
            }
        }
        acc * (g.dq() * g.dp())
    }

    /// Relative L2 distance to another field on the same grid.
    pub fn rel_l2_distance(&self, other: &PhaseSpaceFunction) -> Result<f64> {
        if self.grid != other.grid {
            return Err(TomoError::IncompatibleLattices(
                "L2 distance requires identical grids".into(),
            ));
        }
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for (a, b) in self.values.iter().zip(other.values.iter()) {
            num += (a - b).norm_sqr();
            den += b.norm_sqr();
        }
        if den == 0.0 {
            return Err(TomoError::InvalidBounds("reference field is identically zero".into()));
        }
        Ok((num / den).sqrt())
    }

    /// Trapezoid moments of the real part, with a boundary-truncation flag.
    pub fn moments(&self) -> Moments {
        let g = &self.grid;
        let (mut mass, mut mq, mut mp, mut qq, mut pp, mut qp) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let mut peak = 0.0f64;
        let mut boundary_peak = 0.0f64;
        for i in 0..g.nq {
            let wq = if i == 0 || i == g.nq - 1 { 0.5 } else { 1.0 };
            let q = g.q(i);
            for j in 0..g.np {
                let wp = if j == 0 || j == g.np - 1 { 0.5 } else { 1.0 };
                let p = g.p(j);
                let v = self.values[(i, j)].re;
                let w = wq * wp * v;
                mass += w;
                mq += w * q;
                mp += w * p;
                qq += w * q * q;
                pp += w * p * p;
                qp += w * q * p;
                let mag = self.values[(i, j)].norm();
                peak = peak.max(mag);
                if i == 0 || j == 0 || i == g.nq - 1 || j == g.np - 1 {
                    boundary_peak = boundary_peak.max(mag);
                }
            }
        }
        let cell = g.dq() * g.dp();
        mass *= cell;
        mq *= cell;
        mp *= cell;
        qq *= cell;
        pp *= cell;
        qp *= cell;
        let mean_q = mq / mass;
        let mean_p = mp / mass;
        Moments {
            mass,
            mean_q,
            mean_p,
            var_q: qq / mass - mean_q * mean_q,
            var_p: pp / mass - mean_p * mean_p,
            cov_qp: qp / mass - mean_q * mean_p,
            truncated: boundary_peak > 1e-5 * peak,
        }
    }

    /// Largest sample magnitude on the boundary relative to the global peak.
    pub fn boundary_ratio(&self) -> f64 {
        let g = &self.grid;
        let mut peak = 0.0f64;
        let mut boundary = 0.0f64;
        for i in 0..g.nq {
            for j in 0..g.np {
                let mag = self.values[(i, j)].norm();
                peak = peak.max(mag);
                if i == 0 || j == 0 || i == g.nq - 1 || j == g.np - 1 {
                    boundary = boundary.max(mag);
                }
            }
        }
        if peak == 0.0 {
            0.0
        } else {
            boundary / peak
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid101() -> Grid {
        make_grid(-5.0, 5.0, -5.0, 5.0, 101, 101).unwrap()
    }

    #[test]
    fn grid_spacing_and_nodes() {
        let g = grid101();
        assert!((g.dq() - 0.1).abs() < 1e-14);
        assert!((g.dp() - 0.1).abs() < 1e-14);
        assert!((g.q(0) + 5.0).abs() < 1e-14);
        assert!((g.q(100) - 5.0).abs() < 1e-14);
    }

    #[test]
    fn make_grid_rejects_bad_input() {
        assert!(matches!(
            make_grid(1.0, -1.0, 0.0, 1.0, 10, 10),
            Err(TomoError::InvalidBounds(_))
        ));
        assert!(matches!(
            make_grid(-1.0, 1.0, 0.0, 1.0, 1, 10),
            Err(TomoError::InvalidCount(_))
        ));
    }

    #[test]
    fn vacuum_wigner_at_origin() {
        let spec = StateSpec::Coherent { alpha: [0.0, 0.0] };
        assert!((spec.wigner(0.0, 0.0) - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn first_excited_wigner_at_origin() {
        let spec = StateSpec::Fock { n: 1 };
        assert!((spec.wigner(0.0, 0.0) + 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn coherent_moments_on_grid() {
        let spec = StateSpec::Coherent { alpha: [1.0, 0.0] };
        let f = PhaseSpaceFunction::from_state(&spec, &grid101()).unwrap();
        let m = f.moments();
        // The grid clips the tail at ~3.6 widths from the peak, so the mass
        // deficit is of order erfc(3.6) ~ 4e-7.
        assert!((m.mass - 1.0).abs() < 1e-6);
        assert!((m.mean_q - std::f64::consts::SQRT_2).abs() < 1e-5);
        assert!(m.mean_p.abs() < 1e-12);
        assert!((m.var_q - 0.5).abs() < 1e-4);
        assert!((m.var_p - 0.5).abs() < 1e-4);
        assert!(m.cov_qp.abs() < 1e-9);
        assert!(!m.truncated);
    }

    #[test]
    fn fock_wigner_mass() {
        let g = make_grid(-8.0, 8.0, -8.0, 8.0, 161, 161).unwrap();
        let f = PhaseSpaceFunction::from_state(&StateSpec::Fock { n: 3 }, &g).unwrap();
        assert!((f.mass().re - 1.0).abs() < 1e-6);
        assert!(f.mass().im.abs() < 1e-15);
    }

    #[test]
    fn thermal_wigner_mass_and_width() {
        let g = make_grid(-12.0, 12.0, -12.0, 12.0, 241, 241).unwrap();
        let f = PhaseSpaceFunction::from_state(&StateSpec::Thermal { nbar: 1.0 }, &g).unwrap();
        let m = f.moments();
        assert!((m.mass - 1.0).abs() < 1e-9);
        assert!((m.var_q - 1.5).abs() < 1e-6);
    }

    #[test]
    fn gaussian_classical_peak_value() {
        let spec = StateSpec::GaussianClassical {
            mean: [0.5, -0.25],
            cov: [[0.8, 0.2], [0.2, 0.5]],
        };
        let det: f64 = 0.8 * 0.5 - 0.04;
        assert!((spec.wigner(0.5, -0.25) - 1.0 / (2.0 * PI * det.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn gaussian_classical_rejects_bad_covariance() {
        let bad = StateSpec::GaussianClassical { mean: [0.0, 0.0], cov: [[1.0, 2.0], [2.0, 1.0]] };
        assert!(bad.validate().is_err());
        let asym = StateSpec::GaussianClassical { mean: [0.0, 0.0], cov: [[1.0, 0.3], [0.1, 1.0]] };
        assert!(asym.validate().is_err());
    }

    #[test]
    fn json_kinds_match_wire_format() {
        let spec = StateSpec::from_json(r#"{"kind": "coherent", "alpha": [1.0, -0.5]}"#).unwrap();
        assert_eq!(spec, StateSpec::Coherent { alpha: [1.0, -0.5] });
        let spec = StateSpec::from_json(
            r#"{"kind": "gaussian-classical", "mean": [0.0, 0.0], "cov": [[1.0, 0.0], [0.0, 1.0]]}"#,
        )
        .unwrap();
        assert!(matches!(spec, StateSpec::GaussianClassical { .. }));
        assert!(StateSpec::from_json(r#"{"kind": "squeezed", "r": 1.0}"#).is_err());
        assert!(StateSpec::from_json(r#"{"kind": "thermal", "nbar": -1.0}"#).is_err());
    }

    #[test]
    fn bilinear_matches_analytic_between_nodes() {
        let spec = StateSpec::Coherent { alpha: [0.0, 0.0] };
        let f = PhaseSpaceFunction::from_state(&spec, &grid101()).unwrap();
        let exact = spec.wigner(0.05, 0.05);
        let interp = f.eval_bilinear(0.05, 0.05).re;
        assert!((interp - exact).abs() < 1e-2 * exact);
        // Outside the grid the interpolant vanishes.
        assert_eq!(f.eval_bilinear(6.0, 0.0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn truncation_flag_on_small_grid() {
        let g = make_grid(-1.0, 1.0, -1.0, 1.0, 21, 21).unwrap();
        let f = PhaseSpaceFunction::from_state(&StateSpec::Coherent { alpha: [0.0, 0.0] }, &g)
            .unwrap();
        assert!(f.moments().truncated);
    }

    proptest! {
        #[test]
        fn spec_json_round_trip(
            kind in 0usize..4,
            a in -1.5f64..1.5,
            b in -1.5f64..1.5,
            n in 0usize..20,
            nbar in 0.0f64..5.0,
        ) {
            let spec = match kind {
                0 => StateSpec::Coherent { alpha: [a, b] },
                1 => StateSpec::Fock { n },
                2 => StateSpec::Thermal { nbar },
                _ => StateSpec::GaussianClassical {
                    mean: [a, b],
                    cov: [[1.0 + a.abs(), 0.1], [0.1, 0.5 + b.abs()]],
                },
            };
            let back = StateSpec::from_json(&spec.to_json()).unwrap();
            prop_assert_eq!(back, spec);
        }

        #[test]
        fn coherent_mean_tracks_amplitude(a in -1.0f64..1.0, b in -1.0f64..1.0) {
            let spec = StateSpec::Coherent { alpha: [a, b] };
            let f = PhaseSpaceFunction::from_state(&spec, &grid101()).unwrap();
            let m = f.moments();
            prop_assert!((m.mean_q - std::f64::consts::SQRT_2 * a).abs() < 1e-5);
            prop_assert!((m.mean_p - std::f64::consts::SQRT_2 * b).abs() < 1e-5);
        }
    }
}
