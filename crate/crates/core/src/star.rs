//! Composition of line-scheme tomographic symbols.
//!
//! The symbol of an operator product is a non-local composition of the two
//! factor symbols. Evaluating the defining triple integral pointwise is
//! hopeless numerically, but the whole composition collapses in frequency
//! space: the X-Fourier transforms of a tomogram's rows, laid out along rays,
//! assemble one function `G` on the frequency plane (`G(r cos t, r sin t)`
//! is the transform of the row at angle `t`), operator multiplication is a
//! twisted convolution of these plane functions, and for each output
//! direction the twist factorizes along lines parallel to that direction.
//! Every such line then contributes a pointwise product of two 1-D Fourier
//! transforms, so a full output row costs a batch of FFTs instead of a
//! six-fold quadrature.
//!
//! Only the line scheme composes this way; the other schemes return
//! [`TomoError::UnsupportedScheme`].

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Result, TomoError};
use crate::kernels::SchemeKernel;
use crate::symplectic::TRUNCATION_RATIO;
use crate::tomogram::PolarTomogram;

/// Half-width of the slice lattice in frequency units. States with Gaussian
/// tails are far below roundoff at radius 20, and the table cannot say
/// anything beyond its own Nyquist radius anyway.
const SLICE_HALF_SPAN: f64 = 20.0;

/// Fraction of the table peak below which a radial profile counts as ended;
/// used to bound the offset range of contributing slices.
const SUPPORT_FLOOR: f64 = 1e-7;

/// Margin added to a detected support radius, in frequency units.
const SUPPORT_MARGIN: f64 = 1.0;

/// Relative size under which a pair of slices cannot contribute and is
/// skipped without transforming.
const SKIP_RATIO: f64 = 1e-13;

/// Minimum number of rows of the full-turn frequency table.
const MIN_STAR_ANGLES: usize = 16;

/// Minimum padded length of the row transforms, so coarse X lattices still
/// get a finely resolved radial coordinate.
const MIN_PAD: usize = 4096;

/// Hard cap on the slice lattice size.
const MAX_SLICE_NODES: usize = 1 << 14;

/// One operand's frequency-plane data: per-angle row transforms on a uniform
/// polar lattice covering the full turn.
struct FreqTable {
    /// Row-major `n_theta x n_k` values; row `t` holds the transform of the
    /// tomogram row at angle `thetas[0] + t * d_theta` on radii `k * d_rho`.
    vals: Vec<Complex64>,
    n_theta: usize,
    n_k: usize,
    d_rho: f64,
    d_theta: f64,
    /// Largest value magnitude anywhere in the table.
    peak: f64,
    /// `suffix_max[k]` bounds the magnitude at any radius `>= k * d_rho`.
    suffix_max: Vec<f64>,
}

impl FreqTable {
    /// Radius beyond which the table stays below `SUPPORT_FLOOR` of its peak.
    fn support(&self) -> f64 {
        let threshold = SUPPORT_FLOOR * self.peak;
        match self.suffix_max.iter().rposition(|&v| v >= threshold) {
            Some(k) => (k as f64 + 1.0) * self.d_rho,
            None => self.d_rho,
        }
    }

    /// Bound on the table magnitude at radii `>= rho`.
    fn bound_beyond(&self, rho: f64) -> f64 {
        let k = (rho / self.d_rho) as usize;
        if k >= self.suffix_max.len() {
            0.0
        } else {
            self.suffix_max[k]
        }
    }
}

/// Builds the full-turn frequency table of a tomogram. Half-turn lattices are
/// extended to the full turn through the reflection
/// `G(rho, theta + pi) = G(-rho, theta)`, which holds for the ray transform
/// of any operator, so both half- and full-turn tomograms are accepted.
fn frequency_table(t: &PolarTomogram) -> Result<FreqTable> {
    let span = t.theta_span();
    let half = if (span - std::f64::consts::PI).abs() < 1e-6 {
        true
    } else if (span - 2.0 * std::f64::consts::PI).abs() < 1e-6 {
        false
    } else {
        return Err(TomoError::IncompatibleLattices(format!(
            "composition needs an open uniform angle lattice covering pi or 2 pi, got span {span}"
        )));
    };
    let n_in = t.thetas().len();
    let n_theta = if half { 2 * n_in } else { n_in };
    if n_theta < MIN_STAR_ANGLES {
        return Err(TomoError::InsufficientAngles { got: n_theta, need: MIN_STAR_ANGLES });
    }
    let edge = t.x_boundary_ratio();
    if edge > TRUNCATION_RATIO {
        return Err(TomoError::TruncatedSupport(format!(
            "tomogram X-boundary magnitude is {edge:.2e} of its peak"
        )));
    }

    let nx = t.xs().len();
    let dx = t.x_step();
    let x0 = t.xs()[0];
    let m = MIN_PAD.max((4 * nx).next_power_of_two());
    let n_k = m / 2 + 1;
    let d_rho = 2.0 * std::f64::consts::PI / (m as f64 * dx);

    let mut planner = FftPlanner::<f64>::new();
    // The `e^{+i rho X}` convention is an (unnormalized) inverse transform.
    let fft = planner.plan_fft_inverse(m);
    let mut vals = vec![Complex64::new(0.0, 0.0); n_theta * n_k];
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for j in 0..n_in {
        buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for i in 0..nx {
            buf[i] = t.values()[(i, j)];
        }
        fft.process(&mut buf);
        for k in 0..n_k {
            let rho = k as f64 * d_rho;
            vals[j * n_k + k] = buf[k] * Complex64::from_polar(dx, rho * x0);
            if half {
                // The opposite ray reads the negative-frequency bins.
                vals[(j + n_in) * n_k + k] =
                    buf[(m - k) % m] * Complex64::from_polar(dx, -rho * x0);
            }
        }
    }

    let mut radial_max = vec![0.0f64; n_k];
    for j in 0..n_theta {
        for k in 0..n_k {
            radial_max[k] = radial_max[k].max(vals[j * n_k + k].norm());
        }
    }
    let mut suffix_max = radial_max;
    for k in (0..n_k.saturating_sub(1)).rev() {
        suffix_max[k] = suffix_max[k].max(suffix_max[k + 1]);
    }
    let peak = suffix_max.first().copied().unwrap_or(0.0);
    Ok(FreqTable { vals, n_theta, n_k, d_rho, d_theta: t.theta_step(), peak, suffix_max })
}

/// Bilinear lookup weights for one slice point, shared across output angles:
/// the angle offset enters as a whole row shift because output angles sit on
/// the table lattice.
#[derive(Clone, Copy)]
struct GatherPoint {
    /// Radial cell, or `u32::MAX` for a point beyond the table.
    k0: u32,
    /// Angular cell before the per-output shift.
    t0: u32,
    wk: f64,
    wt: f64,
}

/// Precomputes the bilinear lookup geometry of every slice point
/// `a_j n + b_m m` against one table's polar lattice; row `m` of the result
/// describes the slice at offset `b_m`.
fn slice_geometry(
    table: &FreqTable,
    bs: &[f64],
    n_a: usize,
    a0: f64,
    da: f64,
) -> Vec<GatherPoint> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut geometry = vec![GatherPoint { k0: u32::MAX, t0: 0, wk: 0.0, wt: 0.0 }; bs.len() * n_a];
    for (m, &bv) in bs.iter().enumerate() {
        for j in 0..n_a {
            let av = a0 + j as f64 * da;
            let rho = av.hypot(bv);
            let k_coord = rho / table.d_rho;
            let k0 = k_coord.floor() as usize;
            if k0 + 1 < table.n_k {
                let mut phi = bv.atan2(av);
                if phi < 0.0 {
                    phi += two_pi;
                }
                let t_coord = phi / table.d_theta;
                let t0 = (t_coord.floor() as usize).min(table.n_theta - 1);
                geometry[m * n_a + j] = GatherPoint {
                    k0: k0 as u32,
                    t0: t0 as u32,
                    wk: k_coord - k0 as f64,
                    wt: t_coord - t0 as f64,
                };
            }
        }
    }
    geometry
}

/// Reads one slice of the frequency plane, `out[j] = G(a_j n + b m)` for the
/// direction pair rotated by `offset` lattice angles; returns the slice's
/// largest magnitude.
fn gather_slice(
    table: &FreqTable,
    geometry: &[GatherPoint],
    offset: usize,
    out: &mut [Complex64],
) -> f64 {
    let n_k = table.n_k;
    let n_t = table.n_theta;
    let mut largest = 0.0f64;
    for (g, slot) in geometry.iter().zip(out.iter_mut()) {
        if g.k0 == u32::MAX {
            *slot = Complex64::new(0.0, 0.0);
            continue;
        }
        let k0 = g.k0 as usize;
        let t0 = (g.t0 as usize + offset) % n_t;
        let t1 = (t0 + 1) % n_t;
        let row0 = table.vals[t0 * n_k + k0] * (1.0 - g.wk) + table.vals[t0 * n_k + k0 + 1] * g.wk;
        let row1 = table.vals[t1 * n_k + k0] * (1.0 - g.wk) + table.vals[t1 * n_k + k0 + 1] * g.wk;
        let v = row0 * (1.0 - g.wt) + row1 * g.wt;
        largest = largest.max(v.norm_sqr());
        *slot = v;
    }
    largest.sqrt()
}

/// Composes two line-scheme tomograms into the tomogram of the operator
/// product (left factor first). Inputs must share their angle lattice but may
/// carry different X lattices (a previous composition's output composes with
/// a fresh tomogram); the result lives on the same angle lattice and on a
/// centered X lattice whose span matches the wider operand's X reach.
///
/// For each output angle with unit vector `n` and normal `m`, the output row
/// is
/// `(1/4 pi^2) int da1 da2 db G_A(a1 n + b m) G_B(a2 n - b m)
///  e^{i (a1 + a2)(b/2 - X)}`,
/// so each offset `b` contributes the pointwise product of two 1-D
/// transforms taken along lines parallel to `n`. Slices are read from the
/// tables by bilinear interpolation, and offsets beyond the narrower
/// operand's frequency support are skipped — a near-identity operand (a
/// frequency-concentrated tomogram) costs almost nothing.
pub fn star_product(
    a: &PolarTomogram,
    b: &PolarTomogram,
    scheme: &SchemeKernel,
) -> Result<PolarTomogram> {
    match scheme {
        SchemeKernel::Symplectic => {}
        _ => {
            return Err(TomoError::UnsupportedScheme(
                "symbol composition is implemented for the line scheme only".into(),
            ))
        }
    }
    if a.thetas().len() != b.thetas().len()
        || a.thetas().iter().zip(b.thetas()).any(|(x, y)| (x - y).abs() > 1e-9)
    {
        return Err(TomoError::IncompatibleLattices(
            "composition needs both tomograms on the same angle lattice".into(),
        ));
    }
    let table_a = frequency_table(a)?;
    let table_b = frequency_table(b)?;

    let x_reach = |xs: &[f64]| xs[0].abs().max(xs[xs.len() - 1].abs());
    let l_out = x_reach(a.xs()).max(x_reach(b.xs()));
    let da = std::f64::consts::PI / l_out;
    let table_reach = |t: &FreqTable| (t.n_k - 1) as f64 * t.d_rho;
    let a_half = SLICE_HALF_SPAN.min(table_reach(&table_a).max(table_reach(&table_b)));
    let n_a = (((2.0 * a_half / da).ceil() as usize) + 1).next_power_of_two().max(64);
    if n_a > MAX_SLICE_NODES {
        return Err(TomoError::ResolutionLimit(format!(
            "composition would need {n_a} slice nodes (cap {MAX_SLICE_NODES}); widen the X step \
             or narrow the X span"
        )));
    }
    let b_half = (table_a.support().min(table_b.support()) + SUPPORT_MARGIN).min(a_half);
    let half_b = (b_half / da).ceil() as usize;
    let n_b = 2 * half_b + 1;

    let a0 = -((n_a / 2) as f64) * da;
    let d_out = 2.0 * std::f64::consts::PI / (n_a as f64 * da);
    let x0_out = -((n_a / 2) as f64) * d_out;
    let bs: Vec<f64> = (0..n_b).map(|m| (m as f64 - half_b as f64) * da).collect();

    // Slice geometry (per operand, since the radial tables may differ) and
    // the half-twist phases, all independent of the output angle.
    let geometry_a = slice_geometry(&table_a, &bs, n_a, a0, da);
    let geometry_b = slice_geometry(&table_b, &bs, n_a, a0, da);
    let mut phases = vec![Complex64::new(0.0, 0.0); n_b * n_a];
    for (m, &bv) in bs.iter().enumerate() {
        for j in 0..n_a {
            let av = a0 + j as f64 * da;
            phases[m * n_a + j] = Complex64::from_polar(1.0, av * (0.5 * bv - x0_out));
        }
    }
    // Offsets where the slice pair is bounded below relevance: the slice at
    // offset b never exceeds the table's bound beyond radius |b|.
    let scale = table_a.peak * table_b.peak;
    let skip: Vec<bool> = bs
        .iter()
        .map(|&bv| {
            table_a.bound_beyond(bv.abs()) * table_b.bound_beyond(bv.abs()) < SKIP_RATIO * scale
        })
        .collect();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n_a);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut slice_a = vec![Complex64::new(0.0, 0.0); n_a];
    let mut slice_b = vec![Complex64::new(0.0, 0.0); n_a];

    let n_out = a.thetas().len();
    let mut out = DMatrix::from_element(n_a, n_out, Complex64::new(0.0, 0.0));
    let norm = da * da * da / (4.0 * std::f64::consts::PI * std::f64::consts::PI);
    for j_out in 0..n_out {
        let mut row = vec![Complex64::new(0.0, 0.0); n_a];
        for m in 0..n_b {
            if skip[m] {
                continue;
            }
            let mirror = n_b - 1 - m;
            let geo = &geometry_a[m * n_a..(m + 1) * n_a];
            let geo_mirror = &geometry_b[mirror * n_a..(mirror + 1) * n_a];
            let max_a = gather_slice(&table_a, geo, j_out, &mut slice_a);
            let max_b = gather_slice(&table_b, geo_mirror, j_out, &mut slice_b);
            if max_a * max_b < SKIP_RATIO * scale {
                continue;
            }
            let phase = &phases[m * n_a..(m + 1) * n_a];
            for j in 0..n_a {
                slice_a[j] *= phase[j];
                slice_b[j] *= phase[j];
            }
            fft.process_with_scratch(&mut slice_a, &mut scratch);
            fft.process_with_scratch(&mut slice_b, &mut scratch);
            for l in 0..n_a {
                row[l] += slice_a[l] * slice_b[l];
            }
        }
        for l in 0..n_a {
            out[(l, j_out)] = row[l] * norm;
        }
    }

    let xs_out: Vec<f64> = (0..n_a).map(|l| x0_out + l as f64 * d_out).collect();
    PolarTomogram::new(xs_out, a.thetas().to_vec(), out)
}

/// Trace functional of a line-scheme tomogram: the X-integral of any row is
/// the trace of the underlying operator, so this trapezoid-integrates every
/// row and averages across angles.
pub fn tomogram_trace(t: &PolarTomogram) -> Complex64 {
    let dx = t.x_step();
    let nx = t.xs().len();
    let n_theta = t.thetas().len();
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..n_theta {
        let mut row = Complex64::new(0.0, 0.0);
        for i in 0..nx {
            let w = if i == 0 || i == nx - 1 { 0.5 } else { 1.0 };
            row += t.values()[(i, j)] * w;
        }
        acc += row * dx;
    }
    acc / n_theta as f64
}
