//! Tomogram containers and CSV interchange.
//!
//! Two lattice shapes cover all schemes:
//! - [`PolarTomogram`]: samples over `(X, theta)` with unit direction
//!   `(mu, nu) = (cos theta, sin theta)` — the natural lattice for the
//!   homogeneous line-integral schemes (ideal and thick).
//! - [`CenterTomogram`]: samples over `(X, mu, nu)` where `(mu, nu)` is a
//!   center, not a direction — the lattice for the circle-integral scheme.
//!
//! CSV layout: an optional `# scheme=...` comment, a header, then one row per
//! sample. Line-integral tomograms use `X,theta,mu,nu,value`; circle-integral
//! tomograms use `X,mu,nu,value` and carry `# scheme=quadratic`.

use std::io::{BufRead, BufReader, Read, Write as IoWrite};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, TomoError};

/// Relative tolerance used when checking lattice uniformity and equality.
const LATTICE_TOL: f64 = 1e-9;

/// A point on the tomographic manifold: slice value `x` and the pair
/// `(mu, nu)` — a direction for line-integral schemes, a center for the
/// circle scheme.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TomographicPoint {
    pub x: f64,
    pub mu: f64,
    pub nu: f64,
}

impl TomographicPoint {
    pub fn new(x: f64, mu: f64, nu: f64) -> Self {
        TomographicPoint { x, mu, nu }
    }

    /// Length of the `(mu, nu)` pair.
    pub fn r(&self) -> f64 {
        self.mu.hypot(self.nu)
    }
}

/// A uniform closed range with a node count, e.g. parsed from `lo:hi:n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Range {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(TomoError::InvalidBounds(format!("range [{lo}, {hi}] is empty")));
        }
        if n < 2 {
            return Err(TomoError::InvalidCount(format!("range needs >= 2 nodes, got {n}")));
        }
        Ok(Range { lo, hi, n })
    }

    /// Nodes including both endpoints.
    pub fn nodes(&self) -> Vec<f64> {
        let h = (self.hi - self.lo) / (self.n as f64 - 1.0);
        (0..self.n).map(|i| self.lo + h * i as f64).collect()
    }

    /// Nodes with the right endpoint excluded — for periodic angle lattices.
    pub fn nodes_open(&self) -> Vec<f64> {
        let h = (self.hi - self.lo) / self.n as f64;
        (0..self.n).map(|i| self.lo + h * i as f64).collect()
    }
}

/// Checks that `xs` is ascending and uniformly spaced; returns the step.
pub(crate) fn uniform_step(xs: &[f64], what: &str) -> Result<f64> {
    if xs.len() < 2 {
        return Err(TomoError::InvalidCount(format!("{what} needs at least 2 nodes")));
    }
    let h = xs[1] - xs[0];
    if !(h.is_finite() && h > 0.0) {
        return Err(TomoError::InvalidBounds(format!("{what} must be ascending")));
    }
    let scale = h.abs().max(1e-300);
    for w in xs.windows(2) {
        if ((w[1] - w[0]) - h).abs() > LATTICE_TOL * scale.max(w[1].abs()) {
            return Err(TomoError::IncompatibleLattices(format!("{what} is not uniform")));
        }
    }
    Ok(h)
}

fn same_nodes(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= LATTICE_TOL * (1.0 + x.abs().max(y.abs())))
}

/// Tomogram over `(X, theta)` with unit directions.
#[derive(Clone, Debug)]
pub struct PolarTomogram {
    xs: Vec<f64>,
    thetas: Vec<f64>,
    /// Row index runs over X, column index over theta.
    values: DMatrix<Complex64>,
}

impl PolarTomogram {
    pub fn new(xs: Vec<f64>, thetas: Vec<f64>, values: DMatrix<Complex64>) -> Result<Self> {
        uniform_step(&xs, "X lattice")?;
        if thetas.is_empty() {
            return Err(TomoError::InvalidCount("theta lattice needs at least 1 node".into()));
        }
        if thetas.len() > 1 {
            uniform_step(&thetas, "theta lattice")?;
        }
        if values.nrows() != xs.len() || values.ncols() != thetas.len() {
            return Err(TomoError::IncompatibleLattices(format!(
                "values are {} x {}, lattice is {} x {}",
                values.nrows(),
                values.ncols(),
                xs.len(),
                thetas.len()
            )));
        }
        Ok(PolarTomogram { xs, thetas, values })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn values(&self) -> &DMatrix<Complex64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut DMatrix<Complex64> {
        &mut self.values
    }

    pub fn x_step(&self) -> f64 {
        self.xs[1] - self.xs[0]
    }

    /// Angular step; zero for a single-row tomogram.
    pub fn theta_step(&self) -> f64 {
        if self.thetas.len() > 1 {
            self.thetas[1] - self.thetas[0]
        } else {
            0.0
        }
    }

    /// The angular span `n * dtheta` covered by an open periodic lattice.
    pub fn theta_span(&self) -> f64 {
        self.theta_step() * self.thetas.len() as f64
    }

    pub fn same_lattice(&self, other: &PolarTomogram) -> bool {
        same_nodes(&self.xs, &other.xs) && same_nodes(&self.thetas, &other.thetas)
    }

    /// Largest |value| over the first and last X rows, relative to the global
    /// peak — a cheap indicator of support truncation along X.
    pub fn x_boundary_ratio(&self) -> f64 {
        let mut peak = 0.0f64;
        let mut edge = 0.0f64;
        for j in 0..self.thetas.len() {
            for i in 0..self.xs.len() {
                let m = self.values[(i, j)].norm();
                peak = peak.max(m);
                if i == 0 || i == self.xs.len() - 1 {
                    edge = edge.max(m);
                }
            }
        }
        if peak == 0.0 {
            0.0
        } else {
            edge / peak
        }
    }

    /// Writes the `X,theta,mu,nu,value` CSV (values must be essentially real).
    pub fn write_csv<W: IoWrite>(&self, mut w: W) -> Result<()> {
        let peak = self.values.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
        writeln!(w, "X,theta,mu,nu,value")?;
        for (i, &x) in self.xs.iter().enumerate() {
            for (j, &th) in self.thetas.iter().enumerate() {
                let v = self.values[(i, j)];
                if v.im.abs() > 1e-9 * (1.0 + peak) {
                    return Err(TomoError::Parse(format!(
                        "cannot serialize complex tomogram value {v} to CSV"
                    )));
                }
                writeln!(w, "{},{},{},{},{}", x, th, th.cos(), th.sin(), v.re)?;
            }
        }
        Ok(())
    }
}

/// Tomogram over `(X, mu, nu)` with `(mu, nu)` a circle center.
#[derive(Clone, Debug)]
pub struct CenterTomogram {
    xs: Vec<f64>,
    mus: Vec<f64>,
    nus: Vec<f64>,
    /// Index layout: `(ix * nmu + imu) * nnu + inu`.
    values: Vec<Complex64>,
}

impl CenterTomogram {
    pub fn new(xs: Vec<f64>, mus: Vec<f64>, nus: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        uniform_step(&xs, "X lattice")?;
        uniform_step(&mus, "mu lattice")?;
        uniform_step(&nus, "nu lattice")?;
        if values.len() != xs.len() * mus.len() * nus.len() {
            return Err(TomoError::IncompatibleLattices(format!(
                "expected {} values, got {}",
                xs.len() * mus.len() * nus.len(),
                values.len()
            )));
        }
        Ok(CenterTomogram { xs, mus, nus, values })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn mus(&self) -> &[f64] {
        &self.mus
    }

    pub fn nus(&self) -> &[f64] {
        &self.nus
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn index(&self, ix: usize, imu: usize, inu: usize) -> usize {
        (ix * self.mus.len() + imu) * self.nus.len() + inu
    }

    pub fn value(&self, ix: usize, imu: usize, inu: usize) -> Complex64 {
        self.values[self.index(ix, imu, inu)]
    }

    pub fn x_step(&self) -> f64 {
        self.xs[1] - self.xs[0]
    }

    pub fn mu_step(&self) -> f64 {
        self.mus[1] - self.mus[0]
    }

    pub fn nu_step(&self) -> f64 {
        self.nus[1] - self.nus[0]
    }

    /// Restriction to the central half of the `(mu, nu)` lattice — used for
    /// domain-coverage checks.
    pub fn central_half(&self) -> Result<CenterTomogram> {
        let keep = |nodes: &[f64]| -> Vec<usize> {
            let lo = nodes[0];
            let hi = nodes[nodes.len() - 1];
            let mid = 0.5 * (lo + hi);
            let half = 0.25 * (hi - lo);
            (0..nodes.len())
                .filter(|&i| (nodes[i] - mid).abs() <= half + 1e-12 * (1.0 + hi.abs()))
                .collect()
        };
        let imus = keep(&self.mus);
        let inus = keep(&self.nus);
        let mut values = Vec::with_capacity(self.xs.len() * imus.len() * inus.len());
        for ix in 0..self.xs.len() {
            for &imu in &imus {
                for &inu in &inus {
                    values.push(self.value(ix, imu, inu));
                }
            }
        }
        CenterTomogram::new(
            self.xs.clone(),
            imus.iter().map(|&i| self.mus[i]).collect(),
            inus.iter().map(|&i| self.nus[i]).collect(),
            values,
        )
    }

    /// Writes the `X,mu,nu,value` CSV with a `# scheme=quadratic` tag.
    pub fn write_csv<W: IoWrite>(&self, mut w: W) -> Result<()> {
        let peak = self.values.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
        writeln!(w, "# scheme=quadratic")?;
        writeln!(w, "X,mu,nu,value")?;
        for (i, &x) in self.xs.iter().enumerate() {
            for (j, &mu) in self.mus.iter().enumerate() {
                for (k, &nu) in self.nus.iter().enumerate() {
                    let v = self.value(i, j, k);
                    if v.im.abs() > 1e-9 * (1.0 + peak) {
                        return Err(TomoError::Parse(format!(
                            "cannot serialize complex tomogram value {v} to CSV"
                        )));
                    }
                    writeln!(w, "{},{},{},{}", x, mu, nu, v.re)?;
                }
            }
        }
        Ok(())
    }
}

/// A tomogram read back from CSV.
#[derive(Clone, Debug)]
pub enum TomogramFile {
    Polar(PolarTomogram),
    Center(CenterTomogram),
}

/// Reads a tomogram CSV, dispatching on the `# scheme=` tag (line-integral
/// `X,theta,...` layout when absent).
pub fn read_csv<R: Read>(reader: R) -> Result<TomogramFile> {
    let buf = BufReader::new(reader);
    let mut scheme: Option<String> = None;
    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in buf.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(s) = comment.strip_prefix("scheme=") {
                scheme = Some(s.trim().to_string());
            }
            continue;
        }
        if header.is_none() {
            header = Some(line.split(',').map(|t| t.trim().to_string()).collect());
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.trim().parse::<f64>().map_err(|_| {
                    TomoError::Parse(format!("line {}: bad number {t:?}", lineno + 1))
                })
            })
            .collect::<Result<_>>()?;
        rows.push(fields);
    }
    let header = header.ok_or_else(|| TomoError::Parse("missing CSV header".into()))?;
    let names: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let scheme = scheme.unwrap_or_else(|| "symplectic".to_string());
    match scheme.as_str() {
        "quadratic" => {
            if names != ["X", "mu", "nu", "value"] {
                return Err(TomoError::Parse(format!(
                    "quadratic tomogram needs header X,mu,nu,value, got {}",
                    header.join(",")
                )));
            }
            read_center_rows(&rows)
        }
        "symplectic" | "thick" => {
            if names != ["X", "theta", "mu", "nu", "value"] {
                return Err(TomoError::Parse(format!(
                    "line-integral tomogram needs header X,theta,mu,nu,value, got {}",
                    header.join(",")
                )));
            }
            read_polar_rows(&rows)
        }
        other => Err(TomoError::UnsupportedScheme(other.to_string())),
    }
}

/// Collects distinct values (sorted), merging ones closer than a tolerance.
fn distinct(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for x in v {
        if out.last().is_none_or(|&last| (x - last).abs() > 1e-9 * (1.0 + x.abs())) {
            out.push(x);
        }
    }
    out
}

fn position(nodes: &[f64], x: f64) -> Option<usize> {
    nodes
        .binary_search_by(|probe| probe.total_cmp(&x))
        .ok()
        .or_else(|| nodes.iter().position(|&n| (n - x).abs() <= 1e-9 * (1.0 + x.abs())))
}

fn read_polar_rows(rows: &[Vec<f64>]) -> Result<TomogramFile> {
    for row in rows {
        if row.len() != 5 {
            return Err(TomoError::Parse(format!("expected 5 fields, got {}", row.len())));
        }
    }
    let xs = distinct(rows.iter().map(|r| r[0]));
    let thetas = distinct(rows.iter().map(|r| r[1]));
    if rows.len() != xs.len() * thetas.len() {
        return Err(TomoError::IncompatibleLattices(format!(
            "{} rows do not fill a {} x {} lattice",
            rows.len(),
            xs.len(),
            thetas.len()
        )));
    }
    let mut values = DMatrix::from_element(xs.len(), thetas.len(), Complex64::new(f64::NAN, 0.0));
    for row in rows {
        let i = position(&xs, row[0]).expect("x came from rows");
        let j = position(&thetas, row[1]).expect("theta came from rows");
        values[(i, j)] = Complex64::new(row[4], 0.0);
    }
    if values.iter().any(|v| v.re.is_nan()) {
        return Err(TomoError::IncompatibleLattices("duplicate lattice rows in CSV".into()));
    }
    Ok(TomogramFile::Polar(PolarTomogram::new(xs, thetas, values)?))
}

fn read_center_rows(rows: &[Vec<f64>]) -> Result<TomogramFile> {
    for row in rows {
        if row.len() != 4 {
            return Err(TomoError::Parse(format!("expected 4 fields, got {}", row.len())));
        }
    }
    let xs = distinct(rows.iter().map(|r| r[0]));
    let mus = distinct(rows.iter().map(|r| r[1]));
    let nus = distinct(rows.iter().map(|r| r[2]));
    if rows.len() != xs.len() * mus.len() * nus.len() {
        return Err(TomoError::IncompatibleLattices(format!(
            "{} rows do not fill a {} x {} x {} lattice",
            rows.len(),
            xs.len(),
            mus.len(),
            nus.len()
        )));
    }
    let mut values = vec![Complex64::new(f64::NAN, 0.0); rows.len()];
    for row in rows {
        let i = position(&xs, row[0]).expect("x came from rows");
        let j = position(&mus, row[1]).expect("mu came from rows");
        let k = position(&nus, row[2]).expect("nu came from rows");
        values[(i * mus.len() + j) * nus.len() + k] = Complex64::new(row[3], 0.0);
    }
    if values.iter().any(|v| v.re.is_nan()) {
        return Err(TomoError::IncompatibleLattices("duplicate lattice rows in CSV".into()));
    }
    Ok(TomogramFile::Center(CenterTomogram::new(xs, mus, nus, values)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_polar() -> PolarTomogram {
        let xs = Range::new(-1.0, 1.0, 5).unwrap().nodes();
        let thetas = Range::new(0.0, std::f64::consts::PI, 4).unwrap().nodes_open();
        let values = DMatrix::from_fn(5, 4, |i, j| {
            Complex64::new((i as f64 + 1.0) * 10.0 + j as f64, 0.0)
        });
        PolarTomogram::new(xs, thetas, values).unwrap()
    }

    #[test]
    fn range_nodes() {
        let r = Range::new(0.0, 1.0, 5).unwrap();
        assert_eq!(r.nodes(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let open = Range::new(0.0, 1.0, 4).unwrap().nodes_open();
        assert_eq!(open, vec![0.0, 0.25, 0.5, 0.75]);
        assert!(Range::new(1.0, 0.0, 5).is_err());
        assert!(Range::new(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn polar_csv_round_trip() {
        let t = sample_polar();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("X,theta,mu,nu,value\n"));
        match read_csv(buf.as_slice()).unwrap() {
            TomogramFile::Polar(back) => {
                assert!(back.same_lattice(&t));
                assert_eq!(back.values(), t.values());
            }
            _ => panic!("expected polar tomogram"),
        }
    }

    #[test]
    fn center_csv_round_trip() {
        let xs = Range::new(0.0, 2.0, 3).unwrap().nodes();
        let mus = Range::new(-1.0, 1.0, 3).unwrap().nodes();
        let nus = Range::new(-1.0, 1.0, 2).unwrap().nodes();
        let values: Vec<Complex64> =
            (0..18).map(|k| Complex64::new(k as f64 * 0.5, 0.0)).collect();
        let t = CenterTomogram::new(xs, mus, nus, values).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# scheme=quadratic\n"));
        match read_csv(buf.as_slice()).unwrap() {
            TomogramFile::Center(back) => {
                assert_eq!(back.xs(), t.xs());
                assert_eq!(back.values(), t.values());
            }
            _ => panic!("expected center tomogram"),
        }
    }

    #[test]
    fn csv_rejects_bad_header_and_holes() {
        let bad = "X,angle,mu,nu,value\n0,0,1,0,1\n";
        assert!(matches!(read_csv(bad.as_bytes()), Err(TomoError::Parse(_))));
        // 3 rows cannot fill a 2 x 2 lattice.
        let holes = "X,theta,mu,nu,value\n0,0,1,0,1\n1,0,1,0,1\n0,1.5,0.07,0.99,1\n";
        assert!(matches!(read_csv(holes.as_bytes()), Err(TomoError::IncompatibleLattices(_))));
    }

    #[test]
    fn complex_values_refuse_csv() {
        let mut t = sample_polar();
        t.values_mut()[(0, 0)] = Complex64::new(1.0, 0.5);
        let mut buf = Vec::new();
        assert!(matches!(t.write_csv(&mut buf), Err(TomoError::Parse(_))));
    }

    #[test]
    fn nonuniform_lattice_rejected() {
        let xs = vec![0.0, 0.1, 0.3];
        let thetas = vec![0.0];
        let values = DMatrix::from_element(3, 1, Complex64::new(0.0, 0.0));
        assert!(matches!(
            PolarTomogram::new(xs, thetas, values),
            Err(TomoError::IncompatibleLattices(_))
        ));
    }
}
