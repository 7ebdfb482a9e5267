//! Command-line front end for the phase-space tomography toolkit.
//!
//! A thin shell over `tomo-core`: every number printed here is produced by a
//! library routine with its own tests. Four subcommands:
//!
//! * `forward` — tomogram of a closed-form state on a chosen lattice, as CSV;
//! * `invert`  — phase-space reconstruction of a tomogram CSV;
//! * `kernel`  — smeared star-product kernel value from a JSON request;
//! * `verify`  — named invariant suites with a JSON report.
//!
//! Exit codes: 0 success, 1 verification failure, 2 bad input, 3 truncated
//! support, 4 non-convergent refinement.
//!
//! Lattice flags use the `lo:hi:count` syntax; the bounds accept a `pi`
//! literal with an optional coefficient (`0:pi:64`, `-2pi:2pi:128`).

use std::fs;
use std::io::{self, Cursor, Read as _, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Deserialize;

use tomo_core::kernels::{KernelEvaluator, SchemeKernel};
use tomo_core::phase_space::{make_grid, Grid, PhaseSpaceFunction, StateSpec};
use tomo_core::quadratic::{calibrate_inverse_constant, circle_forward_grid, quadratic_inverse};
use tomo_core::quadrature::delta_smear;
use tomo_core::symplectic::{radon_forward_grid, radon_inverse};
use tomo_core::thick::{thick_forward_grid, Window};
use tomo_core::tomogram::{read_csv, Range, TomographicPoint, TomogramFile};
use tomo_core::verification::{reports_to_json, verify_suite, DEFAULT_DIM, DEFAULT_SEED};
use tomo_core::TomoError;

#[derive(Parser)]
#[command(
    name = "tomo",
    version,
    about = "Tomographic transforms on phase space: forward maps, inversions, \
             star-product kernels and verification suites"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute a tomogram of a closed-form state and write it as CSV.
    Forward(ForwardArgs),
    /// Reconstruct a phase-space function from a tomogram CSV.
    Invert(InvertArgs),
    /// Evaluate a smeared star-product kernel from a JSON request.
    Kernel(KernelArgs),
    /// Run named invariant suites and print a JSON report.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeName {
    Symplectic,
    Thick,
    Quadratic,
}

#[derive(Args)]
struct ForwardArgs {
    /// Tomographic scheme.
    #[arg(long, value_enum)]
    scheme: SchemeName,
    /// State description JSON, e.g. {"kind":"coherent","alpha":[1.0,0.0]}.
    #[arg(long, value_name = "FILE")]
    state: PathBuf,
    /// Window JSON for the thick scheme, e.g. {"kind":"rectangular","delta":2}.
    #[arg(long, value_name = "JSON")]
    window: Option<String>,
    /// X lattice (line schemes default -6:6:121, circle scheme 0:8:161).
    #[arg(long = "X", value_name = "LO:HI:COUNT", allow_hyphen_values = true)]
    x: Option<String>,
    /// Direction lattice for line schemes; the right endpoint is excluded.
    #[arg(long, value_name = "LO:HI:COUNT", default_value = "0:pi:64")]
    theta: String,
    /// Center mu lattice for the circle scheme.
    #[arg(long, value_name = "LO:HI:COUNT", default_value = "-1:1:9", allow_hyphen_values = true)]
    mu: String,
    /// Center nu lattice for the circle scheme.
    #[arg(long, value_name = "LO:HI:COUNT", default_value = "-1:1:9", allow_hyphen_values = true)]
    nu: String,
    /// Phase-space q lattice the state is sampled on.
    #[arg(long, value_name = "LO:HI:COUNT", default_value = "-7:7:281", allow_hyphen_values = true)]
    q: String,
    /// Phase-space p lattice the state is sampled on.
    #[arg(long, value_name = "LO:HI:COUNT", default_value = "-7:7:281", allow_hyphen_values = true)]
    p: String,
    /// Output CSV file (stdout when omitted).
    #[arg(short = 'o', long = "out", value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InvertArgs {
    /// Tomogram CSV produced by `forward` (scheme read from its `# scheme=` tag).
    input: PathBuf,
    /// Override the scheme declared in the file.
    #[arg(long, value_enum)]
    scheme: Option<SchemeName>,
    /// Calibration JSON for the circle-scheme inverse; created on first use.
    #[arg(long, value_name = "FILE")]
    calib: Option<PathBuf>,
    /// State JSON to compare the reconstruction against (prints the rel. L2 error).
    #[arg(long, value_name = "FILE")]
    reference: Option<PathBuf>,
    /// Reconstruction q lattice.
    #[arg(long, value_name = "LO:HI:COUNT", default_value = "-5:5:101", allow_hyphen_values = true)]
    q: String,
    /// Reconstruction p lattice.
    #[arg(long, value_name = "LO:HI:COUNT", default_value = "-5:5:101", allow_hyphen_values = true)]
    p: String,
    /// Output CSV file (stdout when omitted).
    #[arg(short = 'o', long = "out", value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KernelArgs {
    /// Request JSON file (stdin when omitted):
    /// {"scheme":"quadratic","x1":[X,mu,nu],"x2":[...],"x3":[...],"test":{"eps":0.05}}.
    request: Option<PathBuf>,
    /// Output JSON file (stdout when omitted).
    #[arg(short = 'o', long = "out", value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Which invariants to run.
    #[arg(long, default_value = "all", value_parser = ["classical", "kernels", "quantum", "all"])]
    suite: String,
    /// Fock-space dimension for the quantum suite.
    #[arg(long, default_value_t = DEFAULT_DIM)]
    dim: usize,
    /// Seed for the sampled check points (recorded in the report).
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Also write the JSON report to a file.
    #[arg(short = 'o', long = "out", value_name = "FILE")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(failure_code(&err))
        }
    }
}

/// Maps an error chain to the documented exit codes: truncated support 3,
/// non-convergence 4, anything else (parse, bounds, lattices, I/O) 2.
fn failure_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(t) = cause.downcast_ref::<TomoError>() {
            return match t {
                TomoError::TruncatedSupport(_) => 3,
                TomoError::NonConvergent { .. } => 4,
                _ => 2,
            };
        }
    }
    2
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.cmd {
        Cmd::Forward(args) => cmd_forward(args).map(|()| 0),
        Cmd::Invert(args) => cmd_invert(args).map(|()| 0),
        Cmd::Kernel(args) => cmd_kernel(args).map(|()| 0),
        Cmd::Verify(args) => cmd_verify(args),
    }
}

// ---------------------------------------------------------------------------
// flag parsing helpers

/// A scalar flag token: a float, optionally a multiple of pi (`pi`, `-pi`,
/// `0.5pi`).
fn parse_scalar(token: &str) -> anyhow::Result<f64> {
    let t = token.trim();
    if let Some(coeff) = t.strip_suffix("pi") {
        let c = match coeff {
            "" | "+" => 1.0,
            "-" => -1.0,
            other => other
                .parse::<f64>()
                .map_err(|_| anyhow!("bad pi coefficient {other:?} in {token:?}"))?,
        };
        return Ok(c * std::f64::consts::PI);
    }
    t.parse::<f64>().map_err(|_| anyhow!("bad number {token:?}"))
}

/// A lattice flag `lo:hi:count`.
fn parse_range(flag: &str, value: &str) -> anyhow::Result<Range> {
    let parts: Vec<&str> = value.split(':').collect();
    if parts.len() != 3 {
        bail!("--{flag} expects lo:hi:count, got {value:?}");
    }
    let lo = parse_scalar(parts[0]).with_context(|| format!("--{flag} lower bound"))?;
    let hi = parse_scalar(parts[1]).with_context(|| format!("--{flag} upper bound"))?;
    let n = parts[2]
        .trim()
        .parse::<usize>()
        .map_err(|_| anyhow!("--{flag} count must be a positive integer, got {:?}", parts[2]))?;
    Ok(Range::new(lo, hi, n)?)
}

fn grid_from(q: &str, p: &str) -> anyhow::Result<Grid> {
    let q = parse_range("q", q)?;
    let p = parse_range("p", p)?;
    Ok(make_grid(q.lo, q.hi, p.lo, p.hi, q.n, p.n)?)
}

fn read_state(path: &Path) -> anyhow::Result<StateSpec> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading state file {}", path.display()))?;
    Ok(StateSpec::from_json(&text)?)
}

/// Where a command's primary data goes, and where its human-readable summary
/// goes: data to `-o FILE` with the summary on stdout, or data to stdout with
/// the summary diverted to stderr.
struct OutTarget {
    file: Option<PathBuf>,
}

impl OutTarget {
    fn new(file: Option<PathBuf>) -> Self {
        OutTarget { file }
    }

    fn write_data(&self, bytes: &[u8]) -> anyhow::Result<()> {
        match &self.file {
            Some(path) => fs::write(path, bytes)
                .with_context(|| format!("writing {}", path.display()))?,
            None => io::stdout().write_all(bytes)?,
        }
        Ok(())
    }

    fn summary(&self, line: &str) {
        if self.file.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
}

/// Trapezoid integral of sampled values over a lattice.
fn trapezoid(xs: &[f64], values: impl Fn(usize) -> f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..xs.len().saturating_sub(1) {
        acc += 0.5 * (xs[i + 1] - xs[i]) * (values(i) + values(i + 1));
    }
    acc
}

// ---------------------------------------------------------------------------
// forward

fn cmd_forward(args: ForwardArgs) -> anyhow::Result<()> {
    let spec = read_state(&args.state)?;
    let grid = grid_from(&args.q, &args.p)?;
    let f = PhaseSpaceFunction::from_state(&spec, &grid)?;
    let out = OutTarget::new(args.out.clone());
    let mut csv: Vec<u8> = Vec::new();

    match args.scheme {
        SchemeName::Symplectic | SchemeName::Thick => {
            let xs = parse_range("X", args.x.as_deref().unwrap_or("-6:6:121"))?;
            let thetas = parse_range("theta", &args.theta)?.nodes_open();
            let tomogram = match args.scheme {
                SchemeName::Symplectic => radon_forward_grid(&f, xs, &thetas)?,
                SchemeName::Thick => {
                    let window_json = args
                        .window
                        .as_deref()
                        .ok_or_else(|| anyhow!("the thick scheme needs --window JSON"))?;
                    let window = Window::from_json(window_json)?;
                    thick_forward_grid(&f, &window, xs, &thetas)?
                }
                SchemeName::Quadratic => unreachable!(),
            };
            let tag = match args.scheme {
                SchemeName::Thick => "thick",
                _ => "symplectic",
            };
            writeln!(csv, "# scheme={tag}")?;
            tomogram.write_csv(&mut csv)?;

            // Each direction's X-integral of a state tomogram carries the
            // state's unit mass (times the window mass for the thick scheme).
            let xs_nodes = tomogram.xs();
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for j in 0..tomogram.thetas().len() {
                let m = trapezoid(xs_nodes, |i| tomogram.values()[(i, j)].re);
                lo = lo.min(m);
                hi = hi.max(m);
            }
            out.summary(&format!(
                "slice mass over {} directions: min {lo:.6}, max {hi:.6}",
                tomogram.thetas().len()
            ));
        }
        SchemeName::Quadratic => {
            let xs = parse_range("X", args.x.as_deref().unwrap_or("0:8:161"))?;
            let mus = parse_range("mu", &args.mu)?;
            let nus = parse_range("nu", &args.nu)?;
            let tomogram = circle_forward_grid(&f, xs, mus, nus)?;
            tomogram.write_csv(&mut csv)?;

            let xs_nodes = tomogram.xs();
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for imu in 0..tomogram.mus().len() {
                for inu in 0..tomogram.nus().len() {
                    let m = trapezoid(xs_nodes, |i| tomogram.value(i, imu, inu).re);
                    lo = lo.min(m);
                    hi = hi.max(m);
                }
            }
            out.summary(&format!(
                "slice mass over {} centers: min {lo:.6}, max {hi:.6}",
                tomogram.mus().len() * tomogram.nus().len()
            ));
        }
    }

    out.write_data(&csv)
}

// ---------------------------------------------------------------------------
// invert

#[derive(Deserialize, serde::Serialize)]
struct CalibFile {
    c: f64,
    reference: StateSpec,
}

fn load_or_create_calibration(path: &Path) -> anyhow::Result<f64> {
    if path.exists() {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading calibration file {}", path.display()))?;
        let calib: CalibFile = serde_json::from_str(&text)
            .with_context(|| format!("parsing calibration file {}", path.display()))?;
        return Ok(calib.c);
    }
    let reference = StateSpec::Coherent { alpha: [0.0, 0.0] };
    let c = calibrate_inverse_constant(&reference)?;
    let calib = CalibFile { c, reference };
    fs::write(path, serde_json::to_string_pretty(&calib).expect("calibration serializes"))
        .with_context(|| format!("writing calibration file {}", path.display()))?;
    eprintln!("calibrated inverse constant c = {c:.6} (written to {})", path.display());
    Ok(c)
}

fn cmd_invert(args: InvertArgs) -> anyhow::Result<()> {
    let text = fs::read_to_string(&args.input)
        .with_context(|| format!("reading tomogram {}", args.input.display()))?;
    let declared = text
        .lines()
        .find_map(|l| l.trim().strip_prefix("# scheme=").map(|s| s.trim().to_string()));
    let file = read_csv(Cursor::new(text.as_bytes()))?;
    let grid = grid_from(&args.q, &args.p)?;

    let reconstruction = match file {
        TomogramFile::Polar(tomogram) => {
            if args.scheme == Some(SchemeName::Quadratic) {
                bail!("--scheme quadratic given, but the file holds a line-integral tomogram");
            }
            let thick = args.scheme == Some(SchemeName::Thick)
                || (args.scheme.is_none() && declared.as_deref() == Some("thick"));
            if thick {
                bail!(
                    "the thick scheme has no direct inverse; deconvolve the window first, \
                     or pass --scheme symplectic to treat the tomogram as ideal"
                );
            }
            radon_inverse(&tomogram, &grid)?
        }
        TomogramFile::Center(tomogram) => {
            if matches!(args.scheme, Some(SchemeName::Symplectic) | Some(SchemeName::Thick)) {
                bail!("a circle-center tomogram cannot be inverted as a line scheme");
            }
            let calib_path = args.calib.as_deref().ok_or_else(|| {
                anyhow!(
                    "the circle-scheme inverse needs its calibrated completeness constant: \
                     pass --calib FILE (the file is created on first use)"
                )
            })?;
            let c = load_or_create_calibration(calib_path)?;
            quadratic_inverse(&tomogram, &grid, c)?
        }
    };

    let out = OutTarget::new(args.out.clone());
    let mut csv: Vec<u8> = Vec::new();
    writeln!(csv, "q,p,re,im")?;
    for i in 0..grid.nq() {
        for j in 0..grid.np() {
            let v = reconstruction.values()[(i, j)];
            writeln!(csv, "{},{},{},{}", grid.q(i), grid.p(j), v.re, v.im)?;
        }
    }

    if let Some(ref_path) = &args.reference {
        let spec = read_state(ref_path)?;
        let reference = PhaseSpaceFunction::from_state(&spec, &grid)?;
        let rel = reconstruction.rel_l2_distance(&reference)?;
        out.summary(&format!("round-trip relative L2 error: {rel:.6e}"));
    }

    out.write_data(&csv)
}

// ---------------------------------------------------------------------------
// kernel

fn default_true() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelRequest {
    scheme: String,
    x1: [f64; 3],
    x2: [f64; 3],
    x3: [f64; 3],
    test: TestSpec,
    /// Window for the thick scheme.
    #[serde(default)]
    window: Option<Window>,
    /// Quantum (twisted) composition; `false` selects the classical kernel.
    #[serde(default = "default_true")]
    quantum: bool,
    /// Evaluate through the damped composition engine instead of the closed
    /// form — the slow reference path.
    #[serde(default)]
    composed: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TestSpec {
    eps: f64,
}

fn kernel_evaluator(request: &KernelRequest) -> anyhow::Result<KernelEvaluator> {
    let composed = |scheme: SchemeKernel, quantum: bool| KernelEvaluator::Composed {
        chi1: scheme.clone(),
        chi2: scheme.clone(),
        phi3: scheme,
        quantum,
    };
    match request.scheme.as_str() {
        "symplectic" => Ok(if request.composed {
            composed(SchemeKernel::Symplectic, request.quantum)
        } else {
            KernelEvaluator::SymplecticClosed { quantum: request.quantum }
        }),
        "thick" => {
            let window = request
                .window
                .clone()
                .ok_or_else(|| anyhow!("the thick kernel needs a \"window\" entry"))?;
            window.validate()?;
            Ok(if request.composed {
                composed(SchemeKernel::Thick(window), request.quantum)
            } else {
                KernelEvaluator::ThickClosed { window, quantum: request.quantum }
            })
        }
        "quadratic" => {
            if !request.quantum {
                bail!("the circle-scheme kernel is only provided in its quantum form");
            }
            Ok(if request.composed {
                composed(SchemeKernel::Quadratic, true)
            } else {
                KernelEvaluator::QuadraticClosed
            })
        }
        other => bail!("unknown kernel scheme {other:?} (symplectic, thick or quadratic)"),
    }
}

fn cmd_kernel(args: KernelArgs) -> anyhow::Result<()> {
    let text = match &args.request {
        Some(path) => fs::read_to_string(path)
            .with_context(|| format!("reading kernel request {}", path.display()))?,
        None => {
            let mut buf = String::new();
            io::stdin().read_to_string(&mut buf).context("reading kernel request from stdin")?;
            buf
        }
    };
    let request: KernelRequest =
        serde_json::from_str(&text).context("parsing kernel request JSON")?;
    let evaluator = kernel_evaluator(&request)?;
    let test = delta_smear(request.test.eps)?;
    let point = |v: [f64; 3]| TomographicPoint::new(v[0], v[1], v[2]);
    let value: Complex64 = evaluator.eval(
        point(request.x1),
        point(request.x2),
        point(request.x3),
        &test,
    )?;

    let out = OutTarget::new(args.out.clone());
    let mut body = serde_json::to_vec(&serde_json::json!({ "re": value.re, "im": value.im }))
        .expect("kernel value serializes");
    body.push(b'\n');
    out.write_data(&body)
}

// ---------------------------------------------------------------------------
// verify

fn cmd_verify(args: VerifyArgs) -> anyhow::Result<u8> {
    let reports = verify_suite(&args.suite, args.seed, args.dim)?;
    let json = reports_to_json(&reports);
    if let Some(path) = &args.out {
        fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{json}");
    let all_pass = reports.iter().all(|r| r.passed);
    Ok(if all_pass { 0 } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalars_accept_pi_literals() {
        assert_eq!(parse_scalar("0.5").unwrap(), 0.5);
        assert_eq!(parse_scalar("pi").unwrap(), std::f64::consts::PI);
        assert_eq!(parse_scalar("-pi").unwrap(), -std::f64::consts::PI);
        assert_eq!(parse_scalar("2pi").unwrap(), 2.0 * std::f64::consts::PI);
        assert_eq!(parse_scalar("-0.5pi").unwrap(), -0.5 * std::f64::consts::PI);
        assert!(parse_scalar("two").is_err());
    }

    #[test]
    fn ranges_parse_and_reject_malformed_flags() {
        let r = parse_range("X", "-6:6:121").unwrap();
        assert_eq!((r.lo, r.hi, r.n), (-6.0, 6.0, 121));
        let t = parse_range("theta", "0:pi:64").unwrap();
        assert_eq!(t.nodes_open().len(), 64);
        assert!(parse_range("X", "1:2").is_err());
        assert!(parse_range("X", "2:1:5").is_err());
        assert!(parse_range("X", "0:1:one").is_err());
    }

    #[test]
    fn exit_codes_follow_the_error_kind() {
        let truncated: anyhow::Error = TomoError::TruncatedSupport("x".into()).into();
        let slow: anyhow::Error = TomoError::NonConvergent { residual: 1.0, tolerance: 0.1 }.into();
        let bounds: anyhow::Error = TomoError::InvalidBounds("x".into()).into();
        let io: anyhow::Error = anyhow!("plain failure");
        assert_eq!(failure_code(&truncated), 3);
        assert_eq!(failure_code(&slow), 4);
        assert_eq!(failure_code(&bounds), 2);
        assert_eq!(failure_code(&io), 2);
    }

    #[test]
    fn kernel_requests_validate_scheme_and_window() {
        let req: KernelRequest = serde_json::from_str(
            r#"{"scheme":"quadratic","x1":[0,0,0],"x2":[0,0,0],"x3":[0,0,0],"test":{"eps":0.05}}"#,
        )
        .unwrap();
        assert!(req.quantum && !req.composed);
        assert!(kernel_evaluator(&req).is_ok());

        let thick_no_window: KernelRequest = serde_json::from_str(
            r#"{"scheme":"thick","x1":[0,1,0],"x2":[0,1,0],"x3":[0,1,0],"test":{"eps":0.05}}"#,
        )
        .unwrap();
        assert!(kernel_evaluator(&thick_no_window).is_err());

        let unknown: KernelRequest = serde_json::from_str(
            r#"{"scheme":"spiral","x1":[0,0,0],"x2":[0,0,0],"x3":[0,0,0],"test":{"eps":0.05}}"#,
        )
        .unwrap();
        assert!(kernel_evaluator(&unknown).is_err());
    }
}
