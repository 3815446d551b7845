//! `nwp`: verification suites, state transformations and localization amplitudes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Deserialize;
use serde_json::{json, Value};

use nwp_core::actions::{combined_action, PoincareElement};
use nwp_core::harness::{run_algebra_suite, run_all, run_covariance_suite, run_identity_suite, run_kernel_suite, Config, Report};
use nwp_core::lattice::{
    convert_normalization, load_state, make_gaussian_ring, make_random, save_state, ConversionDirection, RingDirection, Sampled, StoredState, ZeroModePolicy,
};
use nwp_core::localization::{amplitude_k, lattice_amplitudes, SpacetimePoint};
use nwp_core::spectral::{to_momentum, Interpolation, Rotation, SupportPolicy};
use nwp_core::{CoordinateState, Error, FockSum, GridSpec, MomentumState, Normalization, Result, Vec3};

#[derive(Parser)]
#[command(name = "nwp", version, about = "Conformal generators and Newton-Wigner-Pryce localization on spectral lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Residuals of the full conformal commutator table.
    VerifyAlgebra(SuiteArgs),
    /// Product-form identities and time-conjugation laws.
    VerifyIdentities(SuiteArgs),
    /// Radial kernel coefficients, the time kernel and the Bessel limit.
    VerifyKernels(SuiteArgs),
    /// Covariance of localization amplitudes under translations, rotations and dilatations.
    VerifyCovariance(SuiteArgs),
    /// All four suites in one report.
    VerifyAll(SuiteArgs),
    /// Applies a rotation, space-time translation and dilatation to a stored state.
    Transform(TransformArgs),
    /// Position probability amplitudes of a state or Fock-space manifest.
    Amplitude(AmplitudeArgs),
    /// Writes a Gaussian ring or random test state to a container file.
    MakeState(MakeStateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct SuiteArgs {
    /// JSON configuration file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Points per axis.
    #[arg(long)]
    grid: Option<usize>,
    /// Coordinate box length.
    #[arg(long = "box")]
    box_length: Option<f64>,
    /// Spatial dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// "strict", "smoke" or a path to a tolerance JSON file.
    #[arg(long)]
    tol_profile: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct TransformArgs {
    /// Input state container.
    #[arg(long)]
    state: PathBuf,
    /// Element `{"y": [y0, y1, y2, y3], "R": rotation, "alpha": a}` as a file path or inline JSON.
    #[arg(long)]
    element: String,
    /// Output state container.
    #[arg(long)]
    out: PathBuf,
    /// Norm and expectation report; standard output when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "trigonometric")]
    interpolation: Scheme,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scheme {
    Trigonometric,
    Linear,
}

impl From<Scheme> for Interpolation {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::Trigonometric => Interpolation::Trigonometric,
            Scheme::Linear => Interpolation::Linear,
        }
    }
}

#[derive(Args)]
struct AmplitudeArgs {
    /// One-particle state container.
    #[arg(long, conflicts_with = "fock", required_unless_present = "fock")]
    state: Option<PathBuf>,
    /// Fock-space manifest `{"k": k, "terms": [{"weight": [re, im], "factors": [paths]}]}`.
    #[arg(long)]
    fock: Option<PathBuf>,
    /// JSON list of points; entries are `{"t": t, "x": [..]}`, bare positions, or k-tuples of either.
    #[arg(long)]
    points: Option<PathBuf>,
    /// Time used for bare positions and for the density.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    time: f64,
    /// Writes the lattice density at `--time` to this container.
    #[arg(long)]
    density: Option<PathBuf>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MakeStateArgs {
    #[arg(long, default_value_t = 32)]
    grid: usize,
    #[arg(long = "box", default_value_t = 12.0)]
    box_length: f64,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    /// Ring centre; defaults to half the momentum extent.
    #[arg(long)]
    r0: Option<f64>,
    /// Ring width; defaults to the grid-adapted width.
    #[arg(long)]
    sigma: Option<f64>,
    /// Anisotropy axis `ux,uy,uz` for the ring.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    along: Option<Vec<f64>>,
    /// Random state with this seed instead of a ring.
    #[arg(long)]
    random: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            println!("{}", json!({ "error": { "code": "usage", "message": e.kind().to_string() } }));
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            println!("{}", json!({ "error": { "code": e.code(), "message": e.to_string() } }));
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::VerifyAlgebra(a) => verify(&a, run_algebra_suite),
        Command::VerifyIdentities(a) => verify(&a, run_identity_suite),
        Command::VerifyKernels(a) => verify(&a, run_kernel_suite),
        Command::VerifyCovariance(a) => verify(&a, run_covariance_suite),
        Command::VerifyAll(a) => verify(&a, run_all),
        Command::Transform(a) => transform(&a),
        Command::Amplitude(a) => amplitude(&a),
        Command::MakeState(a) => make_state(&a),
    }
}

fn config_from(args: &SuiteArgs) -> Result<Config> {
    let mut c = match &args.config {
        Some(p) => Config::from_file(p)?,
        None => Config::default(),
    };
    if let Some(v) = args.grid {
        c.grid = v;
    }
    if let Some(v) = args.box_length {
        c.box_length = v;
    }
    if let Some(v) = args.dim {
        c.dim = v;
    }
    if let Some(v) = &args.tol_profile {
        c.tol_profile = v.clone();
    }
    if let Some(v) = args.seed {
        c.seed = v;
    }
    c.grid_spec()?;
    c.tolerances()?;
    Ok(c)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                so.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

fn verify(args: &SuiteArgs, suite: fn(&Config) -> Result<Report>) -> Result<ExitCode> {
    let config = config_from(args)?;
    let report = suite(&config)?;
    let text = match args.format {
        Format::Json => report.to_json()?,
        Format::Csv => report.to_csv(),
    };
    emit(args.out.as_deref(), &text)?;
    let failures = report.failures();
    eprintln!("{}: {} rows, {} failed", report.suite, report.rows.len(), failures.len());
    for r in &failures {
        let residual = r.residual.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into());
        let tol = r.tolerance.map(|v| format!("{v:.0e}")).unwrap_or_else(|| "-".into());
        eprintln!("  FAIL {} residual {residual} tolerance {tol} {}", r.check, r.note);
    }
    Ok(if failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

/// Momentum-space, non-covariant view of any stored state.
fn momentum_of(stored: StoredState) -> Result<MomentumState> {
    match stored {
        StoredState::Momentum(s) if s.normalization == Normalization::Covariant => {
            convert_normalization(&s, ConversionDirection::ToNoncovariant, ZeroModePolicy::Zero)
        }
        StoredState::Momentum(s) => Ok(s),
        StoredState::Coordinate(f) => Ok(to_momentum(&f)),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RotationSpec {
    Named(String),
    Axis { axis: String, angle: f64 },
    Matrix([[f64; 3]; 3]),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ElementSpec {
    #[serde(default)]
    y: [f64; 4],
    #[serde(default, rename = "R", alias = "r")]
    rotation: Option<RotationSpec>,
    #[serde(default)]
    alpha: f64,
}

fn axis_rotation(axis: &str, angle: f64) -> Result<Rotation> {
    match axis {
        "x" => Ok(Rotation::about_x(angle)),
        "y" => Ok(Rotation::about_y(angle)),
        "z" => Ok(Rotation::about_z(angle)),
        other => Err(Error::Argument(format!("unknown rotation axis {other:?}"))),
    }
}

/// `identity`, or `<turn>-<axis>` with turn in quarter, half, three-quarter.
fn named_rotation(name: &str) -> Result<Rotation> {
    if name == "identity" {
        return Ok(Rotation::identity());
    }
    let (turn, axis) = name.rsplit_once('-').ok_or_else(|| Error::Argument(format!("unknown rotation {name:?}")))?;
    let angle = match turn {
        "quarter" => std::f64::consts::FRAC_PI_2,
        "half" => std::f64::consts::PI,
        "three-quarter" => 1.5 * std::f64::consts::PI,
        _ => return Err(Error::Argument(format!("unknown rotation {name:?}"))),
    };
    axis_rotation(axis, angle)
}

fn parse_element(arg: &str) -> Result<(PoincareElement, f64)> {
    let text = if arg.trim_start().starts_with('{') { arg.to_string() } else { fs::read_to_string(arg)? };
    let spec: ElementSpec = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("element: {e}")))?;
    let r = match spec.rotation {
        None => Rotation::identity(),
        Some(RotationSpec::Named(n)) => named_rotation(&n)?,
        Some(RotationSpec::Axis { axis, angle }) => axis_rotation(&axis, angle)?,
        Some(RotationSpec::Matrix(m)) => Rotation::from_matrix(m)?,
    };
    Ok((PoincareElement { y: spec.y, r }, spec.alpha))
}

fn moments(phi: &MomentumState) -> Value {
    let n2 = phi.norm().powi(2);
    let energy = phi.expectation_of(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()) / n2;
    let momentum: Vec<f64> = (0..3).map(|a| phi.expectation_of(move |p| p[a]) / n2).collect();
    json!({ "norm": phi.norm(), "energy": energy, "momentum": momentum })
}

fn transform(args: &TransformArgs) -> Result<ExitCode> {
    let phi = momentum_of(load_state(&args.state)?)?;
    let (element, alpha) = parse_element(&args.element)?;
    element.r.validate(phi.grid.n)?;
    let moved = combined_action(&phi, &element, alpha, args.interpolation.into(), &SupportPolicy::default())?;
    save_state(&args.out, &StoredState::Momentum(moved.clone()))?;
    let before = moments(&phi);
    let after = moments(&moved);
    let report = json!({
        "grid": phi.grid,
        "element": { "y": element.y, "R": element.r.matrix, "alpha": alpha },
        "input": before,
        "output": after,
        "relative_norm_change": (moved.norm() - phi.norm()).abs() / phi.norm(),
        "expected_energy_ratio": (-alpha).exp(),
    });
    emit(args.report.as_deref(), &serde_json::to_string_pretty(&report)?)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    k: usize,
    terms: Vec<ManifestTerm>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestTerm {
    #[serde(default = "unit_weight")]
    weight: [f64; 2],
    factors: Vec<PathBuf>,
}

fn unit_weight() -> [f64; 2] {
    [1.0, 0.0]
}

fn load_manifest(path: &Path) -> Result<FockSum> {
    let text = fs::read_to_string(path)?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut terms = Vec::with_capacity(m.terms.len());
    for t in m.terms {
        let factors = t.factors.iter().map(|f| momentum_of(load_state(&base.join(f))?)).collect::<Result<Vec<_>>>()?;
        terms.push((Complex64::new(t.weight[0], t.weight[1]), factors));
    }
    FockSum::new(m.k, terms)
}

fn position(v: &Value) -> Result<Vec3> {
    let xs = v.as_array().ok_or_else(|| Error::Parse(format!("position must be an array, got {v}")))?;
    if xs.is_empty() || xs.len() > 3 {
        return Err(Error::Parse(format!("position needs 1 to 3 components, got {}", xs.len())));
    }
    let mut x = [0.0; 3];
    for (slot, c) in x.iter_mut().zip(xs) {
        *slot = c.as_f64().ok_or_else(|| Error::Parse(format!("non-numeric coordinate {c}")))?;
    }
    Ok(x)
}

fn point(v: &Value, time: f64) -> Result<SpacetimePoint> {
    match v {
        Value::Object(o) => {
            let t = match o.get("t") {
                Some(t) => t.as_f64().ok_or_else(|| Error::Parse(format!("non-numeric time {t}")))?,
                None => time,
            };
            let x = position(o.get("x").ok_or_else(|| Error::Parse(format!("point {v} lacks \"x\"")))?)?;
            Ok(SpacetimePoint::new(t, x))
        }
        _ => Ok(SpacetimePoint::new(time, position(v)?)),
    }
}

fn is_point(v: &Value) -> bool {
    v.is_object() || v.as_array().is_some_and(|a| a.iter().all(Value::is_number))
}

/// Each entry becomes a tuple of `k` points; single points are accepted for `k = 1`.
fn parse_points(text: &str, k: usize, time: f64) -> Result<Vec<Vec<SpacetimePoint>>> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("points: {e}")))?;
    let entries = v.as_array().ok_or_else(|| Error::Parse("points file must hold a JSON list".into()))?;
    entries
        .iter()
        .map(|e| {
            let tuple = if is_point(e) {
                vec![point(e, time)?]
            } else {
                let items = e.as_array().ok_or_else(|| Error::Parse(format!("unrecognized point entry {e}")))?;
                items.iter().map(|p| point(p, time)).collect::<Result<Vec<_>>>()?
            };
            if tuple.len() != k {
                return Err(Error::Shape(format!("entry {e} has {} points, the state has {k} particles", tuple.len())));
            }
            Ok(tuple)
        })
        .collect()
}

fn point_label(pts: &[SpacetimePoint]) -> String {
    pts.iter().map(|p| format!("{} {} {} {}", p.t, p.x[0], p.x[1], p.x[2])).collect::<Vec<_>>().join(" | ")
}

fn amplitude(args: &AmplitudeArgs) -> Result<ExitCode> {
    if args.points.is_none() && args.density.is_none() {
        return Err(Error::Argument("nothing to compute: pass --points and/or --density".into()));
    }
    let psi = match (&args.state, &args.fock) {
        (Some(s), _) => FockSum::one(momentum_of(load_state(s)?)?),
        (None, Some(f)) => load_manifest(f)?,
        (None, None) => unreachable!("clap requires one of --state, --fock"),
    };
    let grid: GridSpec = psi.grid().ok_or_else(|| Error::Argument("empty Fock sum".into()))?;
    if let Some(path) = &args.points {
        let tuples = parse_points(&fs::read_to_string(path)?, psi.k, args.time)?;
        let mut csv = String::from("point,re,im,abs2\n");
        for pts in &tuples {
            for p in pts {
                p.check_in_box(&grid)?;
            }
            let a = amplitude_k(&psi, pts)?;
            csv.push_str(&format!("{},{:e},{:e},{:e}\n", point_label(pts), a.re, a.im, a.norm_sqr()));
        }
        emit(args.out.as_deref(), &csv)?;
    }
    if let Some(path) = &args.density {
        if psi.k != 1 || psi.terms.len() != 1 {
            return Err(Error::Argument("--density needs a one-particle state".into()));
        }
        let (w, factors) = &psi.terms[0];
        let amps = lattice_amplitudes(&factors[0].scaled(*w), args.time)?;
        let dens = CoordinateState::new(grid, amps.data.iter().map(|a| Complex64::new(a.norm_sqr(), 0.0)).collect())?;
        save_state(path, &StoredState::Coordinate(dens))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn make_state(args: &MakeStateArgs) -> Result<ExitCode> {
    let grid = GridSpec::new(args.dim, args.grid, args.box_length)?;
    let state = match args.random {
        Some(seed) => make_random(grid, seed)?,
        None => {
            let r0 = args.r0.unwrap_or(0.5 * grid.p_max());
            let sigma = args.sigma.unwrap_or_else(|| nwp_core::lattice::adapted_sigma(&grid));
            let direction = match &args.along {
                Some(u) if u.len() == 3 => RingDirection::Along([u[0], u[1], u[2]]),
                Some(u) => return Err(Error::Argument(format!("--along needs three components, got {}", u.len()))),
                None => RingDirection::Isotropic,
            };
            make_gaussian_ring(grid, r0, sigma, direction)?
        }
    };
    save_state(&args.out, &StoredState::Momentum(state))?;
    Ok(ExitCode::SUCCESS)
}
