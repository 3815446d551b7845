//! Verification suites, tolerance profiles and reports.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::actions::{combined_action, dilate, rotate_state, time_conjugated_d, time_conjugated_k, time_conjugated_k_literal, translate, PoincareElement};
use crate::error::{Error, Result};
use crate::exec;
use crate::generators::{product_form, Generator, GeneratorIdentity};
use crate::kernels::{
    bessel_limit_check, check_gs_coefficient, convolve_coordinate, gs_coefficient, omega_kernel, radial_transform, sample_kernel, time_kernel, time_symbol,
    velocity_kernel_error, Kernel, KernelCheck, Puncture,
};
use crate::lattice::{make_random, standard_rings, FockSum, GridSpec, MomentumState, RingRecipe, Sampled};
use crate::localization::{amplitude_k, covariance_check, density_integral, mass_outside, SpacetimePoint};
use crate::spectral::{apply_pipeline, to_coordinate, Interpolation, Operator, Pipeline, Rotation, SupportPolicy, Symbol};

pub const REPORT_SCHEMA: &str = "nwp-report/1";

const STRICT: &str = include_str!("../profiles/strict.json");
const SMOKE: &str = include_str!("../profiles/smoke.json");

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Tolerance profile; every field is a relative residual bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub name: String,
    pub exact_phase: f64,
    pub first_derivative: f64,
    pub second_derivative: f64,
    pub identity_first_derivative: f64,
    pub interpolation: f64,
    pub combined: f64,
    pub kernel: f64,
    pub l63: f64,
    pub density: f64,
    pub amplitude: f64,
    pub bessel: f64,
}

impl Tolerances {
    /// A built-in profile (`strict`, `smoke`) or a JSON file.
    pub fn load(name: &str) -> Result<Self> {
        let text = match name {
            "strict" => STRICT.to_string(),
            "smoke" => SMOKE.to_string(),
            path if path.ends_with(".json") => std::fs::read_to_string(path)?,
            other => return Err(Error::Config(format!("unknown tolerance profile {other:?}"))),
        };
        let t: Tolerances = serde_json::from_str(&text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn strict() -> Self {
        Self::load("strict").expect("built-in profile")
    }

    fn validate(&self) -> Result<()> {
        let all = [
            self.exact_phase,
            self.first_derivative,
            self.second_derivative,
            self.identity_first_derivative,
            self.interpolation,
            self.combined,
            self.kernel,
            self.l63,
            self.density,
            self.amplitude,
            self.bessel,
        ];
        if all.iter().all(|t| t.is_finite() && *t > 0.0) {
            Ok(())
        } else {
            Err(Error::Config(format!("profile {:?} has a non-positive tolerance", self.name)))
        }
    }

    /// Tolerance for a residual involving momentum derivatives up to `order`.
    pub fn for_order(&self, order: usize) -> f64 {
        match order {
            0 => self.exact_phase,
            1 => self.first_derivative,
            _ => self.second_derivative,
        }
    }
}

/// Suite configuration; missing fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub grid: usize,
    pub box_length: f64,
    pub dim: usize,
    pub tol_profile: String,
    pub seed: u64,
    /// Also run on `grid/2` points and require the residual to drop; `None` refines
    /// whenever the coarse grid can host the test states.
    pub refine: Option<bool>,
    /// Test states; `None` selects the grid-adapted three-ring recipe.
    pub rings: Option<Vec<RingRecipe>>,
    pub conjugation_times: Vec<f64>,
    pub alpha: f64,
    pub l63_time: f64,
    pub l63_ladder: Vec<f64>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            grid: 32,
            box_length: 12.0,
            dim: 3,
            tol_profile: "strict".into(),
            seed: 0,
            refine: None,
            rings: None,
            conjugation_times: vec![0.3, 0.7],
            alpha: 0.2,
            l63_time: 0.5,
            l63_ladder: vec![0.2, 0.1, 0.05],
        }
    }
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.dim, self.grid, self.box_length).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn tolerances(&self) -> Result<Tolerances> {
        Tolerances::load(&self.tol_profile)
    }

    fn recipes(&self, grid: &GridSpec) -> Vec<RingRecipe> {
        self.rings.clone().unwrap_or_else(|| standard_rings(grid))
    }
}

/// Machine-readable error attached to a row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    pub code: String,
    pub message: String,
}

impl From<&Error> for RowError {
    fn from(e: &Error) -> Self {
        RowError { code: e.code().into(), message: e.to_string() }
    }
}

/// One line of a report. Rows without a tolerance are diagnostics and always pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub check: String,
    pub residual: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: bool,
    pub coarse_residual: Option<f64>,
    /// `log2(coarse / fine)`.
    pub slope: Option<f64>,
    pub note: String,
    pub error: Option<RowError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub grid: GridSpec,
    pub coarse_grid: Option<GridSpec>,
    pub states: Vec<RingRecipe>,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub version: String,
    pub parallel: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub suite: String,
    pub timestamp: u64,
    pub metadata: Metadata,
    pub rows: Vec<Row>,
    /// Coefficient comparisons behind the `kern:gs` rows.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kernel_table: Vec<KernelCheck>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> Vec<&Row> {
        self.rows.iter().filter(|r| !r.pass).collect()
    }

    pub fn row(&self, check: &str) -> Option<&Row> {
        self.rows.iter().find(|r| r.check == check)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        let mut s = String::from("check,residual,tolerance,pass,coarse_residual,slope,error,note\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                csv_field(&r.check),
                opt(r.residual),
                opt(r.tolerance),
                r.pass,
                opt(r.coarse_residual),
                r.slope.map(|x| format!("{x:.3}")).unwrap_or_default(),
                r.error.as_ref().map(|e| e.code.as_str()).unwrap_or(""),
                csv_field(&r.note)
            ));
        }
        s
    }

    /// Concatenates the rows of several reports under one suite name.
    pub fn merge(suite: &str, reports: Vec<Report>) -> Result<Report> {
        let mut it = reports.into_iter();
        let mut first = it.next().ok_or_else(|| Error::Argument("nothing to merge".into()))?;
        first.suite = suite.into();
        for r in it {
            first.rows.extend(r.rows);
            first.kernel_table.extend(r.kernel_table);
            for n in r.metadata.notes {
                if !first.metadata.notes.contains(&n) {
                    first.metadata.notes.push(n);
                }
            }
        }
        Ok(first)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

const GS_LAMBDAS: [f64; 3] = [-1.0, -0.5, 0.5];
const GS_RADII: [f64; 2] = [1.0, 2.0];

fn now() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// A computed check before refinement is folded in.
#[derive(Debug)]
struct Check {
    name: String,
    value: Result<f64>,
    tol: Option<f64>,
    note: String,
    /// Whether the residual is expected to fall under grid refinement.
    refine: bool,
    /// Extra pass condition with its explanation.
    cond: Option<(bool, String)>,
}

impl Check {
    fn new(name: impl Into<String>, value: Result<f64>, tol: Option<f64>) -> Self {
        Check { name: name.into(), value, tol, note: String::new(), refine: false, cond: None }
    }

    fn refined(mut self) -> Self {
        self.refine = true;
        self
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    fn cond(mut self, ok: bool, why: impl Into<String>) -> Self {
        self.cond = Some((ok, why.into()));
        self
    }
}

/// Grid, admissible test states and tolerances for one suite run.
#[derive(Debug, Clone)]
pub struct SuiteContext {
    pub grid: GridSpec,
    pub recipes: Vec<RingRecipe>,
    pub states: Vec<MomentumState>,
    pub tol: Tolerances,
    pub config: Config,
}

impl SuiteContext {
    pub fn new(config: &Config, grid: GridSpec) -> Result<Self> {
        let tol = config.tolerances()?;
        let recipes = config.recipes(&grid);
        if recipes.is_empty() {
            return Err(Error::Config("no test states configured".into()));
        }
        let states =
            recipes.iter().map(|r| r.build(grid).map_err(|e| Error::Config(format!("test state {r:?} on {grid:?}: {e}")))).collect::<Result<Vec<_>>>()?;
        for (k, s) in states.iter().enumerate() {
            s.check_zero_mode().map_err(|e| Error::Config(format!("test state {k} is inadmissible for 1/omega generators: {e}")))?;
        }
        Ok(SuiteContext { grid, recipes, states, tol, config: config.clone() })
    }

    fn worst<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&MomentumState) -> Result<f64>,
    {
        let mut worst = 0.0f64;
        for s in &self.states {
            worst = worst.max(f(s)?);
        }
        Ok(worst)
    }
}

fn coarse_grid(config: &Config, fine: &GridSpec) -> Option<GridSpec> {
    let want = config.refine.unwrap_or(true);
    if !want || fine.points < 8 {
        return None;
    }
    let g = GridSpec::new(fine.n, fine.points / 2, fine.box_length).ok()?;
    match SuiteContext::new(config, g) {
        Ok(_) => Some(g),
        Err(_) => None,
    }
}

type SuiteBody = fn(&SuiteContext) -> Result<Vec<Check>>;

fn run_suite(name: &str, config: &Config, body: SuiteBody) -> Result<Report> {
    let grid = config.grid_spec()?;
    let fine = SuiteContext::new(config, grid)?;
    let mut notes = Vec::new();
    let coarse = coarse_grid(config, &grid);
    if config.refine == Some(true) && coarse.is_none() {
        return Err(Error::Config(format!("refinement requested but {} points cannot host the test states", grid.points / 2)));
    }
    if coarse.is_none() {
        notes.push("refinement not run: the coarse grid cannot host the test states or refinement is disabled".into());
    }
    if grid.n != 3 {
        notes.push(format!("n = {}: dilatation and special conformal checks are skipped", grid.n));
    }
    let fine_checks = body(&fine)?;
    let coarse_checks = match coarse {
        Some(g) => Some(body(&SuiteContext::new(config, g)?)?),
        None => None,
    };
    let rows = assemble(fine_checks, coarse_checks, fine.tol.exact_phase);
    Ok(Report {
        schema: REPORT_SCHEMA.into(),
        suite: name.into(),
        timestamp: now(),
        metadata: Metadata {
            grid,
            coarse_grid: coarse,
            states: fine.recipes.clone(),
            tolerances: fine.tol.clone(),
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION").into(),
            parallel: exec::is_parallel(),
            notes,
        },
        rows,
        kernel_table: Vec::new(),
    })
}

fn assemble(fine: Vec<Check>, coarse: Option<Vec<Check>>, roundoff: f64) -> Vec<Row> {
    let coarse: BTreeMap<String, std::result::Result<f64, String>> =
        coarse.unwrap_or_default().into_iter().map(|ch| (ch.name, ch.value.map_err(|e| e.code().to_string()))).collect();
    fine.into_iter()
        .map(|ch| {
            let mut note = ch.note;
            let push = |note: &mut String, s: &str| {
                if !note.is_empty() {
                    note.push_str("; ");
                }
                note.push_str(s);
            };
            match ch.value {
                Err(e) => Row {
                    check: ch.name,
                    residual: None,
                    tolerance: ch.tol,
                    pass: false,
                    coarse_residual: None,
                    slope: None,
                    note,
                    error: Some(RowError::from(&e)),
                },
                Ok(v) => {
                    let mut pass = ch.tol.is_none_or(|t| v < t);
                    if let Some((ok, why)) = &ch.cond {
                        pass &= *ok;
                        if !ok {
                            push(&mut note, why);
                        }
                    }
                    let cr = match (ch.refine, coarse.get(&ch.name)) {
                        (true, Some(Ok(v))) => Some(*v),
                        (true, Some(Err(code))) => {
                            push(&mut note, &format!("coarse grid run failed ({code}); refinement not measured"));
                            None
                        }
                        _ => None,
                    };
                    let slope = cr.filter(|c| *c > 0.0 && v > 0.0).map(|c| (c / v).log2());
                    if let Some(c0) = cr {
                        let roundoff_row = v <= roundoff && c0 <= roundoff;
                        if roundoff_row {
                            push(&mut note, "round-off level on both grids");
                        } else if v >= c0 && ch.tol.is_some() {
                            pass = false;
                            push(&mut note, "residual did not decrease under refinement");
                        }
                    }
                    Row { check: ch.name, residual: Some(v), tolerance: ch.tol, pass, coarse_residual: cr, slope, note, error: None }
                }
            }
        })
        .collect()
}

// ---------------------------------------------------------------- algebra table

/// Lorentz-labelled conformal generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Lz {
    P(usize),
    K(usize),
    M(usize, usize),
    D,
}

fn eta(a: usize, b: usize) -> f64 {
    match (a, b) {
        (0, 0) => 1.0,
        _ if a == b => -1.0,
        _ => 0.0,
    }
}

fn lz_generator(l: Lz) -> Option<(f64, Generator)> {
    match l {
        Lz::P(mu) => Some((1.0, Generator::lorentz_p(mu))),
        Lz::K(mu) => Some((1.0, Generator::lorentz_k(mu))),
        Lz::M(mu, nu) => Generator::lorentz_m(mu, nu),
        Lz::D => Some((1.0, Generator::D)),
    }
}

fn vector_rule(mu: usize, nu: usize, rho: usize, v: fn(usize) -> Lz) -> Vec<(Complex64, Lz)> {
    vec![(c(0.0, eta(nu, rho)), v(mu)), (c(0.0, -eta(mu, rho)), v(nu))]
}

/// `[a, b]` from the structure constants of the conformal algebra.
fn bracket(a: Lz, b: Lz) -> Vec<(Complex64, Lz)> {
    use Lz::*;
    match (a, b) {
        (P(_), P(_)) | (K(_), K(_)) | (D, D) | (M(..), D) => vec![],
        (M(mu, nu), P(rho)) => vector_rule(mu, nu, rho, P),
        (M(mu, nu), K(rho)) => vector_rule(mu, nu, rho, K),
        (M(mu, nu), M(rho, sg)) => {
            vec![(c(0.0, eta(nu, rho)), M(mu, sg)), (c(0.0, -eta(mu, rho)), M(nu, sg)), (c(0.0, -eta(nu, sg)), M(mu, rho)), (c(0.0, eta(mu, sg)), M(nu, rho))]
        }
        (P(rho), D) => vec![(c(0.0, 1.0), P(rho))],
        (K(rho), D) => vec![(c(0.0, -1.0), K(rho))],
        (P(rho), K(mu)) => vec![(c(0.0, 2.0 * eta(rho, mu)), D), (c(0.0, -2.0), M(rho, mu))],
        _ => bracket(b, a).into_iter().map(|(k, l)| (-k, l)).collect(),
    }
}

fn resolve(terms: Vec<(Complex64, Lz)>) -> Vec<(Complex64, Generator)> {
    let mut acc: BTreeMap<Generator, Complex64> = BTreeMap::new();
    for (k, l) in terms {
        if let Some((s, g)) = lz_generator(l) {
            *acc.entry(g).or_insert(c(0.0, 0.0)) += k * s;
        }
    }
    acc.into_iter().filter(|(_, k)| k.norm() > 1e-15).map(|(g, k)| (k, g)).collect()
}

/// `[a, b] = Σ coef·G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgebraEntry {
    pub a: Generator,
    pub b: Generator,
    pub expected: Vec<(Complex64, Generator)>,
}

impl AlgebraEntry {
    pub fn name(&self) -> String {
        format!("[{},{}]", self.a, self.b)
    }

    /// Derivative order of the products `AB` and `BA` evaluated by the check.
    pub fn derivative_order(&self) -> usize {
        self.a.derivative_order() + self.b.derivative_order()
    }

    pub fn generators(&self) -> Vec<Generator> {
        let mut g = vec![self.a, self.b];
        g.extend(self.expected.iter().map(|(_, x)| *x));
        g
    }

    pub fn expected_string(&self) -> String {
        if self.expected.is_empty() {
            return "0".into();
        }
        self.expected.iter().map(|(k, g)| format!("({}{:+}i){}", k.re, k.im, g)).collect::<Vec<_>>().join(" + ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgebraTable {
    pub entries: Vec<AlgebraEntry>,
}

fn conformal_basis() -> Vec<Lz> {
    let mut v: Vec<Lz> = (0..4).map(Lz::P).collect();
    v.extend([Lz::M(1, 2), Lz::M(1, 3), Lz::M(2, 3), Lz::M(0, 1), Lz::M(0, 2), Lz::M(0, 3), Lz::D]);
    v.extend((0..4).map(Lz::K));
    v
}

impl AlgebraTable {
    /// Every unordered pair of the fifteen conformal generators.
    pub fn conformal() -> Self {
        let basis = conformal_basis();
        let mut entries = Vec::new();
        for (i, &a) in basis.iter().enumerate() {
            for &b in &basis[i + 1..] {
                let ga = lz_generator(a).expect("basis element").1;
                let gb = lz_generator(b).expect("basis element").1;
                entries.push(AlgebraEntry { a: ga, b: gb, expected: resolve(bracket(a, b)) });
            }
        }
        AlgebraTable { entries }
    }

    /// `[X_j, P_k] = −iη_{jk}N` and `[P0, X_j] = −iV_j`.
    pub fn anchors(n: usize) -> Self {
        let mut entries = Vec::new();
        for j in 1..=n {
            for k in 1..=n {
                let expected = if j == k { vec![(c(0.0, 1.0), Generator::N)] } else { vec![] };
                entries.push(AlgebraEntry { a: Generator::X(j), b: Generator::P(k), expected });
            }
        }
        for j in 1..=n {
            entries.push(AlgebraEntry { a: Generator::P0, b: Generator::X(j), expected: vec![(c(0.0, -1.0), Generator::V(j))] });
        }
        AlgebraTable { entries }
    }

    pub fn supported(&self, n: usize) -> AlgebraTable {
        AlgebraTable { entries: self.entries.iter().filter(|e| e.generators().iter().all(|g| g.validate(n).is_ok())).cloned().collect() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nonzero(&self) -> usize {
        self.entries.iter().filter(|e| !e.expected.is_empty()).count()
    }
}

/// `‖[A,B]φ − expected φ‖ / ‖φ‖` for every entry, reusing single applications.
pub fn algebra_residuals(table: &AlgebraTable, phi: &MomentumState) -> Result<Vec<f64>> {
    let n = phi.grid.n;
    let mut gens: Vec<Generator> = table.entries.iter().flat_map(|e| e.generators()).collect();
    gens.sort();
    gens.dedup();
    let applied = exec::map_slice(&gens, |g| g.operator(n).and_then(|op| op.apply(phi).map(|s| (op, s))));
    let mut cache: BTreeMap<Generator, (Operator, MomentumState)> = BTreeMap::new();
    for (g, r) in gens.iter().zip(applied) {
        cache.insert(*g, r?);
    }
    let nrm = phi.norm();
    let out = exec::map_slice(&table.entries, |e| -> Result<f64> {
        let (opa, aphi) = &cache[&e.a];
        let (opb, bphi) = &cache[&e.b];
        let mut r = opa.apply(bphi)?.sub(&opb.apply(aphi)?)?;
        for (k, g) in &e.expected {
            r = r.sub(&cache[g].1.scaled(*k))?;
        }
        Ok(r.norm() / nrm)
    });
    out.into_iter().collect()
}

fn algebra_checks(ctx: &SuiteContext) -> Result<Vec<Check>> {
    let n = ctx.grid.n;
    let mut checks = Vec::new();
    for (table, first) in [(AlgebraTable::anchors(n), true), (AlgebraTable::conformal().supported(n), false)] {
        let per_state = ctx.states.iter().map(|s| algebra_residuals(&table, s)).collect::<Vec<_>>();
        for (i, e) in table.entries.iter().enumerate() {
            let value = per_state.iter().try_fold(0.0f64, |w, r| match r {
                Ok(v) => Ok(w.max(v[i])),
                Err(err) => Err(clone_error(err)),
            });
            let tol = if first { ctx.tol.first_derivative } else { ctx.tol.for_order(e.derivative_order()) };
            checks.push(Check::new(format!("alg:{}", e.name()), value, Some(tol)).refined().note(format!("expected {}", e.expected_string())));
        }
    }
    Ok(checks)
}

fn clone_error(e: &Error) -> Error {
    match e {
        Error::Io(io) => Error::Config(io.to_string()),
        Error::Shape(s) => Error::Shape(s.clone()),
        Error::Domain(s) => Error::Domain(s.clone()),
        Error::Numeric { index, what } => Error::Numeric { index: *index, what: what.clone() },
        Error::Argument(s) => Error::Argument(s.clone()),
        Error::Pole(x) => Error::Pole(*x),
        Error::Singularity(s) => Error::Singularity(s.clone()),
        Error::UnsupportedDimension { n, what } => Error::UnsupportedDimension { n: *n, what: what.clone() },
        Error::Config(s) => Error::Config(s.clone()),
        Error::Parse(s) => Error::Parse(s.clone()),
    }
}

pub fn run_algebra_suite(config: &Config) -> Result<Report> {
    run_suite("algebra", config, algebra_checks)
}

// ---------------------------------------------------------------- identities

/// Residual of an identity under the best per-term sign reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityOutcome {
    pub identity: String,
    pub labels: Vec<String>,
    pub literal_residual: f64,
    pub best_signs: Vec<f64>,
    pub best_residual: f64,
}

impl IdentityOutcome {
    pub fn literal_holds(&self) -> bool {
        self.best_signs.iter().all(|s| *s > 0.0)
    }

    pub fn reading(&self) -> String {
        if self.literal_holds() {
            return "literal reading".into();
        }
        let flipped: Vec<&str> = self.labels.iter().zip(&self.best_signs).filter(|(_, s)| **s < 0.0).map(|(l, _)| l.as_str()).collect();
        format!("holds with the sign of [{}] reversed; literal residual {:.3e}", flipped.join(", "), self.literal_residual)
    }
}

/// Evaluates an identity on the states and searches the `2^m` per-term sign readings.
pub fn identity_outcome(id: GeneratorIdentity, states: &[MomentumState]) -> Result<IdentityOutcome> {
    let n = states.first().ok_or_else(|| Error::Argument("no states".into()))?.grid.n;
    let form = product_form(id, n)?;
    let lhs = form.lhs.operator(n)?;
    let m = form.terms.len();
    let mut per_state = Vec::new();
    for s in states {
        let l = lhs.apply(s)?;
        let t = form.terms.iter().map(|(_, op)| op.apply(s)).collect::<Result<Vec<_>>>()?;
        per_state.push((s.norm(), l, t));
    }
    let residual = |signs: &[f64]| -> Result<f64> {
        let mut worst = 0.0f64;
        for (nrm, l, t) in &per_state {
            let mut r = l.clone();
            for (tk, sk) in t.iter().zip(signs) {
                r = r.sub(&tk.scaled(c(*sk, 0.0)))?;
            }
            worst = worst.max(r.norm() / nrm);
        }
        Ok(worst)
    };
    let literal = vec![1.0; m];
    let literal_residual = residual(&literal)?;
    let mut best = (literal_residual, literal);
    for mask in 1..(1usize << m) {
        let signs: Vec<f64> = (0..m).map(|k| if mask >> k & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let r = residual(&signs)?;
        if r < best.0 {
            best = (r, signs);
        }
    }
    Ok(IdentityOutcome {
        identity: id.to_string(),
        labels: form.terms.iter().map(|(l, _)| l.clone()).collect(),
        literal_residual,
        best_signs: best.1,
        best_residual: best.0,
    })
}

/// All product-form identities available in dimension `n`.
pub fn identities(n: usize) -> Vec<GeneratorIdentity> {
    let mut v: Vec<GeneratorIdentity> = (1..=n).map(GeneratorIdentity::MboostProduct).collect();
    for i in 1..=n {
        for k in i + 1..=n {
            v.push(GeneratorIdentity::MrotProduct(i, k));
        }
    }
    if n == 3 {
        v.push(GeneratorIdentity::DProduct);
        v.push(GeneratorIdentity::K0Product);
        v.extend((1..=3).map(GeneratorIdentity::KjProduct));
    }
    v
}

fn identity_tolerance(id: GeneratorIdentity, tol: &Tolerances) -> f64 {
    match id {
        GeneratorIdentity::K0Product | GeneratorIdentity::KjProduct(_) => tol.second_derivative,
        _ => tol.identity_first_derivative,
    }
}

/// `‖(e^{itP0} D e^{−itP0} − (D − tP0))φ‖/‖φ‖`, the conjugation done with [`translate`].
pub fn conjugation_residual_d(phi: &MomentumState, t: f64) -> Result<f64> {
    let d = Generator::D.operator(3)?;
    let lhs = translate(&d.apply(&translate(phi, [t, 0.0, 0.0, 0.0]))?, [-t, 0.0, 0.0, 0.0]);
    lhs.relative_distance(&time_conjugated_d(t)?.apply(phi)?, phi.norm())
}

/// Residuals of the summed conjugation series and of the commonly written closed form.
pub fn conjugation_residual_k(phi: &MomentumState, mu: usize, t: f64) -> Result<(f64, f64)> {
    let k = Generator::lorentz_k(mu).operator(3)?;
    let lhs = translate(&k.apply(&translate(phi, [t, 0.0, 0.0, 0.0]))?, [-t, 0.0, 0.0, 0.0]);
    let nrm = phi.norm();
    let series = lhs.relative_distance(&time_conjugated_k(mu, t)?.apply(phi)?, nrm)?;
    let literal = lhs.relative_distance(&time_conjugated_k_literal(mu, t)?.apply(phi)?, nrm)?;
    Ok((series, literal))
}

fn identity_checks(ctx: &SuiteContext) -> Result<Vec<Check>> {
    let n = ctx.grid.n;
    let mut checks = Vec::new();
    for id in identities(n) {
        let tol = identity_tolerance(id, &ctx.tol);
        checks.push(match identity_outcome(id, &ctx.states) {
            Ok(o) => Check::new(id.to_string(), Ok(o.best_residual), Some(tol)).refined().note(o.reading()),
            Err(e) => Check::new(id.to_string(), Err(e), Some(tol)),
        });
    }
    if n == 3 {
        for &t in &ctx.config.conjugation_times {
            let v = ctx.worst(|s| conjugation_residual_d(s, t));
            checks.push(Check::new(format!("conj:D(t={t})"), v, Some(ctx.tol.identity_first_derivative)).refined());
            for mu in 0..4 {
                let both = ctx.states.iter().map(|s| conjugation_residual_k(s, mu, t)).collect::<Result<Vec<_>>>();
                let name = format!("conj:K({mu})(t={t})");
                checks.push(match both {
                    Ok(v) => {
                        let series = v.iter().map(|x| x.0).fold(0.0, f64::max);
                        let literal = v.iter().map(|x| x.1).fold(0.0, f64::max);
                        let note = if mu == 0 {
                            format!("summed series, +t^2 P0; the -t^2 P0 form leaves {literal:.3e}")
                        } else {
                            "summed series; coincides with the -t^2 P_mu form".to_string()
                        };
                        Check::new(name, Ok(series), Some(ctx.tol.second_derivative)).refined().note(note)
                    }
                    Err(e) => Check::new(name, Err(e), Some(ctx.tol.second_derivative)),
                });
            }
        }
    }
    Ok(checks)
}

pub fn run_identity_suite(config: &Config) -> Result<Report> {
    run_suite("identities", config, identity_checks)
}

// ---------------------------------------------------------------- kernels

/// Errors of the damped time-kernel convolution against the exact phase, per ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L63Outcome {
    pub time: f64,
    pub ladder: Vec<f64>,
    pub errors: Vec<f64>,
    /// `1 − e^{−εΔp}`: no admissible lattice state can do better at the finest ε.
    pub floor: f64,
    pub monotone: bool,
    /// Error of the Richardson combination of the last three rungs (ratio-2 ladder).
    pub extrapolated: Option<f64>,
}

/// Convolves the coordinate partner of `phi` with the damped time kernel along the ε ladder.
pub fn l63_outcome(phi: &MomentumState, time: f64, ladder: &[f64]) -> Result<L63Outcome> {
    if ladder.is_empty() || ladder.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Argument("the epsilon ladder needs positive entries".into()));
    }
    let f = to_coordinate(phi);
    let exact = to_coordinate(&translate(phi, [time, 0.0, 0.0, 0.0]));
    let nrm = exact.norm();
    let mut conv = Vec::new();
    let mut errors = Vec::new();
    for &e in ladder {
        let g = convolve_coordinate(&Kernel::Symbol(time_symbol(time, e)), &f)?;
        errors.push(g.relative_distance(&exact, nrm)?);
        conv.push(g);
    }
    let k = ladder.len();
    let ratio2 = k >= 3 && ladder[k - 3..].windows(2).all(|w| (w[0] / w[1] - 2.0).abs() < 1e-12);
    let extrapolated = if ratio2 {
        let (a, b, cc) = (&conv[k - 3], &conv[k - 2], &conv[k - 1]);
        let r = cc.scaled(c(8.0 / 3.0, 0.0)).sub(&b.scaled(c(2.0, 0.0)))?.add(&a.scaled(c(1.0 / 3.0, 0.0)))?;
        Some(r.relative_distance(&exact, nrm)?)
    } else {
        None
    };
    let eps_min = ladder.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(L63Outcome {
        time,
        ladder: ladder.to_vec(),
        monotone: errors.windows(2).all(|w| w[1] < w[0]),
        errors,
        floor: 1.0 - (-eps_min * phi.grid.dp()).exp(),
        extrapolated,
    })
}

/// Radial quadrature of `e^{−s|p|}` against the closed time kernel, relative.
pub fn time_kernel_closed_form_error(r: f64, time: f64, eps: f64) -> Result<f64> {
    let s = c(eps, time);
    let q = radial_transform(r, 60.0 / eps, |p| (-s * p).exp())?;
    let closed = time_kernel(&[r, 0.0, 0.0], time, eps)?;
    Ok((q - closed).norm() / closed.norm())
}

/// Sampled `ω̃` kernel, punctured to match `ω` at the ring centre, against the `ω` symbol.
pub fn sampled_omega_residual(phi: &MomentumState, p_ref: f64) -> Result<f64> {
    let g = phi.grid;
    let kern =
        sample_kernel(&g, |x| omega_kernel(x, g.n).map(|v| c(v, 0.0)), &Puncture::MatchSymbol { symbol: Symbol::norm_pow(1.0), p_ref: [p_ref, 0.0, 0.0] })?;
    let f = to_coordinate(phi);
    let conv = convolve_coordinate(&kern, &f)?;
    let exact = to_coordinate(&apply_pipeline(&Pipeline::momentum(Symbol::norm_pow(1.0)), phi)?);
    conv.relative_distance(&exact, exact.norm())
}

fn kernel_checks(ctx: &SuiteContext) -> Result<Vec<Check>> {
    let tol = &ctx.tol;
    let mut checks = Vec::new();
    for &lambda in &GS_LAMBDAS {
        for &r in &GS_RADII {
            let v = check_gs_coefficient(lambda, r, 0.1, 5).map(|k| k.relative_error);
            checks.push(
                Check::new(format!("kern:gs(lambda={lambda},r={r})"), v, Some(tol.kernel)).note("damped radial quadrature, epsilon 0.1..0.00625 extrapolated"),
            );
        }
    }
    let c_half = gs_coefficient(0.5, 3).map(|v| ((v + 1.0 / (PI * PI)) * PI * PI).abs());
    checks.push(Check::new("kern:gs-omega-coefficient", c_half, Some(tol.exact_phase)).note("coefficient of omega-tilde is -1/pi^2"));
    for &f in &[1.0, 2.0] {
        let ladder = [1e-1, 1e-2, 1e-3, 1e-4];
        checks.push(match bessel_limit_check(f, &ladder) {
            Ok(rep) => {
                let last = rep.rows.last().map(|r| r.error).unwrap_or(f64::NAN);
                Check::new(format!("kern:bessel-limit(f={f})"), Ok(last), Some(tol.bessel)).cond(rep.monotone, "error not monotone along the m ladder")
            }
            Err(e) => Check::new(format!("kern:bessel-limit(f={f})"), Err(e), Some(tol.bessel)),
        });
    }
    for (j, x) in [(1, [0.8, 0.0, 0.0]), (2, [0.3, -1.1, 0.4]), (3, [0.5, 0.5, -0.9])] {
        checks.push(
            Check::new(format!("kern:velocity-kernel(j={j})"), velocity_kernel_error(&x, j, 0.1, 5), Some(tol.kernel))
                .note("-i omega_j with lower-index x_j against the damped p_j/omega quadrature"),
        );
    }
    let t = ctx.config.l63_time;
    for &r in &[0.5, 1.0, 2.0] {
        let eps = *ctx.config.l63_ladder.last().unwrap_or(&0.05);
        checks.push(Check::new(format!("kern:time-kernel-closed-form(r={r})"), time_kernel_closed_form_error(r, t, eps), Some(tol.kernel)));
    }
    let outcomes = ctx.states.iter().map(|s| l63_outcome(s, t, &ctx.config.l63_ladder)).collect::<Result<Vec<_>>>();
    match outcomes {
        Ok(outs) => {
            for (k, e) in ctx.config.l63_ladder.iter().enumerate() {
                let worst = outs.iter().map(|o| o.errors[k]).fold(0.0, f64::max);
                let floor = 1.0 - (-e * ctx.grid.dp()).exp();
                checks.push(
                    Check::new(format!("kern:l63(eps={e})"), Ok(worst), None)
                        .note(format!("diagnostic: any admissible state has error >= 1-exp(-eps*dp) = {floor:.3e}")),
                );
            }
            let monotone = outs.iter().all(|o| o.monotone);
            let ratio = outs.iter().flat_map(|o| o.errors.windows(2).map(|w| w[1] / w[0]).collect::<Vec<_>>()).fold(0.0, f64::max);
            checks.push(
                Check::new("kern:l63-ladder-ratio", Ok(ratio), Some(1.0))
                    .cond(monotone, "error not monotone along the epsilon ladder")
                    .note("largest error ratio between successive rungs"),
            );
            if outs.iter().all(|o| o.extrapolated.is_some()) {
                let x = outs.iter().filter_map(|o| o.extrapolated).fold(0.0, f64::max);
                checks.push(Check::new("kern:l63-extrapolated", Ok(x), None).note("diagnostic: Richardson combination of the last three rungs"));
            }
        }
        Err(e) => checks.push(Check::new("kern:l63", Err(e), Some(tol.l63))),
    }
    if ctx.grid.n == 3 {
        let r0 = ctx.recipes[0].r0;
        checks.push(
            Check::new("kern:omega-sampled-vs-symbol", ctx.worst(|s| sampled_omega_residual(s, r0)), None)
                .refined()
                .note("diagnostic: closed-form samples of omega-tilde with the origin matched at the ring centre"),
        );
    }
    Ok(checks)
}

pub fn run_kernel_suite(config: &Config) -> Result<Report> {
    let mut report = run_suite("kernels", config, kernel_checks)?;
    report.kernel_table = gs_table()?;
    Ok(report)
}

/// The coefficient table for `λ ∈ {−1, −1/2, 1/2}`, `n = 3`.
pub fn gs_table() -> Result<Vec<KernelCheck>> {
    let mut out = Vec::new();
    for &lambda in &GS_LAMBDAS {
        for &r in &GS_RADII {
            out.push(check_gs_coefficient(lambda, r, 0.1, 5)?);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- covariance

fn probe_points() -> Vec<SpacetimePoint> {
    vec![
        SpacetimePoint::new(0.0, [0.0, 0.0, 0.0]),
        SpacetimePoint::new(0.3, [0.4, -0.2, 0.3]),
        SpacetimePoint::new(-0.2, [-0.5, 0.6, 0.1]),
        SpacetimePoint::new(0.1, [0.2, 0.25, -0.45]),
    ]
}

/// Worst covariance residual over the probe points and states.
fn covariance_worst(ctx: &SuiteContext, element: &PoincareElement, alpha: f64) -> Result<f64> {
    let policy = SupportPolicy::default();
    let pts = probe_points();
    let mut worst = 0.0f64;
    for s in &ctx.states {
        let moved = combined_action(s, element, alpha, Interpolation::Trigonometric, &policy)?;
        for z in &pts {
            let r = crate::localization::covariance_against(s, &moved, element, alpha, z)?;
            worst = worst.max(r.residual);
        }
    }
    Ok(worst)
}

fn norm_change(ctx: &SuiteContext, f: &dyn Fn(&MomentumState) -> Result<MomentumState>) -> Result<f64> {
    ctx.worst(|s| Ok((f(s)?.norm() - s.norm()).abs() / s.norm()))
}

/// `max |amplitude_k − oracle| / max |oracle|` for `k = 2` product states, the oracle
/// being the symmetrized two-particle momentum tensor summed against plane waves.
pub fn k2_tensor_oracle_residual(grid: GridSpec, seed: u64, products: usize) -> Result<f64> {
    let pts = [
        (SpacetimePoint::new(0.0, [0.0, 0.0, 0.0]), SpacetimePoint::new(0.0, [1.0, -0.5, 0.25])),
        (SpacetimePoint::new(0.4, [0.3, 0.7, -1.1]), SpacetimePoint::new(0.4, [-0.9, 0.2, 0.6])),
        (SpacetimePoint::new(-0.25, [1.3, 0.0, -0.4]), SpacetimePoint::new(-0.25, [1.3, 0.0, -0.4])),
    ];
    let mut worst_err = 0.0f64;
    let mut scale = 0.0f64;
    for k in 0..products {
        let a = make_random(grid, seed.wrapping_mul(1000).wrapping_add(2 * k as u64))?;
        let b = make_random(grid, seed.wrapping_mul(1000).wrapping_add(2 * k as u64 + 1))?;
        let psi = FockSum::product(vec![a.clone(), b.clone()])?;
        for (x1, x2) in &pts {
            let got = amplitude_k(&psi, &[*x1, *x2])?;
            let want = two_particle_tensor_amplitude(&a, &b, x1, x2);
            worst_err = worst_err.max((got - want).norm());
            scale = scale.max(want.norm());
        }
    }
    Ok(worst_err / scale)
}

fn two_particle_tensor_amplitude(a: &MomentumState, b: &MomentumState, x1: &SpacetimePoint, x2: &SpacetimePoint) -> Complex64 {
    let g = a.grid;
    let nyquist = -(g.points as i64 / 2);
    let wave = |x: &SpacetimePoint| -> Vec<Complex64> {
        (0..g.len())
            .map(|i| {
                let p = g.momentum(i);
                let k = g.labels(i);
                let w = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                let mut v = Complex64::from_polar(1.0, -(w * x.t));
                for a in 0..3 {
                    v *= if k[a] == nyquist { c((p[a] * x.x[a]).cos(), 0.0) } else { Complex64::from_polar(1.0, p[a] * x.x[a]) };
                }
                v
            })
            .collect()
    };
    let (e1, e2) = (wave(x1), wave(x2));
    let total = exec::sum_complex(g.len(), |i| {
        let mut s = c(0.0, 0.0);
        for j in 0..g.len() {
            let sym = (a.data[i] * b.data[j] + a.data[j] * b.data[i]) / 2f64.sqrt();
            s += e1[i] * e2[j] * sym;
        }
        s
    });
    let unit = (2.0 * PI).powf(-(g.n as f64)) * g.dp_volume() * g.dp_volume();
    total * unit
}

fn covariance_checks(ctx: &SuiteContext) -> Result<Vec<Check>> {
    let tol = &ctx.tol;
    let g = ctx.grid;
    let dx = g.dx();
    let policy = SupportPolicy::default();
    let alpha = ctx.config.alpha;
    let lattice_y = [0.25, 2.0 * dx, -dx, if g.n == 3 { dx } else { 0.0 }];
    let quarter = Rotation::planar(0, 1, FRAC_PI_2);
    let generic = if g.n == 3 { Rotation::about_z(0.4).compose(&Rotation::about_x(0.3)) } else { Rotation::planar(0, 1, 0.4) };
    let mut checks = vec![
        Check::new("cov:t2-translation", covariance_worst(ctx, &PoincareElement::translation(lattice_y), 0.0), Some(tol.exact_phase)),
        Check::new("cov:t2-quarter-turn", covariance_worst(ctx, &PoincareElement { y: [0.0; 4], r: quarter }, 0.0), Some(tol.exact_phase)),
        Check::new("cov:l622-generic-rotation", covariance_worst(ctx, &PoincareElement { y: [0.0; 4], r: generic }, 0.0), Some(tol.interpolation))
            .refined()
            .note("Euler angles by shear interpolation"),
    ];
    if g.n == 3 {
        checks.push(
            Check::new(format!("cov:t3-dilatation(alpha={alpha})"), covariance_worst(ctx, &PoincareElement::identity(), alpha), Some(tol.interpolation))
                .refined()
                .note(format!("factor exp(3 alpha/2) = {:.6}", (1.5 * alpha).exp())),
        );
        checks.push(
            Check::new(format!("cov:combined(alpha={alpha})"), covariance_worst(ctx, &PoincareElement { y: lattice_y, r: quarter }, alpha), Some(tol.combined))
                .refined()
                .note("quarter turn, lattice translation, dilatation"),
        );
        let z = SpacetimePoint::new(0.2, [0.3, -0.1, 0.2]);
        let single = ctx.worst(|s| {
            covariance_check(s, &PoincareElement::translation([0.1, 0.2, 0.0, -0.3]), alpha, &z, Interpolation::Trigonometric, &policy).map(|r| r.residual)
        });
        checks.push(Check::new("cov:combined-off-lattice", single, Some(tol.combined)).refined().note("non-lattice translation with dilatation"));
    }

    checks.push(Check::new("norm:translate", norm_change(ctx, &|s| Ok(translate(s, [0.7, 0.3, -1.1, 0.4]))), Some(tol.exact_phase)));
    checks.push(Check::new("norm:quarter-turn", norm_change(ctx, &|s| rotate_state(s, &quarter, Interpolation::Trigonometric)), Some(tol.exact_phase)));
    checks.push(
        Check::new("norm:generic-rotation", norm_change(ctx, &|s| rotate_state(s, &generic, Interpolation::Trigonometric)), Some(tol.interpolation)).refined(),
    );
    if g.n == 3 {
        checks.push(
            Check::new(
                format!("norm:dilate(alpha={alpha})"),
                norm_change(ctx, &|s| dilate(s, alpha, Interpolation::Trigonometric, &policy)),
                Some(tol.interpolation),
            )
            .refined(),
        );
        checks.push(
            Check::new(
                format!("norm:combined(alpha={alpha})"),
                norm_change(ctx, &|s| combined_action(s, &PoincareElement { y: lattice_y, r: generic }, alpha, Interpolation::Trigonometric, &policy)),
                Some(tol.interpolation),
            )
            .refined(),
        );
    }
    for &t in &[0.0, 0.5, 2.0] {
        checks.push(Check::new(format!("density:integral(t={t})"), ctx.worst(|s| Ok((density_integral(s, t)? - 1.0).abs())), Some(tol.density)));
    }

    let delta = 1e-3;
    let fd_tol = tol.combined;
    checks.push(
        Check::new(
            "fd:translate-P0",
            ctx.worst(|s| {
                let fd = translate(s, [delta, 0.0, 0.0, 0.0]).sub(&translate(s, [-delta, 0.0, 0.0, 0.0]))?.scaled(c(0.5 / delta, 0.0));
                let want = Generator::P0.operator(g.n)?.apply(s)?.scaled(c(0.0, -1.0));
                fd.relative_distance(&want, s.norm())
            }),
            Some(fd_tol),
        )
        .note("symmetric difference, delta 1e-3, against -i P0"),
    );
    checks.push(
        Check::new(
            "fd:rotate-M(1,2)",
            ctx.worst(|s| {
                let plus = rotate_state(s, &Rotation::planar(0, 1, delta), Interpolation::Trigonometric)?;
                let minus = rotate_state(s, &Rotation::planar(0, 1, -delta), Interpolation::Trigonometric)?;
                let fd = plus.sub(&minus)?.scaled(c(0.5 / delta, 0.0));
                let want = Generator::Mrot(1, 2).operator(g.n)?.apply(s)?.scaled(c(0.0, -1.0));
                fd.relative_distance(&want, s.norm())
            }),
            Some(fd_tol),
        )
        .note("symmetric difference, delta 1e-3, against -i M(1,2)"),
    );
    if g.n == 3 {
        checks.push(
            Check::new(
                "fd:dilate-D",
                ctx.worst(|s| {
                    let plus = dilate(s, delta, Interpolation::Trigonometric, &policy)?;
                    let minus = dilate(s, -delta, Interpolation::Trigonometric, &policy)?;
                    let fd = plus.sub(&minus)?.scaled(c(0.5 / delta, 0.0));
                    let want = Generator::D.operator(3)?.apply(s)?.scaled(c(0.0, 1.0));
                    fd.relative_distance(&want, s.norm())
                }),
                Some(fd_tol),
            )
            .note("symmetric difference, delta 1e-3, against i D"),
        );
    }

    let k2_grid = GridSpec::new(3, 8, 6.0)?;
    checks.push(
        Check::new("amp:k2-tensor-oracle", k2_tensor_oracle_residual(k2_grid, ctx.config.seed, 5), Some(tol.amplitude))
            .note("five random product states on an 8^3 grid against the symmetrized tensor"),
    );

    let t = 0.5;
    let spread = ctx.worst(|s| mass_outside(s, t, t));
    checks.push(Check::new("diag:superluminal-spread(t=0.5)", spread, None).note("probability outside |x| = t at t = 0.5 for states centred at the origin"));
    Ok(checks)
}

pub fn run_covariance_suite(config: &Config) -> Result<Report> {
    run_suite("covariance", config, covariance_checks)
}

/// The four suites merged into one report.
pub fn run_all(config: &Config) -> Result<Report> {
    Report::merge("all", vec![run_algebra_suite(config)?, run_identity_suite(config)?, run_kernel_suite(config)?, run_covariance_suite(config)?])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lz_of(g: Generator) -> Lz {
        match g {
            Generator::P0 => Lz::P(0),
            Generator::P(j) => Lz::P(j),
            Generator::K0 => Lz::K(0),
            Generator::K(j) => Lz::K(j),
            Generator::Mrot(i, k) => Lz::M(i, k),
            Generator::Mboost(j) => Lz::M(0, j),
            Generator::D => Lz::D,
            _ => unreachable!(),
        }
    }

    #[test]
    fn table_is_complete_and_antisymmetric() {
        let t = AlgebraTable::conformal();
        assert_eq!(t.len(), 105);
        assert!(t.len() - t.nonzero() >= 3);
        for e in &t.entries {
            let back = resolve(bracket(lz_of(e.b), lz_of(e.a)));
            let neg: Vec<(Complex64, Generator)> = e.expected.iter().map(|(k, g)| (-k, *g)).collect();
            assert_eq!(back, neg, "{}", e.name());
        }
        let find = |a: Generator, b: Generator| t.entries.iter().find(|e| e.a == a && e.b == b).unwrap().expected.clone();
        assert_eq!(find(Generator::P0, Generator::D), vec![(c(0.0, 1.0), Generator::P0)]);
        assert_eq!(find(Generator::P(1), Generator::K(1)), vec![(c(0.0, -2.0), Generator::D)]);
        assert!(find(Generator::P(1), Generator::P(2)).is_empty());
        assert_eq!(AlgebraTable::anchors(3).len(), 12);
    }

    #[test]
    fn jacobi_identity_holds_for_structure_constants() {
        let basis = conformal_basis();
        let lin = |terms: Vec<(Complex64, Lz)>, with: Lz, left: bool| -> Vec<(Complex64, Lz)> {
            terms
                .into_iter()
                .flat_map(|(k, l)| bracket(if left { l } else { with }, if left { with } else { l }).into_iter().map(move |(k2, l2)| (k * k2, l2)))
                .collect()
        };
        for &a in &basis {
            for &b in &basis {
                for &cc in &basis {
                    let mut all = lin(bracket(b, cc), a, false);
                    all.extend(lin(bracket(cc, a), b, false));
                    all.extend(lin(bracket(a, b), cc, false));
                    assert!(resolve(all).is_empty(), "{a:?} {b:?} {cc:?}");
                }
            }
        }
    }

    #[test]
    fn profiles_load_and_scale() {
        let s = Tolerances::strict();
        let m = Tolerances::load("smoke").unwrap();
        assert_eq!(s.exact_phase, 1e-12);
        assert_eq!(s.first_derivative, 1e-8);
        assert_eq!(s.second_derivative, 1e-5);
        for (a, b) in [(s.exact_phase, m.exact_phase), (s.kernel, m.kernel), (s.bessel, m.bessel), (s.l63, m.l63)] {
            assert!((b / a - 100.0).abs() < 1e-9);
        }
        assert!(matches!(Tolerances::load("lenient"), Err(Error::Config(_))));
    }

    #[test]
    fn config_defaults_and_unknown_fields() {
        let c: Config = serde_json::from_str(r#"{"grid": 16}"#).unwrap();
        assert_eq!(c.grid, 16);
        assert_eq!(c.box_length, 12.0);
        assert!(serde_json::from_str::<Config>(r#"{"grdi": 16}"#).is_err());
    }

    #[test]
    fn inadmissible_states_are_rejected_before_computation() {
        let cfg = Config {
            grid: 16,
            box_length: 8.0,
            rings: Some(vec![RingRecipe { r0: 0.1, sigma: 0.05, direction: crate::lattice::RingDirection::Isotropic }]),
            ..Config::default()
        };
        assert!(matches!(run_algebra_suite(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn refinement_flags_non_decreasing_rows() {
        let mk = |v: f64| Check::new("x", Ok(v), Some(1.0)).refined();
        let rows = assemble(vec![mk(0.5)], Some(vec![mk(0.25)]), 1e-12);
        assert!(!rows[0].pass);
        assert_eq!(rows[0].slope, Some(-1.0));
        let rows = assemble(vec![mk(0.25)], Some(vec![mk(0.5)]), 1e-12);
        assert!(rows[0].pass);
        let rows = assemble(vec![mk(1e-14)], Some(vec![mk(1e-15)]), 1e-12);
        assert!(rows[0].pass);
        let rows = assemble(vec![Check::new("e", Err(Error::Domain("d".into())), Some(1.0))], None, 1e-12);
        assert_eq!(rows[0].error.as_ref().unwrap().code, "domain");
        assert!(!rows[0].pass);
    }

    #[test]
    fn csv_quotes_fields() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}
