//! Base change between momentum and NWP coordinate space, and the pipeline engine.
//!
//! `to_coordinate` uses the phase `e^{+ip·x}`:
//! `f(x) = (2π)^{-n/2} Σ_p e^{ip·x} φ(p) Δpⁿ`, and `to_momentum` is its exact inverse.
//! Derivatives `∂/∂p^j` act as multiplication by `−i x^j` in coordinate space.

use std::cell::{OnceCell, RefCell};
use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::lattice::{dot3, norm3, CoordinateState, GridSpec, MomentumState, Normalization, Sampled, Space};
use crate::Vec3;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

type PlanCache = Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>;

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<PlanCache> = OnceLock::new();
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry((len, inverse))
        .or_insert_with(|| {
            let dir = if inverse { FftDirection::Inverse } else { FftDirection::Forward };
            FftPlanner::new().plan_fft(len, dir)
        })
        .clone()
}

thread_local! {
    static SCRATCH: RefCell<Vec<Complex64>> = const { RefCell::new(Vec::new()) };
}

fn run_fft(fft: &dyn Fft<f64>, line: &mut [Complex64]) {
    SCRATCH.with(|s| {
        let mut s = s.borrow_mut();
        let need = fft.get_inplace_scratch_len();
        if s.len() < need {
            s.resize(need, ZERO);
        }
        fft.process_with_scratch(line, &mut s[..need]);
    });
}

/// Applies `f(base, line)` to every line along `axis`; `base` is the flat index of the
/// line's first element. Strided lines are gathered into contiguous buffers and
/// scattered back.
pub fn for_each_line<F>(data: &mut [Complex64], grid: &GridSpec, axis: usize, f: F)
where
    F: Fn(usize, &mut [Complex64]) + Sync + Send,
{
    let l = grid.points;
    let stride = l.pow((grid.n - 1 - axis) as u32);
    if stride == 1 {
        exec::for_each_chunk(data, l, |line, chunk| f(line * l, chunk));
        return;
    }
    let mut buf = vec![ZERO; data.len()];
    {
        let src: &[Complex64] = data;
        exec::for_each_chunk(&mut buf, l, |line, chunk| {
            let base = (line / stride) * l * stride + line % stride;
            for (i, c) in chunk.iter_mut().enumerate() {
                *c = src[base + i * stride];
            }
            f(base, chunk);
        });
    }
    exec::for_each_chunk(data, stride, |row, out| {
        let (outer, i) = (row / l, row % l);
        for (j, o) in out.iter_mut().enumerate() {
            *o = buf[(outer * stride + j) * l + i];
        }
    });
}

/// Unnormalized multidimensional DFT; `inverse` selects the `e^{+i}` kernel.
pub fn fft_nd(data: &mut [Complex64], grid: &GridSpec, inverse: bool) {
    let fft = plan(grid.points, inverse);
    for axis in 0..grid.n {
        for_each_line(data, grid, axis, |_, line| run_fft(fft.as_ref(), line));
    }
}

fn scale_in_place(data: &mut [Complex64], c: f64) {
    exec::for_each_indexed(data, |_, v| *v *= c);
}

fn momentum_to_coordinate_in_place(data: &mut [Complex64], grid: &GridSpec) {
    fft_nd(data, grid, true);
    let c = (2.0 * std::f64::consts::PI).powf(-0.5 * grid.n as f64) * grid.dp_volume();
    scale_in_place(data, c);
}

fn coordinate_to_momentum_in_place(data: &mut [Complex64], grid: &GridSpec) {
    fft_nd(data, grid, false);
    let c = (2.0 * std::f64::consts::PI).powf(-0.5 * grid.n as f64) * grid.dx_volume();
    scale_in_place(data, c);
}

pub fn to_coordinate(state: &MomentumState) -> CoordinateState {
    let mut data = state.data.clone();
    momentum_to_coordinate_in_place(&mut data, &state.grid);
    CoordinateState { grid: state.grid, data }
}

pub fn to_momentum(state: &CoordinateState) -> MomentumState {
    let mut data = state.data.clone();
    coordinate_to_momentum_in_place(&mut data, &state.grid);
    MomentumState { grid: state.grid, data, normalization: Normalization::NonCovariant }
}

/// A function of a lattice vector (momentum or position), described by data so that
/// pipelines serialize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Symbol {
    Const {
        value: Complex64,
    },
    /// Upper component `v^axis` (0-based axis).
    Component {
        axis: usize,
    },
    /// `|v|^power`; for negative powers the zero vector maps to 0.
    NormPow {
        power: f64,
    },
    /// `exp(−i(t|v| − v·shift))`.
    Phase {
        time: f64,
        shift: Vec3,
    },
    /// `exp(−s|v|)`.
    Damped {
        s: Complex64,
    },
    Product {
        factors: Vec<Symbol>,
    },
    Sum {
        terms: Vec<(Complex64, Symbol)>,
    },
    Conj {
        inner: Box<Symbol>,
    },
}

impl Symbol {
    pub fn constant(v: Complex64) -> Self {
        Symbol::Const { value: v }
    }

    pub fn real(v: f64) -> Self {
        Symbol::Const { value: Complex64::new(v, 0.0) }
    }

    pub fn comp(axis: usize) -> Self {
        Symbol::Component { axis }
    }

    pub fn norm_pow(power: f64) -> Self {
        Symbol::NormPow { power }
    }

    pub fn product(factors: Vec<Symbol>) -> Self {
        let mut flat = Vec::new();
        for f in factors {
            match f {
                Symbol::Product { factors } => flat.extend(factors),
                other => flat.push(other),
            }
        }
        if flat.len() == 1 {
            flat.pop().unwrap()
        } else {
            Symbol::Product { factors: flat }
        }
    }

    pub fn eval(&self, v: &Vec3) -> Complex64 {
        match self {
            Symbol::Const { value } => *value,
            Symbol::Component { axis } => Complex64::new(v[*axis], 0.0),
            Symbol::NormPow { power } => {
                let r = norm3(v);
                if r == 0.0 {
                    if *power < 0.0 {
                        ZERO
                    } else if *power == 0.0 {
                        ONE
                    } else {
                        ZERO
                    }
                } else {
                    Complex64::new(r.powf(*power), 0.0)
                }
            }
            Symbol::Phase { time, shift } => Complex64::from_polar(1.0, -(time * norm3(v) - dot3(v, shift))),
            Symbol::Damped { s } => (-s * norm3(v)).exp(),
            Symbol::Product { factors } => factors.iter().fold(ONE, |acc, f| acc * f.eval(v)),
            Symbol::Sum { terms } => terms.iter().fold(ZERO, |acc, (c, f)| acc + c * f.eval(v)),
            Symbol::Conj { inner } => inner.eval(v).conj(),
        }
    }

    pub fn conj(&self) -> Symbol {
        match self {
            Symbol::Const { value } => Symbol::Const { value: value.conj() },
            Symbol::Component { .. } | Symbol::NormPow { .. } => self.clone(),
            Symbol::Product { factors } => Symbol::Product { factors: factors.iter().map(Symbol::conj).collect() },
            Symbol::Sum { terms } => Symbol::Sum { terms: terms.iter().map(|(c, f)| (c.conj(), f.conj())).collect() },
            Symbol::Conj { inner } => (**inner).clone(),
            other => Symbol::Conj { inner: Box::new(other.clone()) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Step {
    MultiplyMomentum { symbol: Symbol },
    MultiplyCoordinate { symbol: Symbol },
    Scale { value: Complex64 },
}

impl Step {
    fn conj(&self) -> Step {
        match self {
            Step::MultiplyMomentum { symbol } => Step::MultiplyMomentum { symbol: symbol.conj() },
            Step::MultiplyCoordinate { symbol } => Step::MultiplyCoordinate { symbol: symbol.conj() },
            Step::Scale { value } => Step::Scale { value: value.conj() },
        }
    }
}

/// Steps in application order; base changes are inserted between steps of different spaces.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Pipeline {
    pub steps: Vec<Step>,
}

impl Pipeline {
    pub fn new(steps: Vec<Step>) -> Self {
        Pipeline { steps }
    }

    pub fn momentum(symbol: Symbol) -> Self {
        Pipeline { steps: vec![Step::MultiplyMomentum { symbol }] }
    }

    pub fn coordinate(symbol: Symbol) -> Self {
        Pipeline { steps: vec![Step::MultiplyCoordinate { symbol }] }
    }

    /// `self` applied after `first`.
    pub fn after(&self, first: &Pipeline) -> Pipeline {
        let mut steps = first.steps.clone();
        steps.extend(self.steps.iter().cloned());
        Pipeline { steps }
    }

    pub fn scaled(&self, c: Complex64) -> Pipeline {
        let mut steps = self.steps.clone();
        steps.push(Step::Scale { value: c });
        Pipeline { steps }
    }

    /// Reversed steps with conjugated symbols.
    pub fn adjoint(&self) -> Pipeline {
        Pipeline { steps: self.steps.iter().rev().map(Step::conj).collect() }
    }

    /// Fuses adjacent same-space multiplications and collects all scalars into one
    /// trailing scale.
    pub fn optimized(&self) -> Pipeline {
        let mut scale = ONE;
        let mut out: Vec<Step> = Vec::new();
        for step in &self.steps {
            match step {
                Step::Scale { value } => scale *= value,
                Step::MultiplyMomentum { symbol } => match out.last_mut() {
                    Some(Step::MultiplyMomentum { symbol: prev }) => {
                        *prev = Symbol::product(vec![prev.clone(), symbol.clone()]);
                    }
                    _ => out.push(step.clone()),
                },
                Step::MultiplyCoordinate { symbol } => match out.last_mut() {
                    Some(Step::MultiplyCoordinate { symbol: prev }) => {
                        *prev = Symbol::product(vec![prev.clone(), symbol.clone()]);
                    }
                    _ => out.push(step.clone()),
                },
            }
        }
        if scale != ONE {
            out.push(Step::Scale { value: scale });
        }
        Pipeline { steps: out }
    }

    /// Number of base changes needed to apply the pipeline to a momentum state.
    pub fn transform_count(&self) -> usize {
        let mut space = Space::Momentum;
        let mut count = 0;
        for step in &self.steps {
            let want = match step {
                Step::MultiplyMomentum { .. } => Space::Momentum,
                Step::MultiplyCoordinate { .. } => Space::Coordinate,
                Step::Scale { .. } => continue,
            };
            if want != space {
                count += 1;
                space = want;
            }
        }
        count + usize::from(space == Space::Coordinate)
    }

    fn starts_in_coordinate(&self) -> bool {
        for step in &self.steps {
            match step {
                Step::MultiplyMomentum { .. } => return false,
                Step::MultiplyCoordinate { .. } => return true,
                Step::Scale { .. } => {}
            }
        }
        false
    }

    /// Runs the steps on momentum samples; `coordinate_input`, if given, must be the
    /// coordinate partner of `input`.
    fn run(&self, grid: &GridSpec, input: &[Complex64], coordinate_input: Option<&[Complex64]>) -> Result<Vec<Complex64>> {
        let mut space = Space::Momentum;
        let mut data: Vec<Complex64>;
        let mut steps = self.steps.iter().peekable();
        while let Some(Step::Scale { .. }) = steps.peek() {
            steps.next();
        }
        match (self.starts_in_coordinate(), coordinate_input) {
            (true, Some(c)) => {
                data = c.to_vec();
                space = Space::Coordinate;
            }
            _ => data = input.to_vec(),
        }
        let mut scale = ONE;
        for step in &self.steps {
            match step {
                Step::Scale { value } => scale *= value,
                Step::MultiplyMomentum { symbol } => {
                    if space != Space::Momentum {
                        coordinate_to_momentum_in_place(&mut data, grid);
                        space = Space::Momentum;
                    }
                    multiply(&mut data, grid, symbol, Space::Momentum)?;
                }
                Step::MultiplyCoordinate { symbol } => {
                    if space != Space::Coordinate {
                        momentum_to_coordinate_in_place(&mut data, grid);
                        space = Space::Coordinate;
                    }
                    multiply(&mut data, grid, symbol, Space::Coordinate)?;
                }
            }
        }
        if space == Space::Coordinate {
            coordinate_to_momentum_in_place(&mut data, grid);
        }
        if scale != ONE {
            exec::for_each_indexed(&mut data, |_, v| *v *= scale);
        }
        Ok(data)
    }
}

fn multiply(data: &mut [Complex64], grid: &GridSpec, symbol: &Symbol, space: Space) -> Result<()> {
    let bad = AtomicUsize::new(usize::MAX);
    exec::for_each_indexed(data, |i, v| {
        let at = match space {
            Space::Momentum => grid.momentum(i),
            Space::Coordinate => grid.position(i),
        };
        let s = symbol.eval(&at);
        if !(s.re.is_finite() && s.im.is_finite()) {
            bad.fetch_min(i, Ordering::Relaxed);
        }
        *v *= s;
    });
    let index = bad.into_inner();
    if index != usize::MAX {
        let what = match space {
            Space::Momentum => "momentum symbol",
            Space::Coordinate => "coordinate symbol",
        };
        return Err(Error::Numeric { index, what: format!("{what} evaluates to a non-finite value") });
    }
    Ok(())
}

/// Applies the optimized form of a pipeline.
pub fn apply_pipeline(pl: &Pipeline, state: &MomentumState) -> Result<MomentumState> {
    let data = pl.optimized().run(&state.grid, &state.data, None)?;
    Ok(state.with_samples(data))
}

/// Applies the steps exactly as listed, without fusion.
pub fn apply_pipeline_unoptimized(pl: &Pipeline, state: &MomentumState) -> Result<MomentumState> {
    let data = pl.run(&state.grid, &state.data, None)?;
    Ok(state.with_samples(data))
}

/// Linear operator on one-particle momentum wavefunctions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Operator {
    Identity,
    Pipeline {
        pipeline: Pipeline,
    },
    Sum {
        terms: Vec<(Complex64, Operator)>,
    },
    /// Operator product read left to right: the last factor acts first.
    Product {
        factors: Vec<Operator>,
    },
}

impl Operator {
    pub fn from_pipeline(p: Pipeline) -> Self {
        Operator::Pipeline { pipeline: p }
    }

    pub fn momentum(symbol: Symbol) -> Self {
        Operator::from_pipeline(Pipeline::momentum(symbol))
    }

    pub fn coordinate(symbol: Symbol) -> Self {
        Operator::from_pipeline(Pipeline::coordinate(symbol))
    }

    pub fn zero() -> Self {
        Operator::Sum { terms: Vec::new() }
    }

    pub fn sum(terms: Vec<(Complex64, Operator)>) -> Self {
        Operator::Sum { terms }
    }

    pub fn product(factors: Vec<Operator>) -> Self {
        Operator::Product { factors }
    }

    pub fn adjoint(&self) -> Operator {
        match self {
            Operator::Identity => Operator::Identity,
            Operator::Pipeline { pipeline } => Operator::Pipeline { pipeline: pipeline.adjoint() },
            Operator::Sum { terms } => Operator::Sum { terms: terms.iter().map(|(c, o)| (c.conj(), o.adjoint())).collect() },
            Operator::Product { factors } => Operator::Product { factors: factors.iter().rev().map(Operator::adjoint).collect() },
        }
    }

    pub fn apply(&self, state: &MomentumState) -> Result<MomentumState> {
        let data = self.apply_samples(&state.grid, &state.data, &OnceCell::new())?;
        Ok(state.with_samples(data))
    }

    fn apply_samples(&self, grid: &GridSpec, input: &[Complex64], coord: &OnceCell<Vec<Complex64>>) -> Result<Vec<Complex64>> {
        match self {
            Operator::Identity => Ok(input.to_vec()),
            Operator::Pipeline { pipeline } => {
                let pl = pipeline.optimized();
                if pl.starts_in_coordinate() {
                    let c = coord.get_or_init(|| {
                        let mut c = input.to_vec();
                        momentum_to_coordinate_in_place(&mut c, grid);
                        c
                    });
                    pl.run(grid, input, Some(c))
                } else {
                    pl.run(grid, input, None)
                }
            }
            Operator::Sum { terms } => {
                let mut acc = vec![ZERO; input.len()];
                for (c, op) in terms {
                    let v = op.apply_samples(grid, input, coord)?;
                    exec::for_each_indexed(&mut acc, |i, a| *a += c * v[i]);
                }
                Ok(acc)
            }
            Operator::Product { factors } => {
                let mut cur: Option<Vec<Complex64>> = None;
                for op in factors.iter().rev() {
                    cur = Some(match &cur {
                        None => op.apply_samples(grid, input, coord)?,
                        Some(v) => op.apply_samples(grid, v, &OnceCell::new())?,
                    });
                }
                Ok(cur.unwrap_or_else(|| input.to_vec()))
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("operators always serialize")
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        Operator::Sum { terms: vec![(ONE, self), (ONE, rhs)] }
    }
}

impl Sub for Operator {
    type Output = Operator;
    fn sub(self, rhs: Operator) -> Operator {
        Operator::Sum { terms: vec![(ONE, self), (-ONE, rhs)] }
    }
}

impl Neg for Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator::Sum { terms: vec![(-ONE, self)] }
    }
}

/// Operator product `self · rhs` (rhs acts first).
impl Mul for Operator {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        Operator::Product { factors: vec![self, rhs] }
    }
}

impl Mul<Operator> for Complex64 {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        Operator::Sum { terms: vec![(self, rhs)] }
    }
}

impl Mul<Operator> for f64 {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        Operator::Sum { terms: vec![(Complex64::new(self, 0.0), rhs)] }
    }
}

/// `i` as a complex constant.
pub fn imag_unit() -> Complex64 {
    I
}

/// Resampling scheme for rescaling and non-axis rotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Zero-padded trigonometric (band-limited) interpolation.
    #[default]
    Trigonometric,
    /// Multilinear interpolation; faster, first-order accurate.
    Linear,
}

/// Tail allowance for resampling operations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportPolicy {
    pub margin_cells: usize,
    pub tol: f64,
}

impl Default for SupportPolicy {
    fn default() -> Self {
        SupportPolicy { margin_cells: 4, tol: 1e-5 }
    }
}

/// Band-limited interpolation kernel on `L` points (half-weight Nyquist term).
fn dirichlet(s: f64, l: usize) -> f64 {
    let x = std::f64::consts::PI * s;
    let sx = x.sin();
    if sx.abs() < 1e-14 {
        let k = s.round() as i64;
        if k.rem_euclid(l as i64) == 0 {
            return 1.0;
        }
        return 0.0;
    }
    sx / (l as f64 * (x / l as f64).tan())
}

/// Row-major `L×L` matrix sampling a line at fractional labels `scale · k_out`.
fn resample_matrix(grid: &GridSpec, scale: f64, scheme: Interpolation) -> Vec<f64> {
    let l = grid.points;
    let half = (l / 2) as f64;
    let mut m = vec![0.0; l * l];
    for o in 0..l {
        let t = grid.wrapped(o) as f64 * scale;
        let upper = match scheme {
            Interpolation::Trigonometric => half,
            Interpolation::Linear => half - 1.0,
        };
        if t < -half - 1e-12 || t > upper + 1e-12 {
            continue;
        }
        match scheme {
            Interpolation::Trigonometric => {
                for i in 0..l {
                    m[o * l + i] = dirichlet(t - grid.wrapped(i) as f64, l);
                }
            }
            Interpolation::Linear => {
                let lo = t.floor();
                let frac = t - lo;
                let lo_i = grid.unwrapped(lo as i64);
                let hi_i = grid.unwrapped(lo as i64 + 1);
                m[o * l + lo_i] += 1.0 - frac;
                m[o * l + hi_i] += frac;
            }
        }
    }
    m
}

fn check_support(data: &[Complex64], grid: &GridSpec, alpha: f64, policy: &SupportPolicy, label: &str) -> Result<()> {
    let half = (grid.points / 2) as f64;
    let threshold = alpha.exp().min(1.0) * (half - policy.margin_cells as f64);
    let peak = exec::max_real(data.len(), |i| data[i].norm());
    if peak == 0.0 {
        return Ok(());
    }
    let outside = exec::max_real(data.len(), |i| {
        let k = grid.labels(i);
        if (0..grid.n).any(|a| (k[a] as f64).abs() > threshold) {
            data[i].norm()
        } else {
            0.0
        }
    });
    if outside / peak >= policy.tol {
        return Err(Error::Domain(format!("{label} support escapes the box under rescaling by e^{alpha}: tail {:.3e} >= {:e}", outside / peak, policy.tol)));
    }
    Ok(())
}

fn rescale_samples(data: &[Complex64], grid: &GridSpec, alpha: f64, scheme: Interpolation) -> Vec<Complex64> {
    let m = resample_matrix(grid, alpha.exp(), scheme);
    let l = grid.points;
    let mut out = data.to_vec();
    for axis in 0..grid.n {
        for_each_line(&mut out, grid, axis, |_, line| {
            let src: Vec<Complex64> = line.to_vec();
            for (o, dst) in line.iter_mut().enumerate() {
                let row = &m[o * l..(o + 1) * l];
                *dst = row.iter().zip(&src).fold(ZERO, |acc, (w, v)| acc + v * *w);
            }
        });
    }
    let pre = (0.5 * grid.n as f64 * alpha).exp();
    scale_in_place(&mut out, pre);
    out
}

/// `φ(p) → e^{nα/2} φ(e^α p)`, resampled on the lattice.
pub fn rescale(state: &MomentumState, alpha: f64, scheme: Interpolation, policy: &SupportPolicy) -> Result<MomentumState> {
    if alpha == 0.0 {
        return Ok(state.clone());
    }
    check_support(&state.data, &state.grid, alpha, policy, "momentum")?;
    let partner = to_coordinate(state);
    check_support(&partner.data, &state.grid, -alpha, policy, "coordinate")?;
    Ok(state.with_samples(rescale_samples(&state.data, &state.grid, alpha, scheme)))
}

/// `f(x) → e^{nα/2} f(e^α x)`, resampled on the lattice.
pub fn rescale_coordinate(state: &CoordinateState, alpha: f64, scheme: Interpolation, policy: &SupportPolicy) -> Result<CoordinateState> {
    if alpha == 0.0 {
        return Ok(state.clone());
    }
    check_support(&state.data, &state.grid, alpha, policy, "coordinate")?;
    let partner = to_momentum(state);
    check_support(&partner.data, &state.grid, -alpha, policy, "momentum")?;
    Ok(state.with_samples(rescale_samples(&state.data, &state.grid, alpha, scheme)))
}

/// A proper rotation of the first `n` axes, stored as a 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    pub matrix: [[f64; 3]; 3],
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation { matrix: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] }
    }

    /// Rotation by `theta` in the plane of axes `(a, b)`, taking `e_a` towards `e_b`.
    pub fn planar(a: usize, b: usize, theta: f64) -> Self {
        let mut m = Rotation::identity().matrix;
        let (s, c) = theta.sin_cos();
        m[a][a] = c;
        m[a][b] = -s;
        m[b][a] = s;
        m[b][b] = c;
        Rotation { matrix: m }
    }

    pub fn about_z(theta: f64) -> Self {
        Rotation::planar(0, 1, theta)
    }

    pub fn about_y(theta: f64) -> Self {
        Rotation::planar(2, 0, theta)
    }

    pub fn about_x(theta: f64) -> Self {
        Rotation::planar(1, 2, theta)
    }

    pub fn from_matrix(matrix: [[f64; 3]; 3]) -> Result<Self> {
        let r = Rotation { matrix };
        r.validate(3)?;
        Ok(r)
    }

    pub fn compose(&self, rhs: &Rotation) -> Rotation {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.matrix[i][k] * rhs.matrix[k][j]).sum();
            }
        }
        Rotation { matrix: m }
    }

    pub fn transpose(&self) -> Rotation {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.matrix[j][i];
            }
        }
        Rotation { matrix: m }
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        let m = &self.matrix;
        [m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2], m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2], m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]]
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.matrix;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Orthogonal, unit determinant, and acting only on the first `n` axes.
    pub fn validate(&self, n: usize) -> Result<()> {
        let rt = self.transpose().compose(self);
        let mut dev: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                dev = dev.max((rt.matrix[i][j] - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        if dev > 1e-10 {
            return Err(Error::Argument(format!("matrix is not orthogonal (|RᵀR − 1| = {dev:.3e})")));
        }
        if (self.determinant() - 1.0).abs() > 1e-10 {
            return Err(Error::Argument(format!("rotation must have det = 1, got {}", self.determinant())));
        }
        for i in n..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                if (self.matrix[i][j] - want).abs() > 1e-12 || (self.matrix[j][i] - want).abs() > 1e-12 {
                    return Err(Error::Argument(format!("rotation mixes axis {} outside an n = {n} grid", i + 1)));
                }
            }
        }
        Ok(())
    }

    /// Integer matrix if every entry is −1, 0 or 1 (a signed axis permutation).
    pub fn as_signed_permutation(&self) -> Option<[[i64; 3]; 3]> {
        let mut out = [[0i64; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let v = self.matrix[i][j];
                let r = v.round();
                if (v - r).abs() > 1e-12 {
                    return None;
                }
                out[i][j] = r as i64;
            }
        }
        Some(out)
    }

    /// `(α, β, γ)` with `R = R_z(α) R_y(β) R_z(γ)`.
    pub fn euler_zyz(&self) -> (f64, f64, f64) {
        let m = &self.matrix;
        let beta = m[2][2].clamp(-1.0, 1.0).acos();
        if beta.sin().abs() > 1e-12 {
            (m[1][2].atan2(m[0][2]), beta, m[2][1].atan2(-m[2][0]))
        } else if m[2][2] > 0.0 {
            (m[1][0].atan2(m[0][0]), 0.0, 0.0)
        } else {
            ((-m[1][0]).atan2(-m[0][0]), std::f64::consts::PI, 0.0)
        }
    }
}

fn permute_samples(data: &[Complex64], grid: &GridSpec, r: &[[i64; 3]; 3]) -> Vec<Complex64> {
    // out(k) = in(Rᵀ k)
    exec::map_range(grid.len(), |i| {
        let k = grid.labels(i);
        let mut src = [0usize; 3];
        for (a, s) in src.iter_mut().enumerate().take(grid.n) {
            let v: i64 = (0..3).map(|b| r[b][a] * k[b]).sum();
            *s = grid.unwrapped(v);
        }
        data[grid.ravel(src)]
    })
}

/// Shifts every line along `axis` by `coef · label(other)` cells, band-limited.
fn shear(data: &mut [Complex64], grid: &GridSpec, axis: usize, other: usize, coef: f64) {
    let l = grid.points;
    let fwd = plan(l, false);
    let inv = plan(l, true);
    let lf = l as f64;
    for_each_line(data, grid, axis, |base, line| {
        let s = coef * grid.labels(base)[other] as f64;
        if s == 0.0 {
            return;
        }
        run_fft(fwd.as_ref(), line);
        for (m, v) in line.iter_mut().enumerate() {
            let km = grid.wrapped(m);
            let f = if km == -(l as i64) / 2 {
                Complex64::new((std::f64::consts::PI * s).cos(), 0.0)
            } else {
                Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * km as f64 * s / lf)
            };
            *v *= f / lf;
        }
        run_fft(inv.as_ref(), line);
    });
}

/// `v(p) → v(R(θ)⁻¹ p)` for a planar rotation with `|θ| ≤ π/4`, by three shears.
fn small_planar(data: &mut [Complex64], grid: &GridSpec, a: usize, b: usize, theta: f64) {
    let t = -(0.5 * theta).tan();
    shear(data, grid, a, b, t);
    shear(data, grid, b, a, theta.sin());
    shear(data, grid, a, b, t);
}

fn planar_trig(data: Vec<Complex64>, grid: &GridSpec, a: usize, b: usize, theta: f64) -> Vec<Complex64> {
    let quarter = std::f64::consts::FRAC_PI_2;
    let q = (theta / quarter).round();
    let rest = theta - q * quarter;
    let mut out = data;
    if rest.abs() > 1e-15 {
        small_planar(&mut out, grid, a, b, rest);
    }
    let turns = (q as i64).rem_euclid(4);
    if turns != 0 {
        let r = Rotation::planar(a, b, turns as f64 * quarter).as_signed_permutation().expect("quarter turn is a permutation");
        out = permute_samples(&out, grid, &r);
    }
    out
}

fn rotate_linear(data: &[Complex64], grid: &GridSpec, r: &Rotation) -> Vec<Complex64> {
    let rt = r.transpose();
    let half = (grid.points / 2) as f64;
    exec::map_range(grid.len(), |i| {
        let k = grid.labels(i);
        let t = rt.apply(&[k[0] as f64, k[1] as f64, k[2] as f64]);
        if (0..grid.n).any(|a| t[a] < -half || t[a] > half - 1.0) {
            return ZERO;
        }
        let lo: Vec<f64> = (0..grid.n).map(|a| t[a].floor()).collect();
        let mut acc = ZERO;
        for corner in 0..(1usize << grid.n) {
            let mut w = 1.0;
            let mut idx = [0usize; 3];
            for a in 0..grid.n {
                let up = (corner >> a) & 1 == 1;
                let frac = t[a] - lo[a];
                w *= if up { frac } else { 1.0 - frac };
                idx[a] = grid.unwrapped(lo[a] as i64 + i64::from(up));
            }
            if w != 0.0 {
                acc += data[grid.ravel(idx)] * w;
            }
        }
        acc
    })
}

fn rotate_samples(data: &[Complex64], grid: &GridSpec, r: &Rotation, scheme: Interpolation) -> Result<Vec<Complex64>> {
    r.validate(grid.n)?;
    if let Some(p) = r.as_signed_permutation() {
        return Ok(permute_samples(data, grid, &p));
    }
    if scheme == Interpolation::Linear {
        return Ok(rotate_linear(data, grid, r));
    }
    match grid.n {
        2 => {
            let theta = r.matrix[1][0].atan2(r.matrix[0][0]);
            Ok(planar_trig(data.to_vec(), grid, 0, 1, theta))
        }
        3 => {
            let (alpha, beta, gamma) = r.euler_zyz();
            let mut out = planar_trig(data.to_vec(), grid, 0, 1, gamma);
            out = planar_trig(out, grid, 2, 0, beta);
            Ok(planar_trig(out, grid, 0, 1, alpha))
        }
        _ => unreachable!("a valid non-permutation rotation needs n >= 2"),
    }
}

/// `φ(p) → φ(R⁻¹p)`; exact reindexing for signed axis permutations.
pub fn rotate(state: &MomentumState, r: &Rotation, scheme: Interpolation) -> Result<MomentumState> {
    Ok(state.with_samples(rotate_samples(&state.data, &state.grid, r, scheme)?))
}

/// `f(x) → f(R⁻¹x)`; exact reindexing for signed axis permutations.
pub fn rotate_coordinate(state: &CoordinateState, r: &Rotation, scheme: Interpolation) -> Result<CoordinateState> {
    Ok(state.with_samples(rotate_samples(&state.data, &state.grid, r, scheme)?))
}
