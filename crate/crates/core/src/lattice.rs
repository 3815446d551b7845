//! Grids, wavefunction containers, normalization conventions and test-state factories.
//!
//! Samples are stored row-major over `[L; n]` in FFT-native wrapped order: lattice
//! index `i` on an axis stands for the signed integer `i` if `i < L/2`, else `i - L`.
//! All stored vector components are upper (Euclidean) components.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::Vec3;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Uniform periodic lattice shared by the momentum and coordinate representations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub points: usize,
    pub box_length: f64,
}

impl GridSpec {
    pub fn new(n: usize, points: usize, box_length: f64) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::UnsupportedDimension { n, what: "grids support n = 1, 2, 3".into() });
        }
        if points < 2 || !points.is_multiple_of(2) {
            return Err(Error::Argument(format!("points per axis must be even and >= 2, got {points}")));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(Error::Argument(format!("box length must be positive, got {box_length}")));
        }
        Ok(GridSpec { n, points, box_length })
    }

    pub fn dx(&self) -> f64 {
        self.box_length / self.points as f64
    }

    pub fn dp(&self) -> f64 {
        TWO_PI / self.box_length
    }

    /// Upper end of the momentum extent `[-p_max, p_max)`.
    pub fn p_max(&self) -> f64 {
        std::f64::consts::PI * self.points as f64 / self.box_length
    }

    /// Upper end of the coordinate extent `[-Λ/2, Λ/2)`.
    pub fn x_max(&self) -> f64 {
        0.5 * self.box_length
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.points; self.n]
    }

    pub fn dp_volume(&self) -> f64 {
        self.dp().powi(self.n as i32)
    }

    pub fn dx_volume(&self) -> f64 {
        self.dx().powi(self.n as i32)
    }

    /// Signed integer label of an axis index.
    pub fn wrapped(&self, i: usize) -> i64 {
        if i < self.points / 2 {
            i as i64
        } else {
            i as i64 - self.points as i64
        }
    }

    /// Axis index of a signed label, reduced modulo `L`.
    pub fn unwrapped(&self, k: i64) -> usize {
        k.rem_euclid(self.points as i64) as usize
    }

    /// Per-axis indices of a flat index; trailing components beyond `n` are zero.
    pub fn unravel(&self, flat: usize) -> [usize; 3] {
        let l = self.points;
        let mut idx = [0usize; 3];
        let mut rem = flat;
        for a in (0..self.n).rev() {
            idx[a] = rem % l;
            rem /= l;
        }
        idx
    }

    pub fn ravel(&self, idx: [usize; 3]) -> usize {
        (0..self.n).fold(0, |acc, a| acc * self.points + idx[a])
    }

    /// Signed integer labels of a flat index.
    pub fn labels(&self, flat: usize) -> [i64; 3] {
        let idx = self.unravel(flat);
        let mut k = [0i64; 3];
        for a in 0..self.n {
            k[a] = self.wrapped(idx[a]);
        }
        k
    }

    pub fn momentum(&self, flat: usize) -> Vec3 {
        let k = self.labels(flat);
        let dp = self.dp();
        [k[0] as f64 * dp, k[1] as f64 * dp, k[2] as f64 * dp]
    }

    pub fn position(&self, flat: usize) -> Vec3 {
        let k = self.labels(flat);
        let dx = self.dx();
        [k[0] as f64 * dx, k[1] as f64 * dx, k[2] as f64 * dx]
    }

    /// Momentum values along one axis, in storage order.
    pub fn momentum_axis(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.wrapped(i) as f64 * self.dp()).collect()
    }

    /// Coordinate values along one axis, in storage order.
    pub fn position_axis(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.wrapped(i) as f64 * self.dx()).collect()
    }

    pub fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::Shape(format!("grid mismatch: {self:?} vs {other:?}")))
        }
    }

    pub fn require_dim(&self, n: usize, what: &str) -> Result<()> {
        if self.n == n {
            Ok(())
        } else {
            Err(Error::UnsupportedDimension { n: self.n, what: what.into() })
        }
    }
}

pub fn norm3(v: &Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub fn dot3(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Normalization tag of momentum-space samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `a(p)` convention, flat measure `dⁿp`.
    NonCovariant,
    /// `a_c(p) = √(2ω) a(p)` convention, invariant measure `dⁿp / 2ω`.
    Covariant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConversionDirection {
    ToCovariant,
    ToNoncovariant,
}

/// Treatment of the single `p = 0` mode wherever a symbol is singular there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroModePolicy {
    /// The singular factor is replaced by 0 on the zero mode.
    #[default]
    Zero,
    /// Inputs with `|φ(0)| >= 1e-12` are rejected.
    Reject,
}

pub const ZERO_MODE_ADMISSIBLE: f64 = 1e-12;

/// Common view of sampled states in either representation.
pub trait Sampled: Sized {
    fn grid(&self) -> &GridSpec;
    fn samples(&self) -> &[Complex64];
    fn samples_mut(&mut self) -> &mut [Complex64];
    fn with_samples(&self, data: Vec<Complex64>) -> Self;
    /// Volume element of the sample sum.
    fn cell_volume(&self) -> f64;

    fn norm_sqr(&self) -> f64 {
        let d = self.samples();
        exec::sum_real(d.len(), |i| d[i].norm_sqr()) * self.cell_volume()
    }

    fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    fn inner(&self, other: &Self) -> Result<Complex64> {
        self.grid().check_same(other.grid())?;
        let (a, b) = (self.samples(), other.samples());
        Ok(exec::sum_complex(a.len(), |i| a[i].conj() * b[i]) * self.cell_volume())
    }

    fn scaled(&self, c: Complex64) -> Self {
        self.with_samples(self.samples().iter().map(|v| v * c).collect())
    }

    fn add(&self, other: &Self) -> Result<Self> {
        self.grid().check_same(other.grid())?;
        Ok(self.with_samples(self.samples().iter().zip(other.samples()).map(|(a, b)| a + b).collect()))
    }

    fn sub(&self, other: &Self) -> Result<Self> {
        self.grid().check_same(other.grid())?;
        Ok(self.with_samples(self.samples().iter().zip(other.samples()).map(|(a, b)| a - b).collect()))
    }

    /// `‖self − other‖ / ‖reference‖`.
    fn relative_distance(&self, other: &Self, reference: f64) -> Result<f64> {
        Ok(self.sub(other)?.norm() / reference)
    }

    /// Largest sample in the outer shell of `margin` cells, relative to the largest sample.
    fn edge_ratio(&self, margin: usize) -> f64 {
        let g = *self.grid();
        let d = self.samples();
        let peak = exec::max_real(d.len(), |i| d[i].norm());
        if peak == 0.0 {
            return 0.0;
        }
        let half = (g.points / 2) as i64;
        let edge = exec::max_real(d.len(), |i| {
            let k = g.labels(i);
            let in_shell = (0..g.n).any(|a| k[a] >= half - margin as i64 || k[a] < -half + margin as i64);
            if in_shell {
                d[i].norm()
            } else {
                0.0
            }
        });
        edge / peak
    }
}

/// One-particle wavefunction sampled on the momentum lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumState {
    pub grid: GridSpec,
    pub data: Vec<Complex64>,
    pub normalization: Normalization,
}

/// One-particle wavefunction sampled on the NWP coordinate lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateState {
    pub grid: GridSpec,
    pub data: Vec<Complex64>,
}

impl MomentumState {
    pub fn new(grid: GridSpec, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Shape(format!("expected {} samples, got {}", grid.len(), data.len())));
        }
        Ok(MomentumState { grid, data, normalization: Normalization::NonCovariant })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        MomentumState { grid, data: vec![Complex64::new(0.0, 0.0); grid.len()], normalization: Normalization::NonCovariant }
    }

    /// Samples `f(p)` on the lattice.
    pub fn from_fn<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn(&Vec3) -> Complex64 + Sync + Send,
    {
        let data = exec::map_range(grid.len(), |i| f(&grid.momentum(i)));
        MomentumState { grid, data, normalization: Normalization::NonCovariant }
    }

    pub fn zero_mode(&self) -> Complex64 {
        self.data[0]
    }

    pub fn normalized(&self) -> Result<Self> {
        let nrm = self.norm();
        if nrm == 0.0 || !nrm.is_finite() {
            return Err(Error::Domain("cannot normalize a zero or non-finite state".into()));
        }
        Ok(self.scaled(Complex64::new(1.0 / nrm, 0.0)))
    }

    /// Grid sum of `⟨φ|s(p)|φ⟩` for a real symbol `s`.
    pub fn expectation_of<F>(&self, s: F) -> f64
    where
        F: Fn(&Vec3) -> f64 + Sync + Send,
    {
        let g = self.grid;
        exec::sum_real(self.data.len(), |i| s(&g.momentum(i)) * self.data[i].norm_sqr()) * g.dp_volume()
    }

    pub fn check_zero_mode(&self) -> Result<()> {
        let v = self.zero_mode().norm();
        if v < ZERO_MODE_ADMISSIBLE {
            Ok(())
        } else {
            Err(Error::Domain(format!("zero-mode amplitude {v:.3e} exceeds {ZERO_MODE_ADMISSIBLE:e}")))
        }
    }
}

impl Sampled for MomentumState {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }
    fn samples(&self) -> &[Complex64] {
        &self.data
    }
    fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }
    fn with_samples(&self, data: Vec<Complex64>) -> Self {
        MomentumState { grid: self.grid, data, normalization: self.normalization }
    }
    fn cell_volume(&self) -> f64 {
        self.grid.dp_volume()
    }
}

impl CoordinateState {
    pub fn new(grid: GridSpec, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Shape(format!("expected {} samples, got {}", grid.len(), data.len())));
        }
        Ok(CoordinateState { grid, data })
    }

    pub fn from_fn<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn(&Vec3) -> Complex64 + Sync + Send,
    {
        let data = exec::map_range(grid.len(), |i| f(&grid.position(i)));
        CoordinateState { grid, data }
    }

    /// Unit-mass cell at the lattice origin: `f = Δx^{-n/2}` there, zero elsewhere.
    pub fn delta(grid: GridSpec, site: [i64; 3]) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); grid.len()];
        let idx = [grid.unwrapped(site[0]), grid.unwrapped(site[1]), grid.unwrapped(site[2])];
        data[grid.ravel(idx)] = Complex64::new(1.0 / grid.dx_volume(), 0.0);
        CoordinateState { grid, data }
    }
}

impl Sampled for CoordinateState {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }
    fn samples(&self) -> &[Complex64] {
        &self.data
    }
    fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }
    fn with_samples(&self, data: Vec<Complex64>) -> Self {
        CoordinateState { grid: self.grid, data }
    }
    fn cell_volume(&self) -> f64 {
        self.grid.dx_volume()
    }
}

/// `Σ conj(a)·b·Δpⁿ`.
pub fn inner_product(a: &MomentumState, b: &MomentumState) -> Result<Complex64> {
    a.inner(b)
}

/// Switches between the `a(p)` and `a_c(p) = √(2ω) a(p)` conventions.
///
/// To covariant multiplies by `√(2ω)`, to non-covariant divides by it; the zero mode
/// follows `policy`.
pub fn convert_normalization(state: &MomentumState, direction: ConversionDirection, policy: ZeroModePolicy) -> Result<MomentumState> {
    let target = match direction {
        ConversionDirection::ToCovariant => Normalization::Covariant,
        ConversionDirection::ToNoncovariant => Normalization::NonCovariant,
    };
    if state.normalization == target {
        return Err(Error::Argument(format!("state is already {target:?}")));
    }
    if policy == ZeroModePolicy::Reject {
        state.check_zero_mode()?;
    }
    let g = state.grid;
    let data = exec::map_range(g.len(), |i| {
        let w = (2.0 * norm3(&g.momentum(i))).sqrt();
        if w == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        match direction {
            ConversionDirection::ToCovariant => state.data[i] * w,
            ConversionDirection::ToNoncovariant => state.data[i] / w,
        }
    });
    Ok(MomentumState { grid: g, data, normalization: target })
}

/// Angular profile of a Gaussian ring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RingDirection {
    Isotropic,
    /// Unit vector `u`; the ring carries the factor `(1 + 0.4 p̂·u)·exp(0.7i p̂·u)`.
    Along(Vec3),
}

/// Gaussian shell `exp(−(|p| − r₀)²/(2σ²))` with an optional directional factor, normalized.
pub fn make_gaussian_ring(grid: GridSpec, r0: f64, sigma: f64, direction: RingDirection) -> Result<MomentumState> {
    if !(r0 > 0.0 && sigma > 0.0) {
        return Err(Error::Argument(format!("ring needs r0 > 0 and sigma > 0, got r0={r0}, sigma={sigma}")));
    }
    if r0 - 4.0 * sigma <= grid.dp() {
        return Err(Error::Domain(format!("inner margin violated: r0 - 4 sigma = {:.4} must exceed dp = {:.4}", r0 - 4.0 * sigma, grid.dp())));
    }
    if r0 + 4.0 * sigma >= grid.p_max() {
        return Err(Error::Domain(format!("outer margin violated: r0 + 4 sigma = {:.4} must stay below p_max = {:.4}", r0 + 4.0 * sigma, grid.p_max())));
    }
    let u = match direction {
        RingDirection::Isotropic => None,
        RingDirection::Along(v) => {
            let nv = norm3(&v);
            if nv == 0.0 {
                return Err(Error::Argument("ring direction must be nonzero".into()));
            }
            Some([v[0] / nv, v[1] / nv, v[2] / nv])
        }
    };
    let state = MomentumState::from_fn(grid, |p| {
        let r = norm3(p);
        if r == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let env = (-(r - r0) * (r - r0) / (2.0 * sigma * sigma)).exp();
        match u {
            None => Complex64::new(env, 0.0),
            Some(u) => {
                let c = dot3(p, &u) / r;
                Complex64::from_polar(env * (1.0 + 0.4 * c), 0.7 * c)
            }
        }
    });
    state.normalized()
}

/// Parameters of one ring in a test-state recipe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingRecipe {
    pub r0: f64,
    pub sigma: f64,
    pub direction: RingDirection,
}

impl RingRecipe {
    pub fn build(&self, grid: GridSpec) -> Result<MomentumState> {
        make_gaussian_ring(grid, self.r0, self.sigma, self.direction)
    }
}

/// Grid-adapted ring width `σ = √(πL)/Λ`, which balances the momentum-box and
/// coordinate-box tails of a ring centred at half the momentum extent.
pub fn adapted_sigma(grid: &GridSpec) -> f64 {
    (std::f64::consts::PI * grid.points as f64).sqrt() / grid.box_length
}

/// The standard three-ring recipe: centres at `0.95·p_max/2·{0.99, 1, 1.01}` with distinct
/// anisotropies, width `1.05·√(πL)/Λ` capped by the inner margin. Pulling the centres
/// inward shields the momentum edge, where generator symbols grow like `|p|`; the wider
/// shell shields the coordinate edge, which time translations approach.
pub fn standard_rings(grid: &GridSpec) -> Vec<RingRecipe> {
    let centre = 0.95 * 0.5 * grid.p_max();
    let make = |f: f64, direction: RingDirection| {
        let r0 = f * centre;
        let cap = 0.999 * (r0 - grid.dp()) / 4.0;
        RingRecipe { r0, sigma: (1.05 * adapted_sigma(grid)).min(cap), direction }
    };
    vec![make(0.99, RingDirection::Isotropic), make(1.0, RingDirection::Along([0.6, 0.0, 0.8])), make(1.01, RingDirection::Along([0.0, 1.0, 0.0]))]
}

/// Normalized random state: independent complex Gaussian samples, zero mode pinned to 0.
pub fn make_random(grid: GridSpec, seed: u64) -> Result<MomentumState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data: Vec<Complex64> = (0..grid.len())
        .map(|_| {
            let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            Complex64::new(a, b)
        })
        .collect();
    data[0] = Complex64::new(0.0, 0.0);
    MomentumState::new(grid, data)?.normalized()
}

/// Fails unless both the momentum samples and their coordinate partner fall below
/// `tol` (relative to the peak) within `margin` cells of the box edges.
pub fn assert_decay(state: &MomentumState, margin: usize, tol: f64) -> Result<()> {
    let pm = state.edge_ratio(margin);
    if pm >= tol {
        return Err(Error::Domain(format!("momentum tail {pm:.3e} within {margin} cells of the edge exceeds {tol:e}")));
    }
    let f = crate::spectral::to_coordinate(state);
    let cm = f.edge_ratio(margin);
    if cm >= tol {
        return Err(Error::Domain(format!("coordinate tail {cm:.3e} within {margin} cells of the edge exceeds {tol:e}")));
    }
    Ok(())
}

/// Permanent of a square matrix given row-major, by Ryser's formula with Gray-code updates.
pub fn permanent(m: &[Complex64], k: usize) -> Complex64 {
    assert_eq!(m.len(), k * k, "permanent needs a square matrix");
    if k == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let mut row_sums = vec![Complex64::new(0.0, 0.0); k];
    let mut total = Complex64::new(0.0, 0.0);
    let mut gray: u64 = 0;
    for step in 1u64..(1u64 << k) {
        let next = step ^ (step >> 1);
        let changed = (gray ^ next).trailing_zeros() as usize;
        let added = next & (1 << changed) != 0;
        for (i, rs) in row_sums.iter_mut().enumerate() {
            if added {
                *rs += m[i * k + changed];
            } else {
                *rs -= m[i * k + changed];
            }
        }
        gray = next;
        let prod = row_sums.iter().fold(Complex64::new(1.0, 0.0), |a, b| a * b);
        let sign = if (k as u32 - next.count_ones()).is_multiple_of(2) { 1.0 } else { -1.0 };
        total += prod * sign;
    }
    total
}

/// Truncated k-particle state: a weighted sum of symmetrized products of one-particle states.
///
/// A term `(w, [f₁..f_k])` stands for `w·a*(f₁)…a*(f_k)|0⟩`, whose wavefunction is
/// `(k!)^{-1/2} Σ_σ Π_i f_{σ(i)}(x_i)`.
#[derive(Debug, Clone)]
pub struct FockSum {
    pub k: usize,
    pub terms: Vec<(Complex64, Vec<MomentumState>)>,
}

impl FockSum {
    pub fn new(k: usize, terms: Vec<(Complex64, Vec<MomentumState>)>) -> Result<Self> {
        if k == 0 {
            return Err(Error::Argument("particle number must be at least 1".into()));
        }
        let mut grid: Option<GridSpec> = None;
        for (_, factors) in &terms {
            if factors.len() != k {
                return Err(Error::Shape(format!("term with {} factors in a k = {k} sum", factors.len())));
            }
            for f in factors {
                match grid {
                    None => grid = Some(f.grid),
                    Some(g) => g.check_same(&f.grid)?,
                }
            }
        }
        Ok(FockSum { k, terms })
    }

    pub fn product(factors: Vec<MomentumState>) -> Result<Self> {
        let k = factors.len();
        FockSum::new(k, vec![(Complex64::new(1.0, 0.0), factors)])
    }

    pub fn one(state: MomentumState) -> Self {
        FockSum { k: 1, terms: vec![(Complex64::new(1.0, 0.0), vec![state])] }
    }

    pub fn grid(&self) -> Option<GridSpec> {
        self.terms.first().map(|t| t.1[0].grid)
    }

    /// `Σ_{a,b} conj(w_a) w_b perm(G_ab)` with `G_ab[i][l] = ⟨f_a,i, f_b,l⟩`.
    pub fn inner(&self, other: &FockSum) -> Result<Complex64> {
        if self.k != other.k {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let k = self.k;
        let mut total = Complex64::new(0.0, 0.0);
        for (wa, fa) in &self.terms {
            for (wb, fb) in &other.terms {
                let mut gram = Vec::with_capacity(k * k);
                for a in fa {
                    for b in fb {
                        gram.push(a.inner(b)?);
                    }
                }
                total += wa.conj() * wb * permanent(&gram, k);
            }
        }
        Ok(total)
    }

    pub fn norm(&self) -> Result<f64> {
        Ok(self.inner(self)?.re.max(0.0).sqrt())
    }

    pub fn scaled(&self, c: Complex64) -> FockSum {
        FockSum { k: self.k, terms: self.terms.iter().map(|(w, f)| (w * c, f.clone())).collect() }
    }

    /// Concatenates the term lists of two sums with the same particle number.
    pub fn plus(&self, other: &FockSum) -> Result<FockSum> {
        if self.k != other.k {
            return Err(Error::Shape(format!("cannot add k = {} and k = {} sums", self.k, other.k)));
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        FockSum::new(self.k, terms)
    }
}

/// Representation tag of a stored state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Momentum,
    Coordinate,
}

/// A state read back from the binary container.
#[derive(Debug, Clone, PartialEq)]
pub enum StoredState {
    Momentum(MomentumState),
    Coordinate(CoordinateState),
}

const MAGIC: &str = "NWPLAB-STATE v1";

fn header(space: &str, normalization: &str, grid: &GridSpec) -> String {
    format!(
        "{MAGIC}\nspace {space}\nnormalization {normalization}\ndim {}\npoints {}\nbox {:?}\nindex-order wrapped-row-major\nendianness little\nend-header\n",
        grid.n, grid.points, grid.box_length
    )
}

fn write_samples<W: Write>(w: &mut W, data: &[Complex64]) -> Result<()> {
    let mut buf = Vec::with_capacity(16 * data.len());
    for v in data {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Writes the self-describing container: text header, then little-endian `(re, im)` pairs.
pub fn write_state<W: Write>(w: &mut W, state: &StoredState) -> Result<()> {
    match state {
        StoredState::Momentum(s) => {
            let tag = match s.normalization {
                Normalization::NonCovariant => "noncovariant",
                Normalization::Covariant => "covariant",
            };
            w.write_all(header("momentum", tag, &s.grid).as_bytes())?;
            write_samples(w, &s.data)
        }
        StoredState::Coordinate(s) => {
            w.write_all(header("coordinate", "nwp", &s.grid).as_bytes())?;
            write_samples(w, &s.data)
        }
    }
}

pub fn read_state<R: Read>(r: R) -> Result<StoredState> {
    let mut reader = BufReader::new(r);
    let mut line = String::new();
    let mut fields = std::collections::BTreeMap::new();
    reader.read_line(&mut line)?;
    if line.trim_end() != MAGIC {
        return Err(Error::Parse(format!("not a state container (first line {:?})", line.trim_end())));
    }
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::Parse("header ended without end-header".into()));
        }
        let t = line.trim_end();
        if t == "end-header" {
            break;
        }
        let (k, v) = t.split_once(' ').ok_or_else(|| Error::Parse(format!("malformed header line {t:?}")))?;
        fields.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| fields.get(k).cloned().ok_or_else(|| Error::Parse(format!("missing header key {k}")));
    if get("endianness")? != "little" {
        return Err(Error::Parse("only little-endian containers are supported".into()));
    }
    if get("index-order")? != "wrapped-row-major" {
        return Err(Error::Parse("unknown index order".into()));
    }
    let n: usize = get("dim")?.parse().map_err(|e| Error::Parse(format!("dim: {e}")))?;
    let points: usize = get("points")?.parse().map_err(|e| Error::Parse(format!("points: {e}")))?;
    let box_length: f64 = get("box")?.parse().map_err(|e| Error::Parse(format!("box: {e}")))?;
    let grid = GridSpec::new(n, points, box_length)?;
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != 16 * grid.len() {
        return Err(Error::Parse(format!("expected {} payload bytes, found {}", 16 * grid.len(), bytes.len())));
    }
    let data: Vec<Complex64> = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[0..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..16].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    match get("space")?.as_str() {
        "momentum" => {
            let normalization = match get("normalization")?.as_str() {
                "noncovariant" => Normalization::NonCovariant,
                "covariant" => Normalization::Covariant,
                other => return Err(Error::Parse(format!("unknown normalization {other}"))),
            };
            Ok(StoredState::Momentum(MomentumState { grid, data, normalization }))
        }
        "coordinate" => Ok(StoredState::Coordinate(CoordinateState { grid, data })),
        other => Err(Error::Parse(format!("unknown space {other}"))),
    }
}

pub fn save_state(path: &Path, state: &StoredState) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_state(&mut f, state)?;
    f.flush()?;
    Ok(())
}

pub fn load_state(path: &Path) -> Result<StoredState> {
    read_state(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g3() -> GridSpec {
        GridSpec::new(3, 16, 10.0).unwrap()
    }

    #[test]
    fn duality_and_extents() {
        let g = GridSpec::new(3, 64, 20.0).unwrap();
        assert!((g.dx() * g.dp() * g.points as f64 - TWO_PI).abs() < 1e-14);
        assert!((g.p_max() - g.dp() * 32.0).abs() < 1e-12);
        assert_eq!(g.len(), 64 * 64 * 64);
        assert!(GridSpec::new(4, 8, 1.0).is_err());
        assert!(GridSpec::new(2, 7, 1.0).is_err());
        assert!(GridSpec::new(2, 8, -1.0).is_err());
    }

    #[test]
    fn ravel_roundtrip_and_wrapping() {
        let g = g3();
        for flat in [0, 1, 17, 255, 4095] {
            assert_eq!(g.ravel(g.unravel(flat)), flat);
        }
        assert_eq!(g.wrapped(7), 7);
        assert_eq!(g.wrapped(8), -8);
        assert_eq!(g.wrapped(15), -1);
        assert_eq!(g.unwrapped(-1), 15);
        assert_eq!(g.momentum(1), [0.0, 0.0, g.dp()]);
    }

    #[test]
    fn inner_product_basics() {
        let g = GridSpec::new(3, 64, 20.0).unwrap();
        let phi = make_gaussian_ring(g, 3.0, 0.5, RingDirection::Isotropic).unwrap();
        assert!((phi.inner(&phi).unwrap().re - 1.0).abs() < 1e-12);
        let iphi = phi.scaled(Complex64::new(0.0, 1.0));
        let v = phi.inner(&iphi).unwrap();
        assert!((v - Complex64::new(0.0, 1.0)).norm() < 1e-12);
        let a = MomentumState::from_fn(g, |p| Complex64::new(if p[0] > 0.0 { 1.0 } else { 0.0 }, 0.0));
        let b = MomentumState::from_fn(g, |p| Complex64::new(if p[0] < 0.0 { 1.0 } else { 0.0 }, 0.0));
        assert_eq!(a.inner(&b).unwrap(), Complex64::new(0.0, 0.0));
        let other = MomentumState::zeros(GridSpec::new(3, 32, 20.0).unwrap());
        assert!(matches!(phi.inner(&other), Err(Error::Shape(_))));
    }

    #[test]
    fn normalization_conversion() {
        let g = GridSpec::new(1, 16, TWO_PI).unwrap();
        // dp = 1, so label 2 sits at |p| = 2.
        let mut s = MomentumState::zeros(g);
        s.data[2] = Complex64::new(1.0, 0.0);
        s.data[0] = Complex64::new(5.0, 0.0);
        let c = convert_normalization(&s, ConversionDirection::ToCovariant, ZeroModePolicy::Zero).unwrap();
        assert!((c.data[2].re - 2.0).abs() < 1e-15);
        assert_eq!(c.data[0], Complex64::new(0.0, 0.0));
        assert_eq!(c.normalization, Normalization::Covariant);
        let back = convert_normalization(&c, ConversionDirection::ToNoncovariant, ZeroModePolicy::Zero).unwrap();
        assert!((back.data[2].re - 1.0).abs() < 1e-15);
        assert!(convert_normalization(&s, ConversionDirection::ToCovariant, ZeroModePolicy::Reject).is_err());
        assert!(convert_normalization(&s, ConversionDirection::ToNoncovariant, ZeroModePolicy::Zero).is_err());
    }

    #[test]
    fn ring_factory_margins() {
        let g = GridSpec::new(3, 64, 20.0).unwrap();
        let phi = make_gaussian_ring(g, 3.0, 0.5, RingDirection::Isotropic).unwrap();
        assert!((phi.norm() - 1.0).abs() < 1e-13);
        assert!(phi.zero_mode().norm() < 1e-12);
        let e = make_gaussian_ring(g, 1.0, 0.5, RingDirection::Isotropic).unwrap_err();
        assert!(e.to_string().contains("inner margin"));
        let e = make_gaussian_ring(g, 9.0, 0.5, RingDirection::Isotropic).unwrap_err();
        assert!(e.to_string().contains("outer margin"));
    }

    #[test]
    fn ring_energy_matches_direct_sum() {
        let g = GridSpec::new(3, 64, 20.0).unwrap();
        let phi = make_gaussian_ring(g, 3.0, 0.5, RingDirection::Along([0.0, 0.0, 1.0])).unwrap();
        let mut direct = 0.0;
        for i in 0..g.len() {
            direct += norm3(&g.momentum(i)) * phi.data[i].norm_sqr();
        }
        direct *= g.dp_volume();
        let e = phi.expectation_of(norm3);
        assert!((e - direct).abs() < 1e-12);
        assert!((e - 3.0).abs() < 0.1, "energy {e}");
    }

    #[test]
    fn permanent_small_cases() {
        let c = |x: f64| Complex64::new(x, 0.0);
        assert_eq!(permanent(&[c(3.0)], 1), c(3.0));
        assert_eq!(permanent(&[c(1.0), c(2.0), c(3.0), c(4.0)], 2), c(10.0));
        let m: Vec<Complex64> = (1..=9).map(|v| c(v as f64)).collect();
        // Brute force over the six permutations of 3.
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let brute: Complex64 = perms.iter().map(|p| m[p[0]] * m[3 + p[1]] * m[6 + p[2]]).sum();
        assert!((permanent(&m, 3) - brute).norm() < 1e-12);
    }

    #[test]
    fn fock_k1_reduces_to_inner_product() {
        let g = g3();
        let a = make_random(g, 1).unwrap();
        let b = make_random(g, 2).unwrap();
        let fa = FockSum::one(a.clone());
        let fb = FockSum::one(b.clone());
        assert!((fa.inner(&fb).unwrap() - a.inner(&b).unwrap()).norm() < 1e-15);
    }

    #[test]
    fn container_roundtrip() {
        let g = GridSpec::new(2, 8, 3.5).unwrap();
        let s = make_random(g, 9).unwrap();
        let mut buf = Vec::new();
        write_state(&mut buf, &StoredState::Momentum(s.clone())).unwrap();
        let text_end = buf.windows(11).position(|w| w == b"end-header\n").unwrap() + 11;
        assert_eq!(buf.len() - text_end, 16 * g.len());
        match read_state(&buf[..]).unwrap() {
            StoredState::Momentum(r) => assert_eq!(r, s),
            _ => panic!("wrong space"),
        }
        assert!(read_state(&b"garbage\n"[..]).is_err());
    }
}
