//! Closed-form distributional kernels, special functions, and their numerical oracles.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::lattice::{norm3, CoordinateState, GridSpec, Sampled};
use crate::spectral::{fft_nd, to_coordinate, to_momentum, Symbol};
use crate::Vec3;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn is_non_positive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

/// Γ(x) by the Lanczos approximation, with reflection below 1/2. Poles give ±∞.
pub fn gamma(x: f64) -> f64 {
    if is_non_positive_integer(x) {
        return f64::INFINITY;
    }
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// Γ(x), or a pole error at non-positive integers.
pub fn gamma_checked(x: f64) -> Result<f64> {
    if is_non_positive_integer(x) {
        Err(Error::Pole(x))
    } else {
        Ok(gamma(x))
    }
}

/// 1/Γ(x), which vanishes at the poles of Γ.
pub fn reciprocal_gamma(x: f64) -> f64 {
    if is_non_positive_integer(x) {
        0.0
    } else {
        1.0 / gamma(x)
    }
}

fn digamma_int(m: usize) -> f64 {
    -EULER_GAMMA + (1..m).map(|k| 1.0 / k as f64).sum::<f64>()
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |a, b| a * b as f64)
}

/// Modified Bessel function `I₂(x)` by its power series.
pub fn bessel_i2(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = q / 2.0;
    let mut sum = term;
    for k in 1..200 {
        term *= q / (k as f64 * (k + 2) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn bessel_k2_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut tail = 0.0;
    let mut pow = 1.0;
    for k in 0..200 {
        let t = (digamma_int(k + 1) + digamma_int(k + 3)) * pow / (factorial(k) * factorial(k + 2));
        tail += t;
        if t.abs() < 1e-18 * tail.abs() && k > 2 {
            break;
        }
        pow *= q;
    }
    2.0 / (x * x) - 0.5 - (0.5 * x).ln() * bessel_i2(x) + 0.5 * q * tail
}

fn bessel_k2_integral(x: f64) -> f64 {
    // K₂(x) = ∫₀^∞ exp(−x cosh t) cosh(2t) dt, trapezoid rule (spectrally accurate here).
    let h = 0.02;
    let t_max = (750.0 / x).max(1.0).acosh() + h;
    let steps = (t_max / h).ceil() as usize;
    let f = |t: f64| (-x * t.cosh()).exp() * (2.0 * t).cosh();
    let mut sum = 0.5 * f(0.0);
    for k in 1..=steps {
        sum += f(k as f64 * h);
    }
    sum * h
}

/// Modified Bessel function of the second kind, order 2, for `x > 0`.
pub fn bessel_k2(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Argument(format!("K₂ needs x > 0, got {x}")));
    }
    Ok(if x <= 2.0 { bessel_k2_series(x) } else { bessel_k2_integral(x) })
}

/// Power-law kernel `(2π)^{-n} ∫dⁿp |p|^{2λ} e^{ip·z} = c·|z|^{power}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialKernelSpec {
    pub lambda: f64,
    pub n: usize,
    pub coefficient: f64,
    pub power: f64,
}

impl RadialKernelSpec {
    pub fn new(lambda: f64, n: usize) -> Result<Self> {
        Ok(RadialKernelSpec { lambda, n, coefficient: gs_coefficient(lambda, n)?, power: -2.0 * lambda - n as f64 })
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        if r == 0.0 && self.power < 0.0 {
            return Err(Error::Singularity("|x| = 0".into()));
        }
        Ok(self.coefficient * r.powf(self.power))
    }
}

/// `(2π)^{-n}·2^{2λ+n}π^{n/2}Γ(λ+n/2)/Γ(−λ)`.
pub fn gs_coefficient(lambda: f64, n: usize) -> Result<f64> {
    if is_non_positive_integer(-lambda) {
        return Err(Error::Pole(-lambda));
    }
    let nf = n as f64;
    let top = gamma_checked(lambda + 0.5 * nf)?;
    Ok((2.0 * PI).powf(-nf) * 2f64.powf(2.0 * lambda + nf) * PI.powf(0.5 * nf) * top / gamma(-lambda))
}

/// `ω̃(x) = −π^{−(n+1)/2} Γ((n+1)/2) |x|^{−(n+1)}`.
pub fn omega_kernel(x: &Vec3, n: usize) -> Result<f64> {
    let r = norm3(x);
    if r == 0.0 {
        return Err(Error::Singularity("omega kernel at x = 0".into()));
    }
    let a = 0.5 * (n as f64 + 1.0);
    Ok(-PI.powf(-a) * gamma(a) * r.powf(-(n as f64 + 1.0)))
}

/// `s / (π²(s² + |x|²)²)` with `s = ε + i y⁰`: the inverse transform of `e^{−sω}` in three dimensions.
pub fn time_kernel(x: &Vec3, y0: f64, eps: f64) -> Result<Complex64> {
    if !(eps > 0.0) {
        return Err(Error::Argument(format!("time kernel needs eps > 0, got {eps}")));
    }
    let s = Complex64::new(eps, y0);
    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    let d = s * s + r2;
    Ok(s / (PI * PI * d * d))
}

/// Momentum symbol `e^{−(ε + i y⁰)ω}` whose inverse transform is [`time_kernel`].
pub fn time_symbol(y0: f64, eps: f64) -> Symbol {
    Symbol::Damped { s: Complex64::new(eps, y0) }
}

fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static NODES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    NODES.get_or_init(|| {
        let n = 20;
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        for i in 0..n {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    let (mut q0, mut q1) = (1.0, z);
                    for k in 2..=n {
                        let q2 = ((2 * k - 1) as f64 * z * q1 - (k - 1) as f64 * q0) / k as f64;
                        q0 = q1;
                        q1 = q2;
                    }
                    let dq = n as f64 * (z * q1 - q0) / (z * z - 1.0);
                    x[i] = z;
                    w[i] = 2.0 / ((1.0 - z * z) * dq * dq);
                    break;
                }
            }
        }
        (x, w)
    })
}

/// `∫₀^{p_end} f(p) dp` on half-periods `π/r` with 20-point Gauss-Legendre panels.
fn oscillatory_integral<F>(r: f64, p_end: f64, f: F) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64 + Sync + Send,
{
    if !(r > 0.0) {
        return Err(Error::Singularity("radial transform needs |x| > 0".into()));
    }
    let (nodes, weights) = gauss_legendre();
    let half = PI / r;
    let panels = (p_end / half).ceil() as usize;
    let total = exec::sum_complex(panels, |k| {
        let mid = (k as f64 + 0.5) * half;
        nodes.iter().zip(weights).fold(Complex64::new(0.0, 0.0), |acc, (z, wt)| acc + f(mid + 0.5 * half * z) * *wt) * (0.5 * half)
    });
    if !(total.re.is_finite() && total.im.is_finite()) {
        return Err(Error::Numeric { index: 0, what: "radial quadrature diverged".into() });
    }
    Ok(total)
}

/// `(2π)^{-3}·4π/r ∫₀^{p_end} p·w(p)·sin(pr) dp`, integrated per half-period of the sine
/// with 20-point Gauss-Legendre panels. `w` carries its own damping.
pub fn radial_transform<W>(r: f64, p_end: f64, w: W) -> Result<Complex64>
where
    W: Fn(f64) -> Complex64 + Sync + Send,
{
    let total = oscillatory_integral(r, p_end, |p| w(p) * (p * (p * r).sin()))?;
    Ok(total * (4.0 * PI / r) / (2.0 * PI).powi(3))
}

/// Spherical Bessel function `j₁`.
pub fn spherical_j1(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        let z2 = z * z;
        z / 3.0 * (1.0 - z2 / 10.0 * (1.0 - z2 / 28.0))
    } else {
        let (s, c) = z.sin_cos();
        s / (z * z) - c / z
    }
}

/// `(2π)^{-3}·4πi ∫₀^{p_end} p²·w(p)·j₁(pr) dp`, the coefficient `g(r)` in
/// `(2π)^{-3} ∫ d³p p̂^j w(|p|) e^{ip·x} = x̂^j g(|x|)`.
pub fn dipole_transform<W>(r: f64, p_end: f64, w: W) -> Result<Complex64>
where
    W: Fn(f64) -> Complex64 + Sync + Send,
{
    let total = oscillatory_integral(r, p_end, |p| w(p) * (p * p * spherical_j1(p * r)))?;
    Ok(total * Complex64::new(0.0, 4.0 * PI) / (2.0 * PI).powi(3))
}

/// `ω̃_j(x) = ω̃(x)·x_j` with the lower index `x_j = −x^j`; the velocity operator acts as
/// `V_j f = −i ω̃_j ∗ f`.
pub fn velocity_kernel(x: &Vec3, j: usize, n: usize) -> Result<f64> {
    if j == 0 || j > n {
        return Err(Error::Argument(format!("spatial index {j} outside 1..={n}")));
    }
    Ok(omega_kernel(x, n)? * -x[j - 1])
}

/// Damped quadrature of the kernel of the symbol `p_j/ω = −p^j/ω`:
/// `(2π)^{-3} ∫ d³p (−p^j/|p|) e^{−ε|p|} e^{ip·x}`.
pub fn velocity_kernel_oracle(x: &Vec3, j: usize, eps: f64) -> Result<Complex64> {
    if !(eps > 0.0) {
        return Err(Error::Argument(format!("damping must be positive, got {eps}")));
    }
    if j == 0 || j > 3 {
        return Err(Error::Argument(format!("spatial index {j} outside 1..=3")));
    }
    let r = norm3(x);
    let g = dipole_transform(r, 60.0 / eps, |p| Complex64::new((-eps * p).exp(), 0.0))?;
    Ok(g * (-x[j - 1] / r))
}

/// Relative distance between `−i ω̃_j(x)` and the ε → 0 extrapolation of
/// [`velocity_kernel_oracle`] on `eps0·2^{-k}`, `k < levels`.
pub fn velocity_kernel_error(x: &Vec3, j: usize, eps0: f64, levels: usize) -> Result<f64> {
    let ladder: Vec<f64> = (0..levels).map(|k| eps0 / 2f64.powi(k as i32)).collect();
    let values = ladder.iter().map(|&e| velocity_kernel_oracle(x, j, e)).collect::<Result<Vec<_>>>()?;
    let re = extrapolate_to_zero(&ladder, &values.iter().map(|v| v.re).collect::<Vec<_>>());
    let im = extrapolate_to_zero(&ladder, &values.iter().map(|v| v.im).collect::<Vec<_>>());
    let closed = Complex64::new(0.0, -velocity_kernel(x, j, 3)?);
    Ok((Complex64::new(re, im) - closed).norm() / closed.norm())
}

/// Damped radial quadrature of the `|p|^{2λ}` transform in three dimensions.
pub fn radial_quadrature_oracle(lambda: f64, eps: f64, r: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Argument(format!("damping must be positive, got {eps}")));
    }
    let p_end = 60.0 / eps;
    let v = radial_transform(r, p_end, |p| Complex64::new(p.powf(2.0 * lambda) * (-eps * p).exp(), 0.0))?;
    Ok(v.re)
}

/// Polynomial (Neville) extrapolation of `values[i] = A(h[i])` to `h = 0`.
pub fn extrapolate_to_zero(h: &[f64], values: &[f64]) -> f64 {
    assert_eq!(h.len(), values.len());
    let mut t = values.to_vec();
    let n = t.len();
    for m in 1..n {
        for i in 0..n - m {
            t[i] = (h[i + m] * t[i] - h[i] * t[i + 1]) / (h[i + m] - h[i]);
        }
    }
    t[0]
}

/// One extrapolated comparison of the quadrature oracle with the closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCheck {
    pub lambda: f64,
    pub n: usize,
    pub r: f64,
    pub coefficient: f64,
    pub closed_form: f64,
    pub eps_ladder: Vec<f64>,
    pub oracle_values: Vec<f64>,
    pub extrapolated: f64,
    pub relative_error: f64,
}

/// Evaluates the oracle on `eps0·2^{-k}` for `k < levels` and extrapolates to ε = 0.
pub fn check_gs_coefficient(lambda: f64, r: f64, eps0: f64, levels: usize) -> Result<KernelCheck> {
    let spec = RadialKernelSpec::new(lambda, 3)?;
    let eps_ladder: Vec<f64> = (0..levels).map(|k| eps0 / 2f64.powi(k as i32)).collect();
    let oracle_values = eps_ladder.iter().map(|&e| radial_quadrature_oracle(lambda, e, r)).collect::<Result<Vec<_>>>()?;
    let extrapolated = extrapolate_to_zero(&eps_ladder, &oracle_values);
    let closed_form = spec.eval(r)?;
    Ok(KernelCheck {
        lambda,
        n: 3,
        r,
        coefficient: spec.coefficient,
        closed_form,
        eps_ladder,
        oracle_values,
        extrapolated,
        relative_error: ((extrapolated - closed_form) / closed_form).abs(),
    })
}

/// Treatment of the singular origin cell when sampling a kernel on the lattice.
#[derive(Debug, Clone, PartialEq)]
pub enum Puncture {
    /// The kernel is finite at the origin and sampled there.
    None,
    Value(Complex64),
    /// The origin value makes the discrete transform equal `symbol(p_ref)`.
    MatchSymbol {
        symbol: Symbol,
        p_ref: Vec3,
    },
}

/// Convolution kernel on the periodic difference lattice.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// Defined as the inverse transform of an analytic momentum symbol.
    Symbol(Symbol),
    /// Closed-form samples at minimum-image separations.
    Sampled(Vec<Complex64>),
}

/// Samples `k(x)` at minimum-image separations, applying the puncture policy at `x = 0`.
pub fn sample_kernel<K>(grid: &GridSpec, k: K, puncture: &Puncture) -> Result<Kernel>
where
    K: Fn(&Vec3) -> Result<Complex64> + Sync + Send,
{
    let samples: Vec<Result<Complex64>> = exec::map_range(grid.len(), |i| if i == 0 { Ok(Complex64::new(0.0, 0.0)) } else { k(&grid.position(i)) });
    let mut data = samples.into_iter().collect::<Result<Vec<_>>>()?;
    data[0] = match puncture {
        Puncture::None => k(&[0.0; 3])?,
        Puncture::Value(v) => *v,
        Puncture::MatchSymbol { symbol, p_ref } => {
            let dv = grid.dx_volume();
            let off = exec::sum_complex(grid.len(), |i| {
                if i == 0 {
                    return Complex64::new(0.0, 0.0);
                }
                let x = grid.position(i);
                let ph = -(p_ref[0] * x[0] + p_ref[1] * x[1] + p_ref[2] * x[2]);
                data[i] * Complex64::from_polar(1.0, ph)
            });
            (symbol.eval(p_ref) - off * dv) / dv
        }
    };
    Ok(Kernel::Sampled(data))
}

/// `(k ∗ f)(x) = Σ_y k(x − y) f(y) Δxⁿ`, computed by multiplication in transform space.
pub fn convolve_coordinate(kernel: &Kernel, f: &CoordinateState) -> Result<CoordinateState> {
    let g = f.grid;
    match kernel {
        Kernel::Symbol(s) => {
            let phi = to_momentum(f);
            let out = crate::spectral::apply_pipeline(&crate::spectral::Pipeline::momentum(s.clone()), &phi)?;
            Ok(to_coordinate(&out))
        }
        Kernel::Sampled(k) => {
            if k.len() != g.len() {
                return Err(Error::Shape(format!("kernel has {} samples, grid needs {}", k.len(), g.len())));
            }
            let mut kh = k.clone();
            fft_nd(&mut kh, &g, false);
            let mut fh = f.data.clone();
            fft_nd(&mut fh, &g, false);
            let c = g.dx_volume() / g.len() as f64;
            exec::for_each_indexed(&mut fh, |i, v| *v *= kh[i] * c);
            fft_nd(&mut fh, &g, true);
            Ok(f.with_samples(fh))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesselLimitRow {
    pub m: f64,
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesselLimitReport {
    pub f: f64,
    pub limit: f64,
    pub rows: Vec<BesselLimitRow>,
    pub monotone: bool,
}

/// `|m²K₂(mf) − 2/f²|` along a decreasing `m` ladder.
pub fn bessel_limit_check(f: f64, ladder: &[f64]) -> Result<BesselLimitReport> {
    if !(f > 0.0) {
        return Err(Error::Argument(format!("f must be positive, got {f}")));
    }
    let limit = 2.0 / (f * f);
    let rows = ladder
        .iter()
        .map(|&m| {
            let value = m * m * bessel_k2(m * f)?;
            Ok(BesselLimitRow { m, value, error: (value - limit).abs() })
        })
        .collect::<Result<Vec<_>>>()?;
    let monotone = rows.windows(2).all(|w| w[1].error <= w[0].error);
    Ok(BesselLimitReport { f, limit, rows, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dipole_transform_damped_closed_form() {
        // ∫₀^∞ p² j₁(pr) e^{−εp} dp = 2r/(ε² + r²)².
        for (r, e) in [(0.7, 0.05), (1.5, 0.2), (2.0, 0.01)] {
            let g = dipole_transform(r, 60.0 / e, |p| Complex64::new((-e * p).exp(), 0.0)).unwrap();
            let want = 4.0 * PI / (2.0 * PI).powi(3) * 2.0 * r / (e * e + r * r).powi(2);
            assert!(g.re.abs() < 1e-15 && (g.im - want).abs() < 1e-10 * want, "{g} vs {want}");
        }
    }

    #[test]
    fn velocity_kernel_matches_symbol() {
        for (x, j) in [([0.8, 0.0, 0.0], 1), ([0.3, -1.1, 0.4], 2), ([0.5, 0.5, -0.9], 3)] {
            assert!(velocity_kernel_error(&x, j, 0.1, 5).unwrap() < 1e-6);
        }
        assert!(velocity_kernel(&[1.0, 0.0, 0.0], 0, 3).is_err());
        assert!(velocity_kernel(&[0.0; 3], 1, 3).is_err());
        let z = 2e-3f64;
        assert!((spherical_j1(0.999e-3) - spherical_j1(1.001e-3)).abs() < 1e-6);
        assert!((spherical_j1(z) - (z.sin() / (z * z) - z.cos() / z)).abs() < 1e-10);
    }

    #[test]
    fn gamma_values() {
        assert!((gamma(5.0) - 24.0).abs() < 1e-12);
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-14);
        assert!((gamma(-0.5) + 2.0 * PI.sqrt()).abs() < 1e-13);
        assert!((gamma(1.5) - 0.5 * PI.sqrt()).abs() < 1e-14);
        assert!((gamma(2.5) / (0.75 * PI.sqrt()) - 1.0).abs() < 1e-13);
        assert!(gamma(-2.0).is_infinite());
        assert!(matches!(gamma_checked(0.0), Err(Error::Pole(_))));
        assert_eq!(reciprocal_gamma(-3.0), 0.0);
    }

    #[test]
    fn gs_coefficients() {
        assert!((gs_coefficient(0.5, 3).unwrap() + 1.0 / (PI * PI)).abs() < 1e-15);
        assert!((gs_coefficient(-0.5, 3).unwrap() - 1.0 / (2.0 * PI * PI)).abs() < 1e-15);
        assert!((gs_coefficient(-1.0, 3).unwrap() - 1.0 / (4.0 * PI)).abs() < 1e-15);
        assert!(matches!(gs_coefficient(1.0, 3), Err(Error::Pole(_))));
        assert!(matches!(gs_coefficient(0.0, 3), Err(Error::Pole(_))));
    }

    #[test]
    fn omega_kernel_values() {
        let a = omega_kernel(&[1.0, 0.0, 0.0], 3).unwrap();
        assert!((a + 1.0 / (PI * PI)).abs() < 1e-15);
        let b = omega_kernel(&[0.0, 2.0, 0.0], 3).unwrap();
        assert!((b + 1.0 / (16.0 * PI * PI)).abs() < 1e-15);
        assert_eq!(omega_kernel(&[0.3, -0.2, 0.5], 3).unwrap(), omega_kernel(&[-0.3, 0.2, -0.5], 3).unwrap());
        assert!(matches!(omega_kernel(&[0.0; 3], 3), Err(Error::Singularity(_))));
        // omega kernel is the λ = 1/2 Gelfand-Shilov kernel.
        let spec = RadialKernelSpec::new(0.5, 3).unwrap();
        assert!((spec.eval(1.7).unwrap() - omega_kernel(&[1.7, 0.0, 0.0], 3).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn time_kernel_values() {
        let v = time_kernel(&[2.0, 0.0, 0.0], 1.0, 1e-9).unwrap();
        assert!((v - Complex64::new(0.0, 1.0 / (9.0 * PI * PI))).norm() < 1e-9);
        let real = time_kernel(&[0.0, 1.0, 0.0], 0.0, 0.3).unwrap();
        assert!(real.im == 0.0 && real.re > 0.0);
        assert!((real.re - 0.3 / (PI * PI * (0.09f64 + 1.0).powi(2))).abs() < 1e-15);
        let x = [0.4, 0.1, 0.9];
        assert_eq!(time_kernel(&x, 0.7, 0.1).unwrap().conj(), time_kernel(&x, -0.7, 0.1).unwrap());
        assert!(time_kernel(&x, 0.7, 0.0).is_err());
    }

    fn closed_form_damped(lambda: f64, eps: f64, r: f64) -> f64 {
        // ∫₀^∞ p^a sin(pr) e^{−εp} dp = Γ(a+1) Im[(ε − ir)^{−(a+1)}], a = 2λ+1.
        let a = 2.0 * lambda + 1.0;
        let z = Complex64::new(eps, -r).powf(-(a + 1.0));
        let integral = if a == -1.0 { (r / eps).atan() } else { gamma(a + 1.0) * z.im };
        integral * 4.0 * PI / r / (2.0 * PI).powi(3)
    }

    #[test]
    fn oracle_matches_damped_closed_form() {
        for &(l, e, r) in &[(-0.5, 1e-3, 1.0), (-1.0, 1e-3, 2.0), (0.5, 1e-2, 1.0), (-0.5, 0.3, 0.7)] {
            let o = radial_quadrature_oracle(l, e, r).unwrap();
            let c = closed_form_damped(l, e, r);
            assert!((o - c).abs() < 1e-9 * c.abs().max(1e-3), "λ={l} ε={e}: {o} vs {c}");
        }
        assert!((radial_quadrature_oracle(-0.5, 1e-3, 1.0).unwrap() - 0.05066).abs() < 2e-4);
        assert!((radial_quadrature_oracle(-1.0, 1e-3, 2.0).unwrap() - 0.039789).abs() < 2e-4);
        assert!((radial_quadrature_oracle(0.5, 1e-2, 1.0).unwrap() + 0.1013).abs() < 2e-3);
    }

    #[test]
    fn neville_is_exact_on_polynomials() {
        let h = [0.4, 0.2, 0.1, 0.05];
        let v: Vec<f64> = h.iter().map(|x| 3.0 - 2.0 * x + 0.5 * x * x - x * x * x).collect();
        assert!((extrapolate_to_zero(&h, &v) - 3.0).abs() < 1e-13);
    }

    #[test]
    fn bessel_k2_values() {
        assert!((bessel_k2(1.0).unwrap() - 1.624_838_898_635_177_5).abs() < 1e-12);
        assert!((bessel_k2(2.0).unwrap() - 0.253_759_754_566_055_8).abs() < 1e-12);
        assert!((bessel_k2(5.0).unwrap() - 5.308_943_712_223_46e-3).abs() < 1e-14);
        // The two evaluation paths agree where they meet.
        for x in [1.5, 2.0, 2.5] {
            assert!((bessel_k2_series(x) - bessel_k2_integral(x)).abs() < 1e-12 * bessel_k2_series(x));
        }
        assert!(bessel_k2(0.0).is_err());
    }

    #[test]
    fn bessel_limit() {
        let ladder = [1.0, 1e-1, 1e-2, 1e-3, 1e-4];
        let rep = bessel_limit_check(1.0, &ladder).unwrap();
        assert!(rep.monotone);
        assert!(rep.rows[4].error < 1e-7);
        assert!((rep.rows[0].value - 1.6248).abs() < 1e-4);
        let rep2 = bessel_limit_check(2.0, &ladder).unwrap();
        assert!((rep2.limit - 0.5).abs() < 1e-15 && rep2.rows[4].error < 1e-7);
    }

    #[test]
    fn delta_kernel_is_identity() {
        let g = GridSpec::new(3, 16, 8.0).unwrap();
        let f = crate::spectral::to_coordinate(&crate::lattice::make_random(g, 3).unwrap());
        let k = sample_kernel(&g, |_| Ok(Complex64::new(0.0, 0.0)), &Puncture::Value(Complex64::new(1.0 / g.dx_volume(), 0.0))).unwrap();
        let out = convolve_coordinate(&k, &f).unwrap();
        assert!(out.relative_distance(&f, 1.0).unwrap() < 1e-13);
    }
}
