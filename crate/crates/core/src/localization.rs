//! NWP eigenfunctions, position probability amplitudes and their covariance laws.
//!
//! The one-particle amplitude at `x = (t, x)` is
//! `(2π)^{-n/2} Σ_p e^{−i(ωt − p·x)} φ(p) Δpⁿ`; at `t = 0` on lattice sites it equals
//! the coordinate partner of `φ`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::actions::{combined_action, translate, PoincareElement};
use crate::error::{Error, Result};
use crate::exec;
use crate::lattice::{
    convert_normalization, dot3, norm3, ConversionDirection, CoordinateState, FockSum, GridSpec, MomentumState, Normalization, ZeroModePolicy,
};
use crate::spectral::{to_coordinate, Interpolation, SupportPolicy};
use crate::Vec3;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacetimePoint {
    pub t: f64,
    pub x: Vec3,
}

impl SpacetimePoint {
    pub fn new(t: f64, x: Vec3) -> Self {
        SpacetimePoint { t, x }
    }

    pub fn check_in_box(&self, grid: &GridSpec) -> Result<()> {
        let h = grid.x_max();
        if (0..grid.n).any(|a| self.x[a] < -h || self.x[a] > h) || (grid.n..3).any(|a| self.x[a] != 0.0) {
            return Err(Error::Domain(format!("point {:?} lies outside the coordinate box", self.x)));
        }
        Ok(())
    }
}

/// `Ψ_x(p) = (2π)^{-n/2} e^{−ip·x} (2ω)^{1/2}`, tagged covariant.
pub fn nwp_eigenfunction(x: &Vec3, grid: GridSpec) -> MomentumState {
    let c = TWO_PI.powf(-0.5 * grid.n as f64);
    let mut s = MomentumState::from_fn(grid, |p| Complex64::from_polar(c * (2.0 * norm3(p)).sqrt(), -dot3(p, x)));
    s.normalization = Normalization::Covariant;
    s
}

/// `∫ dⁿp/(2ω) conj(a(p)) b(p)` for covariant wavefunctions; the zero mode is excluded.
pub fn covariant_pairing(a: &MomentumState, b: &MomentumState) -> Result<Complex64> {
    a.grid.check_same(&b.grid)?;
    if a.normalization != Normalization::Covariant || b.normalization != Normalization::Covariant {
        return Err(Error::Argument("covariant pairing needs covariant wavefunctions".into()));
    }
    let g = a.grid;
    Ok(exec::sum_complex(g.len(), |i| {
        let w = norm3(&g.momentum(i));
        if w == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            a.data[i].conj() * b.data[i] / (2.0 * w)
        }
    }) * g.dp_volume())
}

/// Pairs an NWP eigenfunction with a state in either normalization.
pub fn eigenfunction_pairing(x: &Vec3, phi: &MomentumState) -> Result<Complex64> {
    let psi = nwp_eigenfunction(x, phi.grid);
    let cov = match phi.normalization {
        Normalization::Covariant => phi.clone(),
        Normalization::NonCovariant => convert_normalization(phi, ConversionDirection::ToCovariant, ZeroModePolicy::Zero)?,
    };
    covariant_pairing(&psi, &cov)
}

fn require_noncovariant(phi: &MomentumState) -> Result<()> {
    if phi.normalization == Normalization::NonCovariant {
        Ok(())
    } else {
        Err(Error::Argument("amplitudes take non-covariant wavefunctions".into()))
    }
}

/// One-particle amplitude at an arbitrary space-time point, by direct phase summation
/// contracted one axis at a time. Nyquist modes enter as `cos(p x)`, so off-lattice values
/// are the symmetric trigonometric interpolant and lattice sign flips stay exact.
pub fn amplitude_one(phi: &MomentumState, x: &SpacetimePoint) -> Result<Complex64> {
    require_noncovariant(phi)?;
    let g = phi.grid;
    let l = g.points;
    let axis_p = g.momentum_axis();
    let mut cur: Vec<Complex64> = exec::map_range(g.len(), |i| {
        let w = norm3(&g.momentum(i));
        phi.data[i] * Complex64::from_polar(1.0, -w * x.t)
    });
    for a in (0..g.n).rev() {
        let phase: Vec<Complex64> = axis_p
            .iter()
            .enumerate()
            .map(|(i, p)| if i == l / 2 { Complex64::new((p * x.x[a]).cos(), 0.0) } else { Complex64::from_polar(1.0, p * x.x[a]) })
            .collect();
        let rows = cur.len() / l;
        cur = exec::map_range(rows, |r| cur[r * l..(r + 1) * l].iter().zip(&phase).fold(Complex64::new(0.0, 0.0), |acc, (v, e)| acc + v * e));
    }
    Ok(cur[0] * TWO_PI.powf(-0.5 * g.n as f64) * g.dp_volume())
}

/// Amplitudes at many points.
pub fn amplitudes_one(phi: &MomentumState, points: &[SpacetimePoint]) -> Result<Vec<Complex64>> {
    points.iter().map(|x| amplitude_one(phi, x)).collect()
}

/// Amplitudes on every lattice site at time `t`, via the fast transform.
pub fn lattice_amplitudes(phi: &MomentumState, t: f64) -> Result<CoordinateState> {
    require_noncovariant(phi)?;
    Ok(to_coordinate(&translate(phi, [t, 0.0, 0.0, 0.0])))
}

/// `|amplitude|²` on every lattice site at time `t`.
pub fn density(phi: &MomentumState, t: f64) -> Result<Vec<f64>> {
    Ok(lattice_amplitudes(phi, t)?.data.iter().map(|v| v.norm_sqr()).collect())
}

/// `Σ |amplitude|² Δxⁿ` at time `t`.
pub fn density_integral(phi: &MomentumState, t: f64) -> Result<f64> {
    let d = density(phi, t)?;
    Ok(exec::sum_real(d.len(), |i| d[i]) * phi.grid.dx_volume())
}

/// Probability outside the ball `|x| ≤ radius` at time `t`.
pub fn mass_outside(phi: &MomentumState, t: f64, radius: f64) -> Result<f64> {
    let g = phi.grid;
    let d = density(phi, t)?;
    Ok(exec::sum_real(d.len(), |i| if norm3(&g.position(i)) > radius { d[i] } else { 0.0 }) * g.dx_volume())
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |a, b| a * b as f64)
}

/// Equal-time k-particle amplitude `(k!)^{-1/2} Σ_terms w·perm(A)`,
/// `A[i][l] = amplitude_one(f_l, x_i)`.
pub fn amplitude_k(psi: &FockSum, points: &[SpacetimePoint]) -> Result<Complex64> {
    if points.len() != psi.k {
        return Err(Error::Shape(format!("{} points for a k = {} state", points.len(), psi.k)));
    }
    let t0 = points[0].t;
    if points.iter().any(|p| p.t != t0) {
        return Err(Error::Argument("k-particle amplitudes are defined at equal times".into()));
    }
    let k = psi.k;
    let mut total = Complex64::new(0.0, 0.0);
    for (w, factors) in &psi.terms {
        let mut a = Vec::with_capacity(k * k);
        for x in points {
            for f in factors {
                a.push(amplitude_one(f, x)?);
            }
        }
        total += w * crate::lattice::permanent(&a, k);
    }
    Ok(total / factorial(k).sqrt())
}

/// Residual of the covariance law for one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceResidual {
    pub original: Complex64,
    pub transformed: Complex64,
    pub factor: f64,
    pub image: SpacetimePoint,
    pub residual: f64,
}

/// Image point `e^α(Λ_R z − y)` of the covariance law.
pub fn image_point(z: &SpacetimePoint, element: &PoincareElement, alpha: f64) -> SpacetimePoint {
    let rz = element.r.apply(&z.x);
    let s = alpha.exp();
    SpacetimePoint { t: s * (z.t - element.y[0]), x: [s * (rz[0] - element.y[1]), s * (rz[1] - element.y[2]), s * (rz[2] - element.y[3])] }
}

/// Checks `amp_Φ(z) = e^{nα/2}·amp_{Φ'}(e^α(Λ_R z − y))` with `Φ'` the combined action;
/// the residual is relative to `|amp_Φ(z)|`.
pub fn covariance_check(
    phi: &MomentumState,
    element: &PoincareElement,
    alpha: f64,
    z: &SpacetimePoint,
    scheme: Interpolation,
    policy: &SupportPolicy,
) -> Result<CovarianceResidual> {
    let image = image_point(z, element, alpha);
    z.check_in_box(&phi.grid)?;
    image.check_in_box(&phi.grid)?;
    let moved = combined_action(phi, element, alpha, scheme, policy)?;
    covariance_against(phi, &moved, element, alpha, z)
}

/// As [`covariance_check`], with the transformed state supplied.
pub fn covariance_against(phi: &MomentumState, moved: &MomentumState, element: &PoincareElement, alpha: f64, z: &SpacetimePoint) -> Result<CovarianceResidual> {
    let image = image_point(z, element, alpha);
    let factor = (0.5 * phi.grid.n as f64 * alpha).exp();
    let original = amplitude_one(phi, z)?;
    let transformed = amplitude_one(moved, &image)?;
    let residual = (original - factor * transformed).norm() / original.norm();
    Ok(CovarianceResidual { original, transformed, factor, image, residual })
}
