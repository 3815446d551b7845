//! Finite transformations on states and the time-conjugated generators.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::generators::Generator;
use crate::lattice::{dot3, norm3, MomentumState, Sampled};
use crate::spectral::{self, Interpolation, Operator, Rotation, SupportPolicy, Symbol};
use crate::Vec3;

/// Space-time translation `y = (y⁰, y)` and rotation `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareElement {
    pub y: [f64; 4],
    pub r: Rotation,
}

impl PoincareElement {
    pub fn identity() -> Self {
        PoincareElement { y: [0.0; 4], r: Rotation::identity() }
    }

    pub fn translation(y: [f64; 4]) -> Self {
        PoincareElement { y, r: Rotation::identity() }
    }

    pub fn spatial_shift(&self) -> Vec3 {
        [self.y[1], self.y[2], self.y[3]]
    }
}

/// `φ(p) → e^{−i(ω y⁰ − p·y)} φ(p)`, the wavefunction of `e^{iy·P}|Φ⟩`.
pub fn translate(phi: &MomentumState, y: [f64; 4]) -> MomentumState {
    let g = phi.grid;
    let shift = [y[1], y[2], y[3]];
    let data = exec::map_range(g.len(), |i| {
        let p = g.momentum(i);
        phi.data[i] * Complex64::from_polar(1.0, -(y[0] * norm3(&p) - dot3(&p, &shift)))
    });
    phi.with_samples(data)
}

/// `φ(p) → e^{3α/2} φ(e^α p)`, the wavefunction of `e^{iαD}|Φ⟩`.
pub fn dilate(phi: &MomentumState, alpha: f64, scheme: Interpolation, policy: &SupportPolicy) -> Result<MomentumState> {
    phi.grid.require_dim(3, "dilatations act on n = 3 states")?;
    spectral::rescale(phi, alpha, scheme, policy)
}

/// `φ(p) → φ(R⁻¹p)`.
pub fn rotate_state(phi: &MomentumState, r: &Rotation, scheme: Interpolation) -> Result<MomentumState> {
    spectral::rotate(phi, r, scheme)
}

/// Rotation, then translation, then dilatation.
pub fn combined_action(phi: &MomentumState, element: &PoincareElement, alpha: f64, scheme: Interpolation, policy: &SupportPolicy) -> Result<MomentumState> {
    let rotated = rotate_state(phi, &element.r, scheme)?;
    let moved = translate(&rotated, element.y);
    if alpha == 0.0 {
        Ok(moved)
    } else {
        dilate(&moved, alpha, scheme, policy)
    }
}

/// `e^{itP0} A e^{−itP0}` as an operator product.
pub fn phase_conjugated(a: Operator, t: f64) -> Operator {
    Operator::product(vec![Operator::momentum(Symbol::Phase { time: -t, shift: [0.0; 3] }), a, Operator::momentum(Symbol::Phase { time: t, shift: [0.0; 3] })])
}

/// `D − t P0`.
pub fn time_conjugated_d(t: f64) -> Result<Operator> {
    let d = Generator::D.operator(3)?;
    let p0 = Generator::P0.operator(3)?;
    Ok(Operator::sum(vec![(Complex64::new(1.0, 0.0), d), (Complex64::new(-t, 0.0), p0)]))
}

fn eta0(mu: usize) -> f64 {
    if mu == 0 {
        1.0
    } else {
        0.0
    }
}

fn check_mu(mu: usize) -> Result<()> {
    if mu <= 3 {
        Ok(())
    } else {
        Err(Error::Argument(format!("Lorentz index {mu} outside 0..=3")))
    }
}

fn k_first_order(mu: usize, t: f64) -> Result<Vec<(Complex64, Operator)>> {
    let mut terms = vec![(Complex64::new(1.0, 0.0), Generator::lorentz_k(mu).operator(3)?)];
    if mu == 0 {
        terms.push((Complex64::new(-2.0 * t, 0.0), Generator::D.operator(3)?));
    } else if let Some((s, m)) = Generator::lorentz_m(0, mu) {
        terms.push((Complex64::new(2.0 * t * s, 0.0), m.operator(3)?));
    }
    Ok(terms)
}

/// `K_μ − 2t(η_{0μ}D − M_{0μ}) + t²(2η_{0μ}P0 − P_μ)`, the conjugation series
/// `e^{itP0} K_μ e^{−itP0}` summed exactly (it terminates at second order).
pub fn time_conjugated_k(mu: usize, t: f64) -> Result<Operator> {
    check_mu(mu)?;
    let mut terms = k_first_order(mu, t)?;
    let coef = t * t * (2.0 * eta0(mu) - 1.0);
    terms.push((Complex64::new(coef, 0.0), Generator::lorentz_p(mu).operator(3)?));
    Ok(Operator::sum(terms))
}

/// `K_μ − 2t(η_{0μ}D − M_{0μ}) − t²P_μ`, the closed form as commonly written; it agrees
/// with [`time_conjugated_k`] for spatial `μ` and differs in the sign of `t²P0` for `μ = 0`.
pub fn time_conjugated_k_literal(mu: usize, t: f64) -> Result<Operator> {
    check_mu(mu)?;
    let mut terms = k_first_order(mu, t)?;
    terms.push((Complex64::new(-t * t, 0.0), Generator::lorentz_p(mu).operator(3)?));
    Ok(Operator::sum(terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_gaussian_ring, GridSpec, RingDirection};
    use crate::spectral::to_coordinate;

    #[test]
    fn translation_is_a_phase() {
        let g = GridSpec::new(3, 32, 12.0).unwrap();
        let phi = make_gaussian_ring(g, 3.0, 0.5, RingDirection::Along([1.0, 0.0, 0.0])).unwrap();
        assert_eq!(translate(&phi, [0.0; 4]), phi);
        let moved = translate(&phi, [1.0, 0.0, 0.0, 0.0]);
        assert!((moved.norm() - phi.norm()).abs() < 1e-13);
        let e0 = phi.expectation_of(norm3);
        let e1 = moved.expectation_of(norm3);
        assert!((e0 - e1).abs() < 1e-12);
    }

    #[test]
    fn lattice_shift_moves_coordinate_partner() {
        let g = GridSpec::new(3, 16, 8.0).unwrap();
        let phi = crate::lattice::make_random(g, 7).unwrap();
        let dx = g.dx();
        let moved = translate(&phi, [0.0, 2.0 * dx, -dx, 0.0]);
        let f = to_coordinate(&phi);
        let h = to_coordinate(&moved);
        for i in 0..g.len() {
            let k = g.labels(i);
            let src = g.ravel([g.unwrapped(k[0] + 2), g.unwrapped(k[1] - 1), g.unwrapped(k[2])]);
            assert!((h.data[i] - f.data[src]).norm() < 1e-12);
        }
    }

    #[test]
    fn combined_action_without_dilatation() {
        let g = GridSpec::new(3, 32, 12.0).unwrap();
        let phi = make_gaussian_ring(g, 3.0, 0.5, RingDirection::Along([0.6, 0.0, 0.8])).unwrap();
        let el = PoincareElement { y: [0.3, 0.1, 0.0, -0.2], r: Rotation::about_x(std::f64::consts::FRAC_PI_2) };
        let a = combined_action(&phi, &el, 0.0, Interpolation::Trigonometric, &SupportPolicy::default()).unwrap();
        let b = translate(&rotate_state(&phi, &el.r, Interpolation::Trigonometric).unwrap(), el.y);
        assert_eq!(a, b);
        assert_eq!(combined_action(&phi, &PoincareElement::identity(), 0.0, Interpolation::Trigonometric, &SupportPolicy::default()).unwrap(), phi);
    }

    #[test]
    fn conjugation_at_zero_time() {
        let g = GridSpec::new(3, 32, 12.0).unwrap();
        let phi = make_gaussian_ring(g, 3.0, 0.5, RingDirection::Isotropic).unwrap();
        let d = Generator::D.operator(3).unwrap().apply(&phi).unwrap();
        let d0 = time_conjugated_d(0.0).unwrap().apply(&phi).unwrap();
        assert!(d.relative_distance(&d0, 1.0).unwrap() < 1e-15);
        for mu in 0..4 {
            let k = Generator::lorentz_k(mu).operator(3).unwrap().apply(&phi).unwrap();
            let k0 = time_conjugated_k(mu, 0.0).unwrap().apply(&phi).unwrap();
            assert!(k.relative_distance(&k0, 1.0).unwrap() < 1e-15);
        }
        assert!(time_conjugated_k(4, 0.1).is_err());
    }
}
