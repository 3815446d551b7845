//! Conformal generators as operators on momentum wavefunctions, their second-quantized
//! lifts, and the product-form identities.
//!
//! Free indices are lower (covariant) Minkowski indices with metric (+,−,−,−); stored
//! components are upper, so `p_j = −p^j`. Names use 1-based spatial indices.
//!
//! | generator | one-particle action |
//! |-----------|---------------------|
//! | `P0`      | `ω` |
//! | `P(j)`    | `p_j = −p^j` |
//! | `X(j)`    | `−i ∂/∂p^j` |
//! | `V(j)`    | `p_j / ω` |
//! | `M(i,k)`  | `i(p_i ∂_k − p_k ∂_i)`, i.e. `i(−p^i ∂_k + p^k ∂_i)` |
//! | `M(0,j)`  | `−M_{j0}`, `M_{j0} = i(p_j/(2ω) − ω ∂_j)` |
//! | `D`       | `−i(3/2 + p^l ∂_l)` |
//! | `K0`      | `−3/(4ω) − (p^l/ω) ∂_l + ω Σ_l ∂_l ∂_l` |
//! | `K(j)`    | `p^j/(4ω²) − 3∂_j − 2 p^l ∂_l ∂_j + p^j Σ_l ∂_l ∂_l` |

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{FockSum, GridSpec, MomentumState, Sampled};
use crate::spectral::{Operator, Pipeline, Step, Symbol};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn omega() -> Symbol {
    Symbol::norm_pow(1.0)
}

fn comp_over_omega(axis: usize, power: f64) -> Symbol {
    Symbol::product(vec![Symbol::comp(axis), Symbol::norm_pow(-power)])
}

/// Coordinate multiplication followed by momentum multiplication.
fn coord_then_mom(coord: Symbol, mom: Symbol) -> Operator {
    Operator::from_pipeline(Pipeline::new(vec![Step::MultiplyCoordinate { symbol: coord }, Step::MultiplyMomentum { symbol: mom }]))
}

fn x2_symbol(n: usize) -> Symbol {
    Symbol::Sum { terms: (0..n).map(|a| (c(1.0, 0.0), Symbol::product(vec![Symbol::comp(a), Symbol::comp(a)]))).collect() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Generator {
    P0,
    P(usize),
    X(usize),
    V(usize),
    N,
    /// `M_{ik}`, spatial indices `i ≠ k`.
    Mrot(usize, usize),
    /// `M_{0j}`.
    Mboost(usize),
    D,
    K0,
    K(usize),
    /// `P0⁻¹ = 1/ω`.
    P0Inv,
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::P0 => write!(f, "P0"),
            Generator::P(j) => write!(f, "P({j})"),
            Generator::X(j) => write!(f, "X({j})"),
            Generator::V(j) => write!(f, "V({j})"),
            Generator::N => write!(f, "N"),
            Generator::Mrot(i, k) => write!(f, "M({i},{k})"),
            Generator::Mboost(j) => write!(f, "M(0,{j})"),
            Generator::D => write!(f, "D"),
            Generator::K0 => write!(f, "K0"),
            Generator::K(j) => write!(f, "K({j})"),
            Generator::P0Inv => write!(f, "P0^-1"),
        }
    }
}

fn parse_index_list(s: &str) -> Result<Vec<usize>> {
    s.split(',').map(|t| t.trim().parse::<usize>().map_err(|e| Error::Parse(format!("bad index {t:?}: {e}")))).collect()
}

/// Parses a generator name; `M(j,0)` yields `(−1, M(0,j))`.
pub fn parse_generator(name: &str) -> Result<(f64, Generator)> {
    let name = name.trim();
    let simple = match name {
        "P0" | "P(0)" => Some(Generator::P0),
        "N" => Some(Generator::N),
        "D" => Some(Generator::D),
        "K0" | "K(0)" => Some(Generator::K0),
        "P0^-1" => Some(Generator::P0Inv),
        _ => None,
    };
    if let Some(g) = simple {
        return Ok((1.0, g));
    }
    let open = name.find('(').ok_or_else(|| Error::Parse(format!("unknown generator {name:?}")))?;
    if !name.ends_with(')') {
        return Err(Error::Parse(format!("unknown generator {name:?}")));
    }
    let head = &name[..open];
    let idx = parse_index_list(&name[open + 1..name.len() - 1])?;
    let one = |idx: &[usize]| -> Result<usize> {
        match idx {
            [j] if *j >= 1 => Ok(*j),
            _ => Err(Error::Parse(format!("{name:?} needs one spatial index >= 1"))),
        }
    };
    let g = match head {
        "P" => (1.0, Generator::P(one(&idx)?)),
        "X" => (1.0, Generator::X(one(&idx)?)),
        "V" => (1.0, Generator::V(one(&idx)?)),
        "K" => (1.0, Generator::K(one(&idx)?)),
        "M" => match idx.as_slice() {
            [0, j] if *j >= 1 => (1.0, Generator::Mboost(*j)),
            [j, 0] if *j >= 1 => (-1.0, Generator::Mboost(*j)),
            [i, k] if *i >= 1 && *k >= 1 && i != k => (1.0, Generator::Mrot(*i, *k)),
            _ => return Err(Error::Parse(format!("{name:?} needs two distinct indices"))),
        },
        _ => return Err(Error::Parse(format!("unknown generator {name:?}"))),
    };
    Ok(g)
}

impl Generator {
    /// `P_μ` for a Lorentz index.
    pub fn lorentz_p(mu: usize) -> Generator {
        if mu == 0 {
            Generator::P0
        } else {
            Generator::P(mu)
        }
    }

    /// `K_μ` for a Lorentz index.
    pub fn lorentz_k(mu: usize) -> Generator {
        if mu == 0 {
            Generator::K0
        } else {
            Generator::K(mu)
        }
    }

    /// `M_μν` as a signed canonical generator; `None` when `μ = ν`.
    pub fn lorentz_m(mu: usize, nu: usize) -> Option<(f64, Generator)> {
        match (mu, nu) {
            _ if mu == nu => None,
            (0, j) => Some((1.0, Generator::Mboost(j))),
            (j, 0) => Some((-1.0, Generator::Mboost(j))),
            (i, k) if i < k => Some((1.0, Generator::Mrot(i, k))),
            (i, k) => Some((-1.0, Generator::Mrot(k, i))),
        }
    }

    /// Highest order of momentum derivative in the one-particle action.
    pub fn derivative_order(&self) -> usize {
        match self {
            Generator::P0 | Generator::P(_) | Generator::V(_) | Generator::N | Generator::P0Inv => 0,
            Generator::X(_) | Generator::Mrot(..) | Generator::Mboost(_) | Generator::D => 1,
            Generator::K0 | Generator::K(_) => 2,
        }
    }

    /// Whether the action is singular at `p = 0`, so admissible states must vanish there.
    pub fn singular_at_origin(&self) -> bool {
        matches!(self, Generator::Mboost(_) | Generator::K0 | Generator::K(_) | Generator::P0Inv)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let check = |j: usize| {
            if (1..=n).contains(&j) {
                Ok(())
            } else {
                Err(Error::Argument(format!("index {j} of {self} outside 1..={n}")))
            }
        };
        match *self {
            Generator::P(j) | Generator::X(j) | Generator::V(j) | Generator::Mboost(j) => check(j),
            Generator::Mrot(i, k) => {
                check(i)?;
                check(k)?;
                if i == k {
                    return Err(Error::Argument(format!("{self} needs distinct indices")));
                }
                Ok(())
            }
            Generator::D | Generator::K0 => require3(n, self),
            Generator::K(j) => {
                require3(n, self)?;
                check(j)
            }
            _ => Ok(()),
        }
    }

    /// The generator as a composition of multiplications in momentum and coordinate space.
    pub fn operator(&self, n: usize) -> Result<Operator> {
        self.validate(n)?;
        let i = c(0.0, 1.0);
        Ok(match *self {
            Generator::P0 => Operator::momentum(omega()),
            Generator::P(j) => Operator::momentum(Symbol::product(vec![Symbol::real(-1.0), Symbol::comp(j - 1)])),
            Generator::X(j) => Operator::coordinate(Symbol::product(vec![Symbol::real(-1.0), Symbol::comp(j - 1)])),
            Generator::V(j) => Operator::momentum(Symbol::product(vec![Symbol::real(-1.0), comp_over_omega(j - 1, 1.0)])),
            Generator::N => Operator::Identity,
            Generator::P0Inv => Operator::momentum(Symbol::norm_pow(-1.0)),
            Generator::Mrot(a, b) => Operator::sum(vec![
                (c(-1.0, 0.0), coord_then_mom(Symbol::comp(b - 1), Symbol::comp(a - 1))),
                (c(1.0, 0.0), coord_then_mom(Symbol::comp(a - 1), Symbol::comp(b - 1))),
            ]),
            Generator::Mboost(j) => {
                Operator::sum(vec![(0.5 * i, Operator::momentum(comp_over_omega(j - 1, 1.0))), (c(1.0, 0.0), coord_then_mom(Symbol::comp(j - 1), omega()))])
            }
            Generator::D => {
                let mut terms = vec![(-1.5 * i, Operator::Identity)];
                for l in 0..3 {
                    terms.push((c(-1.0, 0.0), coord_then_mom(Symbol::comp(l), Symbol::comp(l))));
                }
                Operator::sum(terms)
            }
            Generator::K0 => {
                let mut terms = vec![(c(-0.75, 0.0), Operator::momentum(Symbol::norm_pow(-1.0)))];
                for l in 0..3 {
                    terms.push((i, coord_then_mom(Symbol::comp(l), comp_over_omega(l, 1.0))));
                }
                terms.push((c(1.0, 0.0), coord_then_mom(x2_symbol(3), omega())));
                Operator::sum(terms)
            }
            Generator::K(j) => {
                let a = j - 1;
                let mut terms = vec![(c(0.25, 0.0), Operator::momentum(comp_over_omega(a, 2.0))), (3.0 * i, Operator::coordinate(Symbol::comp(a)))];
                for l in 0..3 {
                    terms.push((c(2.0, 0.0), coord_then_mom(Symbol::product(vec![Symbol::comp(l), Symbol::comp(a)]), Symbol::comp(l))));
                }
                terms.push((c(-1.0, 0.0), coord_then_mom(x2_symbol(3), Symbol::comp(a))));
                Operator::sum(terms)
            }
        })
    }
}

fn require3(n: usize, g: &Generator) -> Result<()> {
    if n == 3 {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension { n, what: format!("{g} is defined for n = 3 only") })
    }
}

/// The operator of `g` for the grid's dimension.
pub fn pipeline_of(g: Generator, grid: &GridSpec) -> Result<Operator> {
    g.operator(grid.n)
}

fn admissible(g: &Generator, phi: &MomentumState) -> Result<()> {
    if g.singular_at_origin() {
        phi.check_zero_mode().map_err(|e| Error::Domain(format!("{g}: {e}")))?;
    }
    Ok(())
}

/// One-particle action of a generator.
pub fn apply(g: Generator, phi: &MomentumState) -> Result<MomentumState> {
    admissible(&g, phi)?;
    g.operator(phi.grid.n)?.apply(phi)
}

/// Second-quantized action: Leibniz sum over the factor slots of every term.
pub fn apply_dgamma(g: Generator, psi: &FockSum) -> Result<FockSum> {
    let mut terms = Vec::with_capacity(psi.k * psi.terms.len());
    for (w, factors) in &psi.terms {
        for slot in 0..factors.len() {
            let mut f = factors.clone();
            f[slot] = apply(g, &factors[slot])?;
            terms.push((*w, f));
        }
    }
    FockSum::new(psi.k, terms)
}

/// Expectation `⟨Ψ|dΓ(g)|Ψ⟩ / ⟨Ψ|Ψ⟩`.
pub fn dgamma_expectation(g: Generator, psi: &FockSum) -> Result<Complex64> {
    let num = psi.inner(&apply_dgamma(g, psi)?)?;
    Ok(num / psi.inner(psi)?)
}

/// `a(bφ) − b(aφ)`.
pub fn commutator(a: &Operator, b: &Operator, phi: &MomentumState) -> Result<MomentumState> {
    let ab = a.apply(&b.apply(phi)?)?;
    let ba = b.apply(&a.apply(phi)?)?;
    ab.sub(&ba)
}

/// The product-form identities of the second-quantized generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeneratorIdentity {
    /// `M_{0j} = ½(dΓ(X_j P0) + dΓ(P0 X_j))`.
    MboostProduct(usize),
    /// `M_{ik} = dΓ(X_i P_k) − dΓ(X_k P_i)`.
    MrotProduct(usize, usize),
    /// `D = ½(dΓ(P_j X^j) + dΓ(X^j P_j))`.
    DProduct,
    /// `K0 = −¾dΓ(P0⁻¹) − i dΓ(V^l X_l) + dΓ(P0 X_l X^l)`.
    K0Product,
    /// `K_j = −¼dΓ(P0⁻¹V_j) − 3i dΓ(X_j) + 2dΓ(P^l X_l X_j) − dΓ(P_j X_l X^l)`.
    KjProduct(usize),
}

impl fmt::Display for GeneratorIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorIdentity::MboostProduct(j) => write!(f, "id:Mboost-product({j})"),
            GeneratorIdentity::MrotProduct(i, k) => write!(f, "id:Mrot-product({i},{k})"),
            GeneratorIdentity::DProduct => write!(f, "id:D-product"),
            GeneratorIdentity::K0Product => write!(f, "id:K0-product"),
            GeneratorIdentity::KjProduct(j) => write!(f, "id:Kj-product({j})"),
        }
    }
}

pub fn parse_identity(name: &str) -> Result<GeneratorIdentity> {
    let name = name.trim();
    let body = name.strip_prefix("id:").ok_or_else(|| Error::Parse(format!("identity names start with id:, got {name:?}")))?;
    let (head, idx) = match body.find('(') {
        Some(p) if body.ends_with(')') => (&body[..p], parse_index_list(&body[p + 1..body.len() - 1])?),
        _ => (body, Vec::new()),
    };
    match (head, idx.as_slice()) {
        ("Mboost-product", [j]) => Ok(GeneratorIdentity::MboostProduct(*j)),
        ("Mboost-product", []) => Ok(GeneratorIdentity::MboostProduct(1)),
        ("Mrot-product", [i, k]) => Ok(GeneratorIdentity::MrotProduct(*i, *k)),
        ("Mrot-product", []) => Ok(GeneratorIdentity::MrotProduct(1, 2)),
        ("D-product", []) => Ok(GeneratorIdentity::DProduct),
        ("K0-product", []) => Ok(GeneratorIdentity::K0Product),
        ("Kj-product", [j]) => Ok(GeneratorIdentity::KjProduct(*j)),
        ("Kj-product", []) => Ok(GeneratorIdentity::KjProduct(1)),
        _ => Err(Error::Parse(format!("unknown identity {name:?}"))),
    }
}

/// Left-hand generator and the literal right-hand terms of an identity.
#[derive(Debug, Clone)]
pub struct ProductForm {
    pub lhs: Generator,
    /// `(label, operator)`; the literal right-hand side is the plain sum.
    pub terms: Vec<(String, Operator)>,
}

impl ProductForm {
    /// `Σ_t signs[t]·term_t`.
    pub fn rhs(&self, signs: &[f64]) -> Operator {
        Operator::sum(self.terms.iter().zip(signs).map(|((_, op), s)| (c(*s, 0.0), op.clone())).collect())
    }

    pub fn literal(&self) -> Operator {
        self.rhs(&vec![1.0; self.terms.len()])
    }
}

fn op(g: Generator, n: usize) -> Result<Operator> {
    g.operator(n)
}

/// Product of generators read left to right (the last acts first), with a coefficient.
fn word(coef: Complex64, gens: &[Generator], n: usize) -> Result<Operator> {
    let factors = gens.iter().map(|g| op(*g, n)).collect::<Result<Vec<_>>>()?;
    Ok(Operator::sum(vec![(coef, Operator::product(factors))]))
}

/// Builds the literal terms of an identity. Upper spatial indices are realized as
/// `X^j = −X_j`, `P^l = −P_l`, `V^l = −V_l`.
pub fn product_form(id: GeneratorIdentity, n: usize) -> Result<ProductForm> {
    use Generator::*;
    let one = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    let sum_l =
        |f: &dyn Fn(usize) -> Result<Operator>| -> Result<Operator> { Ok(Operator::sum((1..=3).map(|l| f(l).map(|o| (one, o))).collect::<Result<Vec<_>>>()?)) };
    Ok(match id {
        GeneratorIdentity::MboostProduct(j) => {
            Mboost(j).validate(n)?;
            ProductForm {
                lhs: Mboost(j),
                terms: vec![(format!("1/2 X_{j}P0"), word(c(0.5, 0.0), &[X(j), P0], n)?), (format!("1/2 P0X_{j}"), word(c(0.5, 0.0), &[P0, X(j)], n)?)],
            }
        }
        GeneratorIdentity::MrotProduct(a, b) => {
            Mrot(a, b).validate(n)?;
            ProductForm {
                lhs: Mrot(a, b),
                terms: vec![(format!("X_{a}P_{b}"), word(one, &[X(a), P(b)], n)?), (format!("-X_{b}P_{a}"), word(-one, &[X(b), P(a)], n)?)],
            }
        }
        GeneratorIdentity::DProduct => {
            require3(n, &D)?;
            ProductForm {
                lhs: D,
                terms: vec![
                    ("1/2 P_jX^j".into(), sum_l(&|l| word(c(-0.5, 0.0), &[P(l), X(l)], n))?),
                    ("1/2 X^jP_j".into(), sum_l(&|l| word(c(-0.5, 0.0), &[X(l), P(l)], n))?),
                ],
            }
        }
        GeneratorIdentity::K0Product => {
            require3(n, &K0)?;
            ProductForm {
                lhs: K0,
                terms: vec![
                    ("-3/4 P0^-1".into(), word(c(-0.75, 0.0), &[P0Inv], n)?),
                    ("-i V^lX_l".into(), sum_l(&|l| word(i, &[V(l), X(l)], n))?),
                    ("P0X_lX^l".into(), sum_l(&|l| word(-one, &[P0, X(l), X(l)], n))?),
                ],
            }
        }
        GeneratorIdentity::KjProduct(j) => {
            K(j).validate(n)?;
            ProductForm {
                lhs: K(j),
                terms: vec![
                    (format!("-1/4 P0^-1V_{j}"), word(c(-0.25, 0.0), &[P0Inv, V(j)], n)?),
                    (format!("-3i X_{j}"), word(-3.0 * i, &[X(j)], n)?),
                    (format!("2 P^lX_lX_{j}"), sum_l(&|l| word(c(-2.0, 0.0), &[P(l), X(l), X(j)], n))?),
                    (format!("-P_{j}X_lX^l"), sum_l(&|l| word(one, &[P(j), X(l), X(l)], n))?),
                ],
            }
        }
    })
}

/// `√(2ω) X_j (2ω)^{-1/2}`: the position operator acting on covariant wavefunctions.
pub fn conjugated_position(j: usize, n: usize) -> Result<Operator> {
    Ok(Operator::product(vec![
        Operator::momentum(Symbol::product(vec![Symbol::real(2f64.sqrt()), Symbol::norm_pow(0.5)])),
        Generator::X(j).operator(n)?,
        Operator::momentum(Symbol::product(vec![Symbol::real(0.5f64.sqrt()), Symbol::norm_pow(-0.5)])),
    ]))
}

/// `−i(p_j/(2ω²) + ∂/∂p^j)` with `p_j = −p^j`.
pub fn nwp_position(j: usize, n: usize) -> Result<Operator> {
    Generator::X(j).validate(n)?;
    Ok(Operator::sum(vec![(c(0.0, 0.5), Operator::momentum(comp_over_omega(j - 1, 2.0))), (c(1.0, 0.0), Generator::X(j).operator(n)?)]))
}
