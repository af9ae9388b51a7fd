//! Polynomials in one canonical pair `(q, p)` with `[q, p] = i` (ħ = 1).
//!
//! Every polynomial is stored in normal order, all `q` factors to the left of
//! all `p` factors, so each operator has exactly one representation. The only
//! rewrite rule ever needed is
//!
//! ```text
//! p^b q^c = Σ_k (-i)^k k! C(b,k) C(c,k) q^(c-k) p^(b-k)
//! ```
//!
//! which is `pq = qp - i` applied exhaustively.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Coefficients below this magnitude are dropped after every operation.
pub const ZERO_TOL: f64 = 1e-12;

/// Residual-norm threshold of the least-squares span test.
pub const SPAN_TOL: f64 = 1e-9;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `q^q p^p` in normal order.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial {
    pub q: u32,
    pub p: u32,
}

impl Monomial {
    pub const ONE: Monomial = Monomial { q: 0, p: 0 };

    pub const fn new(q: u32, p: u32) -> Self {
        Monomial { q, p }
    }

    pub fn degree(self) -> u32 {
        self.q + self.p
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let factor = |f: &mut fmt::Formatter<'_>, name: &str, pow: u32| match pow {
            0 => Ok(()),
            1 => write!(f, "{name}"),
            n => write!(f, "{name}^{n}"),
        };
        if self.degree() == 0 {
            return write!(f, "1");
        }
        factor(f, "q", self.q)?;
        factor(f, "p", self.p)
    }
}

/// Complex-coefficient polynomial in `q, p`, normal ordered, zero terms absent.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OperatorPoly {
    terms: BTreeMap<Monomial, Complex64>,
}

impl OperatorPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn scalar(c: impl Into<Complex64>) -> Self {
        Self::monomial(0, 0, c)
    }

    pub fn one() -> Self {
        Self::scalar(1.0)
    }

    pub fn q() -> Self {
        Self::monomial(1, 0, 1.0)
    }

    pub fn p() -> Self {
        Self::monomial(0, 1, 1.0)
    }

    pub fn monomial(q: u32, p: u32, c: impl Into<Complex64>) -> Self {
        Self::from_terms([(Monomial::new(q, p), c.into())])
    }

    /// `qp + pq`, the symmetric cross term.
    pub fn qp_sym() -> Self {
        Self::monomial(1, 1, 2.0) + Self::scalar(-I)
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, Complex64)>) -> Self {
        let mut out = Self::zero();
        for (m, c) in terms {
            out.add_term(m, c);
        }
        out.prune();
        out
    }

    /// Real quadratic form `D p² + E (qp+pq) + F q² + A' p + B' q + C'`.
    pub fn quadratic(d: f64, e: f64, f: f64, a: f64, b: f64, c: f64) -> Self {
        Self::monomial(0, 2, d)
            + Self::qp_sym().scale(e)
            + Self::monomial(2, 0, f)
            + Self::monomial(0, 1, a)
            + Self::monomial(1, 0, b)
            + Self::scalar(c)
    }

    fn add_term(&mut self, m: Monomial, c: Complex64) {
        *self.terms.entry(m).or_insert(Complex64::new(0.0, 0.0)) += c;
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| c.norm() >= ZERO_TOL);
    }

    pub fn coeff(&self, m: Monomial) -> Complex64 {
        self.terms.get(&m).copied().unwrap_or_default()
    }

    pub fn coeff_qp(&self, q: u32, p: u32) -> Complex64 {
        self.coeff(Monomial::new(q, p))
    }

    pub fn terms(&self) -> impl Iterator<Item = (Monomial, Complex64)> + '_ {
        self.terms.iter().map(|(m, c)| (*m, *c))
    }

    pub fn monomials(&self) -> impl Iterator<Item = Monomial> + '_ {
        self.terms.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.is_empty()
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Euclidean norm of the coefficient vector.
    pub fn coeff_norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: impl Into<Complex64>) -> Self {
        let s = s.into();
        Self::from_terms(self.terms().map(|(m, c)| (m, c * s)))
    }

    /// Keeps only the terms of the given total degree.
    pub fn homogeneous_part(&self, degree: u32) -> Self {
        Self::from_terms(self.terms().filter(|(m, _)| m.degree() == degree))
    }

    pub fn pow(&self, n: u32) -> Self {
        (0..n).fold(Self::one(), |acc, _| &acc * self)
    }

    pub fn adjoint(&self) -> Self {
        adjoint(self)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (self - &self.adjoint()).max_abs_coeff() <= tol
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (self - other).max_abs_coeff() <= tol
    }
}

impl fmt::Display for OperatorPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in self.terms.iter().rev() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match (c.re != 0.0, c.im != 0.0) {
                (true, false) => write!(f, "{}", c.re)?,
                (false, true) => write!(f, "{}i", c.im)?,
                _ => write!(f, "({}{:+}i)", c.re, c.im)?,
            }
            if m.degree() > 0 {
                write!(f, " {m}")?;
            }
        }
        Ok(())
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * f64::from(n - j) / f64::from(j + 1))
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, j| acc * f64::from(j))
}

fn minus_i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

/// Normal-ordered expansion of the word `p^b q^c`.
pub fn reorder_pq(b: u32, c: u32) -> Vec<(Monomial, Complex64)> {
    (0..=b.min(c))
        .map(|k| {
            let w = factorial(k) * binomial(b, k) * binomial(c, k);
            (Monomial::new(c - k, b - k), minus_i_pow(k) * w)
        })
        .collect()
}

fn mul_monomials(x: Monomial, y: Monomial) -> Vec<(Monomial, Complex64)> {
    // q^a (p^b q^c) p^d
    reorder_pq(x.p, y.q)
        .into_iter()
        .map(|(m, w)| (Monomial::new(x.q + m.q, m.p + y.p), w))
        .collect()
}

impl Mul for &OperatorPoly {
    type Output = OperatorPoly;

    fn mul(self, rhs: &OperatorPoly) -> OperatorPoly {
        let mut out = OperatorPoly::zero();
        for (mx, cx) in self.terms() {
            for (my, cy) in rhs.terms() {
                for (m, w) in mul_monomials(mx, my) {
                    out.add_term(m, cx * cy * w);
                }
            }
        }
        out.prune();
        out
    }
}

impl Add for &OperatorPoly {
    type Output = OperatorPoly;

    fn add(self, rhs: &OperatorPoly) -> OperatorPoly {
        OperatorPoly::from_terms(self.terms().chain(rhs.terms()))
    }
}

impl Sub for &OperatorPoly {
    type Output = OperatorPoly;

    fn sub(self, rhs: &OperatorPoly) -> OperatorPoly {
        OperatorPoly::from_terms(self.terms().chain(rhs.terms().map(|(m, c)| (m, -c))))
    }
}

impl Neg for &OperatorPoly {
    type Output = OperatorPoly;

    fn neg(self) -> OperatorPoly {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl $tr for OperatorPoly {
            type Output = OperatorPoly;
            fn $method(self, rhs: OperatorPoly) -> OperatorPoly {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&OperatorPoly> for OperatorPoly {
            type Output = OperatorPoly;
            fn $method(self, rhs: &OperatorPoly) -> OperatorPoly {
                (&self).$method(rhs)
            }
        }
        impl $tr<OperatorPoly> for &OperatorPoly {
            type Output = OperatorPoly;
            fn $method(self, rhs: OperatorPoly) -> OperatorPoly {
                self.$method(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for OperatorPoly {
    type Output = OperatorPoly;

    fn neg(self) -> OperatorPoly {
        -&self
    }
}

/// `[a, b] = ab - ba` in normal order.
pub fn commutator(a: &OperatorPoly, b: &OperatorPoly) -> OperatorPoly {
    &(a * b) - &(b * a)
}

/// Formal adjoint: conjugate the coefficients and reverse every word.
pub fn adjoint(a: &OperatorPoly) -> OperatorPoly {
    let mut out = OperatorPoly::zero();
    for (m, c) in a.terms() {
        // (q^i p^j)† = p^j q^i
        for (mm, w) in reorder_pq(m.p, m.q) {
            out.add_term(mm, c.conj() * w);
        }
    }
    out.prune();
    out
}

/// Least-squares coordinates of `target` on `basis`, plus the out-of-span
/// remainder `target - Σ x_k basis_k`.
pub fn span_decompose(basis: &[OperatorPoly], target: &OperatorPoly) -> (Vec<Complex64>, OperatorPoly) {
    let rows: Vec<Monomial> = basis
        .iter()
        .flat_map(|b| b.monomials())
        .chain(target.monomials())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if rows.is_empty() || basis.is_empty() {
        return (vec![Complex64::default(); basis.len()], target.clone());
    }
    let a = DMatrix::from_fn(rows.len(), basis.len(), |i, j| basis[j].coeff(rows[i]));
    let rhs = DVector::from_fn(rows.len(), |i, _| target.coeff(rows[i]));
    let svd = a.svd(true, true);
    let x = svd.solve(&rhs, 1e-12).unwrap_or_else(|_| DVector::zeros(basis.len()));
    let coords: Vec<Complex64> = x.iter().copied().collect();
    let fitted = basis
        .iter()
        .zip(&coords)
        .fold(OperatorPoly::zero(), |acc, (b, c)| acc + b.scale(*c));
    (coords, target - &fitted)
}

/// A pair of generators whose bracket leaves their span.
#[derive(Clone, Debug)]
pub struct ClosureWitness {
    pub left: usize,
    pub right: usize,
    pub bracket: OperatorPoly,
    pub out_of_span: OperatorPoly,
}

#[derive(Clone, Debug)]
pub struct ClosureReport {
    pub closed: bool,
    /// `(i, j, coordinates of [g_i, g_j] on the generators)` for every pair.
    pub structure: Vec<(usize, usize, Vec<Complex64>)>,
    pub failing_pairs: usize,
    pub max_residual: f64,
    /// Failing pair with the largest out-of-span component.
    pub witness: Option<ClosureWitness>,
}

/// Checks whether the generators span a Lie algebra under the commutator.
pub fn check_closure(generators: &[OperatorPoly]) -> ClosureReport {
    let mut structure = Vec::new();
    let mut failing_pairs = 0;
    let mut max_residual: f64 = 0.0;
    let mut witness: Option<ClosureWitness> = None;
    for i in 0..generators.len() {
        for j in i + 1..generators.len() {
            let bracket = commutator(&generators[i], &generators[j]);
            let (coords, rest) = span_decompose(generators, &bracket);
            let residual = rest.coeff_norm();
            max_residual = max_residual.max(residual);
            if residual > SPAN_TOL {
                failing_pairs += 1;
                let better = witness.as_ref().is_none_or(|w| residual > w.out_of_span.coeff_norm());
                if better {
                    witness = Some(ClosureWitness {
                        left: i,
                        right: j,
                        bracket: bracket.clone(),
                        out_of_span: rest,
                    });
                }
            }
            structure.push((i, j, coords));
        }
    }
    ClosureReport {
        closed: failing_pairs == 0,
        structure,
        failing_pairs,
        max_residual,
        witness,
    }
}

/// All normal-ordered monomials of total degree `1..=max_degree`, plus `1`.
pub fn monomials_up_to(max_degree: u32) -> Vec<OperatorPoly> {
    let mut out = Vec::new();
    for d in (0..=max_degree).rev() {
        for qd in (0..=d).rev() {
            out.push(OperatorPoly::monomial(qd, d - qd, 1.0));
        }
    }
    out
}

/// `∂I/∂t + (1/i)[I, H]` for `I = Σ c_k G_k`, given the coefficient values and
/// their time derivatives at one instant.
pub fn lvn_residual(
    basis: &[OperatorPoly],
    values: &[f64],
    derivatives: &[f64],
    hamiltonian: &OperatorPoly,
) -> OperatorPoly {
    assert_eq!(basis.len(), values.len());
    assert_eq!(basis.len(), derivatives.len());
    let invariant = combine(basis, values);
    let dot = combine(basis, derivatives);
    dot + commutator(&invariant, hamiltonian).scale(-I)
}

fn combine(basis: &[OperatorPoly], coeffs: &[f64]) -> OperatorPoly {
    basis
        .iter()
        .zip(coeffs)
        .fold(OperatorPoly::zero(), |acc, (g, c)| acc + g.scale(*c))
}

/// Coefficient flow implied by the Liouville-von Neumann condition.
///
/// For `H(t) = Σ_j w_j(t) h_j` the invariant coefficients obey
/// `ċ = Σ_j w_j(t) T_j c`; this returns `T_j` for each term `h_j`. The basis
/// must be Hermitian and linearly independent so the coordinates are real.
/// The least-squares solve leaves ulp-level noise on structure constants
/// that are really small dyadic rationals; round those back.
fn snap_dyadic(x: f64) -> f64 {
    if x.abs() < ZERO_TOL {
        return 0.0;
    }
    let scaled = x * 1024.0;
    let r = scaled.round();
    if (scaled - r).abs() < ZERO_TOL * scaled.abs().max(1.0) {
        r / 1024.0
    } else {
        x
    }
}

pub fn lvn_flow(basis: &[OperatorPoly], hamiltonian_terms: &[OperatorPoly]) -> Result<Vec<DMatrix<f64>>> {
    let n = basis.len();
    let mut out = Vec::with_capacity(hamiltonian_terms.len());
    for h in hamiltonian_terms {
        let mut t = DMatrix::zeros(n, n);
        for (k, g) in basis.iter().enumerate() {
            // ∂I/∂t = i[I, H]
            let image = commutator(g, h).scale(I);
            let (coords, rest) = span_decompose(basis, &image);
            let residual = rest.coeff_norm();
            let imag = coords.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
            if residual > SPAN_TOL || imag > SPAN_TOL {
                return Err(Error::AnsatzNotClosed {
                    term: h.to_string(),
                    residual: residual.max(imag),
                });
            }
            for (row, c) in coords.iter().enumerate() {
                t[(row, k)] = snap_dyadic(c.re);
            }
        }
        out.push(t);
    }
    Ok(out)
}

/// `e^{-G} op e^{G}` via the nested-commutator series `Σ ad_{-G}^k(op) / k!`.
///
/// For linear `G` the series terminates after `deg(op) + 1` terms; for
/// quadratic `G` it is summed until the terms fall below `1e-16` relative.
pub fn conjugate_series(op: &OperatorPoly, generator: &OperatorPoly, max_terms: usize) -> OperatorPoly {
    let minus_g = -generator;
    let mut term = op.clone();
    let mut sum = op.clone();
    for k in 1..max_terms {
        term = commutator(&minus_g, &term).scale(1.0 / k as f64);
        if term.is_zero() {
            break;
        }
        sum = sum + &term;
        if term.max_abs_coeff() < 1e-16 * sum.max_abs_coeff().max(1.0) {
            break;
        }
    }
    sum
}
