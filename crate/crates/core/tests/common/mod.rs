//! Oracles shared by the integration tests. None of them goes through the
//! library's normal-ordering algebra.
#![allow(dead_code)]

use lewis_riesenfeld::invariants::QuadCoeffs;
use lewis_riesenfeld::scenario::Scenario;
use lewis_riesenfeld::transforms::TransformParams;
use lewis_riesenfeld::weyl::OperatorPoly;
use num_complex::Complex64;

/// Polynomial in `x`, lowest power first.
pub type Poly = Vec<Complex64>;

/// `q^a p^b` acting on `f(x)` with `q = x` and `p = -i d/dx`.
fn apply_monomial(a: u32, b: u32, c: Complex64, f: &Poly) -> Poly {
    let mut g = f.clone();
    for _ in 0..b {
        g = g
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, z)| z * Complex64::new(0.0, -(k as f64)))
            .collect();
        if g.is_empty() {
            return Vec::new();
        }
    }
    let mut out = vec![Complex64::new(0.0, 0.0); a as usize];
    out.extend(g.into_iter().map(|z| z * c));
    out
}

pub fn apply(op: &OperatorPoly, f: &Poly) -> Poly {
    let mut out: Poly = Vec::new();
    for (m, c) in op.terms() {
        let g = apply_monomial(m.q, m.p, c, f);
        if out.len() < g.len() {
            out.resize(g.len(), Complex64::new(0.0, 0.0));
        }
        for (o, z) in out.iter_mut().zip(g) {
            *o += z;
        }
    }
    out
}

pub fn x_power(k: usize) -> Poly {
    let mut v = vec![Complex64::new(0.0, 0.0); k + 1];
    v[k] = Complex64::new(1.0, 0.0);
    v
}

/// `AB - BA` applied to `x^k`, computed by composing actions.
pub fn commutator_on(a: &OperatorPoly, b: &OperatorPoly, k: usize) -> Poly {
    let f = x_power(k);
    let ab = apply(a, &apply(b, &f));
    let ba = apply(b, &apply(a, &f));
    let n = ab.len().max(ba.len());
    (0..n)
        .map(|j| ab.get(j).copied().unwrap_or_default() - ba.get(j).copied().unwrap_or_default())
        .collect()
}

/// Weyl symbol of `D p² + E(qp+pq) + F q² + A'p + B'q + C'`.
pub fn symbol(c: QuadCoeffs, q: f64, p: f64) -> f64 {
    c.d * p * p + 2.0 * c.e * q * p + c.f * q * q + c.a * p + c.b * q + c.c
}

/// `exp(M)` for a 2×2 matrix by scaling and squaring a Taylor series.
pub fn expm2(m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let norm = m.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max);
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.25 {
        s += 1;
    }
    let a = m.map(|r| r.map(|x| x / 2f64.powi(s)));
    let mul = |x: [[f64; 2]; 2], y: [[f64; 2]; 2]| {
        let mut z = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                z[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
            }
        }
        z
    };
    let mut term = [[1.0, 0.0], [0.0, 1.0]];
    let mut sum = term;
    for k in 1..30 {
        term = mul(term, a).map(|r| r.map(|x| x / k as f64));
        for i in 0..2 {
            for j in 0..2 {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..s {
        sum = mul(sum, sum);
    }
    sum
}

/// Coefficients `[1, q, p, q², p², qp]` of the Weyl symbol of `V† I V`.
///
/// Conjugation by a Gaussian unitary moves Weyl symbols along the classical
/// affine map: `V₁` sends `(q, p)` to `(q - b, p + a)` for `η = ia, β = ib`,
/// and `exp(i a p² + i r q²)` acts linearly through
/// `d/ds (q, p) = (-2a p, 2r q)`.
pub fn reduced_symbol(c: QuadCoeffs, t: &TransformParams) -> [f64; 6] {
    let s = expm2([[0.0, -2.0 * t.alpha_im], [2.0 * t.rho_im, 0.0]]);
    let g = |q: f64, p: f64| {
        let qs = s[0][0] * q + s[0][1] * p;
        let ps = s[1][0] * q + s[1][1] * p;
        symbol(c, qs - t.beta_im, ps + t.eta_im)
    };
    let c0 = g(0.0, 0.0);
    let (gq, gmq, gp, gmp) = (g(1.0, 0.0), g(-1.0, 0.0), g(0.0, 1.0), g(0.0, -1.0));
    [
        c0,
        (gq - gmq) / 2.0,
        (gp - gmp) / 2.0,
        (gq + gmq) / 2.0 - c0,
        (gp + gmp) / 2.0 - c0,
        g(1.0, 1.0) - gq - gp + c0,
    ]
}

/// Bundled scenario cut to `[t0, t1]`.
pub fn scenario(name: &str, t1: f64) -> Scenario {
    let mut s = Scenario::load(name).expect("bundled scenario");
    s.t1 = t1;
    s
}

pub const BUNDLED: [&str; 3] = ["constant_force", "free_particle", "sinusoidal_drive"];
