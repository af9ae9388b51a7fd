//! Two-step reduction of a quadratic invariant to `I_V = ½ς(p² + q²)`.
//!
//! `V₁ = exp(ηq + βp)` removes the linear terms, `V₂ = exp(αp² + ρq²)` rotates
//! and squeezes the remaining form into the isotropic one. All four parameters
//! are purely imaginary and are stored through their imaginary parts:
//! `η = i·eta_im` and so on.
//!
//! Conjugation convention: `I ↦ V† I V`. With `β = ib` and `η = ia` this maps
//! `q ↦ q - b` and `p ↦ p + a`. On the quadratic generators `V₂` acts linearly,
//! `V₂† (q, p)ᵀ V₂ = S (q, p)ᵀ` with `S = exp([[0, -2α_im], [2ρ_im, 0]])`, and a
//! form with matrix `K = [[F, E], [E, D]]` becomes `Sᵀ K S`.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::invariants::{CoefficientPath, QuadCoeffs};
use crate::weyl::{self, OperatorPoly};

/// Newton residual target for α, ρ.
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct TransformParams {
    pub eta_im: f64,
    pub beta_im: f64,
    pub alpha_im: f64,
    pub rho_im: f64,
    pub varsigma: f64,
    /// Scalar left over after both conjugations: `V†I_qV = ½ς(p²+q²) + c`.
    pub residual_c_number: f64,
}

impl TransformParams {
    pub fn identity() -> Self {
        TransformParams {
            eta_im: 0.0,
            beta_im: 0.0,
            alpha_im: 0.0,
            rho_im: 0.0,
            varsigma: 2.0,
            residual_c_number: 0.0,
        }
    }

    pub fn eta(&self) -> Complex64 {
        I * self.eta_im
    }

    pub fn beta(&self) -> Complex64 {
        I * self.beta_im
    }

    pub fn alpha(&self) -> Complex64 {
        I * self.alpha_im
    }

    pub fn rho(&self) -> Complex64 {
        I * self.rho_im
    }

    /// Eigenvalue of the invariant on `V|n⟩`.
    pub fn eigenvalue(&self, n: usize) -> f64 {
        (n as f64 + 0.5) * self.varsigma + self.residual_c_number
    }
}

/// Linear-shift parameters `η = (EB' - FA') / (2i(E² - DF))`,
/// `β = (DB' - EA') / (2i(E² - DF))`.
pub fn eta_beta(c: QuadCoeffs) -> Result<(Complex64, Complex64)> {
    let denom = c.e * c.e - c.d * c.f;
    let scale = (c.e * c.e).max((c.d * c.f).abs()).max(f64::MIN_POSITIVE);
    if denom.abs() <= 1e-14 * scale || denom == 0.0 {
        return Err(Error::DegenerateDenominator(denom));
    }
    let two_i_denom = I * (2.0 * denom);
    let eta = Complex64::from(c.e * c.b - c.f * c.a) / two_i_denom;
    let beta = Complex64::from(c.d * c.b - c.e * c.a) / two_i_denom;
    Ok((eta, beta))
}

pub fn v1_generator(eta: Complex64, beta: Complex64) -> OperatorPoly {
    OperatorPoly::q().scale(eta) + OperatorPoly::p().scale(beta)
}

pub fn v2_generator(alpha: Complex64, rho: Complex64) -> OperatorPoly {
    OperatorPoly::monomial(0, 2, alpha) + OperatorPoly::monomial(2, 0, rho)
}

/// `V₁† inv V₁`, exact: the commutator series of a linear generator
/// terminates.
pub fn conjugate_by_v1(inv: &OperatorPoly, eta: Complex64, beta: Complex64) -> OperatorPoly {
    weyl::conjugate_series(inv, &v1_generator(eta, beta), inv.degree() as usize + 2)
}

/// `V₂† inv V₂` summed as a nested-commutator series.
pub fn conjugate_by_v2(inv: &OperatorPoly, alpha: Complex64, rho: Complex64) -> OperatorPoly {
    weyl::conjugate_series(inv, &v2_generator(alpha, rho), 400)
}

/// `V† inv V` with `V = V₁V₂`, computed symbolically.
pub fn conjugate_full(inv: &OperatorPoly, p: &TransformParams) -> OperatorPoly {
    let i1 = conjugate_by_v1(inv, p.eta(), p.beta());
    conjugate_by_v2(&i1, p.alpha(), p.rho())
}

/// Largest coefficient of `V† inv V - ½ς(p²+q²) - c`.
pub fn conjugation_residual(inv: &OperatorPoly, p: &TransformParams) -> f64 {
    let target = (OperatorPoly::monomial(0, 2, 1.0) + OperatorPoly::monomial(2, 0, 1.0)).scale(0.5 * p.varsigma)
        + OperatorPoly::scalar(p.residual_c_number);
    (conjugate_full(inv, p) - target).max_abs_coeff()
}

/// `(cos κ, sin κ / κ)` for `κ² = x`, continued to `cosh`, `sinh` for `x < 0`.
fn cos_sinc_sq(x: f64) -> (f64, f64) {
    if x.abs() < 1e-8 {
        (1.0 - x / 2.0, 1.0 - x / 6.0)
    } else if x > 0.0 {
        let k = x.sqrt();
        (k.cos(), k.sin() / k)
    } else {
        let k = (-x).sqrt();
        (k.cosh(), k.sinh() / k)
    }
}

/// Heisenberg action `S` of `exp(i α_im p² + i ρ_im q²)` on `(q, p)`.
pub fn symplectic_action(alpha_im: f64, rho_im: f64) -> Matrix2<f64> {
    let m = Matrix2::new(0.0, -2.0 * alpha_im, 2.0 * rho_im, 0.0);
    // M² = -4 α ρ I
    let (c, sinc) = cos_sinc_sq(4.0 * alpha_im * rho_im);
    Matrix2::identity() * c + m * sinc
}

fn form_matrix(c: QuadCoeffs) -> Matrix2<f64> {
    Matrix2::new(c.f, c.e, c.e, c.d)
}

/// Quadratic part of `c` after the symplectic substitution `(q, p) ↦ S(q, p)`.
pub fn transform_form(c: QuadCoeffs, s: &Matrix2<f64>) -> QuadCoeffs {
    let k = s.transpose() * form_matrix(c) * s;
    QuadCoeffs::new(k[(1, 1)], 0.5 * (k[(0, 1)] + k[(1, 0)]), k[(0, 0)], 0.0, 0.0, 0.0)
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct AlphaRho {
    pub alpha_im: f64,
    pub rho_im: f64,
    /// `2 sqrt(DF - E²)`.
    pub varsigma: f64,
    /// Trace of the reduced form, i.e. `ς` as read off after conjugation.
    pub varsigma_measured: f64,
    pub newton_iterations: usize,
    pub residual: f64,
}

/// Zero-diagonal logarithm of an `SL(2)` matrix with equal diagonal entries,
/// returned as `(α_im, ρ_im)`.
fn zero_diagonal_log(s: &Matrix2<f64>) -> Option<(f64, f64)> {
    let c = 0.5 * (s[(0, 0)] + s[(1, 1)]);
    let factor = if (c - 1.0).abs() < 1e-10 {
        1.0 + (1.0 - c) / 3.0
    } else if c < 1.0 {
        if c <= -1.0 + 1e-12 {
            return None;
        }
        let k = c.acos();
        k / k.sin()
    } else {
        let k = c.acosh();
        k / k.sinh()
    };
    let m = (s - Matrix2::identity() * c) * factor;
    Some((-0.5 * m[(0, 1)], 0.5 * m[(1, 0)]))
}

fn reduction_residual(c: QuadCoeffs, s_scale: f64, a: f64, r: f64) -> [f64; 2] {
    let k = transform_form(c, &symplectic_action(a, r));
    [(k.f - k.d) / s_scale, 2.0 * k.e / s_scale]
}

fn norm2(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// Finds purely imaginary `α, ρ` so that `V₂` maps the quadratic part of
/// `quad` to `½ς(p² + q²)`.
///
/// Candidates come from `S = (K/s)^{-1/2} R(θ)` with `θ` chosen so that `S`
/// has equal diagonal entries (exactly the matrices with a zero-diagonal
/// logarithm); the candidate nearest to `hint` (default `(0, 0)`, i.e. minimal
/// norm) is then refined by damped Newton.
pub fn solve_alpha_rho(quad: QuadCoeffs, hint: Option<(f64, f64)>) -> Result<AlphaRho> {
    let q = quad.without_linear();
    let cas = q.casimir();
    if !(cas > 0.0 && q.d > 0.0) || !cas.is_finite() {
        return Err(Error::NonElliptic(cas));
    }
    let s = cas.sqrt();
    let hint = hint.unwrap_or((0.0, 0.0));

    let kinv = Matrix2::new(q.d, -q.e, -q.e, q.f) / s;
    let tau = (kinv.trace() + 2.0).sqrt();
    let root = (kinv + Matrix2::identity()) / tau;
    let (u, v, w) = (root[(0, 0)], root[(1, 1)], root[(0, 1)]);
    let rot = |cos: f64, sin: f64| Matrix2::new(cos, -sin, sin, cos);

    let mut candidates: Vec<(f64, f64)> = Vec::new();
    let dir = (2.0 * w, v - u);
    let len = dir.0.hypot(dir.1);
    if len < 1e-13 {
        // already isotropic: any rotation works, a = r = θ/2
        let theta = (hint.0 + hint.1).clamp(-3.0, 3.0);
        candidates.push((0.5 * theta, 0.5 * theta));
    } else {
        for sign in [1.0, -1.0] {
            let m = root * rot(sign * dir.0 / len, sign * dir.1 / len);
            if let Some(ar) = zero_diagonal_log(&m) {
                candidates.push(ar);
            }
        }
    }
    let dist = |ar: &(f64, f64)| (ar.0 - hint.0).hypot(ar.1 - hint.1);
    let (mut a, mut r) = candidates
        .into_iter()
        .min_by(|x, y| dist(x).total_cmp(&dist(y)))
        .ok_or(Error::NoLogarithm(2.0 * (u + v)))?;

    let mut res = reduction_residual(q, s, a, r);
    let mut iterations = 0;
    while norm2(res) > NEWTON_TOL {
        if iterations == NEWTON_MAX_ITER {
            return Err(Error::NewtonNonConvergence {
                iterations,
                residual: norm2(res),
            });
        }
        iterations += 1;
        let h = 1e-7;
        let da: Vec<f64> = {
            let p = reduction_residual(q, s, a + h, r);
            let m = reduction_residual(q, s, a - h, r);
            vec![(p[0] - m[0]) / (2.0 * h), (p[1] - m[1]) / (2.0 * h)]
        };
        let dr: Vec<f64> = {
            let p = reduction_residual(q, s, a, r + h);
            let m = reduction_residual(q, s, a, r - h);
            vec![(p[0] - m[0]) / (2.0 * h), (p[1] - m[1]) / (2.0 * h)]
        };
        let det = da[0] * dr[1] - dr[0] * da[1];
        if det.abs() < 1e-300 {
            return Err(Error::NewtonNonConvergence {
                iterations,
                residual: norm2(res),
            });
        }
        let step_a = (dr[1] * res[0] - dr[0] * res[1]) / det;
        let step_r = (-da[1] * res[0] + da[0] * res[1]) / det;
        let mut lambda = 1.0;
        loop {
            let (na, nr) = (a - lambda * step_a, r - lambda * step_r);
            let nres = reduction_residual(q, s, na, nr);
            if norm2(nres) < norm2(res) || lambda < 1e-6 {
                a = na;
                r = nr;
                res = nres;
                break;
            }
            lambda *= 0.5;
        }
    }
    let reduced = transform_form(q, &symplectic_action(a, r));
    Ok(AlphaRho {
        alpha_im: a,
        rho_im: r,
        varsigma: 2.0 * s,
        varsigma_measured: reduced.d + reduced.f,
        newton_iterations: iterations,
        residual: norm2(res),
    })
}

/// c-number produced by `V₁` (the `V₂` step preserves Weyl-symmetric forms
/// and adds none).
fn shifted_c_number(c: QuadCoeffs, a: f64, b: f64) -> f64 {
    c.d * a * a - 2.0 * c.e * a * b + c.f * b * b + c.a * a - c.b * b + c.c
}

/// Full reduction at one instant.
pub fn reduce(c: QuadCoeffs, hint: Option<(f64, f64)>) -> Result<TransformParams> {
    if !c.is_elliptic() {
        return Err(Error::NonElliptic(c.casimir()));
    }
    let (eta, beta) = eta_beta(c)?;
    let ar = solve_alpha_rho(c, hint)?;
    Ok(TransformParams {
        eta_im: eta.im,
        beta_im: beta.im,
        alpha_im: ar.alpha_im,
        rho_im: ar.rho_im,
        varsigma: ar.varsigma,
        residual_c_number: shifted_c_number(c, eta.im, beta.im),
    })
}

/// Transform parameters along a quadratic path, with the `α, ρ` branch
/// carried continuously from node to node.
///
/// Near an isotropic form the zero-diagonal condition fixes the rotation
/// content of `V₂` from a ratio of two small numbers, so re-solving at nearby
/// times jitters by `~1e-16 / |K - K_iso|`. Between nodes `α, ρ` are
/// therefore interpolated (cubic Hermite, node slopes from fourth-order
/// differences of the node values), which keeps `V(t)` smooth enough to
/// difference in time. `η, β`, `ς` and the c-number are evaluated directly.
#[derive(Clone, Debug)]
pub struct TransformTrack {
    path: CoefficientPath,
    nodes: Vec<TransformParams>,
    slopes: Vec<(f64, f64)>,
}

/// Fourth-order first differences of equally spaced samples, one-sided at
/// the ends.
fn node_slopes(x: &[f64], h: f64) -> Vec<f64> {
    let n = x.len();
    if n < 5 {
        // too short for the wide stencil; second order is all we can do
        return (0..n)
            .map(|k| match n {
                1 => 0.0,
                _ if k == 0 => (x[1] - x[0]) / h,
                _ if k == n - 1 => (x[n - 1] - x[n - 2]) / h,
                _ => (x[k + 1] - x[k - 1]) / (2.0 * h),
            })
            .collect();
    }
    (0..n)
        .map(|k| {
            if k >= 2 && k + 2 < n {
                (-x[k + 2] + 8.0 * x[k + 1] - 8.0 * x[k - 1] + x[k - 2]) / (12.0 * h)
            } else if k < 2 {
                let y = &x[k..k + 5];
                (-25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2] + 16.0 * y[3] - 3.0 * y[4]) / (12.0 * h)
            } else {
                let y = &x[k - 4..=k];
                (25.0 * y[4] - 48.0 * y[3] + 36.0 * y[2] - 16.0 * y[1] + 3.0 * y[0]) / (12.0 * h)
            }
        })
        .collect()
}

fn is_isotropic(c: QuadCoeffs) -> bool {
    let s = c.casimir().abs().sqrt().max(f64::MIN_POSITIVE);
    (c.f - c.d).hypot(2.0 * c.e) < 1e-13 * s
}

impl TransformTrack {
    pub fn new(path: &CoefficientPath) -> Result<Self> {
        let mut nodes: Vec<TransformParams> = Vec::with_capacity(path.times.len());
        for v in &path.values {
            let hint = nodes.last().map(|p| (p.alpha_im, p.rho_im));
            nodes.push(reduce(QuadCoeffs::from_slice(v), hint)?);
        }
        // An isotropic first node admits any rotation `a = r = θ/2`. Take the
        // limit the rest of the track tends to: with `K/s ≈ I + εM`, equal
        // diagonals of `(I - εM/2) R(θ)` need `(cos θ, sin θ) ∥ (-2Ė, Ḟ - Ḋ)`.
        if nodes.len() >= 2
            && is_isotropic(QuadCoeffs::from_slice(&path.values[0]))
            && !is_isotropic(QuadCoeffs::from_slice(&path.values[1]))
        {
            let rate = QuadCoeffs::from_slice(&path.rates[0]);
            let dir = (-2.0 * rate.e, rate.f - rate.d);
            if dir.0 != 0.0 || dir.1 != 0.0 {
                let next = nodes[1].alpha_im + nodes[1].rho_im;
                let base = dir.1.atan2(dir.0);
                let theta = [base, base - PI, base + PI]
                    .into_iter()
                    .min_by(|x, y| (x - next).abs().total_cmp(&(y - next).abs()))
                    .expect("three candidates");
                nodes[0].alpha_im = 0.5 * theta;
                nodes[0].rho_im = 0.5 * theta;
            }
        }
        let h = if path.times.len() > 1 {
            path.times[1] - path.times[0]
        } else {
            1.0
        };
        let a: Vec<f64> = nodes.iter().map(|p| p.alpha_im).collect();
        let r: Vec<f64> = nodes.iter().map(|p| p.rho_im).collect();
        let slopes = node_slopes(&a, h).into_iter().zip(node_slopes(&r, h)).collect();
        Ok(TransformTrack {
            path: path.clone(),
            nodes,
            slopes,
        })
    }

    pub fn path(&self) -> &CoefficientPath {
        &self.path
    }

    pub fn nodes(&self) -> &[TransformParams] {
        &self.nodes
    }

    pub fn at(&self, t: f64) -> Result<TransformParams> {
        let c = self.path.quad_at(t)?;
        if !c.is_elliptic() {
            return Err(Error::NonElliptic(c.casimir()));
        }
        let times = &self.path.times;
        let (alpha_im, rho_im) = if times.len() == 1 {
            (self.nodes[0].alpha_im, self.nodes[0].rho_im)
        } else {
            let k = times.partition_point(|&x| x <= t).clamp(1, times.len() - 1) - 1;
            let h = times[k + 1] - times[k];
            let s = ((t - times[k]) / h).clamp(0.0, 1.0);
            let (s2, s3) = (s * s, s * s * s);
            let w = [
                2.0 * s3 - 3.0 * s2 + 1.0,
                (s3 - 2.0 * s2 + s) * h,
                -2.0 * s3 + 3.0 * s2,
                (s3 - s2) * h,
            ];
            let (p, q) = (&self.nodes[k], &self.nodes[k + 1]);
            let (dp, dq) = (self.slopes[k], self.slopes[k + 1]);
            (
                w[0] * p.alpha_im + w[1] * dp.0 + w[2] * q.alpha_im + w[3] * dq.0,
                w[0] * p.rho_im + w[1] * dp.1 + w[2] * q.rho_im + w[3] * dq.1,
            )
        };
        let (eta, beta) = eta_beta(c)?;
        Ok(TransformParams {
            eta_im: eta.im,
            beta_im: beta.im,
            alpha_im,
            rho_im,
            varsigma: 2.0 * c.casimir().sqrt(),
            residual_c_number: shifted_c_number(c, eta.im, beta.im),
        })
    }
}

/// Reduction of the invariant on `path` at time `t`.
pub fn build_v_sequence(path: &CoefficientPath, t: f64) -> Result<TransformParams> {
    TransformTrack::new(path)?.at(t)
}
