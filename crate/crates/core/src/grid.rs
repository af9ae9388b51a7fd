//! Wavefunctions on a uniform periodic grid.
//!
//! Momentum-space work goes through `rustfft`; `p = -i d/dq` becomes
//! multiplication by the FFT wavenumber `k`. Integrals use the trapezoid rule,
//! which on a periodic grid is `dq · Σ`.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::transforms::TransformParams;
use crate::weyl::OperatorPoly;

pub const DEFAULT_POINTS: usize = 1024;
pub const DEFAULT_HALF_WIDTH: f64 = 30.0;
/// Highest operator degree [`apply_operator_poly`] accepts.
pub const MAX_OPERATOR_DEGREE: u32 = 4;
/// Spectral weight above which an operator application logs an aliasing
/// warning.
pub const ALIASING_TAIL: f64 = 1e-8;

pub struct Grid {
    n: usize,
    half_width: f64,
    dq: f64,
    nodes: Vec<f64>,
    wavenumbers: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("half_width", &self.half_width)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.half_width == other.half_width
    }
}

impl Grid {
    /// `n_points` nodes `q_j = -L + j·2L/n` on `[-L, L)`.
    pub fn new(n_points: usize, half_width: f64) -> Result<Arc<Grid>> {
        if n_points < 16 || !n_points.is_power_of_two() {
            return Err(Error::InvalidGrid(n_points));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Config(format!(
                "grid half width must be positive, got {half_width}"
            )));
        }
        let dq = 2.0 * half_width / n_points as f64;
        let nodes = (0..n_points).map(|j| -half_width + j as f64 * dq).collect();
        let dk = 2.0 * std::f64::consts::PI / (n_points as f64 * dq);
        let wavenumbers = (0..n_points)
            .map(|j| {
                let j = if j < n_points / 2 {
                    j as f64
                } else {
                    j as f64 - n_points as f64
                };
                j * dk
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Grid {
            n: n_points,
            half_width,
            dq,
            nodes,
            wavenumbers,
            fft: planner.plan_fft_forward(n_points),
            ifft: planner.plan_fft_inverse(n_points),
        }))
    }

    pub fn standard() -> Arc<Grid> {
        Grid::new(DEFAULT_POINTS, DEFAULT_HALF_WIDTH).expect("default grid is valid")
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dq(&self) -> f64 {
        self.dq
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Largest representable wavenumber, `π / dq`.
    pub fn k_max(&self) -> f64 {
        std::f64::consts::PI / self.dq
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.fft.process(data);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.ifft.process(data);
        let s = 1.0 / self.n as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    /// Multiplies by `g(k)` in the dual domain.
    pub fn spectral_map(&self, data: &mut [Complex64], g: impl Fn(f64) -> Complex64) {
        self.forward(data);
        for (z, &k) in data.iter_mut().zip(&self.wavenumbers) {
            *z *= g(k);
        }
        self.inverse(data);
    }
}

#[derive(Clone, Debug)]
pub struct Wavefunction {
    grid: Arc<Grid>,
    amps: Vec<Complex64>,
}

impl Wavefunction {
    pub fn new(grid: Arc<Grid>, amps: Vec<Complex64>) -> Self {
        assert_eq!(grid.len(), amps.len(), "amplitude count must match the grid");
        Wavefunction { grid, amps }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> Complex64) -> Self {
        let amps = grid.nodes().iter().map(|&q| f(q)).collect();
        Wavefunction {
            grid: grid.clone(),
            amps,
        }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Wavefunction {
            grid: grid.clone(),
            amps: vec![Complex64::default(); grid.len()],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amps(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.grid.dq() * self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scaled(&self, s: impl Into<Complex64>) -> Self {
        let s = s.into();
        Wavefunction {
            grid: self.grid.clone(),
            amps: self.amps.iter().map(|z| z * s).collect(),
        }
    }

    pub fn normalized(&self) -> Self {
        self.scaled(1.0 / self.norm())
    }

    pub fn is_finite(&self) -> bool {
        self.amps.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    fn check_grid(&self, other: &Wavefunction) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn add(&self, other: &Wavefunction) -> Result<Self> {
        self.check_grid(other)?;
        let amps = self.amps.iter().zip(&other.amps).map(|(a, b)| a + b).collect();
        Ok(Wavefunction {
            grid: self.grid.clone(),
            amps,
        })
    }

    pub fn sub(&self, other: &Wavefunction) -> Result<Self> {
        self.add(&other.scaled(-1.0))
    }

    /// `a += s·b`.
    pub fn axpy(&mut self, s: Complex64, other: &Wavefunction) -> Result<()> {
        self.check_grid(other)?;
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += s * b;
        }
        Ok(())
    }

    /// Pointwise multiplication by `g(q)`.
    pub fn map_position(&self, g: impl Fn(f64) -> Complex64) -> Self {
        let amps = self
            .amps
            .iter()
            .zip(self.grid.nodes())
            .map(|(z, &q)| z * g(q))
            .collect();
        Wavefunction {
            grid: self.grid.clone(),
            amps,
        }
    }

    /// Multiplication by `g(k)` in the dual domain.
    pub fn map_momentum(&self, g: impl Fn(f64) -> Complex64) -> Self {
        let mut amps = self.amps.clone();
        self.grid.spectral_map(&mut amps, g);
        Wavefunction {
            grid: self.grid.clone(),
            amps,
        }
    }

    /// Dual-domain amplitudes (unnormalized FFT).
    pub fn momentum_amplitudes(&self) -> Vec<Complex64> {
        let mut a = self.amps.clone();
        self.grid.forward(&mut a);
        a
    }

    /// Norm computed from the dual-domain amplitudes (Parseval).
    pub fn dual_norm_sqr(&self) -> f64 {
        let a = self.momentum_amplitudes();
        self.grid.dq() / self.grid.len() as f64 * a.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// Fraction of the norm carried by `|k| > 0.75 k_max`.
    pub fn spectral_tail(&self) -> f64 {
        let a = self.momentum_amplitudes();
        let cut = 0.75 * self.grid.k_max();
        let total: f64 = a.iter().map(|z| z.norm_sqr()).sum();
        let tail: f64 = a
            .iter()
            .zip(self.grid.wavenumbers())
            .filter(|(_, k)| k.abs() > cut)
            .map(|(z, _)| z.norm_sqr())
            .sum();
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }

    /// Fraction of the norm inside `|q| <= fraction · L`.
    pub fn interior_fraction(&self, fraction: f64) -> f64 {
        let lim = fraction * self.grid.half_width();
        let inside: f64 = self
            .amps
            .iter()
            .zip(self.grid.nodes())
            .filter(|(_, q)| q.abs() <= lim)
            .map(|(z, _)| z.norm_sqr())
            .sum::<f64>()
            * self.grid.dq();
        inside / self.norm_sqr()
    }

    pub fn mean_q(&self) -> f64 {
        let s: f64 = self
            .amps
            .iter()
            .zip(self.grid.nodes())
            .map(|(z, q)| q * z.norm_sqr())
            .sum();
        s * self.grid.dq() / self.norm_sqr()
    }

    pub fn var_q(&self) -> f64 {
        let m = self.mean_q();
        let s: f64 = self
            .amps
            .iter()
            .zip(self.grid.nodes())
            .map(|(z, q)| (q - m) * (q - m) * z.norm_sqr())
            .sum();
        s * self.grid.dq() / self.norm_sqr()
    }

    pub fn mean_p(&self) -> f64 {
        let a = self.momentum_amplitudes();
        let total: f64 = a.iter().map(|z| z.norm_sqr()).sum();
        let s: f64 = a
            .iter()
            .zip(self.grid.wavenumbers())
            .map(|(z, k)| k * z.norm_sqr())
            .sum();
        s / total
    }

    /// Writes `q, re, im` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["q", "re", "im"])?;
        for (q, z) in self.grid.nodes().iter().zip(&self.amps) {
            w.write_record([fmt17(*q), fmt17(z.re), fmt17(z.im)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// 17 significant digits, the form every CSV artifact uses.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Trapezoid-rule inner product `∫ a* b dq`.
pub fn inner(a: &Wavefunction, b: &Wavefunction) -> Result<Complex64> {
    a.check_grid(b)?;
    let s: Complex64 = a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum();
    Ok(s * a.grid.dq())
}

/// `|⟨a|b⟩| / (‖a‖‖b‖)`.
pub fn fidelity(a: &Wavefunction, b: &Wavefunction) -> Result<f64> {
    Ok(inner(a, b)?.norm() / (a.norm() * b.norm()))
}

fn check_resolution(n: usize, grid: &Grid) -> Result<()> {
    let needed = (2.0 * n as f64 + 1.0).sqrt() + 8.0;
    let available = grid.half_width().min(grid.k_max());
    if needed > available {
        return Err(Error::UnresolvedState { n, needed, available });
    }
    Ok(())
}

/// Harmonic-oscillator eigenfunctions `|0⟩ … |n_max⟩` of `½(p² + q²)`.
///
/// Uses the normalized recurrence
/// `ψ_{k+1} = sqrt(2/(k+1)) q ψ_k - sqrt(k/(k+1)) ψ_{k-1}`, whose iterates stay
/// O(1), with the physicists' sign (positive as `q → +∞`).
pub fn hermite_states(n_max: usize, grid: &Arc<Grid>) -> Result<Vec<Wavefunction>> {
    check_resolution(n_max, grid)?;
    let nodes = grid.nodes();
    let mut prev: Vec<f64> = vec![0.0; nodes.len()];
    let mut cur: Vec<f64> = nodes
        .iter()
        .map(|q| std::f64::consts::PI.powf(-0.25) * (-0.5 * q * q).exp())
        .collect();
    let mut out = Vec::with_capacity(n_max + 1);
    for k in 0..=n_max {
        out.push(Wavefunction::new(
            grid.clone(),
            cur.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        ));
        let a = (2.0 / (k as f64 + 1.0)).sqrt();
        let b = (k as f64 / (k as f64 + 1.0)).sqrt();
        let next: Vec<f64> = nodes
            .iter()
            .zip(cur.iter().zip(&prev))
            .map(|(q, (c, p))| a * q * c - b * p)
            .collect();
        prev = std::mem::replace(&mut cur, next);
    }
    Ok(out)
}

pub fn hermite_state(n: usize, grid: &Arc<Grid>) -> Result<Wavefunction> {
    Ok(hermite_states(n, grid)?.pop().expect("nonempty"))
}

/// The four elementary Gaussian unitaries, each `exp(i·θ·G)` for a real
/// parameter `θ`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum GaussianUnitary {
    /// `exp(iθp)`: `ψ(q) ↦ ψ(q + θ)`, a rigid translation by `-θ`.
    TranslateQ(f64),
    /// `exp(iθq)`: multiplies by `e^{iθq}`, shifting momentum by `+θ`.
    BoostP(f64),
    /// `exp(iθq²)`, a position-space chirp.
    ChirpQ2(f64),
    /// `exp(iθp²)`, a momentum-space chirp; `θ = -t/2m` is free evolution.
    ChirpP2(f64),
}

impl GaussianUnitary {
    pub fn inverse(self) -> Self {
        match self {
            GaussianUnitary::TranslateQ(x) => GaussianUnitary::TranslateQ(-x),
            GaussianUnitary::BoostP(x) => GaussianUnitary::BoostP(-x),
            GaussianUnitary::ChirpQ2(x) => GaussianUnitary::ChirpQ2(-x),
            GaussianUnitary::ChirpP2(x) => GaussianUnitary::ChirpP2(-x),
        }
    }
}

fn cis(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, x)
}

pub fn apply_gaussian_unitary(psi: &Wavefunction, kind: GaussianUnitary) -> Wavefunction {
    match kind {
        GaussianUnitary::TranslateQ(0.0)
        | GaussianUnitary::BoostP(0.0)
        | GaussianUnitary::ChirpQ2(0.0)
        | GaussianUnitary::ChirpP2(0.0) => psi.clone(),
        GaussianUnitary::TranslateQ(b) => psi.map_momentum(|k| cis(b * k)),
        GaussianUnitary::BoostP(a) => psi.map_position(|q| cis(a * q)),
        GaussianUnitary::ChirpQ2(r) => psi.map_position(|q| cis(r * q * q)),
        GaussianUnitary::ChirpP2(a) => psi.map_momentum(|k| cis(a * k * k)),
    }
}

/// `(x, y)` of the shear factorization `exp(iαp² + iρq²) = C_q(x/2) C_p(-y/2)
/// C_q(x/2)`, valid while `sqrt(4αρ) < π`.
fn shear_parameters(alpha: f64, rho: f64) -> (f64, f64) {
    let s = 4.0 * alpha * rho;
    // tan(κ/2)/κ and sin(κ)/κ with κ² = s
    let (tanc, sinc) = if s.abs() < 1e-8 {
        (0.5 * (1.0 + s / 12.0), 1.0 - s / 6.0)
    } else if s > 0.0 {
        let k = s.sqrt();
        ((0.5 * k).tan() / k, k.sin() / k)
    } else {
        let k = (-s).sqrt();
        ((0.5 * k).tanh() / k, k.sinh() / k)
    };
    (2.0 * rho * tanc, -2.0 * alpha * sinc)
}

/// `exp(i α p² + i ρ q²) ψ`, applied exactly as a product of chirps.
///
/// The chirp product lies over the same symplectic matrix as the exponential
/// and is continuously connected to the identity along `exp(s·G)`, so it is
/// the exponential itself (not its negative) as long as each factor has
/// `κ < π`; larger arguments are split into equal powers.
pub fn apply_quadratic_exponential(psi: &Wavefunction, alpha: f64, rho: f64) -> Wavefunction {
    let mut halvings = 0;
    let (mut a, mut r) = (alpha, rho);
    while (4.0 * a * r).abs().sqrt() >= 2.5 {
        a *= 0.5;
        r *= 0.5;
        halvings += 1;
    }
    let (x, y) = shear_parameters(a, r);
    let mut out = psi.clone();
    for _ in 0..(1usize << halvings) {
        out = apply_gaussian_unitary(&out, GaussianUnitary::ChirpQ2(0.5 * x));
        out = apply_gaussian_unitary(&out, GaussianUnitary::ChirpP2(-0.5 * y));
        out = apply_gaussian_unitary(&out, GaussianUnitary::ChirpQ2(0.5 * x));
    }
    out
}

/// `exp(i a q + i b p) ψ = e^{iab/2} exp(iaq) exp(ibp) ψ`.
pub fn apply_linear_exponential(psi: &Wavefunction, a: f64, b: f64) -> Wavefunction {
    let shifted = apply_gaussian_unitary(psi, GaussianUnitary::TranslateQ(b));
    apply_gaussian_unitary(&shifted, GaussianUnitary::BoostP(a)).scaled(cis(0.5 * a * b))
}

/// `V ψ` with `V = V₁V₂ = exp(ηq + βp) exp(αp² + ρq²)`.
pub fn apply_transform(psi: &Wavefunction, p: &TransformParams) -> Wavefunction {
    let squeezed = apply_quadratic_exponential(psi, p.alpha_im, p.rho_im);
    apply_linear_exponential(&squeezed, p.eta_im, p.beta_im)
}

/// `V† ψ`.
pub fn apply_transform_adjoint(psi: &Wavefunction, p: &TransformParams) -> Wavefunction {
    let unshifted = apply_linear_exponential(psi, -p.eta_im, -p.beta_im);
    apply_quadratic_exponential(&unshifted, -p.alpha_im, -p.rho_im)
}

/// `p^j ψ` by spectral differentiation. The Nyquist mode is dropped for odd
/// powers so that `p` stays Hermitian.
pub fn apply_p_power(psi: &Wavefunction, j: u32) -> Wavefunction {
    if j == 0 {
        return psi.clone();
    }
    let nyquist = -psi.grid().k_max();
    psi.map_momentum(|k| {
        if j % 2 == 1 && k == nyquist {
            Complex64::default()
        } else {
            Complex64::new(k.powi(j as i32), 0.0)
        }
    })
}

/// Applies a normal-ordered polynomial: `p` powers spectrally, then `q`
/// powers pointwise.
pub fn apply_operator_poly(op: &OperatorPoly, psi: &Wavefunction) -> Result<Wavefunction> {
    let degree = op.degree();
    if degree > MAX_OPERATOR_DEGREE {
        return Err(Error::DegreeTooHigh {
            degree,
            limit: MAX_OPERATOR_DEGREE,
        });
    }
    if op.monomials().any(|m| m.p > 0) {
        let tail = psi.spectral_tail();
        if tail > ALIASING_TAIL {
            log::warn!("spectral tail {tail:.2e} exceeds {ALIASING_TAIL:.0e}; derivatives may alias");
        }
    }
    let mut out = Wavefunction::zeros(psi.grid());
    let max_p = op.monomials().map(|m| m.p).max().unwrap_or(0);
    let p_powers: Vec<Wavefunction> = (0..=max_p).map(|j| apply_p_power(psi, j)).collect();
    for (m, c) in op.terms() {
        let base = &p_powers[m.p as usize];
        let term = base.map_position(|q| Complex64::new(q.powi(m.q as i32), 0.0) * c);
        out.axpy(Complex64::new(1.0, 0.0), &term)?;
    }
    Ok(out)
}

/// `⟨ψ|op|ψ⟩ / ⟨ψ|ψ⟩`.
pub fn expectation(op: &OperatorPoly, psi: &Wavefunction) -> Result<Complex64> {
    Ok(inner(psi, &apply_operator_poly(op, psi)?)? / psi.norm_sqr())
}

/// Coherent state `|q0, p0⟩`: the oscillator ground state centred at `q0`
/// with mean momentum `p0`.
pub fn coherent_state(grid: &Arc<Grid>, q0: f64, p0: f64) -> Result<Wavefunction> {
    let g = hermite_state(0, grid)?;
    let moved = apply_gaussian_unitary(&g, GaussianUnitary::TranslateQ(-q0));
    Ok(apply_gaussian_unitary(&moved, GaussianUnitary::BoostP(p0)))
}

/// Normalized random combination of `|0⟩ … |n_max⟩` with coefficients drawn
/// uniformly from the unit square. Band-limited by construction.
pub fn random_superposition(grid: &Arc<Grid>, n_max: usize, rng: &mut impl rand::Rng) -> Result<Wavefunction> {
    let states = hermite_states(n_max, grid)?;
    let mut out = Wavefunction::zeros(grid);
    for s in &states {
        let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        out.axpy(c, s)?;
    }
    Ok(out.normalized())
}
