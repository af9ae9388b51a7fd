//! Linear and quadratic Lewis-Riesenfeld invariants of
//! `H(t) = p²/2m + f(t) q + ½ m ω(t)² q²`.
//!
//! The coefficient equations are never written by hand: [`generate_ode_system`]
//! derives them from [`weyl::lvn_flow`] and the path is integrated with fixed
//! step RK4 plus a half-step verification run.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::weyl::{self, OperatorPoly};

/// Default RK4 step.
pub const DEFAULT_STEP: f64 = 1e-3;
/// Allowed deviation between the step and half-step runs, relative to
/// `max(1, |y|_∞)`.
pub const HALF_STEP_TOL: f64 = 1e-9;

/// A scalar function of time: the drive `f(t)` or the stiffness `ω(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriveSpec {
    Constant {
        value: f64,
    },
    /// `offset + slope t`
    LinearRamp {
        offset: f64,
        slope: f64,
    },
    /// `amplitude sin(frequency t + phase)`
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
    /// Linear interpolation between strictly increasing samples.
    Tabulated {
        times: Vec<f64>,
        values: Vec<f64>,
    },
}

impl DriveSpec {
    pub fn zero() -> Self {
        DriveSpec::Constant { value: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        let ok = match self {
            DriveSpec::Constant { value } => finite(&[*value]),
            DriveSpec::LinearRamp { offset, slope } => finite(&[*offset, *slope]),
            DriveSpec::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => finite(&[*amplitude, *frequency, *phase]),
            DriveSpec::Tabulated { times, values } => {
                if times.len() != values.len() || times.len() < 2 {
                    return Err(Error::Config(
                        "tabulated drive needs >= 2 (t, f) pairs of equal length".into(),
                    ));
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config(
                        "tabulated drive times must be strictly increasing".into(),
                    ));
                }
                finite(times) && finite(values)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config("drive parameters must be finite".into()))
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            DriveSpec::Constant { value } => Ok(*value),
            DriveSpec::LinearRamp { offset, slope } => Ok(offset + slope * t),
            DriveSpec::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => Ok(amplitude * (frequency * t + phase).sin()),
            DriveSpec::Tabulated { times, values } => {
                let (first, last) = (times[0], times[times.len() - 1]);
                let slack = 1e-12 * (last - first).abs().max(1.0);
                if t < first - slack || t > last + slack {
                    return Err(Error::DriveEvaluation {
                        t,
                        reason: format!("outside table range [{first}, {last}]"),
                    });
                }
                let k = times.partition_point(|&x| x <= t).clamp(1, times.len() - 1);
                let s = (t - times[k - 1]) / (times[k] - times[k - 1]);
                Ok(values[k - 1] + s * (values[k] - values[k - 1]))
            }
        }
    }

    /// Points where the function may have a kink.
    pub fn breakpoints(&self) -> &[f64] {
        match self {
            DriveSpec::Tabulated { times, .. } => times,
            _ => &[],
        }
    }

    /// `∫_{a}^{b} f(t) dt` by composite Gauss-Legendre quadrature.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        quad::integrate(|t| self.eval(t), a, b, self.breakpoints(), 0.05)
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            DriveSpec::Constant { value } => *value == 0.0,
            DriveSpec::LinearRamp { offset, slope } => *offset == 0.0 && *slope == 0.0,
            DriveSpec::Sinusoid { amplitude, .. } => *amplitude == 0.0,
            DriveSpec::Tabulated { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }
}

/// Mass, drive and optional stiffness: everything that defines `H(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub mass: f64,
    pub drive: DriveSpec,
    pub omega: Option<DriveSpec>,
}

impl Model {
    pub fn new(mass: f64, drive: DriveSpec) -> Self {
        Model {
            mass,
            drive,
            omega: None,
        }
    }

    pub fn with_omega(mut self, omega: DriveSpec) -> Self {
        self.omega = Some(omega);
        self
    }

    pub fn has_harmonic_term(&self) -> bool {
        self.omega.as_ref().is_some_and(|w| !w.is_identically_zero())
    }

    /// The three operator terms `p², q, q²` whose weights make up `H(t)`.
    pub fn hamiltonian_terms() -> [OperatorPoly; 3] {
        [
            OperatorPoly::monomial(0, 2, 1.0),
            OperatorPoly::q(),
            OperatorPoly::monomial(2, 0, 1.0),
        ]
    }

    /// Weights `[1/2m, f(t), ½ m ω(t)²]` of [`Model::hamiltonian_terms`].
    pub fn weights(&self, t: f64) -> Result<[f64; 3]> {
        let omega = match &self.omega {
            Some(w) => w.eval(t)?,
            None => 0.0,
        };
        Ok([0.5 / self.mass, self.drive.eval(t)?, 0.5 * self.mass * omega * omega])
    }

    pub fn hamiltonian(&self, t: f64) -> Result<OperatorPoly> {
        let w = self.weights(t)?;
        Ok(Self::hamiltonian_terms()
            .iter()
            .zip(w)
            .fold(OperatorPoly::zero(), |acc, (h, c)| acc + h.scale(c)))
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Linear,
    Quadratic,
}

impl Family {
    /// Hermitian generators, in coefficient order `(A, B, C)` or
    /// `(D, E, F, A', B', C')`.
    pub fn basis(self) -> Vec<OperatorPoly> {
        match self {
            Family::Linear => vec![OperatorPoly::p(), OperatorPoly::q(), OperatorPoly::one()],
            Family::Quadratic => vec![
                OperatorPoly::monomial(0, 2, 1.0),
                OperatorPoly::qp_sym(),
                OperatorPoly::monomial(2, 0, 1.0),
                OperatorPoly::p(),
                OperatorPoly::q(),
                OperatorPoly::one(),
            ],
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Family::Linear => 3,
            Family::Quadratic => 6,
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Family::Linear),
            "quadratic" => Ok(Family::Quadratic),
            other => Err(Error::Config(format!("unknown invariant family '{other}'"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Linear => "linear",
            Family::Quadratic => "quadratic",
        })
    }
}

/// `I_l = A p + B q + C` at one instant.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl LinearCoeffs {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        LinearCoeffs { a, b, c }
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.a, self.b, self.c]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        LinearCoeffs::new(v[0], v[1], v[2])
    }

    pub fn to_poly(self) -> OperatorPoly {
        OperatorPoly::p().scale(self.a) + OperatorPoly::q().scale(self.b) + OperatorPoly::scalar(self.c)
    }

    pub fn is_trivial(self) -> bool {
        self.a == 0.0 && self.b == 0.0
    }
}

/// `I_q = D p² + E (qp+pq) + F q² + A' p + B' q + C'` at one instant.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadCoeffs {
    pub d: f64,
    pub e: f64,
    pub f: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl QuadCoeffs {
    pub fn new(d: f64, e: f64, f: f64, a: f64, b: f64, c: f64) -> Self {
        QuadCoeffs { d, e, f, a, b, c }
    }

    /// The default elliptic seed `p² + q²`.
    pub fn isotropic() -> Self {
        QuadCoeffs::new(1.0, 0.0, 1.0, 0.0, 0.0, 0.0)
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.d, self.e, self.f, self.a, self.b, self.c]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        QuadCoeffs::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    /// `DF - E²`.
    pub fn casimir(self) -> f64 {
        self.d * self.f - self.e * self.e
    }

    pub fn is_elliptic(self) -> bool {
        self.casimir() > 0.0 && self.d > 0.0
    }

    pub fn without_linear(self) -> Self {
        QuadCoeffs::new(self.d, self.e, self.f, 0.0, 0.0, 0.0)
    }

    pub fn to_poly(self) -> OperatorPoly {
        OperatorPoly::quadratic(self.d, self.e, self.f, self.a, self.b, self.c)
    }

    /// Reads the coefficients back from a Hermitian degree-≤2 polynomial.
    pub fn from_poly(op: &OperatorPoly) -> Self {
        let d = op.coeff_qp(0, 2).re;
        let e = 0.5 * op.coeff_qp(1, 1).re;
        let f = op.coeff_qp(2, 0).re;
        // qp+pq = 2qp - i, so the identity coefficient absorbs +iE
        let c = (op.coeff_qp(0, 0) + num_complex::Complex64::new(0.0, e)).re;
        QuadCoeffs::new(d, e, f, op.coeff_qp(0, 1).re, op.coeff_qp(1, 0).re, c)
    }

    /// `(I_l)²` expressed in the quadratic basis.
    pub fn square_of(l: LinearCoeffs) -> Self {
        QuadCoeffs::new(
            l.a * l.a,
            l.a * l.b,
            l.b * l.b,
            2.0 * l.a * l.c,
            2.0 * l.b * l.c,
            l.c * l.c,
        )
    }
}

/// Right-hand side `ċ = Σ_j w_j(t) T_j c` of the coefficient equations.
#[derive(Clone, Debug)]
pub struct OdeSystem {
    pub family: Family,
    pub basis: Vec<OperatorPoly>,
    pub flow: Vec<DMatrix<f64>>,
    pub model: Model,
}

impl OdeSystem {
    pub fn rhs(&self, t: f64, y: &[f64]) -> Result<Vec<f64>> {
        let w = self.model.weights(t)?;
        let y = DVector::from_column_slice(y);
        let mut out = DVector::zeros(y.len());
        for (tj, wj) in self.flow.iter().zip(w) {
            if wj != 0.0 {
                out += tj * &y * wj;
            }
        }
        Ok(out.iter().copied().collect())
    }
}

/// Builds the coefficient ODE system from the Liouville-von Neumann condition.
pub fn generate_ode_system(family: Family, model: &Model) -> Result<OdeSystem> {
    if !(model.mass.is_finite() && model.mass > 0.0) {
        return Err(Error::Config(format!("mass must be positive, got {}", model.mass)));
    }
    model.drive.validate()?;
    if let Some(w) = &model.omega {
        w.validate()?;
    }
    let basis = family.basis();
    let flow = weyl::lvn_flow(&basis, &Model::hamiltonian_terms())?;
    Ok(OdeSystem {
        family,
        basis,
        flow,
        model: model.clone(),
    })
}

/// Time-sampled solution of the coefficient equations.
#[derive(Clone, Debug)]
pub struct CoefficientPath {
    pub family: Family,
    pub basis: Vec<OperatorPoly>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// Right-hand side at each node, used for Hermite interpolation.
    pub rates: Vec<Vec<f64>>,
    /// Largest step/half-step deviation seen during verification.
    pub half_step_deviation: f64,
}

fn rk4_run(system: &OdeSystem, seed: &[f64], t0: f64, h: f64, steps: usize) -> Result<Vec<Vec<f64>>> {
    let axpy = |y: &[f64], k: &[f64], s: f64| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    let mut out = Vec::with_capacity(steps + 1);
    let mut y = seed.to_vec();
    out.push(y.clone());
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let k1 = system.rhs(t, &y)?;
        let k2 = system.rhs(t + 0.5 * h, &axpy(&y, &k1, 0.5 * h))?;
        let k3 = system.rhs(t + 0.5 * h, &axpy(&y, &k2, 0.5 * h))?;
        let k4 = system.rhs(t + h, &axpy(&y, &k3, h))?;
        for j in 0..y.len() {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// Fixed-step RK4 over `[t0, t1]`, verified against a half-step rerun.
///
/// The step is shrunk so that an integer number of steps lands exactly on
/// `t1`.
pub fn integrate(system: &OdeSystem, seed: &[f64], t0: f64, t1: f64, step: f64) -> Result<CoefficientPath> {
    if seed.len() != system.family.dim() {
        return Err(Error::Config(format!(
            "{} seed needs {} coefficients, got {}",
            system.family,
            system.family.dim(),
            seed.len()
        )));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidWindow(format!("step must be positive, got {step}")));
    }
    if !(t0.is_finite() && t1.is_finite()) || t1 < t0 {
        return Err(Error::InvalidWindow(format!("[{t0}, {t1}]")));
    }
    let steps = ((t1 - t0) / step - 1e-9).ceil().max(0.0) as usize;
    let h = if steps == 0 { 0.0 } else { (t1 - t0) / steps as f64 };
    let values = rk4_run(system, seed, t0, h, steps)?;
    let fine = rk4_run(system, seed, t0, 0.5 * h, 2 * steps)?;

    let mut deviation: f64 = 0.0;
    for (k, y) in values.iter().enumerate() {
        let z = &fine[2 * k];
        let scale = z.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let diff = y.iter().zip(z).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        deviation = deviation.max(diff / scale);
    }
    if deviation > HALF_STEP_TOL {
        return Err(Error::NonConvergence {
            deviation,
            tolerance: HALF_STEP_TOL,
        });
    }

    let times: Vec<f64> = (0..=steps)
        .map(|k| if k == steps { t1 } else { t0 + k as f64 * h })
        .collect();
    let rates = times
        .iter()
        .zip(&values)
        .map(|(&t, y)| system.rhs(t, y))
        .collect::<Result<Vec<_>>>()?;
    Ok(CoefficientPath {
        family: system.family,
        basis: system.basis.clone(),
        times,
        values,
        rates,
        half_step_deviation: deviation,
    })
}

impl CoefficientPath {
    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn t1(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn contains(&self, t: f64) -> bool {
        let slack = 1e-12 * (self.t1() - self.t0()).abs().max(1.0);
        t >= self.t0() - slack && t <= self.t1() + slack
    }

    fn locate(&self, t: f64) -> Result<usize> {
        if !self.contains(t) {
            return Err(Error::OutOfRange {
                t,
                t0: self.t0(),
                t1: self.t1(),
            });
        }
        let n = self.times.len();
        if n == 1 {
            return Ok(0);
        }
        Ok(self.times.partition_point(|&x| x <= t).clamp(1, n - 1) - 1)
    }

    /// Index of the node nearest to `t`.
    pub fn nearest_node(&self, t: f64) -> Result<usize> {
        let k = self.locate(t)?;
        if k + 1 < self.times.len() && (self.times[k + 1] - t).abs() < (t - self.times[k]).abs() {
            Ok(k + 1)
        } else {
            Ok(k)
        }
    }

    /// Coefficients and their time derivatives at `t` (cubic Hermite between
    /// nodes).
    pub fn sample(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let k = self.locate(t)?;
        if self.times.len() == 1 {
            return Ok((self.values[0].clone(), self.rates[0].clone()));
        }
        let (ta, tb) = (self.times[k], self.times[k + 1]);
        let h = tb - ta;
        let s = ((t - ta) / h).clamp(0.0, 1.0);
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let d00 = (6.0 * s2 - 6.0 * s) / h;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = (-6.0 * s2 + 6.0 * s) / h;
        let d11 = 3.0 * s2 - 2.0 * s;
        let (ya, yb) = (&self.values[k], &self.values[k + 1]);
        let (ra, rb) = (&self.rates[k], &self.rates[k + 1]);
        let mut val = Vec::with_capacity(ya.len());
        let mut der = Vec::with_capacity(ya.len());
        for j in 0..ya.len() {
            val.push(h00 * ya[j] + h10 * h * ra[j] + h01 * yb[j] + h11 * h * rb[j]);
            der.push(d00 * ya[j] + d10 * ra[j] + d01 * yb[j] + d11 * rb[j]);
        }
        Ok((val, der))
    }

    pub fn coeffs_at(&self, t: f64) -> Result<Vec<f64>> {
        Ok(self.sample(t)?.0)
    }

    pub fn quad_at(&self, t: f64) -> Result<QuadCoeffs> {
        self.expect(Family::Quadratic)?;
        Ok(QuadCoeffs::from_slice(&self.coeffs_at(t)?))
    }

    pub fn linear_at(&self, t: f64) -> Result<LinearCoeffs> {
        self.expect(Family::Linear)?;
        Ok(LinearCoeffs::from_slice(&self.coeffs_at(t)?))
    }

    fn expect(&self, family: Family) -> Result<()> {
        if self.family == family {
            Ok(())
        } else {
            Err(Error::Config(format!("expected a {family} path, got {}", self.family)))
        }
    }

    /// `DF - E²` at every node (quadratic paths only).
    pub fn casimir(&self) -> Result<Vec<f64>> {
        self.expect(Family::Quadratic)?;
        Ok(self
            .values
            .iter()
            .map(|v| QuadCoeffs::from_slice(v).casimir())
            .collect())
    }

    /// Largest relative deviation of the Casimir from its initial value.
    pub fn casimir_drift(&self) -> Result<f64> {
        let c = self.casimir()?;
        let c0 = c[0];
        let scale = c0.abs().max(f64::MIN_POSITIVE);
        Ok(c.iter().map(|v| (v - c0).abs() / scale).fold(0.0, f64::max))
    }

    /// The invariant operator at time `t`.
    pub fn materialize(&self, t: f64) -> Result<OperatorPoly> {
        let c = self.coeffs_at(t)?;
        Ok(self
            .basis
            .iter()
            .zip(c)
            .fold(OperatorPoly::zero(), |acc, (g, v)| acc + g.scale(v)))
    }
}
