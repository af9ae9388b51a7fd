//! Split-step Fourier propagator used as ground truth.
//!
//! Strang splitting: half a kinetic step in the dual domain, a full potential
//! step in position space with the potential frozen at the step midpoint,
//! another kinetic half step. Adjacent kinetic halves are fused, so one step
//! costs two FFTs. Nothing here touches the invariant machinery.

use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{fmt17, inner, Wavefunction};
use crate::invariants::Model;

pub const DEFAULT_DT: f64 = 1e-4;
/// Fraction of the half width over which the damping mask must be exactly 1
/// and over which the interior mass is measured.
pub const INTERIOR: f64 = 0.8;
/// Minimum interior mass before the run is declared to touch the boundary.
pub const INTERIOR_MASS_FLOOR: f64 = 1.0 - 1e-6;
/// Edge amplitude, relative to the peak, an initial state must stay under.
pub const EDGE_DECAY: f64 = 1e-10;
const GUARD_EVERY: usize = 256;

#[derive(Clone, Debug)]
pub struct PropagatorConfig {
    pub dt: f64,
    /// Multiplies the state after every step. Must be 1 on the interior.
    pub damping_mask: Option<Vec<f64>>,
    /// Times at which the state is recorded, monotone away from `t0`.
    pub record_times: Vec<f64>,
}

impl PropagatorConfig {
    pub fn new(record_times: Vec<f64>) -> Self {
        PropagatorConfig {
            dt: DEFAULT_DT,
            damping_mask: None,
            record_times,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_damping(mut self, mask: Vec<f64>) -> Self {
        self.damping_mask = Some(mask);
        self
    }

    fn validate(&self, psi: &Wavefunction, t0: f64) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {}", self.dt)));
        }
        if let Some(mask) = &self.damping_mask {
            let grid = psi.grid();
            if mask.len() != grid.len() {
                return Err(Error::GridMismatch);
            }
            let lim = INTERIOR * grid.half_width();
            let ok = mask
                .iter()
                .zip(grid.nodes())
                .all(|(m, q)| (0.0..=1.0).contains(m) && (q.abs() > lim || *m == 1.0));
            if !ok {
                return Err(Error::Config(
                    "damping mask must be 1 on the interior and within [0, 1]".into(),
                ));
            }
        }
        let mut prev = t0;
        let mut dir = 0.0;
        for &t in &self.record_times {
            if !t.is_finite() {
                return Err(Error::Config("record times must be finite".into()));
            }
            let d = (t - prev).signum();
            if t != prev {
                if dir != 0.0 && d != dir {
                    return Err(Error::Config(
                        "record times must move monotonically away from t0".into(),
                    ));
                }
                dir = d;
            }
            prev = t;
        }
        Ok(())
    }
}

/// Cosine-squared absorber: 1 on `|q| <= 0.8L`, falling to `floor` at the
/// edge.
pub fn cosine_mask(psi: &Wavefunction, floor: f64) -> Vec<f64> {
    let grid = psi.grid();
    let lim = INTERIOR * grid.half_width();
    let width = grid.half_width() - lim;
    grid.nodes()
        .iter()
        .map(|q| {
            let x = (q.abs() - lim) / width;
            if x <= 0.0 {
                1.0
            } else {
                let c = (0.5 * std::f64::consts::PI * x.min(1.0)).cos();
                floor + (1.0 - floor) * c * c
            }
        })
        .collect()
}

/// States recorded at increasing (or decreasing) times.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Wavefunction>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&Wavefunction> {
        self.states.last()
    }
}

fn potential(model: &Model, q: &[f64], t: f64) -> Result<Vec<f64>> {
    let f = model.drive.eval(t)?;
    let k = match &model.omega {
        Some(w) => {
            let w = w.eval(t)?;
            0.5 * model.mass * w * w
        }
        None => 0.0,
    };
    Ok(q.iter().map(|&x| f * x + k * x * x).collect())
}

fn edge_check(psi: &Wavefunction, t: f64) -> Result<()> {
    let a = psi.amps();
    let peak = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let edge = a[0].norm().max(a[a.len() - 1].norm());
    if peak == 0.0 || edge > EDGE_DECAY * peak {
        return Err(Error::BoundaryContact {
            t,
            fraction: psi.interior_fraction(INTERIOR),
        });
    }
    Ok(())
}

fn guard(psi: &Wavefunction, t: f64) -> Result<()> {
    let fraction = psi.interior_fraction(INTERIOR);
    if fraction < INTERIOR_MASS_FLOOR {
        return Err(Error::BoundaryContact { t, fraction });
    }
    Ok(())
}

/// Evolves `psi0` from `t0` under the model, recording at each configured
/// time. A record time equal to `t0` records the initial state.
pub fn propagate(psi0: &Wavefunction, t0: f64, model: &Model, config: &PropagatorConfig) -> Result<Trajectory> {
    config.validate(psi0, t0)?;
    edge_check(psi0, t0)?;
    let grid = psi0.grid().clone();
    let k = grid.wavenumbers().to_vec();
    let mut amps = psi0.amps().to_vec();
    let mut t = t0;
    let mut out = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
    };
    let mut steps_since_guard = 0;
    for &target in &config.record_times {
        let span = target - t;
        let n_steps = (span.abs() / config.dt).ceil() as usize;
        if n_steps > 0 {
            let h = span / n_steps as f64;
            let half: Vec<Complex64> = k
                .iter()
                .map(|k| Complex64::from_polar(1.0, -0.25 * h * k * k / model.mass))
                .collect();
            let full: Vec<Complex64> = half.iter().map(|z| z * z).collect();
            grid.forward(&mut amps);
            amps.iter_mut().zip(&half).for_each(|(a, p)| *a *= p);
            for s in 0..n_steps {
                grid.inverse(&mut amps);
                let mid = t + (s as f64 + 0.5) * h;
                let v = potential(model, grid.nodes(), mid)?;
                for (a, v) in amps.iter_mut().zip(&v) {
                    *a *= Complex64::from_polar(1.0, -h * v);
                }
                if let Some(mask) = &config.damping_mask {
                    amps.iter_mut().zip(mask).for_each(|(a, m)| *a *= m);
                }
                steps_since_guard += 1;
                if steps_since_guard >= GUARD_EVERY && config.damping_mask.is_none() {
                    steps_since_guard = 0;
                    guard(&Wavefunction::new(grid.clone(), amps.clone()), mid)?;
                }
                grid.forward(&mut amps);
                let kin = if s + 1 == n_steps { &half } else { &full };
                amps.iter_mut().zip(kin).for_each(|(a, p)| *a *= p);
            }
            grid.inverse(&mut amps);
            t = target;
        }
        let state = Wavefunction::new(grid.clone(), amps.clone());
        if config.damping_mask.is_none() {
            guard(&state, t)?;
        }
        out.times.push(target);
        out.states.push(state);
    }
    Ok(out)
}

/// Expectation values recorded along a trajectory.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Moments {
    pub t: f64,
    pub norm: f64,
    pub q_mean: f64,
    pub p_mean: f64,
    pub q_var: f64,
    pub energy: f64,
}

pub fn moments(traj: &Trajectory, model: &Model) -> Result<Vec<Moments>> {
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, psi)| {
            let grid = psi.grid();
            let a = psi.momentum_amplitudes();
            let total: f64 = a.iter().map(|z| z.norm_sqr()).sum();
            let kinetic: f64 = a
                .iter()
                .zip(grid.wavenumbers())
                .map(|(z, k)| k * k * z.norm_sqr())
                .sum::<f64>()
                / total
                / (2.0 * model.mass);
            let v = potential(model, grid.nodes(), t)?;
            let n2 = psi.norm_sqr();
            let pot: f64 = psi.amps().iter().zip(&v).map(|(z, v)| v * z.norm_sqr()).sum::<f64>() * grid.dq() / n2;
            Ok(Moments {
                t,
                norm: n2.sqrt(),
                q_mean: psi.mean_q(),
                p_mean: psi.mean_p(),
                q_var: psi.var_q(),
                energy: kinetic + pot,
            })
        })
        .collect()
}

/// Largest violation of `d⟨q⟩/dt = ⟨p⟩/m` and `d⟨p⟩/dt = -f - mω²⟨q⟩`, with
/// derivatives from fourth-order central differences of the recorded moments.
/// Needs at least five equally spaced records.
pub fn ehrenfest_defect(m: &[Moments], model: &Model) -> Result<f64> {
    if m.len() < 5 {
        return Err(Error::SeriesMismatch(
            "need at least five records for Ehrenfest differences".into(),
        ));
    }
    let h = m[1].t - m[0].t;
    if m.windows(2).any(|w| ((w[1].t - w[0].t) - h).abs() > 1e-9 * h.abs()) {
        return Err(Error::SeriesMismatch(
            "Ehrenfest differences need equally spaced records".into(),
        ));
    }
    let d = |x: &dyn Fn(&Moments) -> f64, k: usize| {
        (-x(&m[k + 2]) + 8.0 * x(&m[k + 1]) - 8.0 * x(&m[k - 1]) + x(&m[k - 2])) / (12.0 * h)
    };
    let mut worst: f64 = 0.0;
    for (k, mk) in m.iter().enumerate().take(m.len() - 2).skip(2) {
        let t = mk.t;
        let dq = d(&|x: &Moments| x.q_mean, k);
        let dp = d(&|x: &Moments| x.p_mean, k);
        let f = model.drive.eval(t)?;
        let w2 = match &model.omega {
            Some(w) => w.eval(t)?.powi(2),
            None => 0.0,
        };
        worst = worst.max((dq - m[k].p_mean / model.mass).abs());
        worst = worst.max((dp + f + model.mass * w2 * m[k].q_mean).abs());
    }
    Ok(worst)
}

pub fn write_moments_csv(m: &[Moments], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "norm", "q_mean", "p_mean", "q_var", "energy"])?;
    for r in m {
        w.write_record([r.t, r.norm, r.q_mean, r.p_mean, r.q_var, r.energy].map(fmt17))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct FidelityPoint {
    pub t: f64,
    pub fidelity: f64,
    /// `arg⟨numeric|analytic⟩`.
    pub phase: f64,
}

/// Per-time `|⟨b|a⟩|` and `arg⟨b|a⟩` for normalized inputs, where `a` is the
/// analytic series and `b` the numeric one.
pub fn fidelity_series(analytic: &Trajectory, numeric: &Trajectory) -> Result<Vec<FidelityPoint>> {
    if analytic.len() != numeric.len() {
        return Err(Error::SeriesMismatch(format!(
            "{} analytic samples against {} numeric",
            analytic.len(),
            numeric.len()
        )));
    }
    analytic
        .times
        .iter()
        .zip(&numeric.times)
        .zip(analytic.states.iter().zip(&numeric.states))
        .map(|((&ta, &tb), (a, b))| {
            if (ta - tb).abs() > 1e-12 * ta.abs().max(1.0) {
                return Err(Error::SeriesMismatch(format!("time {ta} against {tb}")));
            }
            let ov = inner(b, a)? / (a.norm() * b.norm());
            Ok(FidelityPoint {
                t: ta,
                fidelity: ov.norm(),
                phase: ov.arg(),
            })
        })
        .collect()
}

pub fn write_fidelity_csv(series: &[FidelityPoint], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "fidelity", "phase_error"])?;
    for p in series {
        w.write_record([fmt17(p.t), fmt17(p.fidelity), fmt17(p.phase)])?;
    }
    w.flush()?;
    Ok(())
}

/// Ratio of successive self-convergence errors `‖ψ_h - ψ_{h/2}‖ /
/// ‖ψ_{h/2} - ψ_{h/4}‖` at `t1`; about 4 for a second-order scheme.
pub fn convergence_ratio(psi0: &Wavefunction, t0: f64, t1: f64, model: &Model, dt: f64) -> Result<f64> {
    let (coarse, fine) = step_halving_errors(psi0, t0, t1, model, dt)?;
    Ok(coarse / fine)
}

/// `(‖ψ_h − ψ_{h/2}‖, ‖ψ_{h/2} − ψ_{h/4}‖)` at `t1`. Both sit at roundoff
/// when the splitting is exact, as for a free particle.
pub fn step_halving_errors(psi0: &Wavefunction, t0: f64, t1: f64, model: &Model, dt: f64) -> Result<(f64, f64)> {
    let run = |h: f64| -> Result<Wavefunction> {
        let cfg = PropagatorConfig::new(vec![t1]).with_dt(h);
        Ok(propagate(psi0, t0, model, &cfg)?.states.pop().expect("one record"))
    };
    let (a, b, c) = (run(dt)?, run(dt / 2.0)?, run(dt / 4.0)?);
    Ok((a.sub(&b)?.norm(), b.sub(&c)?.norm()))
}
