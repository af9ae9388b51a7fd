//! Schrödinger solutions assembled from invariants.
//!
//! Quadratic branch: `|n; t⟩ = e^{-iφ_n(t)} V(t)|n⟩` with the Lewis-Riesenfeld
//! phase `φ_n(t) = ∫ ⟨χ_n|H - i∂_t|χ_n⟩`, `χ_n = V|n⟩`, and general solutions
//! as fixed superpositions of these. Linear branch: Volkov-type plane waves,
//! eigenstates of `p + F_t`.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{
    apply_operator_poly, apply_p_power, apply_transform, fmt17, hermite_states, inner, Grid, Wavefunction,
};
use crate::invariants::{CoefficientPath, DriveSpec, Family, Model};
use crate::oracle::{self, PropagatorConfig, Trajectory};
use crate::quad;
use crate::transforms::{TransformParams, TransformTrack};

/// Step of the finite difference for `∂_t χ`; a second difference at half
/// this step is Richardson-combined with it.
pub const PHASE_DT: f64 = 1e-4;
/// Largest tolerated imaginary part of the phase integrand.
pub const IMAG_RESIDUE_TOL: f64 = 1e-9;
/// Default bound on `1 - Σ|c_n|²` for [`QuadraticBranch::expand_initial`].
pub const TRUNCATION_BOUND: f64 = 1e-6;
/// Norm below which an invariant is said to annihilate a state.
pub const ANNIHILATION_TOL: f64 = 1e-8;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `φ_n` on a time grid.
#[derive(Clone, Debug)]
pub struct PhaseTable {
    pub times: Vec<f64>,
    pub n_list: Vec<usize>,
    /// `phi[i][k]`: phase of `n_list[i]` at `times[k]`.
    pub phi: Vec<Vec<f64>>,
    /// Largest `|Im|` of the integrand seen while building the table.
    pub max_imag_residue: f64,
}

impl PhaseTable {
    pub fn get(&self, n: usize, k: usize) -> Option<f64> {
        let i = self.n_list.iter().position(|&m| m == n)?;
        self.phi[i].get(k).copied()
    }

    /// `max_n |φ_n - φ_0 - n(φ_1 - φ_0)|` over all times. Needs `0` and `1`
    /// in the table.
    pub fn affinity_defect(&self) -> Option<f64> {
        let i0 = self.n_list.iter().position(|&m| m == 0)?;
        let i1 = self.n_list.iter().position(|&m| m == 1)?;
        let mut worst: f64 = 0.0;
        for (i, &n) in self.n_list.iter().enumerate() {
            for k in 0..self.times.len() {
                let (p0, p1) = (self.phi[i0][k], self.phi[i1][k]);
                worst = worst.max((self.phi[i][k] - p0 - n as f64 * (p1 - p0)).abs());
            }
        }
        Some(worst)
    }

    /// Rows `t, n, phi`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "n", "phi"])?;
        for (i, n) in self.n_list.iter().enumerate() {
            for (k, t) in self.times.iter().enumerate() {
                w.write_record([fmt17(*t), n.to_string(), fmt17(self.phi[i][k])])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ParticularSolution {
    pub n: usize,
    /// Eigenvalue of the invariant, `(n + ½)ς + c`.
    pub eigenvalue: f64,
    pub times: Vec<f64>,
    pub phase: Vec<f64>,
    /// Unit-norm `e^{-iφ_n} V|n⟩` at each time.
    pub snapshots: Vec<Wavefunction>,
}

impl ParticularSolution {
    pub fn trajectory(&self) -> Trajectory {
        Trajectory {
            times: self.times.clone(),
            states: self.snapshots.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GeneralSolution {
    pub coefficients: Vec<Complex64>,
    pub components: Vec<ParticularSolution>,
    /// `1 - Σ|c_n|² / ‖ψ₀‖²`.
    pub truncation_loss: f64,
    pub initial_norm_sqr: f64,
}

/// `Σ c_n |n; t⟩` at a sampled time of the components.
pub fn evolve_general(gs: &GeneralSolution, t: f64) -> Result<Wavefunction> {
    let first = gs
        .components
        .first()
        .ok_or_else(|| Error::SeriesMismatch("general solution has no components".into()))?;
    let times = &first.times;
    let (t0, t1) = (times[0], times[times.len() - 1]);
    let k = times
        .iter()
        .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
        .ok_or_else(|| {
            if t < t0.min(t1) || t > t0.max(t1) {
                Error::OutOfRange { t, t0, t1 }
            } else {
                Error::SeriesMismatch(format!("t = {t} is not a sampled time"))
            }
        })?;
    let mut out = Wavefunction::zeros(first.snapshots[k].grid());
    for (c, comp) in gs.coefficients.iter().zip(&gs.components) {
        out.axpy(*c, &comp.snapshots[k])?;
    }
    Ok(out)
}

/// Everything the quadratic branch needs: the model, the reduction track of
/// an elliptic quadratic path, and the oscillator basis.
pub struct QuadraticBranch {
    model: Model,
    track: TransformTrack,
    grid: Arc<Grid>,
    basis: Vec<Wavefunction>,
}

impl QuadraticBranch {
    pub fn new(model: &Model, path: &CoefficientPath, grid: &Arc<Grid>, n_max: usize) -> Result<Self> {
        if path.family != Family::Quadratic {
            return Err(Error::Config(
                "the quadratic branch needs a quadratic coefficient path".into(),
            ));
        }
        Ok(QuadraticBranch {
            model: model.clone(),
            track: TransformTrack::new(path)?,
            grid: grid.clone(),
            basis: hermite_states(n_max, grid)?,
        })
    }

    pub fn path(&self) -> &CoefficientPath {
        self.track.path()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn n_max(&self) -> usize {
        self.basis.len() - 1
    }

    pub fn transform(&self, t: f64) -> Result<TransformParams> {
        self.track.at(t)
    }

    fn basis_state(&self, n: usize) -> Result<&Wavefunction> {
        self.basis.get(n).ok_or(Error::UnresolvedState {
            n,
            needed: n as f64,
            available: self.n_max() as f64,
        })
    }

    /// `χ_n(t) = V(t)|n⟩`.
    pub fn eigenstate(&self, n: usize, t: f64) -> Result<Wavefunction> {
        Ok(apply_transform(self.basis_state(n)?, &self.transform(t)?))
    }

    /// `‖I(t)χ_n - λ_n χ_n‖ / ‖χ_n‖`.
    pub fn eigen_residual(&self, n: usize, t: f64) -> Result<f64> {
        let params = self.transform(t)?;
        let chi = apply_transform(self.basis_state(n)?, &params);
        let inv = self.path().materialize(t)?;
        let image = apply_operator_poly(&inv, &chi)?;
        Ok(image.sub(&chi.scaled(params.eigenvalue(n)))?.norm() / chi.norm())
    }

    /// Offsets and weights of the `∂_t` stencil at `t`, and its order:
    /// centred second order where the window allows, one-sided third order at
    /// the ends.
    fn stencil(&self, t: f64, h: f64) -> (Vec<(f64, f64)>, i32) {
        let path = self.path();
        if path.contains(t - h) && path.contains(t + h) {
            return (vec![(-h, -0.5 / h), (h, 0.5 / h)], 2);
        }
        let s = if path.contains(t + 3.0 * h) { h } else { -h };
        let w = [-11.0, 18.0, -9.0, 2.0];
        (
            w.iter()
                .enumerate()
                .map(|(k, w)| (k as f64 * s, w / (6.0 * s)))
                .collect(),
            3,
        )
    }

    /// `⟨χ_n|H - i∂_t|χ_n⟩` at `t` for each `n`, with `∂_t` from two
    /// difference steps Richardson-combined, `(2^p D(h/2) - D(h)) / (2^p - 1)`
    /// for a stencil of order `p`.
    pub fn phase_integrand(&self, n_list: &[usize], t: f64) -> Result<Vec<Complex64>> {
        let h = self.model.hamiltonian(t)?;
        let centre = self.transform(t)?;
        let (coarse, order) = self.stencil(t, PHASE_DT);
        let (fine, _) = self.stencil(t, 0.5 * PHASE_DT);
        let gain = 2f64.powi(order);
        let mut shifted = Vec::new();
        for &(dt, _) in coarse.iter().chain(&fine) {
            if dt != 0.0 {
                shifted.push((dt, self.transform(t + dt)?));
            }
        }
        n_list
            .iter()
            .map(|&n| {
                let ket = self.basis_state(n)?;
                let chi = apply_transform(ket, &centre);
                let overlap = |dt: f64| -> Result<Complex64> {
                    if dt == 0.0 {
                        return Ok(Complex64::new(chi.norm_sqr(), 0.0));
                    }
                    let p = shifted.iter().find(|(s, _)| *s == dt).expect("stencil point").1;
                    inner(&chi, &apply_transform(ket, &p))
                };
                let derivative = |st: &[(f64, f64)]| -> Result<Complex64> {
                    st.iter()
                        .try_fold(Complex64::default(), |acc, &(dt, w)| Ok(acc + overlap(dt)? * w))
                };
                let d = (derivative(&fine)? * gain - derivative(&coarse)?) / (gain - 1.0);
                let energy = inner(&chi, &apply_operator_poly(&h, &chi)?)?;
                Ok(energy - I * d)
            })
            .collect()
    }

    /// `φ_n` on `t_grid` by per-interval Simpson quadrature; `t_grid` must
    /// start at the path origin.
    pub fn lr_phase(&self, n_list: &[usize], t_grid: &[f64]) -> Result<PhaseTable> {
        self.check_time_grid(t_grid)?;
        let mids: Vec<f64> = t_grid.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let samples: Vec<f64> = t_grid.iter().chain(&mids).copied().collect();
        let values: Vec<Vec<Complex64>> = samples
            .par_iter()
            .map(|&t| self.phase_integrand(n_list, t))
            .collect::<Result<_>>()?;
        let mut max_imag: f64 = 0.0;
        for (t, row) in samples.iter().zip(&values) {
            for z in row {
                if z.im.abs() > IMAG_RESIDUE_TOL {
                    return Err(Error::ImaginaryResidue { t: *t, residue: z.im });
                }
                max_imag = max_imag.max(z.im.abs());
            }
        }
        let nt = t_grid.len();
        let phi = (0..n_list.len())
            .map(|i| {
                let nodes: Vec<f64> = values[..nt].iter().map(|r| r[i].re).collect();
                let mid: Vec<f64> = values[nt..].iter().map(|r| r[i].re).collect();
                quad::cumulative_simpson(t_grid, &nodes, &mid)
            })
            .collect();
        Ok(PhaseTable {
            times: t_grid.to_vec(),
            n_list: n_list.to_vec(),
            phi,
            max_imag_residue: max_imag,
        })
    }

    fn check_time_grid(&self, t_grid: &[f64]) -> Result<()> {
        let path = self.path();
        if t_grid.is_empty() || (t_grid[0] - path.t0()).abs() > 1e-12 * path.t0().abs().max(1.0) {
            return Err(Error::InvalidWindow("time grid must start at the path origin".into()));
        }
        if t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidWindow("time grid must be strictly increasing".into()));
        }
        match t_grid.iter().find(|&&t| !path.contains(t)) {
            Some(&t) => Err(Error::OutOfRange {
                t,
                t0: path.t0(),
                t1: path.t1(),
            }),
            None => Ok(()),
        }
    }

    pub fn particular_solutions(&self, n_list: &[usize], t_grid: &[f64]) -> Result<Vec<ParticularSolution>> {
        let table = self.lr_phase(n_list, t_grid)?;
        let params: Vec<TransformParams> = t_grid.par_iter().map(|&t| self.transform(t)).collect::<Result<_>>()?;
        n_list
            .par_iter()
            .enumerate()
            .map(|(i, &n)| {
                let ket = self.basis_state(n)?;
                let snapshots = params
                    .iter()
                    .zip(&table.phi[i])
                    .map(|(p, &phi)| apply_transform(ket, p).scaled(Complex64::from_polar(1.0, -phi)))
                    .collect();
                Ok(ParticularSolution {
                    n,
                    eigenvalue: params[0].eigenvalue(n),
                    times: t_grid.to_vec(),
                    phase: table.phi[i].clone(),
                    snapshots,
                })
            })
            .collect()
    }

    pub fn particular_solution(&self, n: usize, t_grid: &[f64]) -> Result<ParticularSolution> {
        Ok(self.particular_solutions(&[n], t_grid)?.pop().expect("one solution"))
    }

    /// `c_n = ⟨n|V†(t0)|ψ₀⟩` for `n <= n_max`, and the components on `t_grid`.
    pub fn expand_initial(
        &self,
        psi0: &Wavefunction,
        n_max: usize,
        t_grid: &[f64],
        bound: f64,
    ) -> Result<GeneralSolution> {
        self.check_time_grid(t_grid)?;
        let n_list: Vec<usize> = (0..=n_max).collect();
        let p0 = self.transform(t_grid[0])?;
        let coefficients = n_list
            .iter()
            .map(|&n| inner(&apply_transform(self.basis_state(n)?, &p0), psi0))
            .collect::<Result<Vec<_>>>()?;
        let initial_norm_sqr = psi0.norm_sqr();
        let captured: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
        let loss = 1.0 - captured / initial_norm_sqr;
        if loss > bound {
            return Err(Error::Truncation { loss, bound });
        }
        Ok(GeneralSolution {
            coefficients,
            components: self.particular_solutions(&n_list, t_grid)?,
            truncation_loss: loss,
            initial_norm_sqr,
        })
    }
}

/// Largest `|⟨m;t|n;t⟩ - δ_mn|` over the sampled times.
pub fn orthonormality_defect(solutions: &[ParticularSolution]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for a in solutions {
        for b in solutions {
            for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
                let target = if a.n == b.n { 1.0 } else { 0.0 };
                worst = worst.max((inner(x, y)? - target).norm());
            }
        }
    }
    Ok(worst)
}

/// `max_t |⟨I(t)⟩ - ⟨I(t0)⟩| / |⟨I(t0)⟩|` along a trajectory.
pub fn invariant_expectation_drift(path: &CoefficientPath, traj: &Trajectory) -> Result<f64> {
    let values = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&t, psi)| {
            let op = path.materialize(t)?;
            Ok(inner(psi, &apply_operator_poly(&op, psi)?)?.re / psi.norm_sqr())
        })
        .collect::<Result<Vec<f64>>>()?;
    let first = values[0];
    Ok(values.iter().map(|v| (v - first).abs()).fold(0.0, f64::max) / first.abs())
}

/// Plane-wave eigenstate of the linear invariant `p + F_t` with eigenvalue
/// `k`: `exp{i[(k - F_t) q - ∫₀ᵗ (k - F_s)²/2m ds]}`, `F_t = ∫₀ᵗ f`.
#[derive(Clone, Debug)]
pub struct VolkovState {
    pub k: f64,
    pub mass: f64,
    pub drive: DriveSpec,
}

impl VolkovState {
    pub fn new(k: f64, model: &Model) -> Result<Self> {
        if model.has_harmonic_term() {
            return Err(Error::HarmonicTermPresent);
        }
        Ok(VolkovState {
            k,
            mass: model.mass,
            drive: model.drive.clone(),
        })
    }

    pub fn momentum_shift(&self, t: f64) -> Result<f64> {
        self.drive.integral(0.0, t)
    }

    /// `∫₀ᵗ (k - F_s)² / 2m ds`.
    pub fn phase_accumulator(&self, t: f64) -> Result<f64> {
        quad::integrate(
            |s| Ok::<_, Error>((self.k - self.momentum_shift(s)?).powi(2) / (2.0 * self.mass)),
            0.0,
            t,
            self.drive.breakpoints(),
            0.05,
        )
    }

    /// Sampled on the grid; unit modulus, not unit norm.
    pub fn sample(&self, t: f64, grid: &Arc<Grid>) -> Result<Wavefunction> {
        let kappa = self.k - self.momentum_shift(t)?;
        let theta = self.phase_accumulator(t)?;
        Ok(Wavefunction::from_fn(grid, |q| {
            Complex64::from_polar(1.0, kappa * q - theta)
        }))
    }
}

pub fn volkov_state(k: f64, t: f64, model: &Model, grid: &Arc<Grid>) -> Result<Wavefunction> {
    VolkovState::new(k, model)?.sample(t, grid)
}

/// Smooth window, ≈1 on `|q| < 0.8L` and ≈0 near the edges, used to make
/// plane waves periodic before spectral differentiation.
pub fn volkov_window(grid: &Grid) -> Vec<f64> {
    let a = 0.8 * grid.half_width();
    let s = 0.025 * grid.half_width();
    grid.nodes()
        .iter()
        .map(|q| 0.5 * (((q + a) / s).tanh() - ((q - a) / s).tanh()))
        .collect()
}

/// Fraction of `L` whose nodes count as interior for the residuals.
pub const VOLKOV_INTERIOR: f64 = 0.4;

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct VolkovResiduals {
    pub t: f64,
    /// `max |(p + F_t)ψ - kψ|` on interior nodes.
    pub eigen: f64,
    /// `max |(i∂_t - H)ψ|` on interior nodes.
    pub tdse: f64,
}

pub fn volkov_residuals(state: &VolkovState, t: f64, grid: &Arc<Grid>) -> Result<VolkovResiduals> {
    let window = volkov_window(grid);
    let apply_window = |psi: &Wavefunction| -> Wavefunction {
        let amps = psi.amps().iter().zip(&window).map(|(z, w)| z * w).collect();
        Wavefunction::new(psi.grid().clone(), amps)
    };
    let psi = apply_window(&state.sample(t, grid)?);
    let f_t = state.momentum_shift(t)?;
    let p_psi = apply_p_power(&psi, 1);
    let p2_psi = apply_p_power(&psi, 2);
    let f = state.drive.eval(t)?;

    let h = PHASE_DT;
    let at = |dt: f64| -> Result<Wavefunction> { Ok(apply_window(&state.sample(t + dt, grid)?)) };
    let d = |step: f64| -> Result<Vec<Complex64>> {
        let (a, b) = (at(step)?, at(-step)?);
        Ok(a.amps()
            .iter()
            .zip(b.amps())
            .map(|(x, y)| (x - y) / (2.0 * step))
            .collect())
    };
    let (coarse, fine) = (d(h)?, d(0.5 * h)?);

    let lim = VOLKOV_INTERIOR * grid.half_width();
    let (mut eigen, mut tdse): (f64, f64) = (0.0, 0.0);
    for (j, &q) in grid.nodes().iter().enumerate() {
        if q.abs() > lim {
            continue;
        }
        let z = psi.amps()[j];
        eigen = eigen.max((p_psi.amps()[j] + f_t * z - state.k * z).norm());
        let dt = (fine[j] * 4.0 - coarse[j]) / 3.0;
        let hz = p2_psi.amps()[j] / (2.0 * state.mass) + f * q * z;
        tdse = tdse.max((I * dt - hz).norm());
    }
    Ok(VolkovResiduals { t, eigen, tdse })
}

/// Outcome of applying a linear invariant to a quadratic-branch solution.
#[derive(Clone, Debug)]
pub struct CrossInvariantRecord {
    pub n: usize,
    pub power: u32,
    pub times: Vec<f64>,
    pub fidelities: Vec<f64>,
    pub min_fidelity: f64,
}

/// Applies `I_l(t)^power` to every snapshot of `component` and compares the
/// images with oracle evolution of the first image.
pub fn cross_invariant_solution(
    component: &ParticularSolution,
    linear_path: &CoefficientPath,
    model: &Model,
    power: u32,
    dt: f64,
) -> Result<CrossInvariantRecord> {
    if linear_path.family != Family::Linear {
        return Err(Error::Config(
            "cross-invariant check needs a linear coefficient path".into(),
        ));
    }
    let images = component
        .times
        .iter()
        .zip(&component.snapshots)
        .map(|(&t, psi)| {
            let op = linear_path.materialize(t)?;
            let mut out = psi.clone();
            for _ in 0..power {
                out = apply_operator_poly(&op, &out)?;
            }
            let norm = out.norm() / psi.norm();
            if norm < ANNIHILATION_TOL {
                return Err(Error::Annihilated(norm));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let t0 = component.times[0];
    let cfg = PropagatorConfig::new(component.times.clone()).with_dt(dt);
    let numeric = oracle::propagate(&images[0], t0, model, &cfg)?;
    let analytic = Trajectory {
        times: component.times.clone(),
        states: images,
    };
    let series = oracle::fidelity_series(&analytic, &numeric)?;
    let fidelities: Vec<f64> = series.iter().map(|p| p.fidelity).collect();
    let min_fidelity = fidelities.iter().copied().fold(1.0, f64::min);
    Ok(CrossInvariantRecord {
        n: component.n,
        power,
        times: component.times.clone(),
        fidelities,
        min_fidelity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{coherent_state, hermite_state};
    use crate::invariants::{generate_ode_system, integrate, QuadCoeffs, DEFAULT_STEP};

    fn branch(model: &Model, seed: QuadCoeffs, t1: f64, n_max: usize) -> QuadraticBranch {
        let sys = generate_ode_system(Family::Quadratic, model).unwrap();
        let path = integrate(&sys, &seed.to_vec(), 0.0, t1, DEFAULT_STEP).unwrap();
        QuadraticBranch::new(model, &path, &Grid::standard(), n_max).unwrap()
    }

    fn linspace(t1: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|k| t1 * k as f64 / n as f64).collect()
    }

    #[test]
    fn ground_state_at_origin_is_exact() {
        let b = branch(
            &Model::new(1.0, DriveSpec::Constant { value: 0.5 }),
            QuadCoeffs::isotropic(),
            1.0,
            4,
        );
        let sol = b.particular_solution(0, &linspace(1.0, 4)).unwrap();
        assert_eq!(sol.phase[0], 0.0);
        assert_eq!(sol.snapshots[0].amps(), hermite_state(0, b.grid()).unwrap().amps());
        assert!((sol.eigenvalue - 1.0).abs() < 1e-12);
    }

    #[test]
    fn free_phases_are_affine_in_n() {
        let b = branch(&Model::new(1.0, DriveSpec::zero()), QuadCoeffs::isotropic(), 1.0, 10);
        let n_list: Vec<usize> = (0..=10).collect();
        let table = b.lr_phase(&n_list, &linspace(1.0, 20)).unwrap();
        assert!(table.phi.iter().all(|row| row[0] == 0.0));
        let defect = table.affinity_defect().unwrap();
        assert!(defect < 1e-8, "{defect}");
        assert!(table.max_imag_residue < IMAG_RESIDUE_TOL);
        // V₂(t) = exp(-itp²/2) is the free propagator itself, so every phase
        // vanishes
        let p = b.transform(1.0).unwrap();
        assert!((p.alpha_im + 0.5).abs() < 1e-9 && p.rho_im.abs() < 1e-9, "{p:?}");
        assert!(table.phi.iter().flatten().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn snapshots_are_invariant_eigenstates() {
        let model = Model::new(
            1.0,
            DriveSpec::Sinusoid {
                amplitude: 1.0,
                frequency: 2.0,
                phase: 0.0,
            },
        );
        let b = branch(&model, QuadCoeffs::new(1.0, 0.2, 1.5, 0.3, -0.4, 0.0), 1.0, 10);
        for &t in &[0.0, 0.37, 1.0] {
            for n in [0, 3, 10] {
                let r = b.eigen_residual(n, t).unwrap();
                assert!(r < 1e-7, "n={n} t={t}: {r}");
            }
        }
    }

    #[test]
    fn oscillator_eigenstate_expansion() {
        let b = branch(&Model::new(1.0, DriveSpec::zero()), QuadCoeffs::isotropic(), 0.5, 8);
        let psi = hermite_state(3, b.grid()).unwrap();
        let gs = b.expand_initial(&psi, 8, &[0.0, 0.5], TRUNCATION_BOUND).unwrap();
        for (n, c) in gs.coefficients.iter().enumerate() {
            if n == 3 {
                assert!((c - 1.0).norm() < 1e-10);
            } else {
                assert!(c.norm() < 1e-10);
            }
        }
    }

    #[test]
    fn coherent_state_is_poisson() {
        let b = branch(&Model::new(1.0, DriveSpec::zero()), QuadCoeffs::isotropic(), 0.5, 30);
        let d = 1.0;
        let psi = coherent_state(b.grid(), d, 0.0).unwrap();
        let gs = b.expand_initial(&psi, 30, &[0.0, 0.5], TRUNCATION_BOUND).unwrap();
        let mut fact = 1.0;
        for (n, c) in gs.coefficients.iter().enumerate() {
            if n > 0 {
                fact *= n as f64;
            }
            let expect = (-d * d / 2.0f64).exp() * (d * d / 2.0).powi(n as i32) / fact;
            assert!((c.norm_sqr() - expect).abs() < 1e-12, "{n}");
        }
        assert!(gs.truncation_loss < 1e-12);
        let back = evolve_general(&gs, 0.0).unwrap();
        assert!(back.sub(&psi).unwrap().norm() < 1e-10);
        assert!(matches!(evolve_general(&gs, 0.25), Err(Error::SeriesMismatch(_))));
        assert!(matches!(evolve_general(&gs, 2.0), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn truncation_is_reported() {
        let b = branch(&Model::new(1.0, DriveSpec::zero()), QuadCoeffs::isotropic(), 0.5, 30);
        let psi = coherent_state(b.grid(), 4.0, 0.0).unwrap();
        assert!(matches!(
            b.expand_initial(&psi, 4, &[0.0], TRUNCATION_BOUND),
            Err(Error::Truncation { .. })
        ));
    }

    #[test]
    fn free_plane_wave() {
        let g = Grid::standard();
        let model = Model::new(1.0, DriveSpec::zero());
        let psi = volkov_state(1.0, 0.7, &model, &g).unwrap();
        for (q, z) in g.nodes().iter().zip(psi.amps()) {
            let expect = Complex64::from_polar(1.0, q - 0.35);
            assert!((z - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn volkov_residuals_are_small() {
        let g = Grid::standard();
        let cases = [
            (0.0, DriveSpec::Constant { value: 0.5 }),
            (1.0, DriveSpec::zero()),
            (
                1.0,
                DriveSpec::Sinusoid {
                    amplitude: 1.0,
                    frequency: 2.0,
                    phase: 0.0,
                },
            ),
        ];
        for (k, drive) in cases {
            let s = VolkovState::new(k, &Model::new(1.0, drive)).unwrap();
            for t in [0.3, 1.0, 2.0] {
                let r = volkov_residuals(&s, t, &g).unwrap();
                assert!(r.eigen < 1e-8, "{r:?}");
                assert!(r.tdse < 1e-6, "{r:?}");
            }
        }
    }

    #[test]
    fn volkov_rejects_harmonic_term() {
        let model = Model::new(1.0, DriveSpec::zero()).with_omega(DriveSpec::Constant { value: 1.0 });
        assert!(matches!(VolkovState::new(0.0, &model), Err(Error::HarmonicTermPresent)));
    }

    #[test]
    fn identity_linear_invariant_keeps_the_solution() {
        let model = Model::new(1.0, DriveSpec::Constant { value: 0.5 });
        let b = branch(&model, QuadCoeffs::isotropic(), 0.5, 2);
        let sol = b.particular_solution(1, &linspace(0.5, 5)).unwrap();
        let sys = generate_ode_system(Family::Linear, &model).unwrap();
        let lin = integrate(&sys, &[0.0, 0.0, 1.0], 0.0, 0.5, DEFAULT_STEP).unwrap();
        let rec = cross_invariant_solution(&sol, &lin, &model, 1, 1e-3).unwrap();
        assert!(rec.min_fidelity > 1.0 - 1e-6, "{rec:?}");
        let zero = integrate(&sys, &[0.0, 0.0, 0.0], 0.0, 0.5, DEFAULT_STEP).unwrap();
        assert!(matches!(
            cross_invariant_solution(&sol, &zero, &model, 1, 1e-3),
            Err(Error::Annihilated(_))
        ));
    }
}
