//! Command pipelines behind the `lrinv` binary. Each returns a [`Report`] and
//! writes its CSV artifacts into the output directory, if one is given.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{coherent_state, fidelity, random_superposition, Grid};
use crate::invariants::{generate_ode_system, integrate, CoefficientPath, Family, Model};
use crate::oracle::{self, PropagatorConfig, Trajectory};
use crate::report::Report;
use crate::scenario::{Scenario, Tolerances};
use crate::solutions::{self, QuadraticBranch, VolkovState};
use crate::transforms::conjugation_residual;
use crate::weyl::{self, commutator, OperatorPoly};

/// Output directory handling: `None` runs the checks without writing files.
pub struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    pub fn new(dir: Option<&Path>) -> Result<Self> {
        if let Some(d) = dir {
            std::fs::create_dir_all(d)?;
        }
        Ok(Sink {
            dir: dir.map(Path::to_path_buf),
        })
    }

    pub fn none() -> Self {
        Sink { dir: None }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Calls `write` with the full path of `name` and records the artifact.
    fn emit(&self, report: &mut Report, name: &str, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        if let Some(d) = &self.dir {
            let path = d.join(name);
            write(&path)?;
            report.artifact(&path);
        }
        Ok(())
    }
}

fn scenario_echo(s: &Scenario) -> serde_json::Value {
    serde_json::to_value(s).expect("scenario serializes")
}

fn random_poly(rng: &mut ChaCha8Rng, max_degree: u32) -> OperatorPoly {
    let terms = weyl::monomials_up_to(max_degree).into_iter().map(|m| {
        let c = Complex64::new(rng.gen_range(-3..=3) as f64, rng.gen_range(-3..=3) as f64);
        m.scale(c)
    });
    terms.fold(OperatorPoly::zero(), |acc, t| acc + t)
}

/// `[q, p] = i`, antisymmetry and Jacobi on random integer-coefficient
/// triples, and closure of the linear, quadratic and cubic generator sets.
pub fn check_algebra(seed: u64, triples: usize) -> Report {
    let mut r = Report::new("check-algebra");
    r.seeds.push(("jacobi".into(), seed));

    let qp = commutator(&OperatorPoly::q(), &OperatorPoly::p()) - OperatorPoly::scalar(Complex64::new(0.0, 1.0));
    r.equal("algebra/commutator_qp", qp.max_abs_coeff(), 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut jacobi, mut antisym): (f64, f64) = (0.0, 0.0);
    for _ in 0..triples {
        let (a, b, c) = (
            random_poly(&mut rng, 3),
            random_poly(&mut rng, 3),
            random_poly(&mut rng, 3),
        );
        let j = commutator(&a, &commutator(&b, &c))
            + commutator(&b, &commutator(&c, &a))
            + commutator(&c, &commutator(&a, &b));
        jacobi = jacobi.max(j.max_abs_coeff());
        antisym = antisym.max((commutator(&a, &b) + commutator(&b, &a)).max_abs_coeff());
    }
    r.equal("algebra/jacobi", jacobi, 0.0);
    r.note(format!("{triples} random degree <= 3 triples"));
    r.equal("algebra/antisymmetry", antisym, 0.0);

    let linear = Family::Linear.basis();
    let rep = weyl::check_closure(&linear);
    r.equal("algebra/linear_closed", if rep.closed { 1.0 } else { 0.0 }, 1.0);

    let quadratic = Family::Quadratic.basis();
    let rep = weyl::check_closure(&quadratic);
    r.below(
        "algebra/quadratic_span_residual",
        rep.max_residual.abs(),
        weyl::SPAN_TOL,
    );
    r.equal("algebra/quadratic_closed", if rep.closed { 1.0 } else { 0.0 }, 1.0);

    let cubic = weyl::monomials_up_to(3);
    let rep = weyl::check_closure(&cubic);
    r.equal("algebra/cubic_not_closed", if rep.closed { 0.0 } else { 1.0 }, 1.0);
    match &rep.witness {
        Some(w) => {
            let deg4 = w.out_of_span.homogeneous_part(4);
            r.equal("algebra/cubic_witness_degree", w.out_of_span.degree() as f64, 4.0);
            r.note(format!(
                "[{}, {}] leaves {} outside the span",
                cubic[w.left], cubic[w.right], deg4
            ));
        }
        None => r.failed(
            "algebra/cubic_witness_degree",
            4.0,
            crate::report::Relation::Equal,
            &Error::Config("no witness".into()),
        ),
    }
    r
}

fn quad_path(s: &Scenario, model: &Model) -> Result<CoefficientPath> {
    let sys = generate_ode_system(Family::Quadratic, model)?;
    integrate(&sys, &s.quad_seed.to_vec(), s.t0, s.t1, s.ode_step)
}

fn write_path_csv(path: &CoefficientPath, header: &[&str], file: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(file)?;
    w.write_record(header)?;
    for (t, v) in path.times.iter().zip(&path.values) {
        let mut row = vec![crate::grid::fmt17(*t)];
        row.extend(v.iter().map(|x| crate::grid::fmt17(*x)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// The full quadratic-branch pipeline plus the linear cross-check.
pub fn solve(s: &Scenario, tol: &Tolerances, sink: &Sink) -> Result<Report> {
    let mut r = Report::new("solve");
    r.scenarios.push(scenario_echo(s));
    r.seeds.push((format!("{}/random_state", s.name), s.seed));
    let name = |check: &str| format!("{}/{check}", s.name);
    let model = s.model();
    let grid = Grid::new(s.n_points, s.half_width)?;
    let times = s.record_times();

    if !s.quad_seed.is_elliptic() {
        return Err(Error::Config(format!(
            "quad_seed must be elliptic for the quadratic branch (DF - E² = {})",
            s.quad_seed.casimir()
        )));
    }
    let path = quad_path(s, &model)?;
    sink.emit(&mut r, "coefficients.csv", |f| {
        write_path_csv(&path, &["t", "D", "E", "F", "Ap", "Bp", "Cp"], f)
    })?;
    r.below(name("casimir_drift"), path.casimir_drift()?, tol.casimir_drift);

    let branch = QuadraticBranch::new(&model, &path, &grid, s.n_max)?;

    // reduction along the path
    let varsigma0 = 2.0 * s.quad_seed.casimir().sqrt();
    let (mut conj, mut vs): (f64, f64) = (0.0, 0.0);
    for &t in &times {
        let p = branch.transform(t)?;
        conj = conj.max(conjugation_residual(&path.materialize(t)?, &p));
        vs = vs.max((p.varsigma - varsigma0).abs());
    }
    r.below(name("conjugation_residual"), conj, tol.conjugation);
    r.below(name("varsigma_constant"), vs, tol.varsigma);

    // eigen-structure at ten instants
    let sample_times = linspace(s.t0, s.t1, 10);
    let pairs: Vec<(usize, f64)> = (0..=s.n_check)
        .flat_map(|n| sample_times.iter().map(move |&t| (n, t)))
        .collect();
    let eig = pairs
        .par_iter()
        .map(|&(n, t)| branch.eigen_residual(n, t))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    r.below(name("eigen_residual"), eig, tol.eigen_residual);

    // particular solutions against the oracle
    let n_list: Vec<usize> = (0..=s.n_check).collect();
    let table = branch.lr_phase(&n_list, &times)?;
    sink.emit(&mut r, "phases.csv", |f| table.write_csv(f))?;
    r.below(
        name("phase_affinity"),
        table.affinity_defect().unwrap_or(f64::INFINITY),
        tol.phase_affinity,
    );
    let particular = branch.particular_solutions(&n_list, &times)?;
    r.below(
        name("orthonormality"),
        solutions::orthonormality_defect(&particular)?,
        tol.orthonormality,
    );
    let cfg = PropagatorConfig::new(times.clone()).with_dt(s.oracle_dt);
    let series = particular
        .par_iter()
        .map(|sol| {
            let numeric = oracle::propagate(&sol.snapshots[0], s.t0, &model, &cfg)?;
            oracle::fidelity_series(&sol.trajectory(), &numeric)
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut defect, mut phase): (f64, f64) = (0.0, 0.0);
    for (sol, ser) in particular.iter().zip(&series) {
        for p in ser {
            defect = defect.max(1.0 - p.fidelity);
            phase = phase.max(p.phase.abs());
        }
        sink.emit(&mut r, &format!("fidelity_n{}.csv", sol.n), |f| {
            oracle::write_fidelity_csv(ser, f)
        })?;
    }
    r.below(name("particular_fidelity_defect"), defect, tol.particular_defect);
    r.below(name("particular_phase_error"), phase, tol.phase_error);
    if let Some(last) = particular.first().and_then(|p| p.snapshots.last()) {
        sink.emit(&mut r, "snapshot_particular_n0_t1.csv", |f| last.write_csv(f))?;
    }

    // general solution for a coherent initial state
    let psi0 = coherent_state(&grid, s.initial_q0, s.initial_p0)?;
    let gs = branch.expand_initial(&psi0, s.n_max, &times, tol.truncation)?;
    r.below(name("truncation_loss"), gs.truncation_loss.max(0.0), tol.truncation);
    let rebuilt = solutions::evolve_general(&gs, s.t0)?;
    r.below(
        name("general_t0_defect"),
        1.0 - fidelity(&rebuilt, &psi0)?,
        tol.general_t0_defect,
    );
    let analytic = Trajectory {
        times: times.clone(),
        states: times
            .iter()
            .map(|&t| solutions::evolve_general(&gs, t))
            .collect::<Result<_>>()?,
    };
    let norm0 = analytic.states[0].norm();
    let norm_drift = analytic
        .states
        .iter()
        .map(|x| (x.norm() - norm0).abs())
        .fold(0.0, f64::max);
    r.below(name("general_norm_drift"), norm_drift, tol.norm_drift);
    let numeric = oracle::propagate(&psi0, s.t0, &model, &cfg)?;
    let ser = oracle::fidelity_series(&analytic, &numeric)?;
    sink.emit(&mut r, "fidelity_general.csv", |f| oracle::write_fidelity_csv(&ser, f))?;
    let gdefect = ser.iter().map(|p| 1.0 - p.fidelity).fold(0.0, f64::max);
    r.below(name("general_fidelity_defect"), gdefect, tol.general_defect);
    let moments = oracle::moments(&numeric, &model)?;
    sink.emit(&mut r, "moments.csv", |f| oracle::write_moments_csv(&moments, f))?;
    if let (Some(a), Some(b)) = (analytic.last(), numeric.last()) {
        sink.emit(&mut r, "snapshot_general_t1.csv", |f| a.write_csv(f))?;
        sink.emit(&mut r, "snapshot_oracle_t1.csv", |f| b.write_csv(f))?;
    }

    // invariant expectation under oracle evolution of a random state
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let random = random_superposition(&grid, s.n_check, &mut rng)?;
    let traj = oracle::propagate(&random, s.t0, &model, &cfg)?;
    r.below(
        name("invariant_drift"),
        solutions::invariant_expectation_drift(&path, &traj)?,
        tol.invariant_drift,
    );

    // a linear invariant maps solutions to solutions
    if let Some(seed) = s.linear_seed.filter(|_| !model.has_harmonic_term()) {
        let sys = generate_ode_system(Family::Linear, &model)?;
        let lin = integrate(&sys, &seed.to_vec(), s.t0, s.t1, s.ode_step)?;
        sink.emit(&mut r, "linear_coefficients.csv", |f| {
            write_path_csv(&lin, &["t", "A", "B", "C"], f)
        })?;
        for power in [1, 2] {
            let rec = solutions::cross_invariant_solution(&particular[0], &lin, &model, power, s.oracle_dt)?;
            r.below(
                name(&format!("cross_invariant_power{power}_defect")),
                1.0 - rec.min_fidelity,
                tol.cross_defect,
            );
        }
    }
    Ok(r)
}

/// Volkov states for each `k`: eigen-relation and windowed TDSE residuals.
pub fn volkov(s: &Scenario, ks: &[f64], tol: &Tolerances, sink: &Sink) -> Result<Report> {
    let mut r = Report::new("volkov");
    r.scenarios.push(scenario_echo(s));
    let model = s.model();
    let grid = Grid::new(s.n_points, s.half_width)?;
    for &k in ks {
        let state = VolkovState::new(k, &model)?;
        let res = s
            .record_times()
            .par_iter()
            .map(|&t| solutions::volkov_residuals(&state, t, &grid))
            .collect::<Result<Vec<_>>>()?;
        let eig = res.iter().map(|x| x.eigen).fold(0.0, f64::max);
        let tdse = res.iter().map(|x| x.tdse).fold(0.0, f64::max);
        r.below(format!("{}/volkov_k{k}_eigen", s.name), eig, tol.volkov_eigen);
        r.below(format!("{}/volkov_k{k}_tdse", s.name), tdse, tol.volkov_tdse);
        sink.emit(&mut r, &format!("volkov_k{k}.csv"), |f| {
            let mut w = csv::Writer::from_path(f)?;
            w.write_record(["t", "eigen_residual", "tdse_residual"])?;
            for x in &res {
                w.write_record([x.t, x.eigen, x.tdse].map(crate::grid::fmt17))?;
            }
            w.flush()?;
            Ok(())
        })?;
        let snap = state.sample(s.t1, &grid)?;
        sink.emit(&mut r, &format!("snapshot_volkov_k{k}_t1.csv"), |f| snap.write_csv(f))?;
    }
    Ok(r)
}

/// Below this the step-halving difference is roundoff.
const EXACT_SPLITTING: f64 = 1e-11;

/// Propagator self-checks on the scenario's coherent initial state.
pub fn oracle_only(s: &Scenario, tol: &Tolerances, sink: &Sink) -> Result<Report> {
    let mut r = Report::new("oracle-only");
    r.scenarios.push(scenario_echo(s));
    let name = |check: &str| format!("{}/{check}", s.name);
    let model = s.model();
    let grid = Grid::new(s.n_points, s.half_width)?;
    let psi0 = coherent_state(&grid, s.initial_q0, s.initial_p0)?;
    let times = s.record_times();
    let traj = oracle::propagate(
        &psi0,
        s.t0,
        &model,
        &PropagatorConfig::new(times.clone()).with_dt(s.oracle_dt),
    )?;
    let m = oracle::moments(&traj, &model)?;
    sink.emit(&mut r, "moments.csv", |f| oracle::write_moments_csv(&m, f))?;
    let drift = m.iter().map(|x| (x.norm - 1.0).abs()).fold(0.0, f64::max);
    r.below(name("oracle_norm_drift"), drift, tol.oracle_norm_drift);
    r.below(
        name("oracle_ehrenfest"),
        oracle::ehrenfest_defect(&m, &model)?,
        tol.ehrenfest,
    );
    let back = oracle::propagate(
        traj.last().expect("recorded"),
        s.t1,
        &model,
        &PropagatorConfig::new(vec![s.t0]).with_dt(s.oracle_dt),
    )?;
    r.below(
        name("oracle_time_reversal_defect"),
        1.0 - fidelity(&back.states[0], &psi0)?,
        1e-9,
    );
    let t_conv = s.t0 + 1.0_f64.min(s.t1 - s.t0);
    let (coarse, fine) = oracle::step_halving_errors(&psi0, s.t0, t_conv, &model, 0.02)?;
    if coarse < EXACT_SPLITTING {
        // kinetic and potential parts commute; nothing to converge
        r.below(name("oracle_splitting_error"), coarse, EXACT_SPLITTING);
    } else {
        let ratio = coarse / fine;
        r.below(name("oracle_order_deviation"), (ratio.log2() - 2.0).abs(), 0.2);
        r.note(format!("error ratio {ratio:.4} on halving dt"));
    }

    let harmonic = Model::new(1.0, crate::invariants::DriveSpec::zero())
        .with_omega(crate::invariants::DriveSpec::Constant { value: 1.0 });
    let ground = crate::grid::hermite_state(0, &grid)?;
    let period = 2.0 * std::f64::consts::PI;
    let back = oracle::propagate(
        &ground,
        0.0,
        &harmonic,
        &PropagatorConfig::new(vec![period]).with_dt(s.oracle_dt),
    )?;
    r.at_least(
        name("oracle_harmonic_period_fidelity"),
        fidelity(&back.states[0], &ground)?,
        1.0 - 1e-8,
    );
    Ok(r)
}
