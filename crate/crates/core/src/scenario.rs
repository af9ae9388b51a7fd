//! Scenario files.
//!
//! A scenario is TOML read as a flat map of dotted keys (`drive.kind`,
//! `grid.n_points`, ...). Nested tables and dotted keys are equivalent. Every
//! key must be recognised: a misspelled parameter is an error, never a
//! silent default.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::invariants::{DriveSpec, LinearCoeffs, Model, QuadCoeffs};

/// Scenarios shipped with the crate, addressable by name on the command line.
pub const BUNDLED: [(&str, &str); 3] = [
    ("constant_force", include_str!("../scenarios/constant_force.toml")),
    ("free_particle", include_str!("../scenarios/free_particle.toml")),
    ("sinusoidal_drive", include_str!("../scenarios/sinusoidal_drive.toml")),
];

/// Check thresholds. Defaults are the acceptance tolerances.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub casimir_drift: f64,
    pub conjugation: f64,
    pub varsigma: f64,
    pub eigen_residual: f64,
    pub phase_affinity: f64,
    pub orthonormality: f64,
    pub particular_defect: f64,
    pub phase_error: f64,
    pub general_t0_defect: f64,
    pub general_defect: f64,
    pub norm_drift: f64,
    pub truncation: f64,
    pub invariant_drift: f64,
    pub volkov_eigen: f64,
    pub volkov_tdse: f64,
    pub cross_defect: f64,
    pub ehrenfest: f64,
    pub oracle_norm_drift: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            casimir_drift: 1e-10,
            conjugation: 1e-9,
            varsigma: 1e-10,
            eigen_residual: 1e-7,
            phase_affinity: 1e-8,
            orthonormality: 1e-8,
            particular_defect: 1e-5,
            phase_error: 1e-4,
            general_t0_defect: 1e-8,
            general_defect: 1e-4,
            norm_drift: 1e-8,
            truncation: 1e-6,
            invariant_drift: 1e-6,
            volkov_eigen: 1e-8,
            volkov_tdse: 1e-6,
            cross_defect: 1e-4,
            ehrenfest: 1e-5,
            oracle_norm_drift: 1e-10,
        }
    }
}

impl Tolerances {
    /// Every threshold multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut t = self.clone();
        for v in t.fields_mut() {
            *v *= s;
        }
        t
    }

    fn fields_mut(&mut self) -> [&mut f64; 18] {
        [
            &mut self.casimir_drift,
            &mut self.conjugation,
            &mut self.varsigma,
            &mut self.eigen_residual,
            &mut self.phase_affinity,
            &mut self.orthonormality,
            &mut self.particular_defect,
            &mut self.phase_error,
            &mut self.general_t0_defect,
            &mut self.general_defect,
            &mut self.norm_drift,
            &mut self.truncation,
            &mut self.invariant_drift,
            &mut self.volkov_eigen,
            &mut self.volkov_tdse,
            &mut self.cross_defect,
            &mut self.ehrenfest,
            &mut self.oracle_norm_drift,
        ]
    }

    pub const NAMES: [&'static str; 18] = [
        "casimir_drift",
        "conjugation",
        "varsigma",
        "eigen_residual",
        "phase_affinity",
        "orthonormality",
        "particular_defect",
        "phase_error",
        "general_t0_defect",
        "general_defect",
        "norm_drift",
        "truncation",
        "invariant_drift",
        "volkov_eigen",
        "volkov_tdse",
        "cross_defect",
        "ehrenfest",
        "oracle_norm_drift",
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub mass: f64,
    pub drive: DriveSpec,
    pub omega: Option<DriveSpec>,
    pub t0: f64,
    pub t1: f64,
    pub dt_record: f64,
    pub n_points: usize,
    pub half_width: f64,
    pub quad_seed: QuadCoeffs,
    pub linear_seed: Option<LinearCoeffs>,
    /// Basis size for the general-solution expansion.
    pub n_max: usize,
    /// Quantum numbers checked individually, `0..=n_check`.
    pub n_check: usize,
    pub ode_step: f64,
    pub oracle_dt: f64,
    /// Coherent initial state `|q0, p0⟩` for the general solution.
    pub initial_q0: f64,
    pub initial_p0: f64,
    pub volkov_k: Vec<f64>,
    pub seed: u64,
    pub tolerances: Tolerances,
}

impl Scenario {
    pub fn model(&self) -> Model {
        Model {
            mass: self.mass,
            drive: self.drive.clone(),
            omega: self.omega.clone(),
        }
    }

    /// Recording times `t0, t0 + dt_record, …, t1`.
    pub fn record_times(&self) -> Vec<f64> {
        let n = ((self.t1 - self.t0) / self.dt_record).round().max(1.0) as usize;
        (0..=n)
            .map(|k| self.t0 + (self.t1 - self.t0) * k as f64 / n as f64)
            .collect()
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse(&text, &name)
    }

    /// A file path, or the name of a bundled scenario.
    pub fn load(source: &str) -> Result<Self> {
        if Path::new(source).exists() {
            return Self::from_file(source);
        }
        match BUNDLED.iter().find(|(name, _)| *name == source) {
            Some((name, text)) => Self::parse(text, name),
            None => Err(Error::Config(format!(
                "no scenario file or bundled scenario named '{source}'"
            ))),
        }
    }

    pub fn parse(text: &str, default_name: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut f = Fields::default();
        flatten("", &toml::Value::Table(table), &mut f.map);

        let name = f.string("name")?.unwrap_or_else(|| default_name.to_string());
        let mass = f.f64_or("mass", 1.0)?;
        let drive = f.drive("drive")?.unwrap_or_else(DriveSpec::zero);
        let omega = f.drive("omega")?;
        let t0 = f.f64_or("t0", 0.0)?;
        let t1 = f.f64_or("t1", 2.0)?;
        let dt_record = f.f64_or("dt_record", 0.05)?;
        let n_points = f.usize_or("grid.n_points", crate::grid::DEFAULT_POINTS)?;
        let half_width = f.f64_or("grid.half_width", crate::grid::DEFAULT_HALF_WIDTH)?;
        let iso = QuadCoeffs::isotropic();
        let quad_seed = QuadCoeffs::new(
            f.f64_or("quad_seed.d", iso.d)?,
            f.f64_or("quad_seed.e", iso.e)?,
            f.f64_or("quad_seed.f", iso.f)?,
            f.f64_or("quad_seed.a", 0.0)?,
            f.f64_or("quad_seed.b", 0.0)?,
            f.f64_or("quad_seed.c", 0.0)?,
        );
        let linear_seed = match (
            f.f64("linear_seed.a")?,
            f.f64("linear_seed.b")?,
            f.f64("linear_seed.c")?,
        ) {
            (None, None, None) => None,
            (a, b, c) => Some(LinearCoeffs::new(a.unwrap_or(0.0), b.unwrap_or(0.0), c.unwrap_or(0.0))),
        };
        let n_max = f.usize_or("n_max", 64)?;
        let n_check = f.usize_or("n_check", 10)?;
        let ode_step = f.f64_or("ode_step", crate::invariants::DEFAULT_STEP)?;
        let oracle_dt = f.f64_or("oracle.dt", crate::oracle::DEFAULT_DT)?;
        let initial_q0 = f.f64_or("initial.q0", 1.0)?;
        let initial_p0 = f.f64_or("initial.p0", 0.0)?;
        let volkov_k = f.vec_f64("volkov.k")?.unwrap_or_else(|| vec![0.0, 1.0]);
        let seed = f.usize_or("seed", 7)? as u64;
        let mut tolerances = Tolerances::default();
        for (name, slot) in Tolerances::NAMES.iter().zip(tolerances.fields_mut()) {
            if let Some(v) = f.f64(&format!("tolerances.{name}"))? {
                *slot = v;
            }
        }
        if let Some(key) = f.map.keys().next() {
            return Err(Error::Config(format!("unknown scenario key '{key}'")));
        }

        let s = Scenario {
            name,
            mass,
            drive,
            omega,
            t0,
            t1,
            dt_record,
            n_points,
            half_width,
            quad_seed,
            linear_seed,
            n_max,
            n_check,
            ode_step,
            oracle_dt,
            initial_q0,
            initial_p0,
            volkov_k,
            seed,
            tolerances,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.mass,
            self.t0,
            self.t1,
            self.dt_record,
            self.half_width,
            self.ode_step,
            self.oracle_dt,
            self.initial_q0,
            self.initial_p0,
        ]
        .iter()
        .chain(&self.quad_seed.to_vec())
        .chain(&self.volkov_k)
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::Config("all numeric fields must be finite".into()));
        }
        if self.mass <= 0.0 {
            return Err(Error::Config(format!("mass must be positive, got {}", self.mass)));
        }
        if self.t1 <= self.t0 {
            return Err(Error::Config(format!("need t1 > t0, got [{}, {}]", self.t0, self.t1)));
        }
        if self.dt_record <= 0.0 || self.ode_step <= 0.0 || self.oracle_dt <= 0.0 {
            return Err(Error::Config("time steps must be positive".into()));
        }
        if self.n_check > self.n_max {
            return Err(Error::Config(format!(
                "n_check {} exceeds n_max {}",
                self.n_check, self.n_max
            )));
        }
        self.drive.validate()?;
        if let Some(w) = &self.omega {
            w.validate()?;
        }
        Ok(())
    }
}

fn flatten(prefix: &str, v: &toml::Value, out: &mut BTreeMap<String, toml::Value>) {
    match v {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.clone());
        }
    }
}

/// Consumes keys from the flattened map; whatever is left is unknown.
#[derive(Default)]
struct Fields {
    map: BTreeMap<String, toml::Value>,
}

impl Fields {
    fn bad(key: &str, want: &str) -> Error {
        Error::Config(format!("scenario key '{key}' must be {want}"))
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(toml::Value::Float(x)) => Ok(Some(x)),
            Some(toml::Value::Integer(i)) => Ok(Some(i as f64)),
            Some(_) => Err(Self::bad(key, "a number")),
        }
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.map.remove(key) {
            None => Ok(default),
            Some(toml::Value::Integer(i)) if i >= 0 => Ok(i as usize),
            Some(_) => Err(Self::bad(key, "a non-negative integer")),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<String>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(Self::bad(key, "a string")),
        }
    }

    fn vec_f64(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(toml::Value::Array(items)) => items
                .into_iter()
                .map(|v| match v {
                    toml::Value::Float(x) => Ok(x),
                    toml::Value::Integer(i) => Ok(i as f64),
                    _ => Err(Self::bad(key, "an array of numbers")),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(Self::bad(key, "an array of numbers")),
        }
    }

    fn need(&mut self, prefix: &str, field: &str) -> Result<f64> {
        let key = format!("{prefix}.{field}");
        self.f64(&key)?
            .ok_or_else(|| Error::Config(format!("missing scenario key '{key}'")))
    }

    fn drive(&mut self, prefix: &str) -> Result<Option<DriveSpec>> {
        let Some(kind) = self.string(&format!("{prefix}.kind"))? else {
            if let Some(k) = self.map.keys().find(|k| k.starts_with(&format!("{prefix}."))) {
                return Err(Error::Config(format!("scenario key '{k}' given without {prefix}.kind")));
            }
            return Ok(None);
        };
        let d = match kind.as_str() {
            "constant" => DriveSpec::Constant {
                value: self.need(prefix, "value")?,
            },
            "linear_ramp" => DriveSpec::LinearRamp {
                offset: self.need(prefix, "offset")?,
                slope: self.need(prefix, "slope")?,
            },
            "sinusoid" => DriveSpec::Sinusoid {
                amplitude: self.need(prefix, "amplitude")?,
                frequency: self.need(prefix, "frequency")?,
                phase: self.f64_or(&format!("{prefix}.phase"), 0.0)?,
            },
            "tabulated" => {
                let times = self.vec_f64(&format!("{prefix}.times"))?;
                let values = self.vec_f64(&format!("{prefix}.values"))?;
                match (times, values) {
                    (Some(times), Some(values)) => DriveSpec::Tabulated { times, values },
                    _ => return Err(Error::Config(format!("{prefix}: tabulated needs times and values"))),
                }
            }
            other => return Err(Error::Config(format!("unknown {prefix}.kind '{other}'"))),
        };
        Ok(Some(d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse() {
        for (name, _) in BUNDLED {
            let s = Scenario::load(name).unwrap();
            assert_eq!(s.name, name);
            assert_eq!(s.t1, 2.0);
            assert!(s.quad_seed.is_elliptic());
        }
    }

    #[test]
    fn dotted_and_nested_keys_agree() {
        let a = Scenario::parse("drive.kind = \"constant\"\ndrive.value = 0.5\n", "x").unwrap();
        let b = Scenario::parse("[drive]\nkind = \"constant\"\nvalue = 0.5\n", "x").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.drive, DriveSpec::Constant { value: 0.5 });
    }

    #[test]
    fn unknown_keys_are_errors() {
        let err = Scenario::parse("mas = 1.0\n", "x").unwrap_err();
        assert!(err.to_string().contains("'mas'"), "{err}");
        let err = Scenario::parse("grid.n_point = 512\n", "x").unwrap_err();
        assert!(err.to_string().contains("grid.n_point"));
        assert!(Scenario::parse("drive.value = 1.0\n", "x").is_err());
        assert!(Scenario::parse("drive.kind = \"square\"\n", "x").is_err());
    }

    #[test]
    fn invalid_values_are_errors() {
        assert!(Scenario::parse("mass = -1.0\n", "x").is_err());
        assert!(Scenario::parse("t1 = 0.0\n", "x").is_err());
        assert!(Scenario::parse("mass = \"heavy\"\n", "x").is_err());
        assert!(Scenario::parse("n_check = 70\n", "x").is_err());
    }

    #[test]
    fn tolerances_override_and_scale() {
        let s = Scenario::parse("tolerances.eigen_residual = 1e-6\n", "x").unwrap();
        assert_eq!(s.tolerances.eigen_residual, 1e-6);
        assert_eq!(s.tolerances.scaled(10.0).phase_error, 1e-3);
    }

    #[test]
    fn record_times_hit_the_window_ends() {
        let s = Scenario::parse("t1 = 1.0\ndt_record = 0.1\n", "x").unwrap();
        let t = s.record_times();
        assert_eq!(t.len(), 11);
        assert_eq!((t[0], t[10]), (0.0, 1.0));
    }
}
