//! Flat dotted-key configuration files (`schedule.q = 0.5`, one pair per
//! line, `#` comments). The parsed config is re-emitted in canonical order
//! as the trace sidecar, so a sidecar is itself a valid config.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use piatr::params::ParamSchedule;
use piatr::prox::{
    parse_matrix_csv, parse_vector_csv, random_unit_vector, seeded_quadratic,
    seeded_rank_deficient_quadratic, BoxIndicator, CatalogError, ProxProblem, Quadratic, L1,
    L2Norm,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config line {0}: expected `key = value`")]
    Syntax(usize),
    #[error("duplicate key `{0}`")]
    Duplicate(String),
    #[error("unknown key `{0}`")]
    Unknown(String),
    #[error("missing key `{0}`")]
    Missing(&'static str),
    #[error("key `{key}`: {msg}")]
    Value { key: String, msg: String },
    #[error("invalid schedule: {0}")]
    Schedule(#[from] piatr::params::ParamError),
    #[error("problem: {0}")]
    Catalog(#[from] CatalogError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Quadratic,
    L1,
    Box,
    L2Norm,
    QuadraticRankDeficient,
    CustomCsv,
}

impl ProblemKind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "quadratic" => Self::Quadratic,
            "l1" => Self::L1,
            "box" => Self::Box,
            "l2norm" => Self::L2Norm,
            "quadratic_rank_deficient" => Self::QuadraticRankDeficient,
            "custom_csv" => Self::CustomCsv,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Self::Quadratic => "quadratic",
            Self::L1 => "l1",
            Self::Box => "box",
            Self::L2Norm => "l2norm",
            Self::QuadraticRankDeficient => "quadratic_rank_deficient",
            Self::CustomCsv => "custom_csv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XInit {
    Zero,
    RandomUnit,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub kind: ProblemKind,
    pub dim: usize,
    pub seed: u64,
    /// Row count of the rank-deficient quadratic; defaults to `dim - 2`
    /// (clamped to 1).
    pub rows: Option<usize>,
    pub matrix_path: Option<String>,
    pub b_path: Option<String>,
    pub schedule: ParamSchedule,
    pub iters: u64,
    /// `None` keeps the solver's automatic record cadence.
    pub record_every: Option<u64>,
    pub dense_iterates: bool,
    pub x_init: XInit,
    pub window_fraction: f64,
}

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax(i + 1))?;
        let (key, value) = (key.trim().to_string(), value.trim().to_string());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax(i + 1));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(ConfigError::Duplicate(key));
        }
    }
    Ok(map)
}

fn num<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, ConfigError> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v.parse().map(Some).map_err(|_| ConfigError::Value {
            key: key.into(),
            msg: format!("cannot parse `{v}`"),
        }),
    }
}

fn require<T>(v: Option<T>, key: &'static str) -> Result<T, ConfigError> {
    v.ok_or(ConfigError::Missing(key))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let map = parse_pairs(text)?;
        const KNOWN: &[&str] = &[
            "problem.kind",
            "problem.dim",
            "problem.seed",
            "problem.rows",
            "problem.matrix_path",
            "problem.b_path",
            "schedule.alpha",
            "schedule.q",
            "schedule.c",
            "schedule.p",
            "schedule.lambda0",
            "schedule.delta",
            "run.iters",
            "run.record_every",
            "run.dense_iterates",
            "run.x_init",
            "diagnostics.window_fraction",
        ];
        if let Some(k) = map.keys().find(|k| !KNOWN.contains(&k.as_str())) {
            return Err(ConfigError::Unknown(k.clone()));
        }

        let kind_s = require(map.get("problem.kind"), "problem.kind")?;
        let kind = ProblemKind::parse(kind_s).ok_or_else(|| ConfigError::Value {
            key: "problem.kind".into(),
            msg: format!("unknown problem kind `{kind_s}`"),
        })?;
        let schedule = ParamSchedule::new(
            require(num(&map, "schedule.alpha")?, "schedule.alpha")?,
            require(num(&map, "schedule.q")?, "schedule.q")?,
            require(num(&map, "schedule.c")?, "schedule.c")?,
            require(num(&map, "schedule.p")?, "schedule.p")?,
            require(num(&map, "schedule.lambda0")?, "schedule.lambda0")?,
            require(num(&map, "schedule.delta")?, "schedule.delta")?,
        )?;
        let iters: u64 = require(num(&map, "run.iters")?, "run.iters")?;
        if iters < 2 {
            return Err(ConfigError::Value { key: "run.iters".into(), msg: "need iters >= 2".into() });
        }
        let x_init = match map.get("run.x_init").map(String::as_str) {
            None | Some("random_unit") => XInit::RandomUnit,
            Some("zero") => XInit::Zero,
            Some(v) => {
                return Err(ConfigError::Value {
                    key: "run.x_init".into(),
                    msg: format!("expected `zero` or `random_unit`, got `{v}`"),
                })
            }
        };
        let dense_iterates = match map.get("run.dense_iterates").map(String::as_str) {
            None | Some("false") => false,
            Some("true") => true,
            Some(v) => {
                return Err(ConfigError::Value {
                    key: "run.dense_iterates".into(),
                    msg: format!("expected `true` or `false`, got `{v}`"),
                })
            }
        };
        let window_fraction = num(&map, "diagnostics.window_fraction")?.unwrap_or(0.5);
        if !(window_fraction > 0.0 && window_fraction <= 1.0) {
            return Err(ConfigError::Value {
                key: "diagnostics.window_fraction".into(),
                msg: "must lie in (0, 1]".into(),
            });
        }

        Ok(Self {
            kind,
            dim: num(&map, "problem.dim")?.unwrap_or(0),
            seed: num(&map, "problem.seed")?.unwrap_or(0),
            rows: num(&map, "problem.rows")?,
            matrix_path: map.get("problem.matrix_path").cloned(),
            b_path: map.get("problem.b_path").cloned(),
            schedule,
            iters,
            record_every: num(&map, "run.record_every")?,
            dense_iterates,
            x_init,
            window_fraction,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    /// Builds the configured problem. Paths in `custom_csv` configs resolve
    /// relative to `base`, the config file's directory.
    pub fn build_problem(&self, base: &Path) -> Result<Box<dyn ProxProblem>, ConfigError> {
        let need_dim = |kind: &str| -> Result<usize, ConfigError> {
            if self.dim == 0 {
                Err(ConfigError::Value {
                    key: "problem.dim".into(),
                    msg: format!("{kind} needs a positive dimension"),
                })
            } else {
                Ok(self.dim)
            }
        };
        Ok(match self.kind {
            ProblemKind::Quadratic => Box::new(seeded_quadratic(need_dim("quadratic")?, self.seed)),
            ProblemKind::L1 => Box::new(L1::new(need_dim("l1")?)),
            ProblemKind::L2Norm => Box::new(L2Norm::new(need_dim("l2norm")?)),
            ProblemKind::Box => {
                let d = need_dim("box")?;
                Box::new(BoxIndicator::new(
                    DVector::from_element(d, -1.0),
                    DVector::from_element(d, 1.0),
                )?)
            }
            ProblemKind::QuadraticRankDeficient => {
                let cols = need_dim("quadratic_rank_deficient")?;
                let rows = self.rows.unwrap_or(cols.saturating_sub(2).max(1));
                Box::new(seeded_rank_deficient_quadratic(rows, cols, self.seed))
            }
            ProblemKind::CustomCsv => {
                let read = |rel: &str| -> Result<String, ConfigError> {
                    let p = base.join(rel);
                    std::fs::read_to_string(&p).map_err(|source| ConfigError::Io { path: p, source })
                };
                let m = require(self.matrix_path.as_deref(), "problem.matrix_path")?;
                let b = require(self.b_path.as_deref(), "problem.b_path")?;
                let a = parse_matrix_csv(&read(m)?)?;
                let rhs = parse_vector_csv(&read(b)?)?;
                Box::new(Quadratic::new("custom_csv", a, rhs)?)
            }
        })
    }

    /// Seed pair `x_0 = x_1` for the run.
    pub fn seed_points(&self, dim: usize) -> DVector<f64> {
        match self.x_init {
            XInit::Zero => DVector::zeros(dim),
            XInit::RandomUnit => random_unit_vector(dim, self.seed.wrapping_add(1)),
        }
    }

    /// Canonical key-value snapshot, suitable as a sidecar and re-parsable
    /// as a config.
    pub fn snapshot(&self) -> String {
        let s = &self.schedule;
        let mut out = String::new();
        let _ = writeln!(out, "problem.kind = {}", self.kind.name());
        if self.dim > 0 {
            let _ = writeln!(out, "problem.dim = {}", self.dim);
        }
        let _ = writeln!(out, "problem.seed = {}", self.seed);
        if let Some(rows) = self.rows {
            let _ = writeln!(out, "problem.rows = {rows}");
        }
        if let Some(p) = &self.matrix_path {
            let _ = writeln!(out, "problem.matrix_path = {p}");
        }
        if let Some(p) = &self.b_path {
            let _ = writeln!(out, "problem.b_path = {p}");
        }
        let _ = writeln!(out, "schedule.alpha = {}", s.alpha);
        let _ = writeln!(out, "schedule.q = {}", s.q);
        let _ = writeln!(out, "schedule.c = {}", s.c);
        let _ = writeln!(out, "schedule.p = {}", s.p);
        let _ = writeln!(out, "schedule.lambda0 = {}", s.lambda0);
        let _ = writeln!(out, "schedule.delta = {}", s.delta);
        let _ = writeln!(out, "run.iters = {}", self.iters);
        if let Some(n) = self.record_every {
            let _ = writeln!(out, "run.record_every = {n}");
        }
        let _ = writeln!(out, "run.dense_iterates = {}", self.dense_iterates);
        let _ = writeln!(
            out,
            "run.x_init = {}",
            match self.x_init {
                XInit::Zero => "zero",
                XInit::RandomUnit => "random_unit",
            }
        );
        let _ = writeln!(out, "diagnostics.window_fraction = {}", self.window_fraction);
        out
    }
}
