use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::baselines::FixedTestConfig;
use crate::engine::{EstimationPovm, PolicyKind};
use crate::error::{Error, Result};
use crate::family::{FamilyConfig, HypothesisSet, DEFAULT_RESOLUTION_DEG};
use crate::measurement::{DEFAULT_LAMBDA_GRID, DEFAULT_THETA_GRID};

/// Every test the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Sequential(PolicyKind),
    Lht,
    Blht,
    Lvt,
    Blvt,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Sequential(PolicyKind::Alht),
        Method::Sequential(PolicyKind::AlhtPlus),
        Method::Sequential(PolicyKind::Alvt),
        Method::Lht,
        Method::Blht,
        Method::Lvt,
        Method::Blvt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sequential(k) => k.name(),
            Method::Lht => "LHT",
            Method::Blht => "bLHT",
            Method::Lvt => "LVT",
            Method::Blvt => "bLVT",
        }
    }

    /// Stable identifier used in seed derivation; independent of the order
    /// methods are listed in a config.
    pub fn id(self) -> u64 {
        Method::ALL.iter().position(|&m| m == self).unwrap() as u64
    }

    pub fn is_sequential(self) -> bool {
        matches!(self, Method::Sequential(_))
    }

    pub fn needs_simple_null(self) -> bool {
        matches!(self, Method::Lht | Method::Blht)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method `{s}`")))
    }
}

/// One experiment: a testing problem, a truth and a grid of budgets.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub family: FamilyConfig,
    pub null_set: HypothesisSet,
    pub alt_set: HypothesisSet,
    pub truth_deg: f64,
    pub methods: Vec<Method>,
    pub budgets: Vec<usize>,
    pub runs: usize,
    pub eps0: f64,
    /// Two-sided sequential tests when set.
    pub eps1: Option<f64>,
    pub master_seed: u64,
    pub resolution_deg: f64,
    pub n_ic: usize,
    pub n_joint: usize,
    /// Blocked baselines use one joint measurement per this many copies.
    pub block_size: usize,
    pub estimation_povm: EstimationPovm,
    pub lambda_grid: usize,
    pub theta_grid: usize,
}

const KEYS: [&str; 18] = [
    "r_z",
    "r_x",
    "null",
    "alt",
    "truth",
    "methods",
    "budgets",
    "runs",
    "eps0",
    "eps1",
    "master_seed",
    "resolution",
    "n_ic",
    "n_joint",
    "block_size",
    "estimation_povm",
    "lambda_grid",
    "theta_grid",
];

const REQUIRED: [&str; 8] = ["r_z", "r_x", "null", "alt", "truth", "methods", "budgets", "master_seed"];

/// Largest joint measurement the harness accepts (a 256-dimensional POVM).
const MAX_JOINT: usize = 8;

fn config_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

struct Entry {
    line: usize,
    value: String,
}

fn value<T: FromStr>(entries: &HashMap<&str, Entry>, key: &str) -> Result<Option<T>>
where
    T::Err: fmt::Display,
{
    entries
        .get(key)
        .map(|e| {
            e.value.parse::<T>().map_err(|err| Error::Parse {
                line: e.line,
                message: format!("`{key}`: cannot parse `{}`: {err}", e.value),
            })
        })
        .transpose()
}

fn list<T: FromStr>(entries: &HashMap<&str, Entry>, key: &str) -> Result<Option<Vec<T>>>
where
    T::Err: fmt::Display,
{
    entries
        .get(key)
        .map(|e| {
            e.value
                .split(',')
                .map(|item| {
                    item.trim().parse::<T>().map_err(|err| Error::Parse {
                        line: e.line,
                        message: format!("`{key}`: cannot parse `{}`: {err}", item.trim()),
                    })
                })
                .collect()
        })
        .transpose()
}

impl ExperimentConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }

    /// Copy layout of a fixed-copy method at budget `n`; `None` for
    /// sequential methods.
    pub fn fixed_layout(&self, method: Method, n: usize) -> Option<Result<FixedTestConfig>> {
        match method {
            Method::Sequential(_) => None,
            Method::Lht | Method::Lvt => Some(FixedTestConfig::single(n, self.n_joint, self.eps0)),
            Method::Blht | Method::Blvt => Some(FixedTestConfig::with_block_size(
                n,
                self.n_joint,
                self.block_size,
                self.eps0,
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.null_set.is_disjoint_from(&self.alt_set) {
            return Err(config_err(
                "alt",
                format!("null {} and alternative {} overlap", self.null_set, self.alt_set),
            ));
        }
        if !self.truth_deg.is_finite() {
            return Err(config_err("truth", "must be a finite angle"));
        }
        if self.methods.is_empty() {
            return Err(config_err("methods", "at least one method is required"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(config_err("methods", format!("`{m}` is listed twice")));
            }
            if m.needs_simple_null() && self.null_set.as_simple().is_none() {
                return Err(config_err(
                    "methods",
                    format!("`{m}` needs a single-point null, got {}", self.null_set),
                ));
            }
        }
        if self.budgets.is_empty() {
            return Err(config_err("budgets", "at least one budget is required"));
        }
        if self.budgets[0] == 0 {
            return Err(config_err("budgets", "budgets must be positive"));
        }
        if self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config_err("budgets", "budgets must be strictly ascending"));
        }
        if self.runs == 0 {
            return Err(config_err("runs", "need at least one run"));
        }
        if !(self.eps0 > 0.0 && self.eps0 < 1.0) {
            return Err(config_err("eps0", format!("{} is outside (0,1)", self.eps0)));
        }
        if let Some(e) = self.eps1 {
            if !(e > 0.0 && e < 1.0) {
                return Err(config_err("eps1", format!("{e} is outside (0,1)")));
            }
        }
        if !(self.resolution_deg > 0.0 && self.resolution_deg.is_finite()) {
            return Err(config_err("resolution", "must be a positive number of degrees"));
        }
        if self.n_joint == 0 || self.n_joint > MAX_JOINT {
            return Err(config_err("n_joint", format!("must lie in 1..={MAX_JOINT}")));
        }
        if self.block_size == 0 {
            return Err(config_err("block_size", "must be >= 1"));
        }
        if self.lambda_grid < 2 {
            return Err(config_err("lambda_grid", "need >= 2 points"));
        }
        if self.theta_grid < 2 {
            return Err(config_err("theta_grid", "need >= 2 points"));
        }
        for m in &self.methods {
            for &n in &self.budgets {
                if let Some(Err(e)) = self.fixed_layout(*m, n) {
                    return Err(config_err("budgets", format!("`{m}` at budget {n}: {e}")));
                }
            }
        }
        Ok(())
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    /// Strict `key = value` format; `#` starts a comment.
    fn from_str(text: &str) -> Result<Self> {
        let mut entries: HashMap<&str, Entry> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            let (key, val) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim();
            let val = val.trim();
            let Some(&known) = KEYS.iter().find(|&&k| k == key) else {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown key `{key}`"),
                });
            };
            if val.is_empty() {
                return Err(Error::Parse {
                    line,
                    message: format!("`{key}` has no value"),
                });
            }
            if let Some(prev) = entries.get(known) {
                return Err(Error::Parse {
                    line,
                    message: format!("`{key}` already set on line {}", prev.line),
                });
            }
            entries.insert(
                known,
                Entry {
                    line,
                    value: val.to_string(),
                },
            );
        }
        for key in REQUIRED {
            if !entries.contains_key(key) {
                return Err(config_err(key, "missing required key"));
            }
        }

        let r_z: f64 = value(&entries, "r_z")?.unwrap();
        let r_x: f64 = value(&entries, "r_x")?.unwrap();
        let family = FamilyConfig::new(r_z, r_x).map_err(|e| config_err("r_z", e.to_string()))?;
        let null_set: HypothesisSet = value(&entries, "null")?.unwrap();
        let alt_set: HypothesisSet = value(&entries, "alt")?.unwrap();
        let cfg = ExperimentConfig {
            family,
            null_set,
            alt_set,
            truth_deg: value(&entries, "truth")?.unwrap(),
            methods: list(&entries, "methods")?.unwrap(),
            budgets: list(&entries, "budgets")?.unwrap(),
            runs: value(&entries, "runs")?.unwrap_or(200),
            eps0: value(&entries, "eps0")?.unwrap_or(0.05),
            eps1: value(&entries, "eps1")?,
            master_seed: value(&entries, "master_seed")?.unwrap(),
            resolution_deg: value(&entries, "resolution")?.unwrap_or(DEFAULT_RESOLUTION_DEG),
            n_ic: value(&entries, "n_ic")?.unwrap_or(6),
            n_joint: value(&entries, "n_joint")?.unwrap_or(4),
            block_size: value(&entries, "block_size")?.unwrap_or(10),
            estimation_povm: value(&entries, "estimation_povm")?.unwrap_or(EstimationPovm::Computational),
            lambda_grid: value(&entries, "lambda_grid")?.unwrap_or(DEFAULT_LAMBDA_GRID),
            theta_grid: value(&entries, "theta_grid")?.unwrap_or(DEFAULT_THETA_GRID),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
