//! Flat `key = value` run configuration.
//!
//! ```text
//! # quadratic sweep
//! problem     = quadratic
//! n           = 256
//! strategies  = id,lsy,lsp,fair,dp,dz,du,gm
//! memories    = 1,5,10,inf
//! alphas      = 1e-5,1e-3,1e-1
//! repetitions = 1
//! seed        = 7
//! ```
//!
//! Blank lines and `#` comments are ignored. Lists are comma separated.
//! Unknown or repeated keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use reginit::lbfgs::MemorySize;
use reginit::problems::Regularizer;
use reginit::StrategyRegistry;

use crate::error::{BenchError, BenchResult};

/// Steepest-descent baseline tag, accepted next to the strategy tags.
pub const STEEPEST_DESCENT: &str = "sd";

const KEYS: &[&str] = &[
    "problem",
    "n",
    "decay_span",
    "strategies",
    "memories",
    "alphas",
    "repetitions",
    "seed",
    "max_iter",
    "fair_factor",
    "output",
    "size",
    "radius_ref",
    "radius_tpl",
    "offset",
    "reference",
    "template",
    "regularizer",
    "mu",
    "lambda",
];

#[derive(Debug, Clone, PartialEq)]
pub enum ImageSource {
    /// Synthetic smooth discs, template shifted along x.
    Discs { size: usize, radius_ref: f64, radius_tpl: f64, offset: f64 },
    Files { reference: PathBuf, template: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Quadratic { n: usize, decay_span: f64 },
    Registration { images: ImageSource, regularizer: Regularizer },
}

impl ProblemSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Quadratic { .. } => "quadratic",
            Self::Registration { .. } => "registration",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub problem: ProblemSpec,
    /// Strategy tags (lowercase), plus optionally `sd`.
    pub strategies: Vec<String>,
    pub memories: Vec<MemorySize>,
    pub alphas: Vec<f64>,
    pub repetitions: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub fair_factor: f64,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            problem: ProblemSpec::Quadratic { n: 256, decay_span: 14.0 },
            strategies: reginit::strategy::BUILTIN_NAMES.iter().map(|s| s.to_string()).collect(),
            memories: vec![MemorySize::Bounded(5)],
            alphas: vec![1e-3],
            repetitions: 1,
            seed: 7,
            max_iter: 5000,
            fair_factor: 1e-3,
            output: None,
        }
    }
}

impl ExperimentSpec {
    pub fn from_file(path: &Path) -> BenchResult<Self> {
        let text = std::fs::read_to_string(path)?;
        text.parse()
    }

    /// Number of rows `run_experiment` will produce.
    pub fn cell_count(&self) -> usize {
        self.strategies.len() * self.memories.len() * self.alphas.len() * self.repetitions
    }

    pub fn validate(&self, registry: &StrategyRegistry) -> BenchResult<()> {
        if self.strategies.is_empty() {
            return Err(BenchError::config("strategies", "list is empty"));
        }
        for s in &self.strategies {
            if s != STEEPEST_DESCENT && !registry.contains(s) {
                return Err(BenchError::config("strategies", format!("unknown strategy `{s}`")));
            }
        }
        if self.memories.is_empty() {
            return Err(BenchError::config("memories", "list is empty"));
        }
        if self.memories.contains(&MemorySize::Bounded(0)) {
            return Err(BenchError::config("memories", "memory must be at least 1"));
        }
        if self.alphas.is_empty() {
            return Err(BenchError::config("alphas", "list is empty"));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
            return Err(BenchError::config("alphas", format!("alpha must be positive, got {a}")));
        }
        if self.repetitions == 0 {
            return Err(BenchError::config("repetitions", "must be at least 1"));
        }
        if self.max_iter == 0 {
            return Err(BenchError::config("max_iter", "must be at least 1"));
        }
        if !(self.fair_factor > 0.0) {
            return Err(BenchError::config("fair_factor", "must be positive"));
        }
        match &self.problem {
            ProblemSpec::Quadratic { n, decay_span } => {
                if *n < 2 {
                    return Err(BenchError::config("n", "must be at least 2"));
                }
                if !(*decay_span >= 0.0) {
                    return Err(BenchError::config("decay_span", "must be non-negative"));
                }
            }
            ProblemSpec::Registration { images, regularizer } => {
                if let ImageSource::Discs { size, radius_ref, radius_tpl, .. } = images {
                    if *size < 4 {
                        return Err(BenchError::config("size", "must be at least 4"));
                    }
                    if !(*radius_ref > 0.0 && *radius_tpl > 0.0) {
                        return Err(BenchError::config("radius_ref", "radii must be positive"));
                    }
                }
                if let Regularizer::Elastic { mu, lambda } = regularizer {
                    if !(*mu > 0.0) || !(*lambda >= 0.0) {
                        return Err(BenchError::config("mu", "need mu > 0 and lambda >= 0"));
                    }
                }
            }
        }
        Ok(())
    }
}

fn parse_scalar<T: FromStr>(key: &str, value: &str) -> BenchResult<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| BenchError::config(key, format!("cannot parse `{value}`: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> BenchResult<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse_scalar(key, v.trim())).collect()
}

pub fn parse_memory(token: &str) -> Result<MemorySize, String> {
    let t = token.trim();
    if t.eq_ignore_ascii_case("inf") || t == "∞" {
        return Ok(MemorySize::Unbounded);
    }
    t.parse::<usize>().map(MemorySize::Bounded).map_err(|e| format!("cannot parse `{t}`: {e}"))
}

fn parse_memories(value: &str) -> BenchResult<Vec<MemorySize>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse_memory(v).map_err(|m| BenchError::config("memories", m))).collect()
}

pub fn parse_regularizer(name: &str, mu: f64, lambda: f64) -> Result<Regularizer, String> {
    match name.trim().to_ascii_lowercase().as_str() {
        "curvature" => Ok(Regularizer::Curvature),
        "elastic" => Ok(Regularizer::Elastic { mu, lambda }),
        other => Err(format!("unknown regularizer `{other}` (expected curvature or elastic)")),
    }
}

impl FromStr for ExperimentSpec {
    type Err = BenchError;

    fn from_str(text: &str) -> BenchResult<Self> {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(BenchError::config(format!("line {}", lineno + 1), format!("expected key = value, got `{line}`")));
            };
            let key = k.trim().to_ascii_lowercase();
            if !KEYS.contains(&key.as_str()) {
                return Err(BenchError::config(key, "unknown key"));
            }
            if kv.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(BenchError::config(key, "given more than once"));
            }
        }

        let mut spec = ExperimentSpec::default();
        let get = |k: &str| kv.get(k).map(String::as_str);

        if let Some(v) = get("strategies") {
            spec.strategies = v
                .split(',')
                .map(|s| s.trim().to_ascii_lowercase())
                .filter(|s| !s.is_empty())
                .collect();
        }
        if let Some(v) = get("memories") {
            spec.memories = parse_memories(v)?;
        }
        if let Some(v) = get("alphas") {
            spec.alphas = parse_list("alphas", v)?;
        }
        if let Some(v) = get("repetitions") {
            spec.repetitions = parse_scalar("repetitions", v)?;
        }
        if let Some(v) = get("seed") {
            spec.seed = parse_scalar("seed", v)?;
        }
        if let Some(v) = get("fair_factor") {
            spec.fair_factor = parse_scalar("fair_factor", v)?;
        }
        if let Some(v) = get("output") {
            spec.output = Some(PathBuf::from(v));
        }

        let problem = get("problem").unwrap_or("quadratic").to_ascii_lowercase();
        let registration_keys = ["size", "radius_ref", "radius_tpl", "offset", "reference", "template", "regularizer", "mu", "lambda"];
        let quadratic_keys = ["n", "decay_span"];
        match problem.as_str() {
            "quadratic" => {
                if let Some(k) = registration_keys.iter().find(|k| kv.contains_key(**k)) {
                    return Err(BenchError::config(*k, "only valid with problem = registration"));
                }
                let n = get("n").map(|v| parse_scalar("n", v)).transpose()?.unwrap_or(256);
                let decay_span = get("decay_span").map(|v| parse_scalar("decay_span", v)).transpose()?.unwrap_or(14.0);
                spec.problem = ProblemSpec::Quadratic { n, decay_span };
                spec.max_iter = 5000;
            }
            "registration" => {
                if let Some(k) = quadratic_keys.iter().find(|k| kv.contains_key(**k)) {
                    return Err(BenchError::config(*k, "only valid with problem = quadratic"));
                }
                let images = match (get("reference"), get("template")) {
                    (Some(r), Some(t)) => ImageSource::Files { reference: r.into(), template: t.into() },
                    (None, None) => ImageSource::Discs {
                        size: get("size").map(|v| parse_scalar("size", v)).transpose()?.unwrap_or(32),
                        radius_ref: get("radius_ref").map(|v| parse_scalar("radius_ref", v)).transpose()?.unwrap_or(8.0),
                        radius_tpl: get("radius_tpl").map(|v| parse_scalar("radius_tpl", v)).transpose()?.unwrap_or(6.0),
                        offset: get("offset").map(|v| parse_scalar("offset", v)).transpose()?.unwrap_or(2.0),
                    },
                    (Some(_), None) => return Err(BenchError::config("template", "missing (reference is set)")),
                    (None, Some(_)) => return Err(BenchError::config("reference", "missing (template is set)")),
                };
                let mu = get("mu").map(|v| parse_scalar("mu", v)).transpose()?.unwrap_or(1.0);
                let lambda = get("lambda").map(|v| parse_scalar("lambda", v)).transpose()?.unwrap_or(0.0);
                let regularizer = parse_regularizer(get("regularizer").unwrap_or("curvature"), mu, lambda)
                    .map_err(|m| BenchError::config("regularizer", m))?;
                spec.problem = ProblemSpec::Registration { images, regularizer };
                spec.max_iter = 100;
            }
            other => return Err(BenchError::config("problem", format!("unknown problem `{other}`"))),
        }
        if let Some(v) = get("max_iter") {
            spec.max_iter = parse_scalar("max_iter", v)?;
        }
        spec.validate(&StrategyRegistry::with_builtins())?;
        Ok(spec)
    }
}
