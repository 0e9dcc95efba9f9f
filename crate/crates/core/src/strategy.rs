//! Initial-metric strategies behind a common trait, registered by name.
//!
//! Built-in tags: `id`, `lsy`, `lsp` (scaled identity `H0 = gamma*I`) and
//! `fair`, `dp`, `dz`, `du`, `gm` (`B0 = tau*I + A`). Lookup is
//! case-insensitive. Extra strategies can be added with
//! [`StrategyRegistry::register`].

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::operator::{SharedOperator, ShiftedOperator};
use crate::scaling::{
    compute_z, tau_dp, tau_du, tau_dz, tau_gm, tau_lsp, tau_lsy, SecantPair, TauResult,
};

/// The base step of the two-loop recursion.
#[derive(Debug, Clone)]
pub enum InitialMetric {
    /// `H0 = gamma*I`, applied as a plain scaling.
    InverseScaled(f64),
    /// `B0 = tau*I + A`, inverted with PCG.
    Shifted(ShiftedOperator),
}

impl InitialMetric {
    /// The scalar carried by the metric (`gamma` or `tau`).
    pub fn scalar(&self) -> f64 {
        match self {
            Self::InverseScaled(g) => *g,
            Self::Shifted(op) => op.tau(),
        }
    }
}

/// Everything a strategy may look at when building the metric for one
/// iteration.
#[derive(Debug, Clone, Copy)]
pub struct MetricRequest<'a> {
    /// Newest stored secant pair, `None` before the first accepted update.
    pub pair: Option<&'a SecantPair>,
    /// Regularizer Hessian `A_k` at the current iterate.
    pub reg_hessian: &'a SharedOperator,
    pub iteration: usize,
    pub tau_min: f64,
    /// Scalar this strategy returned at iteration 0 of the current run.
    pub first_scalar: Option<f64>,
}

pub trait InitStrategy: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Whether the metric includes the regularizer Hessian (and so needs a
    /// linear solve per iteration).
    fn uses_regularizer(&self) -> bool;

    fn initial_metric(&self, req: &MetricRequest<'_>) -> Result<(InitialMetric, TauResult)>;
}

/// Convenience wrapper over [`InitStrategy::initial_metric`].
pub fn build_initial_metric(
    strategy: &dyn InitStrategy,
    pair: Option<&SecantPair>,
    reg_hessian: &SharedOperator,
    iteration: usize,
    tau_min: f64,
) -> Result<(InitialMetric, TauResult)> {
    strategy.initial_metric(&MetricRequest {
        pair,
        reg_hessian,
        iteration,
        tau_min,
        first_scalar: None,
    })
}

/// `H0 = I` every iteration.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl InitStrategy for Identity {
    fn name(&self) -> &'static str {
        "id"
    }
    fn uses_regularizer(&self) -> bool {
        false
    }
    fn initial_metric(&self, _req: &MetricRequest<'_>) -> Result<(InitialMetric, TauResult)> {
        Ok((InitialMetric::InverseScaled(1.0), TauResult::fixed(1.0)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrenLuenbergerKind {
    /// `y'p / y'y`
    Lsy,
    /// `p'p / y'p`
    Lsp,
}

/// Oren-Luenberger scaled identity `H0 = gamma*I`, `gamma = 1` until a
/// pair is available.
#[derive(Debug, Clone, Copy)]
pub struct OrenLuenberger(pub OrenLuenbergerKind);

impl InitStrategy for OrenLuenberger {
    fn name(&self) -> &'static str {
        match self.0 {
            OrenLuenbergerKind::Lsy => "lsy",
            OrenLuenbergerKind::Lsp => "lsp",
        }
    }
    fn uses_regularizer(&self) -> bool {
        false
    }
    fn initial_metric(&self, req: &MetricRequest<'_>) -> Result<(InitialMetric, TauResult)> {
        let r = match req.pair {
            None => TauResult::fixed(1.0),
            Some(pair) => match self.0 {
                OrenLuenbergerKind::Lsy => tau_lsy(pair)?,
                OrenLuenbergerKind::Lsp => tau_lsp(pair)?,
            },
        };
        Ok((InitialMetric::InverseScaled(r.tau), r))
    }
}

/// Manually scaled `B0 = tau*I + A` with `tau = factor * A_00`, fixed for
/// the whole run.
#[derive(Debug, Clone, Copy)]
pub struct Fair {
    pub factor: f64,
}

impl Default for Fair {
    fn default() -> Self {
        Self { factor: 1e-3 }
    }
}

impl InitStrategy for Fair {
    fn name(&self) -> &'static str {
        "fair"
    }
    fn uses_regularizer(&self) -> bool {
        true
    }
    fn initial_metric(&self, req: &MetricRequest<'_>) -> Result<(InitialMetric, TauResult)> {
        let r = match req.first_scalar {
            Some(t) => TauResult::fixed(t),
            None => {
                let a00 = req.reg_hessian.diag().first().copied().unwrap_or(0.0);
                let raw = self.factor * a00;
                if raw < req.tau_min {
                    TauResult { tau: req.tau_min, clamped: true, fallback: false }
                } else {
                    TauResult::fixed(raw)
                }
            }
        };
        let op = ShiftedOperator::new(r.tau, req.reg_hessian.clone());
        Ok((InitialMetric::Shifted(op), r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecantFitKind {
    Dp,
    Dz,
    Du,
    Gm,
}

/// `B0 = tau*I + A` with `tau` fitted to `tau*p = y - A p`.
#[derive(Debug, Clone, Copy)]
pub struct SecantFit(pub SecantFitKind);

impl InitStrategy for SecantFit {
    fn name(&self) -> &'static str {
        match self.0 {
            SecantFitKind::Dp => "dp",
            SecantFitKind::Dz => "dz",
            SecantFitKind::Du => "du",
            SecantFitKind::Gm => "gm",
        }
    }
    fn uses_regularizer(&self) -> bool {
        true
    }
    fn initial_metric(&self, req: &MetricRequest<'_>) -> Result<(InitialMetric, TauResult)> {
        let r = match req.pair {
            None => TauResult::fixed(req.tau_min),
            Some(pair) => {
                let z = compute_z(pair, req.reg_hessian.as_ref())?;
                let p = pair.p();
                match self.0 {
                    SecantFitKind::Dp => tau_dp(p, &z, req.tau_min)?,
                    SecantFitKind::Dz => tau_dz(p, &z, req.tau_min)?,
                    SecantFitKind::Du => tau_du(p, &z, req.tau_min)?,
                    SecantFitKind::Gm => tau_gm(p, &z, req.tau_min)?,
                }
            }
        };
        let op = ShiftedOperator::new(r.tau, req.reg_hessian.clone());
        Ok((InitialMetric::Shifted(op), r))
    }
}

/// Knobs shared by strategy constructors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyParams {
    pub fair_factor: f64,
}

impl Default for StrategyParams {
    fn default() -> Self {
        Self { fair_factor: 1e-3 }
    }
}

pub type StrategyFactory = Box<dyn Fn(&StrategyParams) -> Arc<dyn InitStrategy> + Send + Sync>;

pub const BUILTIN_NAMES: [&str; 8] = ["id", "lsy", "lsp", "fair", "dp", "dz", "du", "gm"];

/// Name-keyed strategy constructors, kept in registration order.
pub struct StrategyRegistry {
    entries: Vec<(String, StrategyFactory)>,
}

impl fmt::Debug for StrategyRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn with_builtins() -> Self {
        use OrenLuenbergerKind::*;
        use SecantFitKind::*;
        let mut reg = Self::empty();
        reg.register("id", |_| Arc::new(Identity));
        reg.register("lsy", |_| Arc::new(OrenLuenberger(Lsy)));
        reg.register("lsp", |_| Arc::new(OrenLuenberger(Lsp)));
        reg.register("fair", |p| Arc::new(Fair { factor: p.fair_factor }));
        reg.register("dp", |_| Arc::new(SecantFit(Dp)));
        reg.register("dz", |_| Arc::new(SecantFit(Dz)));
        reg.register("du", |_| Arc::new(SecantFit(Du)));
        reg.register("gm", |_| Arc::new(SecantFit(Gm)));
        reg
    }

    /// Adds or replaces the constructor for `name` (stored lowercase).
    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&StrategyParams) -> Arc<dyn InitStrategy> + Send + Sync + 'static,
    {
        let key = name.to_ascii_lowercase();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = Box::new(factory),
            None => self.entries.push((key, Box::new(factory))),
        }
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|(k, _)| k.as_str()).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        let key = name.trim().to_ascii_lowercase();
        self.entries.iter().any(|(k, _)| *k == key)
    }

    pub fn create(&self, name: &str) -> Result<Arc<dyn InitStrategy>> {
        self.create_with(name, &StrategyParams::default())
    }

    pub fn create_with(&self, name: &str, params: &StrategyParams) -> Result<Arc<dyn InitStrategy>> {
        let key = name.trim().to_ascii_lowercase();
        self.entries
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, f)| f(params))
            .ok_or_else(|| Error::UnknownStrategy(name.to_string()))
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}
