//! L-BFGS driver with a per-iteration initial metric, plus the
//! steepest-descent baseline.
//!
//! One iteration:
//!
//! 1. ask the strategy for `H0` (scaled identity) or `B0 = tau*I + A_k`,
//! 2. `d = -H_k g` by the two-loop recursion, inverting `B0` with PCG,
//! 3. Armijo backtracking from the unit step,
//! 4. store `(p, y)` unless `y'p <= curvature_threshold * |y| |p|`,
//! 5. stopping test.

mod line_search;
mod memory;
mod stopping;

use std::sync::Arc;
use std::time::Instant;

pub use line_search::{armijo_backtrack, ArmijoConfig, LineSearchOutcome};
pub use memory::{two_loop_apply, CenterStep, LbfgsMemory, MemorySize, StoredPair, TwoLoopResult};
pub use stopping::{check_stopping, Snapshot, StopReason, StopTolerances, StoppingCriteria};

use crate::error::{check_len, Error, Result};
use crate::krylov::PcgConfig;
use crate::linalg::{all_finite, dot, norm2, sub, Vector};
use crate::objective::Objective;
use crate::scaling::{SecantPair, TauResult, TAU_MIN};
use crate::strategy::{Identity, InitStrategy, InitialMetric, MetricRequest};

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub memory: MemorySize,
    pub max_iter: usize,
    pub stopping: StoppingCriteria,
    pub armijo: ArmijoConfig,
    /// Relative curvature threshold for storing a pair.
    pub curvature_threshold: f64,
    pub pcg: PcgConfig,
    pub tau_min: f64,
    pub strategy: Arc<dyn InitStrategy>,
}

impl OptimizerConfig {
    pub fn new(strategy: Arc<dyn InitStrategy>) -> Self {
        Self {
            memory: MemorySize::Bounded(5),
            max_iter: 5000,
            stopping: StoppingCriteria::default(),
            armijo: ArmijoConfig::default(),
            curvature_threshold: 1e-10,
            pcg: PcgConfig::default(),
            tau_min: TAU_MIN,
            strategy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be positive".into()));
        }
        if let MemorySize::Bounded(0) = self.memory {
            return Err(Error::InvalidParameter("memory must hold at least one pair".into()));
        }
        let t = &self.stopping.tolerances;
        if !(t.eps_j > 0.0 && t.eps_w > 0.0 && t.eps_g > 0.0 && self.stopping.solution_rel_tol > 0.0) {
            return Err(Error::InvalidParameter("stopping tolerances must be positive".into()));
        }
        if !(self.curvature_threshold >= 0.0) {
            return Err(Error::InvalidParameter("curvature threshold must be non-negative".into()));
        }
        self.armijo.validate()?;
        self.pcg.validate()
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::new(Arc::new(Identity))
    }
}

/// Per-run statistics.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub iterations: usize,
    /// Combined value-and-gradient evaluations, the initial one included.
    pub fevals: usize,
    /// Line-search evaluations per iteration (an accepted unit step counts 1).
    pub avg_ls_per_iter: f64,
    pub initial_value: f64,
    pub final_value: f64,
    /// `J(x_final) / J(x0)`.
    pub reduction: f64,
    pub wall_time: f64,
    pub converged_by: StopReason,
    /// Scalar of the initial metric (`tau` or `gamma`) at every iteration.
    pub tau_trace: Vec<f64>,
    pub clamped_taus: usize,
    pub fallback_taus: usize,
    pub skipped_updates: usize,
    /// Iterations where the two-loop direction was not a descent direction
    /// and `-g` was used instead.
    pub descent_resets: usize,
    pub pcg_iterations: usize,
    pub pcg_unconverged: usize,
    /// `|x - x*| / |x*|` when the stopping criteria carry a solution.
    pub final_rel_error: Option<f64>,
    /// Message of the error that ended the run, if any.
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub x: Vector,
    pub record: RunRecord,
}

/// State exposed to observers right before the line search.
#[derive(Debug)]
pub struct IterationView<'a> {
    pub iteration: usize,
    pub x: &'a [f64],
    pub value: f64,
    pub gradient: &'a [f64],
    pub direction: &'a [f64],
    pub metric: Option<&'a InitialMetric>,
    pub tau: Option<TauResult>,
    pub memory: Option<&'a LbfgsMemory>,
    pub descent_reset: bool,
}

pub trait IterationObserver {
    fn observe(&mut self, view: &IterationView<'_>);
}

impl<F: FnMut(&IterationView<'_>)> IterationObserver for F {
    fn observe(&mut self, view: &IterationView<'_>) {
        self(view)
    }
}

struct NoObserver;

impl IterationObserver for NoObserver {
    fn observe(&mut self, _: &IterationView<'_>) {}
}

pub fn lbfgs_minimize(obj: &dyn Objective, x0: &[f64], cfg: &OptimizerConfig) -> Result<RunOutput> {
    lbfgs_minimize_observed(obj, x0, cfg, &mut NoObserver)
}

pub fn lbfgs_minimize_observed(
    obj: &dyn Objective,
    x0: &[f64],
    cfg: &OptimizerConfig,
    observer: &mut dyn IterationObserver,
) -> Result<RunOutput> {
    run(obj, x0, cfg, Method::Lbfgs, observer)
}

/// Gradient descent `d = -g` with the same line search and stopping rules.
/// `cfg.strategy` and `cfg.memory` are ignored.
pub fn steepest_descent_minimize(obj: &dyn Objective, x0: &[f64], cfg: &OptimizerConfig) -> Result<RunOutput> {
    run(obj, x0, cfg, Method::SteepestDescent, &mut NoObserver)
}

pub fn steepest_descent_minimize_observed(
    obj: &dyn Objective,
    x0: &[f64],
    cfg: &OptimizerConfig,
    observer: &mut dyn IterationObserver,
) -> Result<RunOutput> {
    run(obj, x0, cfg, Method::SteepestDescent, observer)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Method {
    Lbfgs,
    SteepestDescent,
}

struct Tally {
    fevals: usize,
    tau_trace: Vec<f64>,
    clamped: usize,
    fallback: usize,
    skipped: usize,
    resets: usize,
    pcg_iterations: usize,
    pcg_unconverged: usize,
}

fn run(
    obj: &dyn Objective,
    x0: &[f64],
    cfg: &OptimizerConfig,
    method: Method,
    observer: &mut dyn IterationObserver,
) -> Result<RunOutput> {
    cfg.validate()?;
    check_len(obj.dim(), x0.len())?;
    if let Some(s) = &cfg.stopping.solution {
        check_len(x0.len(), s.len())?;
    }
    let start = Instant::now();

    let mut x = x0.to_vec();
    let (mut value, mut grad) = obj.eval(&x)?;
    if !value.is_finite() || !all_finite(&grad) {
        return Err(Error::NumericalBreakdown("objective not finite at the starting point".into()));
    }
    let j0 = value;
    let mut tally = Tally {
        fevals: 1,
        tau_trace: Vec::new(),
        clamped: 0,
        fallback: 0,
        skipped: 0,
        resets: 0,
        pcg_iterations: 0,
        pcg_unconverged: 0,
    };
    let mut memory = LbfgsMemory::new(cfg.memory.capacity(cfg.max_iter));
    let mut first_scalar: Option<f64> = None;
    let mut iterations = 0usize;
    let mut failure: Option<String> = None;

    let mut reason = initial_stop(&x, &grad, &cfg.stopping);

    while reason.is_none() {
        let direction = match method {
            Method::SteepestDescent => {
                let d: Vector = grad.iter().map(|v| -v).collect();
                observer.observe(&IterationView {
                    iteration: iterations,
                    x: &x,
                    value,
                    gradient: &grad,
                    direction: &d,
                    metric: None,
                    tau: None,
                    memory: None,
                    descent_reset: false,
                });
                d
            }
            Method::Lbfgs => {
                match lbfgs_direction(obj, cfg, &x, &grad, &memory, iterations, &mut first_scalar, &mut tally) {
                    Ok((d, metric, tau, reset)) => {
                        observer.observe(&IterationView {
                            iteration: iterations,
                            x: &x,
                            value,
                            gradient: &grad,
                            direction: &d,
                            metric: Some(&metric),
                            tau: Some(tau),
                            memory: Some(&memory),
                            descent_reset: reset,
                        });
                        d
                    }
                    Err(e) => {
                        failure = Some(e.to_string());
                        reason = Some(StopReason::Breakdown);
                        break;
                    }
                }
            }
        };

        let ls = match armijo_backtrack(obj, &x, &direction, value, &grad, &cfg.armijo) {
            Ok(ls) => ls,
            Err(e) => {
                if let Error::LineSearchFailure { trials } = e {
                    tally.fevals += trials;
                    reason = Some(StopReason::LineSearchFailure);
                } else {
                    reason = Some(StopReason::Breakdown);
                }
                failure = Some(e.to_string());
                break;
            }
        };
        tally.fevals += ls.trials;

        if method == Method::Lbfgs {
            let p = sub(&ls.x, &x);
            let y = sub(&ls.gradient, &grad);
            let py = dot(&p, &y);
            if py > cfg.curvature_threshold * norm2(&p) * norm2(&y) && py > 0.0 {
                memory.push(SecantPair::new(p, y)?, iterations)?;
            } else {
                tally.skipped += 1;
            }
        }
        iterations += 1;

        let prev_x = std::mem::replace(&mut x, ls.x);
        let prev_g = std::mem::replace(&mut grad, ls.gradient);
        let prev_value = std::mem::replace(&mut value, ls.value);
        reason = check_stopping(
            Snapshot { value: prev_value, x: &prev_x, gradient: &prev_g },
            Snapshot { value, x: &x, gradient: &grad },
            j0,
            iterations,
            cfg.max_iter,
            &cfg.stopping,
        );
    }

    let wall_time = start.elapsed().as_secs_f64();
    let avg_ls = if iterations > 0 { (tally.fevals - 1) as f64 / iterations as f64 } else { 0.0 };
    let record = RunRecord {
        iterations,
        fevals: tally.fevals,
        avg_ls_per_iter: avg_ls,
        initial_value: j0,
        final_value: value,
        reduction: if j0 != 0.0 { value / j0 } else { 0.0 },
        wall_time,
        converged_by: reason.expect("loop exits with a reason"),
        tau_trace: tally.tau_trace,
        clamped_taus: tally.clamped,
        fallback_taus: tally.fallback,
        skipped_updates: tally.skipped,
        descent_resets: tally.resets,
        pcg_iterations: tally.pcg_iterations,
        pcg_unconverged: tally.pcg_unconverged,
        final_rel_error: cfg.stopping.rel_error(&x),
        failure,
    };
    Ok(RunOutput { x, record })
}

fn initial_stop(x: &[f64], grad: &[f64], criteria: &StoppingCriteria) -> Option<StopReason> {
    if crate::linalg::norm_inf(grad) <= criteria.grad_abs {
        return Some(StopReason::Gradient);
    }
    match criteria.rel_error(x) {
        Some(e) if e <= criteria.solution_rel_tol => Some(StopReason::RelativeError),
        _ => None,
    }
}

#[allow(clippy::too_many_arguments)]
fn lbfgs_direction(
    obj: &dyn Objective,
    cfg: &OptimizerConfig,
    x: &[f64],
    grad: &[f64],
    memory: &LbfgsMemory,
    iteration: usize,
    first_scalar: &mut Option<f64>,
    tally: &mut Tally,
) -> Result<(Vector, InitialMetric, TauResult, bool)> {
    let a = obj.reg_hessian_at(x);
    let req = MetricRequest {
        pair: memory.newest(),
        reg_hessian: &a,
        iteration,
        tau_min: cfg.tau_min,
        first_scalar: *first_scalar,
    };
    let (metric, tau) = cfg.strategy.initial_metric(&req)?;
    first_scalar.get_or_insert(metric.scalar());
    tally.tau_trace.push(tau.tau);
    tally.clamped += usize::from(tau.clamped);
    tally.fallback += usize::from(tau.fallback);

    let center = match &metric {
        InitialMetric::InverseScaled(gamma) => CenterStep::Scaled(*gamma),
        InitialMetric::Shifted(op) => CenterStep::Solve { op, pcg: &cfg.pcg },
    };
    let out = two_loop_apply(memory, grad, center)?;
    tally.pcg_iterations += out.pcg_iterations;
    tally.pcg_unconverged += usize::from(!out.pcg_converged);

    let mut d: Vector = out.r.iter().map(|v| -v).collect();
    let reset = !(dot(&d, grad) < 0.0) || !all_finite(&d);
    if reset {
        d = grad.iter().map(|v| -v).collect();
        tally.resets += 1;
    }
    Ok((d, metric, tau, reset))
}
