use std::sync::Arc;

use rayon::prelude::*;
use reginit::lbfgs::{lbfgs_minimize, steepest_descent_minimize, MemorySize, OptimizerConfig, RunRecord};
use reginit::problems::{load_pgm, make_disc_pair, ImageBuffer, QuadraticProblem, RegistrationProblem};
use reginit::strategy::StrategyParams;
use reginit::{Objective, StrategyRegistry};

use crate::config::{ExperimentSpec, ImageSource, ProblemSpec, STEEPEST_DESCENT};
use crate::error::{BenchError, BenchResult};

/// One output line. Per-repetition rows carry integer counts; aggregated
/// rows carry means.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub strategy: String,
    pub ell: MemorySize,
    pub alpha: f64,
    pub iterations: f64,
    pub fevals: f64,
    pub avg_ls: f64,
    pub reduction: f64,
    pub wall_time_s: f64,
    pub converged_by: String,
    /// Quadratic problem only.
    pub rel_error: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Cell<'a> {
    strategy: &'a str,
    ell: MemorySize,
    alpha: f64,
    rep: usize,
}

enum Prepared {
    Quadratic { n: usize, decay_span: f64 },
    Registration { reference: ImageBuffer, template: ImageBuffer, regularizer: reginit::problems::Regularizer },
}

fn prepare(problem: &ProblemSpec) -> BenchResult<Prepared> {
    Ok(match problem {
        ProblemSpec::Quadratic { n, decay_span } => Prepared::Quadratic { n: *n, decay_span: *decay_span },
        ProblemSpec::Registration { images, regularizer } => {
            let (reference, template) = match images {
                ImageSource::Discs { size, radius_ref, radius_tpl, offset } => {
                    make_disc_pair(*size, *radius_ref, *radius_tpl, (*offset, 0.0))?
                }
                ImageSource::Files { reference, template } => (load_pgm(reference)?, load_pgm(template)?),
            };
            if reference.width() != template.width() || reference.height() != template.height() {
                return Err(BenchError::config("template", "reference and template sizes differ"));
            }
            Prepared::Registration { reference, template, regularizer: *regularizer }
        }
    })
}

fn failed_row(cell: &Cell<'_>, why: &str) -> ReportRow {
    ReportRow {
        strategy: cell.strategy.to_string(),
        ell: cell.ell,
        alpha: cell.alpha,
        iterations: f64::NAN,
        fevals: f64::NAN,
        avg_ls: f64::NAN,
        reduction: f64::NAN,
        wall_time_s: f64::NAN,
        converged_by: format!("error: {why}"),
        rel_error: None,
    }
}

fn row_from(cell: &Cell<'_>, r: &RunRecord) -> ReportRow {
    ReportRow {
        strategy: cell.strategy.to_string(),
        ell: cell.ell,
        alpha: cell.alpha,
        iterations: r.iterations as f64,
        fevals: r.fevals as f64,
        avg_ls: r.avg_ls_per_iter,
        reduction: r.reduction,
        wall_time_s: r.wall_time,
        converged_by: r.converged_by.as_str().to_string(),
        rel_error: r.final_rel_error,
    }
}

fn run_cell(spec: &ExperimentSpec, prepared: &Prepared, registry: &StrategyRegistry, cell: &Cell<'_>) -> ReportRow {
    let params = StrategyParams { fair_factor: spec.fair_factor };
    let strategy = if cell.strategy == STEEPEST_DESCENT {
        Arc::new(reginit::strategy::Identity) as Arc<dyn reginit::InitStrategy>
    } else {
        match registry.create_with(cell.strategy, &params) {
            Ok(s) => s,
            Err(e) => return failed_row(cell, &e.to_string()),
        }
    };
    let mut cfg = OptimizerConfig::new(strategy);
    cfg.memory = cell.ell;
    cfg.max_iter = spec.max_iter;

    let problem: Box<dyn Objective> = match prepared {
        Prepared::Quadratic { n, decay_span } => {
            match QuadraticProblem::build(*n, cell.alpha, *decay_span, spec.seed.wrapping_add(cell.rep as u64)) {
                Ok(q) => {
                    cfg.stopping.solution = Some(q.minimizer().to_vec());
                    Box::new(q)
                }
                Err(e) => return failed_row(cell, &e.to_string()),
            }
        }
        Prepared::Registration { reference, template, regularizer } => {
            match RegistrationProblem::new(reference.clone(), template.clone(), cell.alpha, *regularizer) {
                Ok(p) => Box::new(p),
                Err(e) => return failed_row(cell, &e.to_string()),
            }
        }
    };
    let x0 = vec![0.0; problem.dim()];
    let out = if cell.strategy == STEEPEST_DESCENT {
        steepest_descent_minimize(problem.as_ref(), &x0, &cfg)
    } else {
        lbfgs_minimize(problem.as_ref(), &x0, &cfg)
    };
    match out {
        Ok(o) => row_from(cell, &o.record),
        Err(e) => failed_row(cell, &e.to_string()),
    }
}

/// Runs every (strategy, memory, alpha, repetition) cell in that nesting
/// order. Individual run failures become rows; only problem setup errors
/// (unreadable images, bad spec) abort.
///
/// `threads <= 1` runs sequentially. Output order never depends on the
/// thread count.
pub fn run_experiment(spec: &ExperimentSpec, threads: usize) -> BenchResult<Vec<ReportRow>> {
    let registry = StrategyRegistry::with_builtins();
    spec.validate(&registry)?;
    let prepared = prepare(&spec.problem)?;

    let mut cells = Vec::with_capacity(spec.cell_count());
    for strategy in &spec.strategies {
        for &ell in &spec.memories {
            for &alpha in &spec.alphas {
                for rep in 0..spec.repetitions {
                    cells.push(Cell { strategy, ell, alpha, rep });
                }
            }
        }
    }

    if threads <= 1 {
        return Ok(cells.iter().map(|c| run_cell(spec, &prepared, &registry, c)).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| BenchError::config("parallel", e.to_string()))?;
    Ok(pool.install(|| cells.par_iter().map(|c| run_cell(spec, &prepared, &registry, c)).collect()))
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Collapses consecutive rows sharing (strategy, memory, alpha) into their
/// mean. `converged_by` becomes the most frequent reason (earliest on ties).
pub fn aggregate(rows: &[ReportRow]) -> Vec<ReportRow> {
    let mut out: Vec<ReportRow> = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let key = (&rows[start].strategy, rows[start].ell, rows[start].alpha.to_bits());
        let mut end = start + 1;
        while end < rows.len() && (&rows[end].strategy, rows[end].ell, rows[end].alpha.to_bits()) == key {
            end += 1;
        }
        let group = &rows[start..end];
        let mut reason = &group[0].converged_by;
        let mut best = 0;
        for r in group {
            let count = group.iter().filter(|o| o.converged_by == r.converged_by).count();
            if count > best {
                best = count;
                reason = &r.converged_by;
            }
        }
        let rel_error = if group.iter().all(|r| r.rel_error.is_some()) {
            Some(mean(group.iter().map(|r| r.rel_error.unwrap())))
        } else {
            None
        };
        out.push(ReportRow {
            strategy: group[0].strategy.clone(),
            ell: group[0].ell,
            alpha: group[0].alpha,
            iterations: mean(group.iter().map(|r| r.iterations)),
            fevals: mean(group.iter().map(|r| r.fevals)),
            avg_ls: mean(group.iter().map(|r| r.avg_ls)),
            reduction: mean(group.iter().map(|r| r.reduction)),
            wall_time_s: mean(group.iter().map(|r| r.wall_time_s)),
            converged_by: reason.clone(),
            rel_error,
        });
        start = end;
    }
    out
}
