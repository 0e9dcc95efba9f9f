use std::io::Write;
use std::path::Path;

use reginit::lbfgs::{lbfgs_minimize, steepest_descent_minimize, MemorySize, OptimizerConfig, RunOutput};
use reginit::problems::{ImageBuffer, RegistrationProblem, Regularizer};
use reginit::strategy::StrategyParams;
use reginit::StrategyRegistry;

use crate::config::STEEPEST_DESCENT;
use crate::error::{BenchError, BenchResult};

#[derive(Debug, Clone)]
pub struct RegisterOptions {
    pub strategy: String,
    pub alpha: f64,
    pub regularizer: Regularizer,
    pub memory: MemorySize,
    pub max_iter: usize,
}

pub fn register_images(
    reference: ImageBuffer,
    template: ImageBuffer,
    opts: &RegisterOptions,
) -> BenchResult<(RegistrationProblem, RunOutput)> {
    let problem = RegistrationProblem::new(reference, template, opts.alpha, opts.regularizer)?;
    let tag = opts.strategy.to_ascii_lowercase();
    let strategy = if tag == STEEPEST_DESCENT {
        std::sync::Arc::new(reginit::strategy::Identity) as std::sync::Arc<dyn reginit::InitStrategy>
    } else {
        StrategyRegistry::with_builtins()
            .create_with(&tag, &StrategyParams::default())
            .map_err(|e| BenchError::config("strategy", e.to_string()))?
    };
    let mut cfg = OptimizerConfig::new(strategy);
    cfg.memory = opts.memory;
    cfg.max_iter = opts.max_iter;
    let x0 = vec![0.0; problem.n_unknowns()];
    let out = if tag == STEEPEST_DESCENT {
        steepest_descent_minimize(&problem, &x0, &cfg)?
    } else {
        lbfgs_minimize(&problem, &x0, &cfg)?
    };
    Ok((problem, out))
}

/// One line per cell: centre coordinates and displacement, `x,y,ux,uy`.
pub fn write_field_csv<W: Write>(problem: &RegistrationProblem, u: &[f64], out: W) -> BenchResult<()> {
    let n = problem.grid().cells();
    if u.len() != 2 * n {
        return Err(reginit::Error::DimensionMismatch { expected: 2 * n, found: u.len() }.into());
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "ux", "uy"])?;
    for i in 0..n {
        let (x, y) = problem.cell_center(i);
        w.write_record([x.to_string(), y.to_string(), u[i].to_string(), u[n + i].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_field_csv(problem: &RegistrationProblem, u: &[f64], path: &Path) -> BenchResult<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_field_csv(problem, u, f)
}
