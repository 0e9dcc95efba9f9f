use std::fmt;
use std::sync::Arc;

use crate::error::Result;
use crate::linalg::Vector;
use crate::operator::{SharedOperator, ZeroOperator};

/// A smooth objective `J = D + S` with access to the regularizer Hessian.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    /// Value and gradient at `x`.
    fn eval(&self, x: &[f64]) -> Result<(f64, Vector)>;

    /// Hessian of the regularizer `S` at `x`. Constant for quadratic
    /// regularizers.
    fn reg_hessian_at(&self, x: &[f64]) -> SharedOperator;
}

type EvalFn = dyn Fn(&[f64]) -> (f64, Vector) + Send + Sync;

/// Objective built from a closure and a fixed regularizer Hessian.
pub struct FnObjective {
    dim: usize,
    eval: Box<EvalFn>,
    reg_hessian: SharedOperator,
}

impl FnObjective {
    pub fn new<F>(dim: usize, eval: F, reg_hessian: SharedOperator) -> Self
    where
        F: Fn(&[f64]) -> (f64, Vector) + Send + Sync + 'static,
    {
        Self { dim, eval: Box::new(eval), reg_hessian }
    }

    /// Objective without a regularizer (`A = 0`).
    pub fn unregularized<F>(dim: usize, eval: F) -> Self
    where
        F: Fn(&[f64]) -> (f64, Vector) + Send + Sync + 'static,
    {
        Self::new(dim, eval, Arc::new(ZeroOperator::new(dim)))
    }
}

impl fmt::Debug for FnObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnObjective").field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl Objective for FnObjective {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> Result<(f64, Vector)> {
        crate::error::check_len(self.dim, x.len())?;
        Ok((self.eval)(x))
    }
    fn reg_hessian_at(&self, _x: &[f64]) -> SharedOperator {
        self.reg_hessian.clone()
    }
}
