use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::grid::GridSpec;
use crate::linalg::{dot, sub, Vector};
use crate::objective::Objective;
use crate::operator::{DiagonalOperator, Laplacian, ScaledOperator, SharedOperator, SumOperator};

/// `J(x) = 1/2 (x - c)' (D + alpha R) (x - c)` with `D` diagonal,
/// exponentially decaying, and `R` the 1D Dirichlet Laplacian.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    alpha: f64,
    d_diag: Vector,
    regularizer: SharedOperator,
    hessian: SharedOperator,
    center: Vector,
}

impl QuadraticProblem {
    /// `D_ii = exp(-decay_span * i / (n - 1))`, `i = 0..n`, so that
    /// `cond(D) = exp(decay_span)` for every `n`. The minimiser `c` is drawn
    /// uniformly from `(-1, 1)^n` with the given seed.
    pub fn build(n: usize, alpha: f64, decay_span: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let center = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Self::with_center(alpha, decay_span, center)
    }

    pub fn with_center(alpha: f64, decay_span: f64, center: Vector) -> Result<Self> {
        let n = center.len();
        if n < 2 {
            return Err(Error::InvalidParameter(format!("quadratic needs n >= 2, got {n}")));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        if !(decay_span >= 0.0) || !decay_span.is_finite() {
            return Err(Error::InvalidParameter(format!("decay span must be >= 0, got {decay_span}")));
        }
        let d_diag: Vector = (0..n)
            .map(|i| (-decay_span * i as f64 / (n - 1) as f64).exp())
            .collect();
        let lap: SharedOperator = Arc::new(Laplacian::new(GridSpec::line(n, 1.0)?, 1));
        let regularizer: SharedOperator = Arc::new(ScaledOperator::new(alpha, lap));
        let hessian: SharedOperator = Arc::new(SumOperator::new(vec![
            Arc::new(DiagonalOperator::new(d_diag.clone())),
            regularizer.clone(),
        ])?);
        Ok(Self { alpha, d_diag, regularizer, hessian, center })
    }

    pub fn n(&self) -> usize {
        self.center.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn d_diag(&self) -> &[f64] {
        &self.d_diag
    }

    /// Unique minimiser `c`.
    pub fn minimizer(&self) -> &[f64] {
        &self.center
    }

    /// `D + alpha R`.
    pub fn hessian(&self) -> &SharedOperator {
        &self.hessian
    }

    /// `alpha R`, the regularizer Hessian.
    pub fn regularizer(&self) -> &SharedOperator {
        &self.regularizer
    }

    pub fn quad_eval(&self, x: &[f64]) -> Result<(f64, Vector)> {
        check_len(self.n(), x.len())?;
        let r = sub(x, &self.center);
        let g = self.hessian.apply(&r)?;
        Ok((0.5 * dot(&r, &g), g))
    }
}

impl Objective for QuadraticProblem {
    fn dim(&self) -> usize {
        self.n()
    }
    fn eval(&self, x: &[f64]) -> Result<(f64, Vector)> {
        self.quad_eval(x)
    }
    fn reg_hessian_at(&self, _x: &[f64]) -> SharedOperator {
        self.regularizer.clone()
    }
}
