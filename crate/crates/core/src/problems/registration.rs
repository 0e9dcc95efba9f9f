use std::sync::Arc;

use crate::error::{check_len, Error, Result};
use crate::grid::GridSpec;
use crate::linalg::{dot, Vector};
use crate::objective::Objective;
use crate::operator::{Biharmonic, Elastic, ScaledOperator, SharedOperator};

use super::image::{sample, ImageBuffer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    /// `Delta^2` per displacement component.
    Curvature,
    /// `mu*(-Delta) + (mu + lambda)*grad div`.
    Elastic { mu: f64, lambda: f64 },
}

impl Regularizer {
    pub fn elastic() -> Self {
        Self::Elastic { mu: 1.0, lambda: 0.0 }
    }
}

/// Single-level 2D registration on a cell-centred grid over `[0,1]^2`.
///
/// The unknown is the displacement `u` (all x-components, then all
/// y-components), `phi(x) = x + u(x)`, and
///
/// `J(u) = 1/2 h^2 sum (T(phi) - R)^2 + alpha/2 h^2 u' L u`
///
/// with `h^2` the cell area. The regularizer Hessian is `alpha h^2 L`.
#[derive(Debug, Clone)]
pub struct RegistrationProblem {
    reference: ImageBuffer,
    template: ImageBuffer,
    grid: GridSpec,
    alpha: f64,
    regularizer: Regularizer,
    reg_hessian: SharedOperator,
}

impl RegistrationProblem {
    pub fn new(reference: ImageBuffer, template: ImageBuffer, alpha: f64, regularizer: Regularizer) -> Result<Self> {
        if reference.width() != template.width() || reference.height() != template.height() {
            return Err(Error::InvalidParameter(format!(
                "reference is {}x{} but template is {}x{}",
                reference.width(),
                reference.height(),
                template.width(),
                template.height()
            )));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        let (w, h) = (reference.width(), reference.height());
        let grid = GridSpec::new(vec![w, h], vec![1.0 / w as f64, 1.0 / h as f64])?;
        let base: SharedOperator = match regularizer {
            Regularizer::Curvature => Arc::new(Biharmonic::new(grid.clone(), 2)),
            Regularizer::Elastic { mu, lambda } => Arc::new(Elastic::new(grid.clone(), mu, lambda)?),
        };
        let reg_hessian = Arc::new(ScaledOperator::new(alpha * cell_volume(&grid), base));
        Ok(Self { reference, template, grid, alpha, regularizer, reg_hessian })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn regularizer(&self) -> Regularizer {
        self.regularizer
    }

    pub fn reference(&self) -> &ImageBuffer {
        &self.reference
    }

    pub fn template(&self) -> &ImageBuffer {
        &self.template
    }

    /// Length of the displacement vector.
    pub fn n_unknowns(&self) -> usize {
        2 * self.grid.cells()
    }

    /// Cell-centre coordinates of cell `idx` in `[0,1]^2`.
    pub fn cell_center(&self, idx: usize) -> (f64, f64) {
        let w = self.reference.width();
        let h = self.grid.spacing();
        (((idx % w) as f64 + 0.5) * h[0], ((idx / w) as f64 + 0.5) * h[1])
    }

    /// Template sampled at `x + u(x)`.
    pub fn warped_template(&self, u: &[f64]) -> Result<ImageBuffer> {
        check_len(self.n_unknowns(), u.len())?;
        let n = self.grid.cells();
        let data = (0..n).map(|i| self.sample_at(i, u).0).collect();
        ImageBuffer::new(self.reference.width(), self.reference.height(), data)
    }

    /// `1/2 h^2 sum (T(x+u) - R)^2`.
    pub fn ssd(&self, u: &[f64]) -> Result<f64> {
        check_len(self.n_unknowns(), u.len())?;
        let vol = cell_volume(&self.grid);
        let n = self.grid.cells();
        Ok(0.5 * vol * (0..n).map(|i| (self.sample_at(i, u).0 - self.reference.data()[i]).powi(2)).sum::<f64>())
    }

    #[inline]
    fn sample_at(&self, i: usize, u: &[f64]) -> (f64, f64, f64) {
        let n = self.grid.cells();
        let h = self.grid.spacing();
        let (cx, cy) = self.cell_center(i);
        // physical -> pixel coordinates (pixel centres at integers)
        let px = (cx + u[i]) / h[0] - 0.5;
        let py = (cy + u[n + i]) / h[1] - 0.5;
        let (v, g) = sample(&self.template, px, py);
        (v, g.dx / h[0], g.dy / h[1])
    }

    pub fn registration_eval(&self, u: &[f64]) -> Result<(f64, Vector)> {
        check_len(self.n_unknowns(), u.len())?;
        let n = self.grid.cells();
        let vol = cell_volume(&self.grid);
        let mut grad = vec![0.0; 2 * n];
        let mut ssd = 0.0;
        for i in 0..n {
            let (t, dx, dy) = self.sample_at(i, u);
            let r = t - self.reference.data()[i];
            ssd += r * r;
            grad[i] = vol * r * dx;
            grad[n + i] = vol * r * dy;
        }
        let au = self.reg_hessian.apply(u)?;
        for (g, a) in grad.iter_mut().zip(&au) {
            *g += a;
        }
        Ok((0.5 * vol * ssd + 0.5 * dot(u, &au), grad))
    }
}

fn cell_volume(grid: &GridSpec) -> f64 {
    grid.spacing().iter().product()
}

impl Objective for RegistrationProblem {
    fn dim(&self) -> usize {
        self.n_unknowns()
    }
    fn eval(&self, x: &[f64]) -> Result<(f64, Vector)> {
        self.registration_eval(x)
    }
    fn reg_hessian_at(&self, _x: &[f64]) -> SharedOperator {
        self.reg_hessian.clone()
    }
}
