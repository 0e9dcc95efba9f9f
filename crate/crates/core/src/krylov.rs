//! Jacobi-preconditioned conjugate gradients for SPD operators.

use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, dot, norm2, Vector};
use crate::operator::LinearOperator;

/// Preconditioner diagonal entries are clamped below at this value.
pub const DIAG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    Jacobi,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgConfig {
    pub rel_tol: f64,
    pub max_iter: usize,
    pub preconditioner: Preconditioner,
}

impl Default for PcgConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            max_iter: 100,
            preconditioner: Preconditioner::Jacobi,
        }
    }
}

impl PcgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParameter(format!(
                "pcg needs rel_tol > 0 and max_iter >= 1 (got {}, {})",
                self.rel_tol, self.max_iter
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PcgResult {
    pub solution: Vector,
    pub iterations: usize,
    /// `|b - A x| / |b|`, recomputed from the returned solution.
    pub final_rel_residual: f64,
    pub converged: bool,
}

/// Solves `A x = b` from a zero initial guess.
///
/// Running out of iterations is not an error: the last iterate (the
/// energy-norm best point of the explored Krylov space) is returned with
/// `converged == false`.
pub fn pcg_solve(op: &dyn LinearOperator, b: &[f64], cfg: &PcgConfig) -> Result<PcgResult> {
    cfg.validate()?;
    let n = op.dim();
    check_len(n, b.len())?;
    let b_norm = norm2(b);
    if !b_norm.is_finite() {
        return Err(Error::NumericalBreakdown("non-finite right-hand side".into()));
    }
    if b_norm == 0.0 {
        return Ok(PcgResult {
            solution: vec![0.0; n],
            iterations: 0,
            final_rel_residual: 0.0,
            converged: true,
        });
    }

    let inv_diag: Vector = match cfg.preconditioner {
        Preconditioner::Jacobi => op.diag().iter().map(|d| 1.0 / d.max(DIAG_FLOOR)).collect(),
        Preconditioner::None => vec![1.0; n],
    };

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vector = r.iter().zip(&inv_diag).map(|(ri, mi)| ri * mi).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        if norm2(&r) <= cfg.rel_tol * b_norm {
            break;
        }
        op.apply_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !pap.is_finite() || !rz.is_finite() {
            return Err(Error::NumericalBreakdown(format!(
                "non-finite curvature in CG at iteration {iterations}"
            )));
        }
        if pap <= 0.0 {
            // lost positive curvature (round-off on a nearly singular system)
            break;
        }
        let step = rz / pap;
        axpy(step, &p, &mut x);
        axpy(-step, &ap, &mut r);
        iterations += 1;

        for ((zi, ri), mi) in z.iter_mut().zip(&r).zip(&inv_diag) {
            *zi = ri * mi;
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }

    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NumericalBreakdown("non-finite CG iterate".into()));
    }
    op.apply_into(&x, &mut ap);
    let true_res = b.iter().zip(&ap).map(|(bi, ai)| (bi - ai) * (bi - ai)).sum::<f64>().sqrt();
    let final_rel_residual = true_res / b_norm;
    Ok(PcgResult {
        solution: x,
        iterations,
        final_rel_residual,
        converged: final_rel_residual <= cfg.rel_tol,
    })
}
