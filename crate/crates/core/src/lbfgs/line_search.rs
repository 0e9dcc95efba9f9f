use crate::error::{Error, Result};
use crate::linalg::{all_finite, dot, Vector};
use crate::objective::Objective;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmijoConfig {
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Step contraction factor in (0, 1).
    pub shrink: f64,
    pub max_trials: usize,
}

impl Default for ArmijoConfig {
    fn default() -> Self {
        Self { c1: 1e-4, shrink: 0.5, max_trials: 50 }
    }
}

impl ArmijoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c1 < 1.0) || !(self.shrink > 0.0 && self.shrink < 1.0) || self.max_trials == 0 {
            return Err(Error::InvalidParameter(format!("invalid Armijo settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LineSearchOutcome {
    pub step: f64,
    /// Objective evaluations spent, the accepted one included.
    pub trials: usize,
    pub x: Vector,
    pub value: f64,
    pub gradient: Vector,
}

/// Backtracks `t = 1, s, s^2, ...` until `J(x + t d) <= J0 + c1 t g0'd`.
///
/// Trial points with a non-finite value or gradient are rejected. On
/// exhaustion returns [`Error::LineSearchFailure`].
pub fn armijo_backtrack(
    obj: &dyn Objective,
    x: &[f64],
    d: &[f64],
    j0: f64,
    g0: &[f64],
    cfg: &ArmijoConfig,
) -> Result<LineSearchOutcome> {
    let slope = dot(g0, d);
    let mut step = 1.0;
    let mut trial = vec![0.0; x.len()];
    for trials in 1..=cfg.max_trials {
        for ((t, xi), di) in trial.iter_mut().zip(x).zip(d) {
            *t = xi + step * di;
        }
        let (value, gradient) = obj.eval(&trial)?;
        if value.is_finite() && value <= j0 + cfg.c1 * step * slope && all_finite(&gradient) {
            return Ok(LineSearchOutcome { step, trials, x: trial, value, gradient });
        }
        step *= cfg.shrink;
    }
    Err(Error::LineSearchFailure { trials: cfg.max_trials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::FnObjective;

    fn half_norm() -> FnObjective {
        FnObjective::unregularized(2, |x| (0.5 * dot(x, x), x.to_vec()))
    }

    #[test]
    fn unit_step_accepted_first() {
        let obj = half_norm();
        let out = armijo_backtrack(&obj, &[1.0, 0.0], &[-1.0, 0.0], 0.5, &[1.0, 0.0], &ArmijoConfig::default()).unwrap();
        assert_eq!(out.step, 1.0);
        assert_eq!(out.trials, 1);
        assert_eq!(out.value, 0.0);
    }

    #[test]
    fn overlong_step_backtracks() {
        // t = 1 gives J = 4.5, t = 0.5 gives J = 0.5 = J0 (no sufficient
        // decrease), t = 0.25 lands on the minimiser
        let obj = half_norm();
        let out = armijo_backtrack(&obj, &[1.0, 0.0], &[-4.0, 0.0], 0.5, &[1.0, 0.0], &ArmijoConfig::default()).unwrap();
        assert_eq!(out.step, 0.25);
        assert_eq!(out.trials, 3);
    }

    #[test]
    fn ascent_direction_fails() {
        let obj = half_norm();
        let cfg = ArmijoConfig { max_trials: 10, ..ArmijoConfig::default() };
        let err = armijo_backtrack(&obj, &[1.0, 0.0], &[1.0, 0.0], 0.5, &[1.0, 0.0], &cfg).unwrap_err();
        assert!(matches!(err, Error::LineSearchFailure { trials: 10 }));
    }

    #[test]
    fn non_finite_trials_rejected() {
        let obj = FnObjective::unregularized(1, |x| {
            if x[0] < -0.5 {
                (f64::NAN, vec![f64::NAN])
            } else {
                (0.5 * x[0] * x[0], vec![x[0]])
            }
        });
        let out = armijo_backtrack(&obj, &[1.0], &[-2.0], 0.5, &[1.0], &ArmijoConfig::default()).unwrap();
        assert_eq!(out.step, 0.5);
        assert_eq!(out.trials, 2);
    }

    #[test]
    fn config_validation() {
        assert!(ArmijoConfig { shrink: 1.0, ..Default::default() }.validate().is_err());
        assert!(ArmijoConfig { c1: 0.0, ..Default::default() }.validate().is_err());
        assert!(ArmijoConfig::default().validate().is_ok());
    }
}
