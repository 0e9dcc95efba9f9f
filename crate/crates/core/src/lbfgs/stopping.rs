use crate::linalg::{dist2, dist_inf, norm2, norm_inf, Vector};

/// Relative tolerances of the three-part stopping rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopTolerances {
    /// Objective change.
    pub eps_j: f64,
    /// Iterate change.
    pub eps_w: f64,
    /// Gradient size.
    pub eps_g: f64,
}

impl Default for StopTolerances {
    fn default() -> Self {
        Self { eps_j: 1e-5, eps_w: 1e-1, eps_g: 1e-2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoppingCriteria {
    pub tolerances: StopTolerances,
    /// Absolute `|g|_inf` below which the run always stops.
    pub grad_abs: f64,
    /// Known minimiser. When set, the run stops on
    /// `|x - x*| / |x*| <= solution_rel_tol` instead of the three-part rule.
    pub solution: Option<Vector>,
    pub solution_rel_tol: f64,
}

impl Default for StoppingCriteria {
    fn default() -> Self {
        Self {
            tolerances: StopTolerances::default(),
            grad_abs: 1e-12,
            solution: None,
            solution_rel_tol: 1e-5,
        }
    }
}

impl StoppingCriteria {
    pub fn rel_error(&self, x: &[f64]) -> Option<f64> {
        self.solution.as_ref().map(|s| {
            let scale = norm2(s);
            let d = dist2(x, s);
            if scale > 0.0 {
                d / scale
            } else {
                d
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopReason {
    /// `|g|_inf` below the absolute floor.
    Gradient,
    /// Objective change, step and gradient tests all satisfied.
    AllThree,
    /// Reached the known minimiser to the requested relative error.
    RelativeError,
    MaxIter,
    LineSearchFailure,
    /// PCG or strategy failure.
    Breakdown,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Gradient => "gradient",
            Self::AllThree => "all-three",
            Self::RelativeError => "rel-error",
            Self::MaxIter => "max-iter",
            Self::LineSearchFailure => "line-search-failure",
            Self::Breakdown => "breakdown",
        }
    }

    pub fn is_failure(self) -> bool {
        matches!(self, Self::LineSearchFailure | Self::Breakdown)
    }
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Objective value, iterate and gradient at one iteration.
#[derive(Debug, Clone, Copy)]
pub struct Snapshot<'a> {
    pub value: f64,
    pub x: &'a [f64],
    pub gradient: &'a [f64],
}

/// Stopping test after a completed iteration.
pub fn check_stopping(
    prev: Snapshot<'_>,
    cur: Snapshot<'_>,
    j0: f64,
    iterations: usize,
    max_iter: usize,
    criteria: &StoppingCriteria,
) -> Option<StopReason> {
    let g_inf = norm_inf(cur.gradient);
    if g_inf <= criteria.grad_abs {
        return Some(StopReason::Gradient);
    }
    match criteria.rel_error(cur.x) {
        Some(e) => {
            if e <= criteria.solution_rel_tol {
                return Some(StopReason::RelativeError);
            }
        }
        None => {
            let t = &criteria.tolerances;
            let scale_j = 1.0 + j0.abs();
            let dj = (prev.value - cur.value).abs() <= t.eps_j * scale_j;
            let dw = dist_inf(prev.x, cur.x) <= t.eps_w * (1.0 + norm_inf(cur.x));
            let dg = g_inf <= t.eps_g * scale_j;
            if dj && dw && dg {
                return Some(StopReason::AllThree);
            }
        }
    }
    (iterations >= max_iter).then_some(StopReason::MaxIter)
}
