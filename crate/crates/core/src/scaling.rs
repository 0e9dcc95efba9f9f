//! Secant-fitted scalars for the initial Hessian approximation.
//!
//! For `B0 = tau*I + A` the secant condition `B0 p = y` reduces to
//! `tau*p - z = 0` with `z = y - A p`. The four fits below solve that
//! overdetermined scalar equation in different least-squares senses:
//!
//! | scheme | fit | value |
//! |--------|-----|-------|
//! | Dp | min `|tau p - z|` | `p'z / p'p` |
//! | Dz | min `|p - z / tau|` | `z'z / p'z` |
//! | Du | total least squares on `[p, -z]` | `(|z|^2 - lambda) / p'z` |
//! | GM | geometric mean of Dp and Dz | `|z| / |p|` |
//!
//! with `|Dp| <= |Du| <= |Dz|` and `|Dp| <= GM <= |Dz|`.
//!
//! The classic Oren-Luenberger scalings [`tau_lsy`] / [`tau_lsp`] scale the
//! inverse metric `H0 = gamma*I` instead.

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, Vector};
use crate::operator::LinearOperator;

/// Default lower bound for `tau` (and the first-iteration value).
pub const TAU_MIN: f64 = 1e-6;

/// `|p'z| <= DELTA_REL * |p| |z|` counts as orthogonal for Dz and Du.
pub const DELTA_REL: f64 = 1e-12;

/// Floor applied to the Oren-Luenberger `gamma`.
pub const GAMMA_FLOOR: f64 = 1e-12;

/// A step `p = x_{k+1} - x_k` and gradient change `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecantPair {
    p: Vector,
    y: Vector,
    py: f64,
}

impl SecantPair {
    pub fn new(p: Vector, y: Vector) -> Result<Self> {
        check_len(p.len(), y.len())?;
        let py = dot(&p, &y);
        Ok(Self { p, y, py })
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Cached `p'y`.
    pub fn py(&self) -> f64 {
        self.py
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauResult {
    pub tau: f64,
    /// The lower bound was active.
    pub clamped: bool,
    /// `p'z` was numerically zero and the GM value was used instead.
    pub fallback: bool,
}

impl TauResult {
    fn floor(raw: f64, tau_min: f64) -> Self {
        if raw < tau_min {
            Self { tau: tau_min, clamped: true, fallback: false }
        } else {
            Self { tau: raw, clamped: false, fallback: false }
        }
    }

    pub(crate) fn fixed(tau: f64) -> Self {
        Self { tau, clamped: false, fallback: false }
    }
}

/// `z = y - A p`.
pub fn compute_z(pair: &SecantPair, a: &dyn LinearOperator) -> Result<Vector> {
    let ap = a.apply(pair.p())?;
    Ok(pair.y().iter().zip(&ap).map(|(y, v)| y - v).collect())
}

struct Moments {
    pp: f64,
    zz: f64,
    pz: f64,
}

impl Moments {
    fn new(p: &[f64], z: &[f64]) -> Result<Self> {
        check_len(p.len(), z.len())?;
        let pp = dot(p, p);
        if pp == 0.0 {
            return Err(Error::DegeneratePair);
        }
        Ok(Self { pp, zz: dot(z, z), pz: dot(p, z) })
    }

    fn orthogonal(&self) -> bool {
        self.pz.abs() <= DELTA_REL * (self.pp * self.zz).sqrt()
    }
}

/// Ordinary least squares in the `p` residual: `max(p'z / p'p, tau_min)`.
pub fn tau_dp(p: &[f64], z: &[f64], tau_min: f64) -> Result<TauResult> {
    let m = Moments::new(p, z)?;
    Ok(TauResult::floor(m.pz / m.pp, tau_min))
}

/// Ordinary least squares in the `z` residual: `max(z'z / p'z, tau_min)`.
pub fn tau_dz(p: &[f64], z: &[f64], tau_min: f64) -> Result<TauResult> {
    let m = Moments::new(p, z)?;
    if m.orthogonal() {
        return Ok(gm_fallback(&m, tau_min));
    }
    Ok(TauResult::floor(m.zz / m.pz, tau_min))
}

/// Total least squares fit of `eta1 p ~ eta2 z` with `|eta| = 1`, rescaled
/// to `tau = eta1 / eta2`.
pub fn tau_du(p: &[f64], z: &[f64], tau_min: f64) -> Result<TauResult> {
    let m = Moments::new(p, z)?;
    if m.orthogonal() {
        return Ok(gm_fallback(&m, tau_min));
    }
    // smallest eigenvalue of [[|p|^2, -d], [-d, |z|^2]] as det / lambda_max,
    // with det = |p|^2 |z - (d/|p|^2) p|^2 to avoid cancellation
    let c = m.pz / m.pp;
    let perp2: f64 = p.iter().zip(z).map(|(pi, zi)| (zi - c * pi).powi(2)).sum();
    let det = m.pp * perp2;
    let lambda_max = 0.5 * (m.pp + m.zz + ((m.pp - m.zz).powi(2) + 4.0 * m.pz * m.pz).sqrt());
    let lambda = det / lambda_max;
    let raw = if m.zz >= m.pp {
        (m.zz - lambda) / m.pz
    } else {
        m.pz / (m.pp - lambda)
    };
    Ok(TauResult::floor(raw, tau_min))
}

/// Smallest eigenvalue `lambda` of the total-least-squares problem, computed
/// with the closed form. Exposed for diagnostics.
pub fn tls_lambda(p: &[f64], z: &[f64]) -> Result<f64> {
    let m = Moments::new(p, z)?;
    Ok(0.5 * (m.pp + m.zz - ((m.pp - m.zz).powi(2) + 4.0 * m.pz * m.pz).sqrt()))
}

/// Geometric mean regression: `max(|z| / |p|, tau_min)`.
pub fn tau_gm(p: &[f64], z: &[f64], tau_min: f64) -> Result<TauResult> {
    let m = Moments::new(p, z)?;
    Ok(TauResult::floor((m.zz / m.pp).sqrt(), tau_min))
}

fn gm_fallback(m: &Moments, tau_min: f64) -> TauResult {
    let mut r = TauResult::floor((m.zz / m.pp).sqrt(), tau_min);
    r.fallback = true;
    r
}

fn positive_curvature(pair: &SecantPair) -> Result<f64> {
    let py = pair.py();
    if py > 0.0 {
        Ok(py)
    } else {
        Err(Error::CurvatureViolation { py })
    }
}

fn floor_gamma(g: f64) -> TauResult {
    if g < GAMMA_FLOOR {
        TauResult { tau: GAMMA_FLOOR, clamped: true, fallback: false }
    } else {
        TauResult::fixed(g)
    }
}

/// Oren-Luenberger `gamma = y'p / y'y` for `H0 = gamma*I`.
pub fn tau_lsy(pair: &SecantPair) -> Result<TauResult> {
    let py = positive_curvature(pair)?;
    Ok(floor_gamma(py / dot(pair.y(), pair.y())))
}

/// Oren-Luenberger `gamma = p'p / y'p` for `H0 = gamma*I`.
pub fn tau_lsp(pair: &SecantPair) -> Result<TauResult> {
    let py = positive_curvature(pair)?;
    Ok(floor_gamma(dot(pair.p(), pair.p()) / py))
}
