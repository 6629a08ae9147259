//! Univariate margins given by their survival functions.
//!
//! [`RegularlyVaryingMargin`] covers survival functions `F̄(t) = t^(-α) L(t)`
//! whose slowly varying part has a finite positive limit `l`. The shipped
//! families have closed-form inverses; user-supplied survival functions are
//! inverted by bisection.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_positive, Error, Result};

/// Upper end of the bisection bracket for user-supplied margins.
pub const BISECTION_UPPER: f64 = 1e18;
/// Relative tolerance of the bisection inverse.
pub const BISECTION_TOL: f64 = 1e-12;

/// A continuous univariate law on `[0, ∞)` described by its survival function.
pub trait Margin: Send + Sync {
    /// `P(X > t)`; equals 1 for `t ≤ 0`.
    fn survival(&self, t: f64) -> f64;

    /// The `t` with `survival(t) = u`, for `u ∈ (0, 1]`.
    fn inverse_survival(&self, u: f64) -> Result<f64>;
}

fn check_level(u: f64) -> Result<()> {
    if u > 0.0 && u <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("survival level {u} must lie in (0, 1]")))
    }
}

pub type SurvivalFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum MarginFamily {
    /// `F̄(t) = (1 + t)^(-α)`.
    Pareto,
    /// `F̄(t) = [1 + (1 + λ) t^(1/γ)]^(-β)`.
    ParetoIV { lambda: f64, beta: f64, gamma: f64 },
    /// Arbitrary nonincreasing survival function.
    Custom(SurvivalFn),
}

impl fmt::Debug for MarginFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarginFamily::Pareto => write!(f, "Pareto"),
            MarginFamily::ParetoIV { lambda, beta, gamma } => f
                .debug_struct("ParetoIV")
                .field("lambda", lambda)
                .field("beta", beta)
                .field("gamma", gamma)
                .finish(),
            MarginFamily::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Survival function `t^(-α) L(t)` with `L(t) → l > 0`.
#[derive(Debug, Clone)]
pub struct RegularlyVaryingMargin {
    alpha: f64,
    limit: f64,
    family: MarginFamily,
}

impl RegularlyVaryingMargin {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `l = lim_{t→∞} t^α F̄(t)`.
    pub fn slowly_varying_limit(&self) -> f64 {
        self.limit
    }

    pub fn family(&self) -> &MarginFamily {
        &self.family
    }
}

impl Margin for RegularlyVaryingMargin {
    fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match &self.family {
            MarginFamily::Pareto => (-self.alpha * t.ln_1p()).exp(),
            MarginFamily::ParetoIV { lambda, beta, gamma } => {
                (-beta * ((1.0 + lambda) * t.powf(1.0 / gamma)).ln_1p()).exp()
            }
            MarginFamily::Custom(f) => f(t),
        }
    }

    fn inverse_survival(&self, u: f64) -> Result<f64> {
        check_level(u)?;
        match &self.family {
            MarginFamily::Pareto => Ok((-u.ln() / self.alpha).exp_m1()),
            MarginFamily::ParetoIV { lambda, beta, gamma } => {
                let y = (-u.ln() / beta).exp_m1();
                Ok((y / (1.0 + lambda)).powf(*gamma))
            }
            MarginFamily::Custom(f) => bisection_inverse(f.as_ref(), u),
        }
    }
}

/// Pareto margin `F(t) = 1 - (1 + t)^(-α)`; `l = 1`.
pub fn pareto_margin(alpha: f64) -> Result<RegularlyVaryingMargin> {
    check_positive("alpha", alpha)?;
    Ok(RegularlyVaryingMargin { alpha, limit: 1.0, family: MarginFamily::Pareto })
}

/// Pareto type-IV margin `F̄(t) = [1 + (1 + λ) t^(1/γ)]^(-β)`;
/// `α = β/γ`, `l = (1 + λ)^(-β)`.
pub fn pareto4_margin(lambda: f64, beta: f64, gamma: f64) -> Result<RegularlyVaryingMargin> {
    check_positive("lambda", lambda)?;
    check_positive("beta", beta)?;
    check_positive("gamma", gamma)?;
    Ok(RegularlyVaryingMargin {
        alpha: beta / gamma,
        limit: (1.0 + lambda).powf(-beta),
        family: MarginFamily::ParetoIV { lambda, beta, gamma },
    })
}

/// Margin from a user-supplied survival function, inverted by bisection.
pub fn custom_margin(
    alpha: f64,
    limit: f64,
    survival: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> Result<RegularlyVaryingMargin> {
    check_positive("alpha", alpha)?;
    check_positive("slowly varying limit", limit)?;
    Ok(RegularlyVaryingMargin { alpha, limit, family: MarginFamily::Custom(Arc::new(survival)) })
}

/// Solve `survival(t) = u` on `[0, BISECTION_UPPER]`.
pub fn bisection_inverse(survival: &dyn Fn(f64) -> f64, u: f64) -> Result<f64> {
    check_level(u)?;
    let (mut lo, mut hi) = (0.0f64, BISECTION_UPPER);
    if survival(hi) > u {
        return Err(Error::domain(format!(
            "survival level {u} is not reached below t = {BISECTION_UPPER:e}"
        )));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if survival(mid) > u {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= BISECTION_TOL * hi.max(1e-300) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Exponential margin `F̄(t) = exp(-rate·t)`. Light-tailed; used to map
/// Marshall–Olkin lifetimes onto the copula scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialMargin {
    rate: f64,
}

impl ExponentialMargin {
    pub fn rate(&self) -> f64 {
        self.rate
    }
}

pub fn mo_exponential_margin(rate: f64) -> Result<ExponentialMargin> {
    check_positive("rate", rate)?;
    Ok(ExponentialMargin { rate })
}

impl Margin for ExponentialMargin {
    fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            1.0
        } else {
            (-self.rate * t).exp()
        }
    }

    fn inverse_survival(&self, u: f64) -> Result<f64> {
        check_level(u)?;
        Ok(-u.ln() / self.rate)
    }
}

/// Default diagnostic grid: 26 log-spaced points from 10¹ to 10⁶.
pub fn default_t_grid() -> Vec<f64> {
    (0..26).map(|k| 10f64.powf(1.0 + 0.2 * k as f64)).collect()
}

/// Trace of `survival(t·x) / survival(t)` along `t_grid`; converges to
/// `x^(-α)` for a regularly varying margin.
pub fn rv_index_diagnostic(margin: &dyn Margin, x: f64, t_grid: &[f64]) -> Vec<(f64, f64)> {
    t_grid.iter().map(|&t| (t, margin.survival(t * x) / margin.survival(t))).collect()
}
