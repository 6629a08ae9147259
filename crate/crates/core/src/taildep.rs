//! Tail dependence and exponent functions.
//!
//! Closed forms for the Marshall–Olkin and Pareto-IV examples live next to
//! generic estimators that discretise `u → 0⁺` on a geometric grid and fit
//! `log g(u)` against `log u` by least squares.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copulas::{lower_exceedance, upper_exceedance, Copula, MoParams};
use crate::error::{check_dim, check_positive, Error, Result};
use crate::matpow::{apply_scaling, in_scaling_cone, TailIndexMatrix};

/// Smallest grid point allowed (underflow guard).
pub const GRID_FLOOR: f64 = 1e-12;
pub const MIN_GRID_POINTS: usize = 8;
const RESIDUAL_EPS: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

/// Which prelimit is tracked: the copula (tail dependence function) or the
/// probability of leaving the shrunken box (exponent function).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Cdf,
    Exponent,
}

/// Geometric grid `u_k = u_max · ρ^k`, `k = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitGrid {
    u_max: f64,
    ratio: f64,
    count: usize,
}

impl LimitGrid {
    pub fn new(u_max: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(u_max > 0.0 && u_max < 1.0) {
            return Err(Error::domain(format!("u_max = {u_max} must lie in (0, 1)")));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::domain(format!("grid ratio = {ratio} must lie in (0, 1)")));
        }
        if count < MIN_GRID_POINTS {
            return Err(Error::domain(format!(
                "grid needs at least {MIN_GRID_POINTS} points, got {count}"
            )));
        }
        let smallest = u_max * ratio.powi(count as i32 - 1);
        if smallest < GRID_FLOOR {
            return Err(Error::domain(format!(
                "smallest grid point {smallest:e} is below {GRID_FLOOR:e}"
            )));
        }
        Ok(Self { u_max, ratio, count })
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }
    pub fn ratio(&self) -> f64 {
        self.ratio
    }
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.u_max * self.ratio.powi(k as i32)).collect()
    }
}

impl Default for LimitGrid {
    fn default() -> Self {
        Self { u_max: 1e-2, ratio: 0.5, count: 24 }
    }
}

/// Estimator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub grid: LimitGrid,
    /// Number of trailing grid points used in the fit.
    pub window: usize,
    pub slope_tol: f64,
    pub ratio_tol: f64,
    /// Fitted slopes below this always count as diverging.
    pub slope_floor: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { grid: LimitGrid::default(), window: 12, slope_tol: 0.05, ratio_tol: 1e-3, slope_floor: 0.2 }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window > self.grid.count {
            return Err(Error::domain(format!(
                "fit window {} must lie in [3, {}]",
                self.window, self.grid.count
            )));
        }
        check_positive("slope_tol", self.slope_tol)?;
        check_positive("ratio_tol", self.ratio_tol)?;
        check_positive("slope_floor", self.slope_floor)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    /// Fitted slope exceeds the expected order: the normalised ratio tends to 0.
    TailIndependent,
    NotConverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    /// Estimated limit. For tail functions this is `exp(c)` where `c` is the
    /// intercept of the fit with the slope held at its expected value; for
    /// tail orders it is `exp(intercept)`.
    pub value: f64,
    pub slope: f64,
    /// Intercept of the free least-squares fit of `log g` on `log u`.
    pub intercept: f64,
    /// Raw normalised ratio at the smallest grid point.
    pub last_ratio: f64,
    /// `(u, normalised ratio)` pairs, `u` strictly decreasing.
    pub trace: Vec<(f64, f64)>,
    pub converged: bool,
    pub verdict: Verdict,
    /// Half-open index range `[start, end)` of the fit window within `trace`.
    pub window: (usize, usize),
}

/// Least-squares line through `(x, y)`; returns `(slope, intercept)`.
fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn relative_spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if mean == 0.0 {
        if max == min { 0.0 } else { f64::INFINITY }
    } else {
        (max - min) / mean.abs()
    }
}

/// Prelimit numerator `g(u)` at the scaled point `s = u^A w`:
///
/// | side  | target   | `g`                          |
/// |-------|----------|------------------------------|
/// | lower | cdf      | `C(s)`                       |
/// | upper | cdf      | `C̄(1 - s)`                   |
/// | lower | exponent | `P(U ∈ (s, 1]^c)`            |
/// | upper | exponent | `P(U ∈ [0, 1 - s]^c)`        |
pub fn tail_numerator(c: &dyn Copula, s: &[f64], side: Side, target: Target) -> Result<f64> {
    let s: Vec<f64> = s.iter().map(|x| x.clamp(0.0, 1.0)).collect();
    match (side, target) {
        (Side::Lower, Target::Cdf) => c.cdf(&s),
        (Side::Upper, Target::Cdf) => c.upper_tail(&s),
        (Side::Lower, Target::Exponent) => lower_exceedance(c, &s),
        (Side::Upper, Target::Exponent) => upper_exceedance(c, &s),
    }
}

fn fit_window(trace_g: &[(f64, f64)], window: usize) -> Result<(usize, Vec<(f64, f64)>)> {
    let start = trace_g.len() - window;
    let logs: Vec<(f64, f64)> = trace_g[start..]
        .iter()
        .filter(|&&(_, g)| g > 0.0 && g.is_finite())
        .map(|&(u, g)| (u.ln(), g.ln()))
        .collect();
    if logs.len() < 3 {
        return Err(Error::Degenerate);
    }
    Ok((start, logs))
}

/// Estimate `b_L`, `b_U`, `a_L` or `a_U` at `w` with respect to the matrix
/// index `A`, assuming the slowly varying factor is asymptotically constant
/// (expected slope 1).
pub fn estimate_tail_function(
    c: &dyn Copula,
    a: &TailIndexMatrix,
    w: &[f64],
    config: &EstimatorConfig,
    side: Side,
    target: Target,
) -> Result<TailEstimate> {
    config.validate()?;
    check_dim(c.dim(), a.dim())?;
    check_dim(c.dim(), w.len())?;
    let us = config.grid.points();
    if !in_scaling_cone(a, w, &us) {
        return Err(Error::OutsideCone);
    }
    if w.iter().all(|&x| x == 0.0) {
        return Err(Error::domain("w must have a positive coordinate"));
    }
    let mut numerators = Vec::with_capacity(us.len());
    for &u in &us {
        let s = apply_scaling(a, u, w)?;
        numerators.push((u, tail_numerator(c, &s, side, target)?));
    }
    let (start, logs) = fit_window(&numerators, config.window)?;
    let (slope, intercept) = linear_fit(&logs);
    let expected = 1.0;
    let threshold = (expected - config.slope_tol).max(config.slope_floor);
    if slope < threshold {
        return Err(Error::Diverging { slope, threshold });
    }
    let trace: Vec<(f64, f64)> = numerators.iter().map(|&(u, g)| (u, g / u)).collect();
    let last_ratio = trace.last().map(|p| p.1).unwrap_or(f64::NAN);
    let n = trace.len();

    if slope > expected + config.slope_tol {
        return Ok(TailEstimate {
            value: 0.0,
            slope,
            intercept,
            last_ratio,
            trace,
            converged: false,
            verdict: Verdict::TailIndependent,
            window: (start, n),
        });
    }
    let pinned = logs.iter().map(|&(lu, lg)| lg - expected * lu).sum::<f64>() / logs.len() as f64;
    let tail: Vec<f64> = trace[n - 3..].iter().map(|p| p.1).collect();
    let converged = relative_spread(&tail) <= config.ratio_tol;
    Ok(TailEstimate {
        value: pinned.exp(),
        slope,
        intercept,
        last_ratio,
        trace,
        converged,
        verdict: if converged { Verdict::Converged } else { Verdict::NotConverged },
        window: (start, n),
    })
}

/// Evaluate [`estimate_tail_function`] over many points in parallel; results
/// keep the input order.
pub fn estimate_on_points(
    c: &dyn Copula,
    a: &TailIndexMatrix,
    points: &[Vec<f64>],
    config: &EstimatorConfig,
    side: Side,
    target: Target,
) -> Vec<Result<TailEstimate>> {
    points.par_iter().map(|w| estimate_tail_function(c, a, w, config, side, target)).collect()
}

/// Estimate the tail order `κ` from `C(u w) ∼ b(w) u^κ` (or the upper analogue).
/// The slope is `κ`, `value` is `b(w; κ) = exp(intercept)`, and the trace holds
/// `g(u) / u^κ`.
pub fn estimate_tail_order(
    c: &dyn Copula,
    w: &[f64],
    config: &EstimatorConfig,
    side: Side,
) -> Result<TailEstimate> {
    config.validate()?;
    check_dim(c.dim(), w.len())?;
    if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::domain("tail order needs w > 0 componentwise"));
    }
    let us = config.grid.points();
    let mut numerators = Vec::with_capacity(us.len());
    for &u in &us {
        let s: Vec<f64> = w.iter().map(|&wi| u * wi).collect();
        numerators.push((u, tail_numerator(c, &s, side, Target::Cdf)?));
    }
    let (start, logs) = fit_window(&numerators, config.window)?;
    let (slope, intercept) = linear_fit(&logs);
    let trace: Vec<(f64, f64)> = numerators.iter().map(|&(u, g)| (u, g / u.powf(slope))).collect();
    let n = trace.len();
    let tail: Vec<f64> = trace[n - 3..].iter().map(|p| p.1).collect();
    let converged = slope >= 1.0 - config.slope_tol
        && slope >= config.slope_floor
        && relative_spread(&tail) <= config.ratio_tol;
    Ok(TailEstimate {
        value: intercept.exp(),
        slope,
        intercept,
        last_ratio: trace[n - 1].1,
        trace,
        converged,
        verdict: if converged { Verdict::Converged } else { Verdict::NotConverged },
        window: (start, n),
    })
}

/// `|f(t^A w) - t f(w)| / max(t f(w), ε)`.
pub fn homogeneity_residual(
    f: impl Fn(&[f64]) -> Result<f64>,
    a: &TailIndexMatrix,
    w: &[f64],
    t: f64,
) -> Result<f64> {
    let base = t * f(w)?;
    let scaled = f(&apply_scaling(a, t, w)?)?;
    Ok((scaled - base).abs() / base.max(RESIDUAL_EPS))
}

fn check_positive_pair(w: &[f64]) -> Result<[f64; 2]> {
    check_dim(2, w.len())?;
    if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::domain(format!("w = {w:?} must be positive")));
    }
    Ok([w[0], w[1]])
}

/// Lower tail order `κ_L = 2 - min{α1, α2}` of the Marshall–Olkin survival
/// copula and its standard lower tail dependence function at `w`.
pub fn mo_bl_standard(w: &[f64], p: &MoParams) -> Result<(f64, f64)> {
    let [w1, w2] = check_positive_pair(w)?;
    let [a1, a2] = p.alphas();
    let kappa = 2.0 - a1.min(a2);
    let value = if a1 < a2 {
        w1.powf(1.0 - a1) * w2
    } else if a1 > a2 {
        w1 * w2.powf(1.0 - a2)
    } else {
        w1 * w2 * w1.powf(-a1).min(w2.powf(-a2))
    };
    Ok((kappa, value))
}

/// Lower tail dependence function of the Marshall–Olkin survival copula with
/// respect to `diag(β1, β2)`: `w1 w2 min{w1^(-α1), w2^(-α2)}`.
pub fn mo_bl_operator(w: &[f64], p: &MoParams) -> Result<f64> {
    let [w1, w2] = check_positive_pair(w)?;
    let [a1, a2] = p.alphas();
    Ok(w1 * w2 * w1.powf(-a1).min(w2.powf(-a2)))
}

/// Scalar index `diag(1/κ_L, 1/κ_L)` of the Marshall–Olkin survival copula.
pub fn mo_standard_index(p: &MoParams) -> Result<TailIndexMatrix> {
    let lambda = 1.0 / (2.0 - p.alpha1().min(p.alpha2()));
    TailIndexMatrix::diagonal(&[lambda, lambda])
}

/// Operator index `diag(β1, β2)` of the Marshall–Olkin survival copula.
pub fn mo_operator_index(p: &MoParams) -> Result<TailIndexMatrix> {
    TailIndexMatrix::diagonal(&p.betas())
}

fn pareto4_bracket(lambda: f64, beta: f64, w: &[f64]) -> Result<f64> {
    check_dim(2, w.len())?;
    check_positive("lambda", lambda)?;
    check_positive("beta", beta)?;
    if w.iter().any(|&x| !(x >= 0.0 && x.is_finite())) || w.iter().all(|&x| x == 0.0) {
        return Err(Error::domain(format!("w = {w:?} must be nonnegative and nonzero")));
    }
    let (z1, z2) = (w[0].powf(-1.0 / beta), w[1].powf(-1.0 / beta));
    let bracket = (z1 + z2 + lambda * z1.max(z2)) / (1.0 + lambda);
    Ok(bracket.powf(-beta))
}

/// `lim Ĉ(u w)/u` for the Pareto-IV survival copula.
pub fn pareto4_lower_tail(lambda: f64, beta: f64, w: &[f64]) -> Result<f64> {
    pareto4_bracket(lambda, beta, w)
}

/// `a_L(w; I, Ĉ) = w1 + w2 - lim Ĉ(u w)/u` for the Pareto-IV survival copula.
pub fn pareto4_lower_exponent(lambda: f64, beta: f64, w: &[f64]) -> Result<f64> {
    Ok(w[..].iter().take(2).sum::<f64>() - pareto4_bracket(lambda, beta, w)?)
}
