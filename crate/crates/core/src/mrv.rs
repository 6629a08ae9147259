//! Non-standard multivariate regular variation.
//!
//! A random vector `X ≥ 0` is non-standard regularly varying when
//! `P(X_i > t^{γ_i} x_i, some i) / R(t) → μ([0, x]^c)` with `R ∈ RV_{-β}`.
//! This module builds intensity measures from copula tail functions and
//! regularly varying margins, recovers operator exponent functions from an
//! intensity measure, and checks the defining limit semi-analytically.
//!
//! Intensities are evaluated on two families of sets: complements of boxes
//! `[0, w]^c` and open upper orthants `(w, ∞]`. A measure that only charges
//! the interior cone (hidden regular variation) is represented through its
//! upper orthants; the box complements of such a measure are infinite.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::copulas::{upper_exceedance, Copula, MoParams};
use crate::error::{check_dim, check_positive, Error, Result};
use crate::margins::{pareto4_margin, Margin, RegularlyVaryingMargin};
use crate::matpow::TailIndexMatrix;

pub type SetFunction = Arc<dyn Fn(&[f64]) -> Result<f64> + Send + Sync>;

/// Which cone the intensity measure lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    /// `[0, ∞]^d \ {0}`.
    Full,
    /// The cone with the coordinate axes removed.
    Interior,
}

impl Support {
    pub fn label(&self) -> &'static str {
        match self {
            Support::Full => "full (E^(1)) intensity",
            Support::Interior => "hidden (E^(2)) intensity",
        }
    }
}

/// The family of test sets a limit is taken on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailSet {
    /// `[0, w]^c`: some coordinate exceeds its threshold.
    BoxComplement,
    /// `(w, ∞]`: every coordinate exceeds its threshold.
    UpperOrthant,
}

#[derive(Clone)]
pub struct IntensityMeasure {
    dim: usize,
    beta: f64,
    gamma: Vec<f64>,
    support: Support,
    box_complement: Option<SetFunction>,
    upper_orthant: Option<SetFunction>,
}

impl fmt::Debug for IntensityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntensityMeasure")
            .field("dim", &self.dim)
            .field("beta", &self.beta)
            .field("gamma", &self.gamma)
            .field("support", &self.support)
            .field("box_complement", &self.box_complement.is_some())
            .field("upper_orthant", &self.upper_orthant.is_some())
            .finish()
    }
}

fn check_thresholds(dim: usize, w: &[f64]) -> Result<()> {
    check_dim(dim, w.len())?;
    if w.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::domain(format!("thresholds {w:?} must be positive")));
    }
    Ok(())
}

impl IntensityMeasure {
    pub fn new(
        beta: f64,
        gamma: Vec<f64>,
        support: Support,
        box_complement: Option<SetFunction>,
        upper_orthant: Option<SetFunction>,
    ) -> Result<Self> {
        check_positive("beta", beta)?;
        for &g in &gamma {
            check_positive("gamma", g)?;
        }
        if box_complement.is_none() && upper_orthant.is_none() {
            return Err(Error::domain("intensity measure needs at least one set function"));
        }
        Ok(Self { dim: gamma.len(), beta, gamma, support, box_complement, upper_orthant })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }
    pub fn support(&self) -> Support {
        self.support
    }

    pub fn has(&self, set: TailSet) -> bool {
        match set {
            TailSet::BoxComplement => self.box_complement.is_some(),
            TailSet::UpperOrthant => self.upper_orthant.is_some(),
        }
    }

    /// `μ([0, w]^c)`. Thresholds may be `+∞` to drop a coordinate.
    pub fn box_complement(&self, w: &[f64]) -> Result<f64> {
        check_thresholds(self.dim, w)?;
        match &self.box_complement {
            Some(f) => f(w),
            None => Err(Error::Unsupported(format!(
                "box complements of a {} are not finite",
                self.support.label()
            ))),
        }
    }

    /// `μ((w, ∞])`.
    pub fn upper_orthant(&self, w: &[f64]) -> Result<f64> {
        check_thresholds(self.dim, w)?;
        match &self.upper_orthant {
            Some(f) => f(w),
            None => Err(Error::Unsupported("upper orthants were not supplied".into())),
        }
    }

    pub fn evaluate(&self, set: TailSet, w: &[f64]) -> Result<f64> {
        match set {
            TailSet::BoxComplement => self.box_complement(w),
            TailSet::UpperOrthant => self.upper_orthant(w),
        }
    }

    /// `s^E w` with `E = diag(γ)`.
    pub fn scale_point(&self, s: f64, w: &[f64]) -> Vec<f64> {
        w.iter().zip(&self.gamma).map(|(&x, &g)| s.powf(g) * x).collect()
    }
}

/// Copula plus regularly varying margins, with the diagonal matrix index
/// `A = diag(λ)` under which the copula has an upper operator tail function.
#[derive(Clone)]
pub struct NonStandardRvModel {
    copula: Arc<dyn Copula>,
    margins: Vec<RegularlyVaryingMargin>,
    lambda: Vec<f64>,
    reference: usize,
}

impl fmt::Debug for NonStandardRvModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonStandardRvModel")
            .field("dim", &self.dim())
            .field("margins", &self.margins)
            .field("lambda", &self.lambda)
            .field("reference", &self.reference)
            .finish()
    }
}

impl NonStandardRvModel {
    pub fn new(
        copula: Arc<dyn Copula>,
        margins: Vec<RegularlyVaryingMargin>,
        lambda: Vec<f64>,
    ) -> Result<Self> {
        check_dim(copula.dim(), margins.len())?;
        check_dim(copula.dim(), lambda.len())?;
        for &l in &lambda {
            check_positive("lambda", l)?;
        }
        Ok(Self { copula, margins, lambda, reference: 0 })
    }

    /// Use margin `k` (zero-based) as the reference for `β` and the `r_i`.
    pub fn with_reference(mut self, k: usize) -> Result<Self> {
        if k >= self.dim() {
            return Err(Error::domain(format!("reference margin {k} out of range")));
        }
        self.reference = k;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.margins.len()
    }
    pub fn copula(&self) -> &dyn Copula {
        self.copula.as_ref()
    }
    pub fn margins(&self) -> &[RegularlyVaryingMargin] {
        &self.margins
    }
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }
    pub fn reference(&self) -> usize {
        self.reference
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.margins.iter().map(|m| m.alpha()).collect()
    }

    pub fn limits(&self) -> Vec<f64> {
        self.margins.iter().map(|m| m.slowly_varying_limit()).collect()
    }

    /// `β = α_ref`.
    pub fn beta(&self) -> f64 {
        self.margins[self.reference].alpha()
    }

    /// `γ_i = λ_i α_ref / α_i`.
    pub fn gamma(&self) -> Vec<f64> {
        let b = self.beta();
        self.lambda.iter().zip(&self.margins).map(|(&l, m)| l * b / m.alpha()).collect()
    }

    /// `r_i = l_i / l_ref^{λ_i}`.
    pub fn r(&self) -> Vec<f64> {
        let lref = self.margins[self.reference].slowly_varying_limit();
        self.lambda
            .iter()
            .zip(&self.margins)
            .map(|(&l, m)| m.slowly_varying_limit() / lref.powf(l))
            .collect()
    }

    pub fn index_matrix(&self) -> Result<TailIndexMatrix> {
        TailIndexMatrix::diagonal(&self.lambda)
    }

    /// Normalisation `R(t) = F̄_ref(t)`.
    pub fn reference_scaling(&self, t: f64) -> f64 {
        self.margins[self.reference].survival(t)
    }

    fn tail_levels(&self, t: f64, w: &[f64]) -> Result<Vec<f64>> {
        check_thresholds(self.dim(), w)?;
        Ok(self
            .gamma()
            .iter()
            .zip(w)
            .zip(&self.margins)
            .map(|((&g, &wi), m)| m.survival(t.powf(g) * wi))
            .collect())
    }

    /// `P(X_i > t^{γ_i} w_i)` for one coordinate.
    pub fn marginal_exceedance(&self, i: usize, t: f64, w_i: f64) -> f64 {
        self.margins[i].survival(t.powf(self.gamma()[i]) * w_i)
    }

    /// `P(X_i > t^{γ_i} w_i for some i)`, from the copula in closed form.
    pub fn exceedance_any(&self, t: f64, w: &[f64]) -> Result<f64> {
        let s = self.tail_levels(t, w)?;
        upper_exceedance(self.copula.as_ref(), &s)
    }

    /// `P(X_i > t^{γ_i} w_i for all i)`.
    pub fn exceedance_all(&self, t: f64, w: &[f64]) -> Result<f64> {
        let s = self.tail_levels(t, w)?;
        self.copula.upper_tail(&s)
    }

    pub fn exceedance(&self, set: TailSet, t: f64, w: &[f64]) -> Result<f64> {
        match set {
            TailSet::BoxComplement => self.exceedance_any(t, w),
            TailSet::UpperOrthant => self.exceedance_all(t, w),
        }
    }
}

fn compose_from_copula(
    model: &NonStandardRvModel,
    f: impl Fn(&[f64]) -> Result<f64> + Send + Sync + 'static,
) -> SetFunction {
    let alphas = model.alphas();
    let r = model.r();
    Arc::new(move |w: &[f64]| {
        let x: Vec<f64> =
            w.iter().zip(&alphas).zip(&r).map(|((&wi, &a), &ri)| wi.powf(-a) * ri).collect();
        f(&x)
    })
}

/// `μ([0, w]^c) = a_U((w_i^{-α_i} r_i)_i; A, C)` with `β = α_ref` and
/// `γ_i = λ_i α_ref / α_i`.
pub fn intensity_from_copula(
    model: &NonStandardRvModel,
    a_u: impl Fn(&[f64]) -> Result<f64> + Send + Sync + 'static,
) -> Result<IntensityMeasure> {
    IntensityMeasure::new(
        model.beta(),
        model.gamma(),
        Support::Full,
        Some(compose_from_copula(model, a_u)),
        None,
    )
}

/// Same construction on upper orthants: `μ((w, ∞]) = b_U((w_i^{-α_i} r_i)_i; A, C)`.
/// Used when the marginal masses blow up at order `β` and only the interior
/// (hidden) intensity exists.
pub fn hidden_intensity_from_copula(
    model: &NonStandardRvModel,
    b_u: impl Fn(&[f64]) -> Result<f64> + Send + Sync + 'static,
) -> Result<IntensityMeasure> {
    IntensityMeasure::new(
        model.beta(),
        model.gamma(),
        Support::Interior,
        None,
        Some(compose_from_copula(model, b_u)),
    )
}

/// Operator tail function recovered from an intensity measure, together with
/// its matrix index.
#[derive(Clone)]
pub struct OperatorTailFunction {
    index: TailIndexMatrix,
    set: TailSet,
    f: SetFunction,
}

impl fmt::Debug for OperatorTailFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorTailFunction")
            .field("index", &self.index.entries())
            .field("set", &self.set)
            .finish()
    }
}

impl OperatorTailFunction {
    pub fn index(&self) -> &TailIndexMatrix {
        &self.index
    }
    pub fn set(&self) -> TailSet {
        self.set
    }
    pub fn eval(&self, w: &[f64]) -> Result<f64> {
        check_thresholds(self.index.dim(), w)?;
        (self.f)(w)
    }
}

fn compose_from_intensity(
    mu: &IntensityMeasure,
    alphas: &[f64],
    ls: &[f64],
    set: TailSet,
) -> Result<OperatorTailFunction> {
    check_dim(mu.dim(), alphas.len())?;
    check_dim(mu.dim(), ls.len())?;
    for (&a, &l) in alphas.iter().zip(ls) {
        check_positive("alpha", a)?;
        check_positive("l", l)?;
    }
    if !mu.has(set) {
        return Err(Error::Unsupported(format!("intensity measure has no {set:?} function")));
    }
    let diag: Vec<f64> =
        alphas.iter().zip(mu.gamma()).map(|(&a, &g)| a * g / mu.beta()).collect();
    let index = TailIndexMatrix::diagonal(&diag)?;
    let scale: Vec<f64> = alphas.iter().zip(ls).map(|(&a, &l)| l.powf(1.0 / a)).collect();
    let alphas = alphas.to_vec();
    let mu = mu.clone();
    let f: SetFunction = Arc::new(move |w: &[f64]| {
        let x: Vec<f64> =
            w.iter().zip(&alphas).zip(&scale).map(|((&wi, &a), &c)| wi.powf(-1.0 / a) * c).collect();
        mu.evaluate(set, &x)
    });
    Ok(OperatorTailFunction { index, set, f })
}

/// `a_U(w; A, C) = μ((Π_i [0, w_i^{-1/α_i} l_i^{1/α_i}])^c)` with
/// `A = diag(α_i γ_i / β)`.
pub fn exponent_from_intensity(
    mu: &IntensityMeasure,
    alphas: &[f64],
    ls: &[f64],
) -> Result<OperatorTailFunction> {
    compose_from_intensity(mu, alphas, ls, TailSet::BoxComplement)
}

/// Upper-orthant analogue of [`exponent_from_intensity`], giving `b_U`.
pub fn tail_function_from_intensity(
    mu: &IntensityMeasure,
    alphas: &[f64],
    ls: &[f64],
) -> Result<OperatorTailFunction> {
    compose_from_intensity(mu, alphas, ls, TailSet::UpperOrthant)
}

/// Hidden intensity of the Marshall–Olkin copula with Pareto margins:
/// `μ((w1, ∞] × (w2, ∞]) = w1^{-α1} w2^{-α2} min{w1^{α1^{12} α1}, w2^{α2^{12} α2}}`,
/// with `β = α1` and `γ_i = β_i α1 / α_i`.
pub fn mo_pareto_intensity_oracle(p: &MoParams, alphas: [f64; 2]) -> Result<IntensityMeasure> {
    check_positive("alpha1", alphas[0])?;
    check_positive("alpha2", alphas[1])?;
    let [d1, d2] = p.alphas();
    let [b1, b2] = p.betas();
    let gamma = vec![b1 * alphas[0] / alphas[0], b2 * alphas[0] / alphas[1]];
    let orthant: SetFunction = Arc::new(move |w: &[f64]| {
        let [a1, a2] = alphas;
        Ok(w[0].powf(-a1) * w[1].powf(-a2) * w[0].powf(d1 * a1).min(w[1].powf(d2 * a2)))
    });
    IntensityMeasure::new(alphas[0], gamma, Support::Interior, None, Some(orthant))
}

/// Intensity of the bivariate Pareto distribution of the fourth kind:
/// `μ(([0, x1] × [0, x2])^c) = Σ_i [(1 + λ) z_i]^{-β} - [z1 + z2 + λ max{z1, z2}]^{-β}`,
/// `z_i = x_i^{1/γ_i}`; the upper orthant mass is the last bracket.
pub fn pareto4_intensity_oracle(
    lambda: f64,
    beta: f64,
    gamma1: f64,
    gamma2: f64,
) -> Result<IntensityMeasure> {
    check_positive("lambda", lambda)?;
    check_positive("beta", beta)?;
    check_positive("gamma1", gamma1)?;
    check_positive("gamma2", gamma2)?;
    let z = move |w: &[f64]| (w[0].powf(1.0 / gamma1), w[1].powf(1.0 / gamma2));
    let joint = move |z1: f64, z2: f64| (z1 + z2 + lambda * z1.max(z2)).powf(-beta);
    let boxc: SetFunction = Arc::new(move |w: &[f64]| {
        let (z1, z2) = z(w);
        Ok(((1.0 + lambda) * z1).powf(-beta) + ((1.0 + lambda) * z2).powf(-beta) - joint(z1, z2))
    });
    let orthant: SetFunction = Arc::new(move |w: &[f64]| {
        let (z1, z2) = z(w);
        Ok(joint(z1, z2))
    });
    IntensityMeasure::new(beta, vec![gamma1, gamma2], Support::Full, Some(boxc), Some(orthant))
}

/// Closed-form bivariate Pareto-IV law `X_i = (T_i / Z)^{γ_i}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pareto4Law {
    pub lambda: f64,
    pub beta: f64,
    pub gamma: [f64; 2],
}

impl Pareto4Law {
    pub fn new(lambda: f64, beta: f64, gamma: [f64; 2]) -> Result<Self> {
        check_positive("lambda", lambda)?;
        check_positive("beta", beta)?;
        check_positive("gamma1", gamma[0])?;
        check_positive("gamma2", gamma[1])?;
        Ok(Self { lambda, beta, gamma })
    }

    /// `[1 + z1 + z2 + λ max{z1, z2}]^{-β}`, `z_i = x_i^{1/γ_i}`.
    pub fn joint_survival(&self, x: [f64; 2]) -> f64 {
        let z1 = x[0].max(0.0).powf(1.0 / self.gamma[0]);
        let z2 = x[1].max(0.0).powf(1.0 / self.gamma[1]);
        (-self.beta * (z1 + z2 + self.lambda * z1.max(z2)).ln_1p()).exp()
    }

    pub fn margin(&self, i: usize) -> RegularlyVaryingMargin {
        pareto4_margin(self.lambda, self.beta, self.gamma[i]).expect("validated parameters")
    }

    /// `P(X_1 > t^{γ_1} x_1 or X_2 > t^{γ_2} x_2)`.
    pub fn exceedance_any(&self, t: f64, x: &[f64]) -> Result<f64> {
        check_thresholds(2, x)?;
        let a = t.powf(self.gamma[0]) * x[0];
        let b = t.powf(self.gamma[1]) * x[1];
        Ok(self.margin(0).survival(a) + self.margin(1).survival(b) - self.joint_survival([a, b]))
    }

    pub fn exceedance_all(&self, t: f64, x: &[f64]) -> Result<f64> {
        check_thresholds(2, x)?;
        Ok(self.joint_survival([t.powf(self.gamma[0]) * x[0], t.powf(self.gamma[1]) * x[1]]))
    }

    pub fn exceedance(&self, set: TailSet, t: f64, x: &[f64]) -> Result<f64> {
        match set {
            TailSet::BoxComplement => self.exceedance_any(t, x),
            TailSet::UpperOrthant => self.exceedance_all(t, x),
        }
    }
}

/// Default verification grid: `t = 10^2, 10^2.5, …, 10^8`.
pub fn default_t_grid() -> Vec<f64> {
    (0..13).map(|k| 10f64.powf(2.0 + 0.5 * k as f64)).collect()
}

/// Relative deviation allowed at the largest `t`.
pub const VERIFY_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRow {
    pub w: Vec<f64>,
    pub limit: f64,
    /// `(t, P(...) / R(t))`.
    pub trace: Vec<(f64, f64)>,
    pub final_ratio: f64,
    pub relative_deviation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub set: TailSet,
    pub support: Support,
    pub label: String,
    pub rows: Vec<VerificationRow>,
    pub pass: bool,
    pub max_relative_deviation: f64,
}

/// Trace `prelimit(t, w) / scaling(t)` along `t_grid` and compare the value at
/// the largest `t` with the intensity measure on the same set.
pub fn verify_nonstandard_rv(
    prelimit: impl Fn(f64, &[f64]) -> Result<f64>,
    scaling: impl Fn(f64) -> f64,
    mu: &IntensityMeasure,
    set: TailSet,
    t_grid: &[f64],
    w_grid: &[Vec<f64>],
) -> Result<VerificationReport> {
    if t_grid.is_empty() || t_grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::domain("t grid must be nonempty and increasing"));
    }
    let mut rows = Vec::with_capacity(w_grid.len());
    for w in w_grid {
        let limit = mu.evaluate(set, w)?;
        let trace = t_grid
            .iter()
            .map(|&t| Ok((t, prelimit(t, w)? / scaling(t))))
            .collect::<Result<Vec<_>>>()?;
        let final_ratio = trace.last().map(|p| p.1).unwrap_or(f64::NAN);
        let relative_deviation = ((final_ratio - limit) / limit).abs();
        rows.push(VerificationRow {
            w: w.clone(),
            limit,
            trace,
            final_ratio,
            relative_deviation,
            pass: relative_deviation <= VERIFY_TOLERANCE,
        });
    }
    let max_relative_deviation = rows.iter().map(|r| r.relative_deviation).fold(0.0, f64::max);
    Ok(VerificationReport {
        set,
        support: mu.support(),
        label: mu.support().label().to_string(),
        pass: rows.iter().all(|r| r.pass),
        rows,
        max_relative_deviation,
    })
}

/// Long-run behaviour of a marginal mass `P(X_i > t^{γ_i} w_i) / R(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalTrend {
    /// Lighter than the joint scaling: the mass vanishes at order `β`.
    Vanishing,
    Finite,
    /// Heavier than the joint scaling: box complements are infinite and the
    /// intensity is only visible on the interior cone.
    Exploding,
}

/// Classify the marginal mass of coordinate `i` from the log-log slope of
/// its prelimit over the last half of `t_grid`.
pub fn marginal_trend(
    model: &NonStandardRvModel,
    i: usize,
    w_i: f64,
    t_grid: &[f64],
    slope_tol: f64,
) -> Result<(MarginalTrend, f64)> {
    if i >= model.dim() {
        return Err(Error::domain(format!("coordinate {i} out of range")));
    }
    if t_grid.len() < 4 {
        return Err(Error::domain("t grid needs at least 4 points"));
    }
    let tail = &t_grid[t_grid.len() / 2..];
    let (t0, t1) = (tail[0], tail[tail.len() - 1]);
    let ratio = |t: f64| model.marginal_exceedance(i, t, w_i) / model.reference_scaling(t);
    let slope = (ratio(t1).ln() - ratio(t0).ln()) / (t1.ln() - t0.ln());
    let trend = if slope < -slope_tol {
        MarginalTrend::Vanishing
    } else if slope > slope_tol {
        MarginalTrend::Exploding
    } else {
        MarginalTrend::Finite
    };
    Ok((trend, slope))
}

/// Largest relative change of `μ` on `set` under a multiplicative
/// perturbation `1 ± h` of each grid point; small values support
/// orthant-continuity on the grid.
pub fn continuity_defect(mu: &IntensityMeasure, set: TailSet, w_grid: &[Vec<f64>], h: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for w in w_grid {
        let base = mu.evaluate(set, w)?;
        for factor in [1.0 - h, 1.0 + h] {
            let moved: Vec<f64> = w.iter().map(|x| x * factor).collect();
            let v = mu.evaluate(set, &moved)?;
            worst = worst.max(((v - base) / base).abs());
        }
    }
    Ok(worst)
}
