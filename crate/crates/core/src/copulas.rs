//! Evaluable copulas.
//!
//! Besides the cdf, each copula exposes its joint survival function and an
//! `upper_tail` evaluation `P(U_i > 1 - s_i, all i)` that takes the small
//! complements `s` directly. The shipped closed forms implement all three
//! without subtractive cancellation; the trait defaults fall back on
//! inclusion–exclusion over the cdf.

use std::sync::Arc;

use crate::error::{check_dim, check_positive, check_unit_cube, Error, Result};

/// Largest dimension handled by the inclusion–exclusion paths (2^d terms).
pub const MAX_INCLUSION_EXCLUSION_DIM: usize = 12;

/// Below this coordinate the closed forms switch to log-space evaluation.
const LOG_SPACE_THRESHOLD: f64 = 1e-3;

pub trait Copula: Send + Sync {
    fn dim(&self) -> usize;

    /// `C(u) = P(U ≤ u)`.
    fn cdf(&self, u: &[f64]) -> Result<f64>;

    /// `C̄(u) = P(U > u)` componentwise.
    fn joint_survival(&self, u: &[f64]) -> Result<f64> {
        check_dim(self.dim(), u.len())?;
        check_unit_cube(u)?;
        inclusion_exclusion(self.dim(), |mask| {
            let x: Vec<f64> =
                u.iter().enumerate().map(|(i, &ui)| if mask >> i & 1 == 1 { ui } else { 1.0 }).collect();
            self.cdf(&x)
        })
        .map(|v| v.clamp(0.0, 1.0))
    }

    /// `P(U_i > 1 - s_i for all i) = C̄(1 - s)`.
    fn upper_tail(&self, s: &[f64]) -> Result<f64> {
        check_unit_cube(s)?;
        let u: Vec<f64> = s.iter().map(|&x| 1.0 - x).collect();
        self.joint_survival(&u)
    }
}

impl<C: Copula + ?Sized> Copula for Arc<C> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn cdf(&self, u: &[f64]) -> Result<f64> {
        (**self).cdf(u)
    }
    fn joint_survival(&self, u: &[f64]) -> Result<f64> {
        (**self).joint_survival(u)
    }
    fn upper_tail(&self, s: &[f64]) -> Result<f64> {
        (**self).upper_tail(s)
    }
}

impl<C: Copula + ?Sized> Copula for &C {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn cdf(&self, u: &[f64]) -> Result<f64> {
        (**self).cdf(u)
    }
    fn joint_survival(&self, u: &[f64]) -> Result<f64> {
        (**self).joint_survival(u)
    }
    fn upper_tail(&self, s: &[f64]) -> Result<f64> {
        (**self).upper_tail(s)
    }
}

/// `Σ_{S ⊆ D} (-1)^{|S|} f(S)` with subsets encoded as bit masks.
fn inclusion_exclusion(d: usize, mut f: impl FnMut(u32) -> Result<f64>) -> Result<f64> {
    if d > MAX_INCLUSION_EXCLUSION_DIM {
        return Err(Error::DimensionTooLarge { dim: d, max: MAX_INCLUSION_EXCLUSION_DIM });
    }
    let mut total = 0.0;
    for mask in 0u32..(1u32 << d) {
        let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * f(mask)?;
    }
    Ok(total)
}

/// `P(U_i ≤ s_i for some i)`.
pub fn lower_exceedance(c: &dyn Copula, s: &[f64]) -> Result<f64> {
    check_dim(c.dim(), s.len())?;
    check_unit_cube(s)?;
    // 1 - P(no U_i ≤ s_i) expanded so that the empty set drops out.
    let total = inclusion_exclusion(c.dim(), |mask| {
        if mask == 0 {
            return Ok(0.0);
        }
        let x: Vec<f64> =
            s.iter().enumerate().map(|(i, &si)| if mask >> i & 1 == 1 { si } else { 1.0 }).collect();
        c.cdf(&x)
    })?;
    Ok((-total).clamp(0.0, 1.0))
}

/// `P(U_i > 1 - s_i for some i)`.
pub fn upper_exceedance(c: &dyn Copula, s: &[f64]) -> Result<f64> {
    check_dim(c.dim(), s.len())?;
    check_unit_cube(s)?;
    let total = inclusion_exclusion(c.dim(), |mask| {
        if mask == 0 {
            return Ok(0.0);
        }
        let x: Vec<f64> =
            s.iter().enumerate().map(|(i, &si)| if mask >> i & 1 == 1 { si } else { 1.0 }).collect();
        c.upper_tail(&x)
    })?;
    Ok((-total).clamp(0.0, 1.0))
}

/// Free-function form of [`Copula::joint_survival`].
pub fn joint_survival(c: &dyn Copula, u: &[f64]) -> Result<f64> {
    check_dim(c.dim(), u.len())?;
    c.joint_survival(u)
}

/// Shock rates of the bivariate Marshall–Olkin law.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MoParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda12: f64,
}

impl MoParams {
    pub fn new(lambda1: f64, lambda2: f64, lambda12: f64) -> Result<Self> {
        check_positive("lambda1", lambda1)?;
        check_positive("lambda2", lambda2)?;
        check_positive("lambda12", lambda12)?;
        Ok(Self { lambda1, lambda2, lambda12 })
    }

    fn total(&self) -> f64 {
        self.lambda1 + self.lambda2 + self.lambda12
    }

    /// `α_1 = λ12 / (λ1 + λ12)`.
    pub fn alpha1(&self) -> f64 {
        self.lambda12 / (self.lambda1 + self.lambda12)
    }

    /// `α_2 = λ12 / (λ2 + λ12)`.
    pub fn alpha2(&self) -> f64 {
        self.lambda12 / (self.lambda2 + self.lambda12)
    }

    pub fn alphas(&self) -> [f64; 2] {
        [self.alpha1(), self.alpha2()]
    }

    /// `β_1 = (λ1 + λ12) / (λ1 + λ2 + λ12)`.
    pub fn beta1(&self) -> f64 {
        (self.lambda1 + self.lambda12) / self.total()
    }

    /// `β_2 = (λ2 + λ12) / (λ1 + λ2 + λ12)`.
    pub fn beta2(&self) -> f64 {
        (self.lambda2 + self.lambda12) / self.total()
    }

    pub fn betas(&self) -> [f64; 2] {
        [self.beta1(), self.beta2()]
    }

    /// Marginal rates `λ_i + λ12` of the lifetimes `T_i`.
    pub fn marginal_rates(&self) -> [f64; 2] {
        [self.lambda1 + self.lambda12, self.lambda2 + self.lambda12]
    }

    /// Probability that the common shock arrives first, `λ12 / (λ1 + λ2 + λ12)`.
    pub fn tie_probability(&self) -> f64 {
        self.lambda12 / self.total()
    }
}

fn pair(u: &[f64]) -> Result<[f64; 2]> {
    check_dim(2, u.len())?;
    check_unit_cube(u)?;
    Ok([u[0], u[1]])
}

/// `u1 u2 min{u1^(-α1), u2^(-α2)}`.
fn mo_survival_eval(a: [f64; 2], u: [f64; 2]) -> f64 {
    if u[0] == 0.0 || u[1] == 0.0 {
        return 0.0;
    }
    if u[0] >= LOG_SPACE_THRESHOLD && u[1] >= LOG_SPACE_THRESHOLD {
        return u[0] * u[1] * u[0].powf(-a[0]).min(u[1].powf(-a[1]));
    }
    let (l1, l2) = (u[0].ln(), u[1].ln());
    (l1 + l2 + (-a[0] * l1).min(-a[1] * l2)).exp()
}

/// `(s1 + s2 - 1) + (1 - s1)(1 - s2) min{(1 - s1)^(-α1), (1 - s2)^(-α2)}`,
/// evaluated as `s1 + s2 + expm1(log of the product term)`.
fn mo_complement_eval(a: [f64; 2], s: [f64; 2]) -> f64 {
    if s[0] == 0.0 || s[1] == 0.0 {
        return 0.0;
    }
    if s[0] == 1.0 {
        return s[1];
    }
    if s[1] == 1.0 {
        return s[0];
    }
    let (l1, l2) = ((-s[0]).ln_1p(), (-s[1]).ln_1p());
    let log_term = l1 + l2 + (-a[0] * l1).min(-a[1] * l2);
    (s[0] + s[1] + log_term.exp_m1()).clamp(0.0, s[0].min(s[1]))
}

/// Survival copula of the bivariate Marshall–Olkin distribution,
/// `Ĉ(u1, u2) = u1 u2 min{u1^(-α1), u2^(-α2)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoSurvivalCopula {
    params: MoParams,
}

impl MoSurvivalCopula {
    pub fn params(&self) -> &MoParams {
        &self.params
    }
}

pub fn mo_survival_copula(params: MoParams) -> MoSurvivalCopula {
    MoSurvivalCopula { params }
}

impl Copula for MoSurvivalCopula {
    fn dim(&self) -> usize {
        2
    }
    fn cdf(&self, u: &[f64]) -> Result<f64> {
        Ok(mo_survival_eval(self.params.alphas(), pair(u)?))
    }
    fn joint_survival(&self, u: &[f64]) -> Result<f64> {
        let u = pair(u)?;
        Ok(mo_complement_eval(self.params.alphas(), [1.0 - u[0], 1.0 - u[1]]))
    }
    fn upper_tail(&self, s: &[f64]) -> Result<f64> {
        Ok(mo_complement_eval(self.params.alphas(), pair(s)?))
    }
}

/// The copula whose survival copula is the Marshall–Olkin survival copula:
/// `C(u1, u2) = (u1 + u2 - 1) + (1 - u1)(1 - u2) min{(1 - u1)^(-α1), (1 - u2)^(-α2)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoComplementCopula {
    params: MoParams,
}

impl MoComplementCopula {
    pub fn params(&self) -> &MoParams {
        &self.params
    }
}

pub fn mo_complement_copula(params: MoParams) -> MoComplementCopula {
    MoComplementCopula { params }
}

impl Copula for MoComplementCopula {
    fn dim(&self) -> usize {
        2
    }
    fn cdf(&self, u: &[f64]) -> Result<f64> {
        Ok(mo_complement_eval(self.params.alphas(), pair(u)?))
    }
    fn joint_survival(&self, u: &[f64]) -> Result<f64> {
        let u = pair(u)?;
        Ok(mo_survival_eval(self.params.alphas(), [1.0 - u[0], 1.0 - u[1]]))
    }
    fn upper_tail(&self, s: &[f64]) -> Result<f64> {
        Ok(mo_survival_eval(self.params.alphas(), pair(s)?))
    }
}

/// Survival copula of the bivariate Pareto distribution of the fourth kind:
/// `Ĉ(u) = [1 + (y1 + y2 + λ max{y1, y2}) / (1 + λ)]^(-β)`, `y_i = u_i^(-1/β) - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pareto4SurvivalCopula {
    lambda: f64,
    beta: f64,
}

impl Pareto4SurvivalCopula {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `log y` for `y = u^(-1/β) - 1`, given `log u ≤ 0`.
    fn log_y(&self, log_u: f64) -> f64 {
        if log_u == 0.0 {
            return f64::NEG_INFINITY;
        }
        let x = log_u / self.beta;
        -x + (-x.exp_m1()).ln()
    }

    /// `log` of the bracket as a function of `log u1`, `log u2`.
    fn log_bracket(&self, log_u: [f64; 2]) -> f64 {
        let (ly1, ly2) = (self.log_y(log_u[0]), self.log_y(log_u[1]));
        let lmax = ly1.max(ly2);
        if lmax == f64::NEG_INFINITY {
            return 0.0;
        }
        let terms = [ly1, ly2, self.lambda.ln() + lmax];
        let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_s = top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln();
        let x = log_s - self.lambda.ln_1p();
        // softplus(x) = log(1 + e^x)
        if x > 30.0 {
            x + (-x).exp().ln_1p()
        } else {
            x.exp().ln_1p()
        }
    }

    /// Diagonal section `Ĉ(u, u) = [1 + (2 + λ)(u^(-1/β) - 1) / (1 + λ)]^(-β)`.
    pub fn diagonal(&self, u: f64) -> f64 {
        let y = (-u.ln() / self.beta).exp_m1();
        (1.0 + (2.0 + self.lambda) * y / (1.0 + self.lambda)).powf(-self.beta)
    }
}

pub fn pareto4_survival_copula(lambda: f64, beta: f64) -> Result<Pareto4SurvivalCopula> {
    check_positive("lambda", lambda)?;
    check_positive("beta", beta)?;
    Ok(Pareto4SurvivalCopula { lambda, beta })
}

impl Copula for Pareto4SurvivalCopula {
    fn dim(&self) -> usize {
        2
    }
    fn cdf(&self, u: &[f64]) -> Result<f64> {
        let u = pair(u)?;
        if u[0] == 0.0 || u[1] == 0.0 {
            return Ok(0.0);
        }
        Ok((-self.beta * self.log_bracket([u[0].ln(), u[1].ln()])).exp())
    }
    fn joint_survival(&self, u: &[f64]) -> Result<f64> {
        let u = pair(u)?;
        self.upper_tail(&[1.0 - u[0], 1.0 - u[1]])
    }
    fn upper_tail(&self, s: &[f64]) -> Result<f64> {
        let s = pair(s)?;
        if s[0] == 0.0 || s[1] == 0.0 {
            return Ok(0.0);
        }
        if s[0] == 1.0 {
            return Ok(s[1]);
        }
        if s[1] == 1.0 {
            return Ok(s[0]);
        }
        let lb = self.log_bracket([(-s[0]).ln_1p(), (-s[1]).ln_1p()]);
        Ok((s[0] + s[1] + (-self.beta * lb).exp_m1()).clamp(0.0, s[0].min(s[1])))
    }
}

/// Product copula `Π u_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndependenceCopula {
    dim: usize,
}

pub fn independence_copula(dim: usize) -> Result<IndependenceCopula> {
    if dim == 0 {
        return Err(Error::domain("dimension must be >= 1"));
    }
    Ok(IndependenceCopula { dim })
}

impl Copula for IndependenceCopula {
    fn dim(&self) -> usize {
        self.dim
    }
    fn cdf(&self, u: &[f64]) -> Result<f64> {
        check_dim(self.dim, u.len())?;
        check_unit_cube(u)?;
        Ok(u.iter().product())
    }
    fn joint_survival(&self, u: &[f64]) -> Result<f64> {
        check_dim(self.dim, u.len())?;
        check_unit_cube(u)?;
        Ok(u.iter().map(|x| 1.0 - x).product())
    }
    fn upper_tail(&self, s: &[f64]) -> Result<f64> {
        check_dim(self.dim, s.len())?;
        check_unit_cube(s)?;
        Ok(s.iter().product())
    }
}

/// Copula of `1 - U` where `U ~ C`: `Ĉ(u) = C̄(1 - u)`.
#[derive(Debug, Clone)]
pub struct SurvivalCopula<C> {
    inner: C,
}

impl<C: Copula> SurvivalCopula<C> {
    pub fn inner(&self) -> &C {
        &self.inner
    }
}

/// Wraps `c` as its survival copula. The result delegates to `c`'s own
/// survival evaluations, so it is exact for closed forms and falls back on
/// inclusion–exclusion otherwise.
pub fn survival_copula_of<C: Copula>(c: C) -> Result<SurvivalCopula<C>> {
    if c.dim() > MAX_INCLUSION_EXCLUSION_DIM {
        return Err(Error::DimensionTooLarge { dim: c.dim(), max: MAX_INCLUSION_EXCLUSION_DIM });
    }
    Ok(SurvivalCopula { inner: c })
}

impl<C: Copula> Copula for SurvivalCopula<C> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn cdf(&self, u: &[f64]) -> Result<f64> {
        check_dim(self.dim(), u.len())?;
        self.inner.upper_tail(u)
    }
    fn joint_survival(&self, u: &[f64]) -> Result<f64> {
        check_dim(self.dim(), u.len())?;
        check_unit_cube(u)?;
        let v: Vec<f64> = u.iter().map(|&x| 1.0 - x).collect();
        self.inner.cdf(&v)
    }
    fn upper_tail(&self, s: &[f64]) -> Result<f64> {
        check_dim(self.dim(), s.len())?;
        self.inner.cdf(s)
    }
}
