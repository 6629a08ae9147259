//! Operator tail dependence of copulas.
//!
//! The crate evaluates power matrices `u^A`, a small family of closed-form
//! copulas, their (operator) tail dependence and exponent functions, and the
//! link between those functions and non-standard multivariate regular
//! variation. Every closed form is paired with a numerical limit estimator or
//! a seeded Monte Carlo sampler so the two can be checked against each other.
//!
//! Module map:
//!
//! * [`matpow`]: symmetric eigendecomposition, `u^A`, and the exponential series oracle.
//! * [`margins`]: regularly varying univariate margins.
//! * [`copulas`]: evaluable copulas and survival-copula transforms.
//! * [`taildep`]: closed-form tail functions and log-log limit estimators.
//! * [`mrv`]: intensity measures and the copula/regular-variation correspondence.
//! * [`simulate`]: seeded samplers and empirical tail functions.
//! * [`cli`]: the `tailop` command-line driver.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod copulas;
pub mod error;
pub mod margins;
pub mod matpow;
pub mod mrv;
pub mod simulate;
pub mod taildep;

pub use copulas::{Copula, MoParams};
pub use error::{Error, Result};
pub use margins::{Margin, RegularlyVaryingMargin};
pub use matpow::{EigenSystem, TailIndexMatrix};
pub use taildep::{LimitGrid, Side, TailEstimate, Target};
