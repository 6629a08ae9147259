//! Seeded Monte Carlo samplers and empirical tail functions.
//!
//! A batch of `n` draws is split into chunks of [`CHUNK`] samples. Chunk `k`
//! is drawn from a ChaCha8 generator seeded with the batch seed and switched
//! to stream `k`, so chunks can be generated in parallel and concatenated in
//! order with a result that does not depend on the thread count.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copulas::MoParams;
use crate::error::{check_dim, check_positive, Error, Result};
use crate::margins::Margin;
use crate::matpow::{apply_scaling, TailIndexMatrix};
use crate::taildep::{Side, Target};

/// Samples per sub-stream.
pub const CHUNK: usize = 1 << 16;
/// Smallest expected number of tail events accepted by
/// [`empirical_tail_function`].
pub const MIN_TAIL_COUNT: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub seed: u64,
    /// Generating parameters, for the record.
    pub params: BTreeMap<String, f64>,
}

impl SampleBatch {
    pub fn n(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// Fraction of rows satisfying `pred`, with its binomial standard error.
    pub fn proportion(&self, pred: impl Fn(&[f64]) -> bool + Sync) -> Proportion {
        let n = self.n();
        let d = self.dim();
        let hits = (0..n)
            .into_par_iter()
            .filter(|&i| {
                let mut row = [0.0f64; 8];
                if d <= row.len() {
                    for (j, c) in self.columns.iter().enumerate() {
                        row[j] = c[i];
                    }
                    pred(&row[..d])
                } else {
                    pred(&self.row(i))
                }
            })
            .count();
        Proportion::new(hits, n)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Unsupported(format!("csv output failed: {e}"));
        out.write_record(&self.names).map_err(io)?;
        for i in 0..self.n() {
            out.write_record(self.columns.iter().map(|c| format!("{:.16e}", c[i]))).map_err(io)?;
        }
        out.flush().map_err(|e| Error::Unsupported(format!("csv output failed: {e}")))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| Error::Unsupported(format!("cannot create {}: {e}", path.display())))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Empirical frequency `hits / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub hits: usize,
    pub n: usize,
    pub estimate: f64,
    /// `√(p̂(1 - p̂)/n)`.
    pub std_error: f64,
}

impl Proportion {
    pub fn new(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        Self { hits, n, estimate: p, std_error: (p * (1.0 - p) / n as f64).sqrt() }
    }

    /// Whether `target` lies within `k` standard errors. The standard error
    /// under the target is used when it is larger, so an all-or-nothing
    /// sample is not spuriously exact.
    pub fn within(&self, target: f64, k: f64) -> bool {
        let se = self.std_error.max((target * (1.0 - target) / self.n as f64).sqrt());
        (self.estimate - target).abs() <= k * se
    }
}

fn check_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("sample size n must be at least 1"));
    }
    Ok(())
}

/// Draw `n` rows of width `D` from `draw`, chunked over sub-streams.
fn sample_rows<const D: usize>(
    n: usize,
    seed: u64,
    draw: impl Fn(&mut ChaCha8Rng) -> [f64; D] + Sync,
) -> Vec<Vec<f64>> {
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Vec<[f64; D]>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let len = CHUNK.min(n - k * CHUNK);
            (0..len).map(|_| draw(&mut rng)).collect()
        })
        .collect();
    let mut columns = vec![Vec::with_capacity(n); D];
    for row in parts.into_iter().flatten() {
        for (c, v) in columns.iter_mut().zip(row) {
            c.push(v);
        }
    }
    columns
}

/// `P(T1 > t1, T2 > t2) = exp(-λ1 t1 - λ2 t2 - λ12 max{t1, t2})` for `t ≥ 0`.
pub fn mo_joint_survival(p: &MoParams, t: [f64; 2]) -> f64 {
    let [t1, t2] = [t[0].max(0.0), t[1].max(0.0)];
    (-p.lambda1 * t1 - p.lambda2 * t2 - p.lambda12 * t1.max(t2)).exp()
}

/// `(T1, T2) = (min{E1, E12}, min{E2, E12})` with independent exponential
/// shocks of rates `λ1, λ2, λ12`.
pub fn sample_mo(p: &MoParams, n: usize, seed: u64) -> Result<SampleBatch> {
    check_count(n)?;
    let p = MoParams::new(p.lambda1, p.lambda2, p.lambda12)?;
    let rate = |r: f64| Exp::new(r).map_err(|e| Error::domain(format!("exponential rate {r}: {e}")));
    let (e1, e2, e12) = (rate(p.lambda1)?, rate(p.lambda2)?, rate(p.lambda12)?);
    let columns = sample_rows(n, seed, |rng| {
        let (a, b, c): (f64, f64, f64) = (e1.sample(rng), e2.sample(rng), e12.sample(rng));
        [a.min(c), b.min(c)]
    });
    Ok(SampleBatch {
        names: vec!["T1".into(), "T2".into()],
        columns,
        seed,
        params: BTreeMap::from([
            ("lambda1".into(), p.lambda1),
            ("lambda2".into(), p.lambda2),
            ("lambda12".into(), p.lambda12),
        ]),
    })
}

/// `X_i = (T_i / Z)^{γ_i}` with `(T1, T2)` Marshall–Olkin of rates
/// `(1, 1, λ)` and `Z` gamma of shape `β`, scale 1.
pub fn sample_pareto4(
    lambda: f64,
    beta: f64,
    gamma1: f64,
    gamma2: f64,
    n: usize,
    seed: u64,
) -> Result<SampleBatch> {
    check_count(n)?;
    check_positive("lambda", lambda)?;
    check_positive("beta", beta)?;
    check_positive("gamma1", gamma1)?;
    check_positive("gamma2", gamma2)?;
    let unit = Exp::new(1.0).expect("unit rate");
    let shock = Exp::new(lambda).map_err(|e| Error::domain(format!("lambda: {e}")))?;
    let frailty = Gamma::new(beta, 1.0).map_err(|e| Error::domain(format!("beta: {e}")))?;
    let columns = sample_rows(n, seed, |rng| {
        let (a, b, c): (f64, f64, f64) = (unit.sample(rng), unit.sample(rng), shock.sample(rng));
        let z: f64 = frailty.sample(rng);
        [(a.min(c) / z).powf(gamma1), (b.min(c) / z).powf(gamma2)]
    });
    Ok(SampleBatch {
        names: vec!["X1".into(), "X2".into()],
        columns,
        seed,
        params: BTreeMap::from([
            ("lambda".into(), lambda),
            ("beta".into(), beta),
            ("gamma1".into(), gamma1),
            ("gamma2".into(), gamma2),
        ]),
    })
}

/// `d` independent uniform columns.
pub fn sample_independence(d: usize, n: usize, seed: u64) -> Result<SampleBatch> {
    check_count(n)?;
    if !(1..=2).contains(&d) {
        return Err(Error::Unsupported(format!("independence sampler supports d ≤ 2, got {d}")));
    }
    let columns = sample_rows(n, seed, |rng| [rng.random::<f64>(), rng.random::<f64>()]);
    Ok(SampleBatch {
        names: (1..=d).map(|i| format!("U{i}")).collect(),
        columns: columns.into_iter().take(d).collect(),
        seed,
        params: BTreeMap::from([("d".into(), d as f64)]),
    })
}

/// `V_i = F̄_i(X_i)`; the rows of the result are distributed as the survival
/// copula of the generating law.
pub fn to_copula_scale(batch: &SampleBatch, margins: &[&dyn Margin]) -> Result<SampleBatch> {
    check_dim(batch.dim(), margins.len())?;
    let mut columns = Vec::with_capacity(batch.dim());
    for (j, (col, m)) in batch.columns.iter().zip(margins).enumerate() {
        let v: Vec<f64> = col.par_iter().map(|&x| m.survival(x)).collect();
        if let Some((row, &value)) =
            v.iter().enumerate().find(|(_, x)| !(0.0..=1.0).contains(*x))
        {
            return Err(Error::MarginMismatch { column: j, row, value });
        }
        columns.push(v);
    }
    Ok(SampleBatch {
        names: (1..=batch.dim()).map(|i| format!("V{i}")).collect(),
        columns,
        seed: batch.seed,
        params: batch.params.clone(),
    })
}

/// `P̂(X > x)` componentwise.
pub fn empirical_joint_survival(batch: &SampleBatch, x: &[f64]) -> Result<Proportion> {
    check_dim(batch.dim(), x.len())?;
    Ok(batch.proportion(|r| r.iter().zip(x).all(|(a, b)| a > b)))
}

/// Empirical copula `P̂(V ≤ u)` of a batch on the copula scale.
pub fn empirical_copula(batch: &SampleBatch, u: &[f64]) -> Result<Proportion> {
    check_dim(batch.dim(), u.len())?;
    Ok(batch.proportion(|r| r.iter().zip(u).all(|(a, b)| a <= b)))
}

/// Kolmogorov–Smirnov distance of a sample to the uniform law on `[0, 1]`.
pub fn ks_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.par_sort_unstable_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - x).max(x - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// One-percent critical value `1.63 / √n` of the KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// Empirical counterpart of the tail-function prelimit at level `u`:
/// returns `(p̂ / u, 3 √(p̂(1 - p̂)/n) / u)` for the event selected by
/// `side` and `target` at `s = u^A w`.
pub fn empirical_tail_function(
    batch: &SampleBatch,
    a: &TailIndexMatrix,
    w: &[f64],
    u: f64,
    side: Side,
    target: Target,
) -> Result<(f64, f64)> {
    check_dim(batch.dim(), a.dim())?;
    check_dim(batch.dim(), w.len())?;
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::domain(format!("level u = {u} must lie in (0, 1)")));
    }
    if w.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(Error::domain(format!("w = {w:?} must be nonnegative")));
    }
    let n = batch.n();
    let expected = n as f64 * u;
    if expected < MIN_TAIL_COUNT as f64 {
        return Err(Error::TooFewTailPoints { expected, required: MIN_TAIL_COUNT });
    }
    let s = apply_scaling(a, u, w)?;
    let hit = match (side, target) {
        (Side::Lower, Target::Cdf) => batch.proportion(|r| r.iter().zip(&s).all(|(v, t)| v <= t)),
        (Side::Upper, Target::Cdf) => {
            batch.proportion(|r| r.iter().zip(&s).all(|(v, t)| *v > 1.0 - t))
        }
        (Side::Lower, Target::Exponent) => {
            batch.proportion(|r| r.iter().zip(&s).any(|(v, t)| v <= t))
        }
        (Side::Upper, Target::Exponent) => {
            batch.proportion(|r| r.iter().zip(&s).any(|(v, t)| *v > 1.0 - t))
        }
    };
    Ok((hit.estimate / u, 3.0 * hit.std_error / u))
}
