#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use tailop::copulas::{
    independence_copula, mo_complement_copula, mo_survival_copula, pareto4_survival_copula,
    survival_copula_of, Copula,
};
use tailop::MoParams;

/// Symmetric positive-definite matrix with eigenvalues drawn from `[lo, hi]`.
pub fn random_spd(rng: &mut impl Rng, d: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let q = m.qr().q();
    let lambdas = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(d, |_, _| rng.random_range(lo..hi)));
    let a = &q * lambdas * q.transpose();
    (&a + a.transpose()) * 0.5
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

/// Every shipped bivariate copula, with a label.
pub fn shipped_copulas() -> Vec<(String, Arc<dyn Copula>)> {
    let mut out: Vec<(String, Arc<dyn Copula>)> = Vec::new();
    for (l1, l2, l12) in [(1.0, 1.0, 1.0), (0.5, 2.0, 1.5), (3.0, 0.2, 0.7)] {
        let p = MoParams::new(l1, l2, l12).unwrap();
        out.push((format!("mo-survival{:?}", (l1, l2, l12)), Arc::new(mo_survival_copula(p))));
        out.push((format!("mo-complement{:?}", (l1, l2, l12)), Arc::new(mo_complement_copula(p))));
    }
    for (lambda, beta) in [(1.0, 1.0), (2.0, 0.5), (0.5, 2.0)] {
        let c = pareto4_survival_copula(lambda, beta).unwrap();
        out.push((format!("pareto4{:?}", (lambda, beta)), Arc::new(c)));
        out.push((format!("pareto4-dual{:?}", (lambda, beta)), Arc::new(survival_copula_of(c).unwrap())));
    }
    out.push(("independence".into(), Arc::new(independence_copula(2).unwrap())));
    out
}

/// Largest violation of groundedness, uniform margins and the
/// Fréchet–Hoeffding bounds at `u`.
pub fn axiom_violation(c: &dyn Copula, u: [f64; 2]) -> f64 {
    let v = c.cdf(&u).unwrap();
    let lower = (u[0] + u[1] - 1.0).max(0.0);
    let upper = u[0].min(u[1]);
    let mut worst = (lower - v).max(v - upper).max(0.0);
    worst = worst.max((c.cdf(&[u[0], 1.0]).unwrap() - u[0]).abs());
    worst = worst.max((c.cdf(&[1.0, u[1]]).unwrap() - u[1]).abs());
    worst = worst.max(c.cdf(&[0.0, u[1]]).unwrap().abs());
    worst = worst.max(c.cdf(&[u[0], 0.0]).unwrap().abs());
    worst
}

/// Negative part of the C-volume of `[a, b]`.
pub fn rectangle_deficit(c: &dyn Copula, a: [f64; 2], b: [f64; 2]) -> f64 {
    let vol = c.cdf(&b).unwrap() - c.cdf(&[a[0], b[1]]).unwrap() - c.cdf(&[b[0], a[1]]).unwrap()
        + c.cdf(&a).unwrap();
    (-vol).max(0.0)
}

pub fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
}
