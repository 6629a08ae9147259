//! Acceptance checks. Runs as a plain binary so every criterion prints one
//! PASS/FAIL line; exits nonzero if any criterion fails.

mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tailop::copulas::{independence_copula, mo_complement_copula, mo_survival_copula};
use tailop::margins::{mo_exponential_margin, pareto_margin, Margin};
use tailop::matpow::{matrix_power, matrix_power_series};
use tailop::mrv::{
    default_t_grid, exponent_from_intensity, hidden_intensity_from_copula, intensity_from_copula,
    mo_pareto_intensity_oracle, pareto4_intensity_oracle, tail_function_from_intensity,
    verify_nonstandard_rv, NonStandardRvModel, Pareto4Law, TailSet,
};
use tailop::simulate::{empirical_copula, empirical_joint_survival, sample_mo, sample_pareto4, to_copula_scale};
use tailop::taildep::{
    estimate_on_points, estimate_tail_function, estimate_tail_order, homogeneity_residual, mo_bl_operator,
    mo_bl_standard, mo_operator_index, pareto4_lower_exponent, EstimatorConfig, Verdict,
};
use tailop::{Error, MoParams, Side, TailIndexMatrix, Target};

// Pinned tolerances and time budgets.
const C1_KAPPA_TOL: f64 = 0.01;
const C1_BUDGET: Duration = Duration::from_secs(1);
const C2_REL_TOL: f64 = 1e-3;
const C2_BUDGET: Duration = Duration::from_secs(5);
const C3_ABS_TOL: f64 = 1e-10;
const C3_BUDGET: Duration = Duration::from_secs(1);
const C4_REL_TOL: f64 = 0.02;
const C4_T: f64 = 1e8;
const C4_BUDGET: Duration = Duration::from_secs(1);
const C5_ABS_TOL: f64 = 1e-10;
const C5_BUDGET: Duration = Duration::from_secs(1);
const C6_N: usize = 1_000_000;
const C6_SE: f64 = 3.0;
const C6_BUDGET: Duration = Duration::from_secs(30);
const C7_SEMIGROUP_TOL: f64 = 1e-10;
const C7_INVERSE_TOL: f64 = 1e-9;
const C7_SERIES_TOL: f64 = 1e-8;
const C7_COPULA_TOL: f64 = 1e-12;
const C7_HOMOGENEITY_TOL: f64 = 1e-12;
const C7_DRAWS: usize = 200;
const C7_BUDGET: Duration = Duration::from_secs(60);
const C8_INDEPENDENCE_SLOPE_TOL: f64 = 0.05;

type Criterion = (u32, &'static str, fn() -> Outcome, Duration);

struct Outcome {
    pass: bool,
    detail: String,
}

fn unit() -> MoParams {
    MoParams::new(1.0, 1.0, 1.0).unwrap()
}

fn square(values: &[f64]) -> Vec<Vec<f64>> {
    values.iter().flat_map(|&a| values.iter().map(move |&b| vec![a, b])).collect()
}

fn criterion1() -> Outcome {
    let c = mo_survival_copula(unit());
    let e = estimate_tail_order(&c, &[1.0, 1.0], &EstimatorConfig::default(), Side::Lower).unwrap();
    let dev = (e.slope - 1.5).abs();
    Outcome { pass: dev <= C1_KAPPA_TOL, detail: format!("kappa = {:.6}, |kappa - 1.5| = {dev:.2e}", e.slope) }
}

fn criterion2() -> Outcome {
    let p = unit();
    let c = mo_survival_copula(p);
    let a = TailIndexMatrix::diagonal(&[2.0 / 3.0, 2.0 / 3.0]).unwrap();
    let points = square(&[0.25, 0.5, 1.0, 2.0, 4.0]);
    let estimates = estimate_on_points(&c, &a, &points, &EstimatorConfig::default(), Side::Lower, Target::Cdf);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for (w, e) in points.iter().zip(estimates) {
        match e {
            Ok(e) => {
                let want = mo_bl_operator(w, &p).unwrap();
                worst = worst.max(((e.value - want) / want).abs());
            }
            Err(_) => failures += 1,
        }
    }
    Outcome {
        pass: failures == 0 && worst <= C2_REL_TOL,
        detail: format!("25 points, max relative error {worst:.2e}, {failures} estimator failures"),
    }
}

fn criterion3() -> Outcome {
    let points = square(&[0.25, 0.5, 1.0, 2.0, 4.0]);
    let mut worst = 0.0f64;
    for (lambda, beta, g1, g2) in [(1.0, 1.0, 1.0, 1.0), (2.0, 0.5, 1.0, 2.0), (0.5, 2.0, 2.0, 1.0)] {
        let mu = pareto4_intensity_oracle(lambda, beta, g1, g2).unwrap();
        let law = Pareto4Law::new(lambda, beta, [g1, g2]).unwrap();
        let (m1, m2) = (law.margin(0), law.margin(1));
        let composed = exponent_from_intensity(
            &mu,
            &[m1.alpha(), m2.alpha()],
            &[m1.slowly_varying_limit(), m2.slowly_varying_limit()],
        )
        .unwrap();
        for w in &points {
            let closed = pareto4_lower_exponent(lambda, beta, w).unwrap();
            // μ(([0, w1^{-γ1/β}(1+λ)^{-γ1}] × [0, w2^{-γ2/β}(1+λ)^{-γ2}])^c), written out.
            let x = [
                w[0].powf(-g1 / beta) * (1.0 + lambda).powf(-g1),
                w[1].powf(-g2 / beta) * (1.0 + lambda).powf(-g2),
            ];
            let direct = mu.box_complement(&x).unwrap();
            worst = worst.max((closed - direct).abs()).max((closed - composed.eval(w).unwrap()).abs());
        }
    }
    Outcome { pass: worst <= C3_ABS_TOL, detail: format!("3 parameter sets x 25 points, max |diff| {worst:.2e}") }
}

fn example3_model(p: MoParams, lambda: Vec<f64>) -> NonStandardRvModel {
    NonStandardRvModel::new(
        Arc::new(mo_complement_copula(p)),
        vec![pareto_margin(1.0).unwrap(), pareto_margin(1.0).unwrap()],
        lambda,
    )
    .unwrap()
}

fn criterion4() -> Outcome {
    let p = unit();
    let model = example3_model(p, p.betas().to_vec());
    let oracle = mo_pareto_intensity_oracle(&p, [1.0, 1.0]).unwrap();
    let t_grid: Vec<f64> = default_t_grid().into_iter().filter(|&t| t <= C4_T).collect();
    let report = verify_nonstandard_rv(
        |t, w| model.exceedance_all(t, w),
        |t| model.reference_scaling(t),
        &oracle,
        TailSet::UpperOrthant,
        &t_grid,
        &square(&[0.5, 1.0, 2.0]),
    )
    .unwrap();
    Outcome {
        pass: report.rows.len() == 9 && report.max_relative_deviation <= C4_REL_TOL,
        detail: format!(
            "9 interior points at t = {:.0e}, max relative deviation {:.2e} ({})",
            t_grid.last().unwrap(),
            report.max_relative_deviation,
            report.label
        ),
    }
}

fn criterion5() -> Outcome {
    let p = unit();
    let points = square(&[0.25, 0.5, 1.0, 2.0, 4.0]);
    let mut worst = 0.0f64;

    // Interior cone, matrix index diag(β1, β2): b_U(w; A, C) = Ĉ-operator tail function.
    let model = example3_model(p, p.betas().to_vec());
    let b_u = move |w: &[f64]| mo_bl_operator(w, &p);
    let mu = hidden_intensity_from_copula(&model, b_u).unwrap();
    let back = tail_function_from_intensity(&mu, &model.alphas(), &model.limits()).unwrap();
    for w in &points {
        worst = worst.max((back.eval(w).unwrap() - b_u(w).unwrap()).abs());
    }

    // Full cone, matrix index I: a_U(w; I, C) = w1 + w2 (tail order of Ĉ exceeds 1).
    let model = example3_model(p, vec![1.0, 1.0]);
    let a_u = |w: &[f64]| Ok(w[0] + w[1]);
    let mu = intensity_from_copula(&model, a_u).unwrap();
    let back = exponent_from_intensity(&mu, &model.alphas(), &model.limits()).unwrap();
    for w in &points {
        worst = worst.max((back.eval(w).unwrap() - a_u(w).unwrap()).abs());
    }
    Outcome {
        pass: worst <= C5_ABS_TOL,
        detail: format!("orthant and box round trips on 25 points, max |diff| {worst:.2e}"),
    }
}

fn criterion6() -> Outcome {
    let p = unit();
    let mo = sample_mo(&p, C6_N, 20_240_901).unwrap();
    let surv = empirical_joint_survival(&mo, &[1.0, 1.0]).unwrap();
    let [r1, r2] = p.marginal_rates();
    let (m1, m2) = (mo_exponential_margin(r1).unwrap(), mo_exponential_margin(r2).unwrap());
    let v = to_copula_scale(&mo, &[&m1 as &dyn Margin, &m2]).unwrap();
    let chat = empirical_copula(&v, &[0.25, 0.25]).unwrap();
    let p4 = sample_pareto4(1.0, 1.0, 1.0, 1.0, C6_N, 20_240_902).unwrap();
    let joint = empirical_joint_survival(&p4, &[0.5, 0.5]).unwrap();
    let checks = [(surv, (-3.0f64).exp()), (chat, 0.125), (joint, 0.4)];
    let pass = checks.iter().all(|(est, want)| est.within(*want, C6_SE));
    let detail = checks
        .iter()
        .map(|(est, want)| format!("{:.6} vs {want:.6} (z = {:+.2})", est.estimate, (est.estimate - want) / est.std_error))
        .collect::<Vec<_>>()
        .join("; ");
    Outcome { pass, detail }
}

fn criterion7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut notes = Vec::new();
    let mut pass = true;

    let (mut semi, mut inv, mut series) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..100 {
        let d = 2 + k % 3;
        let a = TailIndexMatrix::new(random_spd(&mut rng, d, 0.1, 5.0)).unwrap();
        let (u, v) = (rng.random_range(0.01..=1.0), rng.random_range(0.01..=1.0));
        let lhs = matrix_power(&a, u).unwrap() * matrix_power(&a, v).unwrap();
        semi = semi.max(max_abs_diff(&lhs, &matrix_power(&a, u * v).unwrap()));
        let prod = matrix_power(&a, u).unwrap() * matrix_power(&a, 1.0 / u).unwrap();
        inv = inv.max(max_abs_diff(&prod, &DMatrix::identity(d, d)));
        let s = rng.random_range(0.2..=5.0);
        series = series.max(max_abs_diff(&matrix_power(&a, s).unwrap(), &matrix_power_series(a.entries(), s, 80).unwrap()));
    }
    pass &= semi <= C7_SEMIGROUP_TOL && inv <= C7_INVERSE_TOL && series <= C7_SERIES_TOL;
    notes.push(format!("semigroup {semi:.1e}, inverse {inv:.1e}, series {series:.1e}"));

    let g = grid(21);
    let mut axioms = 0.0f64;
    for (_, c) in shipped_copulas() {
        for i in 0..21 {
            for j in 0..21 {
                axioms = axioms.max(axiom_violation(c.as_ref(), [g[i], g[j]]));
                if i < 20 && j < 20 {
                    axioms = axioms.max(rectangle_deficit(c.as_ref(), [g[i], g[j]], [g[i + 1], g[j + 1]]));
                }
            }
        }
        for _ in 0..2000 {
            let (a, b): ([f64; 2], [f64; 2]) = (rng.random(), rng.random());
            axioms = axioms.max(axiom_violation(c.as_ref(), a));
            let (lo, hi) = ([a[0].min(b[0]), a[1].min(b[1])], [a[0].max(b[0]), a[1].max(b[1])]);
            axioms = axioms.max(rectangle_deficit(c.as_ref(), lo, hi));
        }
    }
    pass &= axioms <= C7_COPULA_TOL;
    notes.push(format!("copula axioms {axioms:.1e}"));

    let (mut scalar, mut operator) = (0.0f64, 0.0f64);
    for _ in 0..C7_DRAWS {
        let p = MoParams::new(rng.random_range(0.05..5.0), rng.random_range(0.05..5.0), rng.random_range(0.05..5.0))
            .unwrap();
        let t = rng.random_range(0.01..100.0);
        let w = [rng.random_range(0.01..10.0), rng.random_range(0.01..10.0)];
        let (kappa, base) = mo_bl_standard(&w, &p).unwrap();
        let (_, scaled) = mo_bl_standard(&[t * w[0], t * w[1]], &p).unwrap();
        scalar = scalar.max((scaled - t.powf(kappa) * base).abs() / (t.powf(kappa) * base).max(1.0));
        let a = mo_operator_index(&p).unwrap();
        operator = operator.max(homogeneity_residual(|x| mo_bl_operator(x, &p), &a, &w, t).unwrap());
        let (lambda, beta) = (rng.random_range(0.1..5.0), rng.random_range(0.2..5.0));
        let id = TailIndexMatrix::identity(2).unwrap();
        operator =
            operator.max(homogeneity_residual(|x| pareto4_lower_exponent(lambda, beta, x), &id, &w, t).unwrap());
    }
    pass &= scalar <= C7_HOMOGENEITY_TOL && operator <= C7_HOMOGENEITY_TOL;
    notes.push(format!("homogeneity scalar {scalar:.1e}, operator {operator:.1e}"));
    Outcome { pass, detail: notes.join("; ") }
}

fn criterion8() -> Outcome {
    let config = EstimatorConfig::default();
    let c = mo_survival_copula(unit());
    let mut notes = Vec::new();
    let mut pass = true;
    for lambda in [2.0 / 3.0, 0.1] {
        let a = TailIndexMatrix::diagonal(&[lambda, lambda]).unwrap();
        let r = estimate_tail_function(&c, &a, &[1.0, 0.0], &config, Side::Lower, Target::Exponent);
        let ok = matches!(r, Err(Error::Diverging { .. }));
        pass &= ok;
        notes.push(match r {
            Err(e) => format!("diag({lambda:.3}) on (1, 0): {}", e.diagnostic_name()),
            Ok(e) => format!("diag({lambda:.3}) on (1, 0): value {} (expected Diverging)", e.value),
        });
    }
    let ind = independence_copula(2).unwrap();
    let id = TailIndexMatrix::identity(2).unwrap();
    match estimate_tail_function(&ind, &id, &[1.0, 1.0], &config, Side::Lower, Target::Cdf) {
        Ok(e) => {
            let ok = e.verdict == Verdict::TailIndependent
                && e.value == 0.0
                && (e.slope - 2.0).abs() <= C8_INDEPENDENCE_SLOPE_TOL;
            pass &= ok;
            notes.push(format!("independence at I: value {}, slope {:.4}, {:?}", e.value, e.slope, e.verdict));
        }
        Err(e) => {
            pass = false;
            notes.push(format!("independence at I: unexpected {}", e.diagnostic_name()));
        }
    }
    Outcome { pass, detail: notes.join("; ") }
}

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "Marshall-Olkin lower tail order", criterion1, C1_BUDGET),
        (2, "operator tail function recovery", criterion2, C2_BUDGET),
        (3, "Pareto-IV exponent identity", criterion3, C3_BUDGET),
        (4, "regular-variation limit of the Marshall-Olkin/Pareto model", criterion4, C4_BUDGET),
        (5, "copula/intensity round trip", criterion5, C5_BUDGET),
        (6, "Monte Carlo agreement", criterion6, C6_BUDGET),
        (7, "property suites", criterion7, C7_BUDGET),
        (8, "estimator diagnostics", criterion8, Duration::from_secs(5)),
    ];
    let mut failed = 0;
    for (id, name, run, budget) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = outcome.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] criterion {id}: {name}: {} [{:.3} s, budget {} s]",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
