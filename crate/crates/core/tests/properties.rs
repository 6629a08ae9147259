mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tailop::copulas::{pareto4_survival_copula, survival_copula_of, Copula};
use tailop::margins::{pareto4_margin, pareto_margin, Margin};
use tailop::matpow::{apply_scaling, matrix_power, matrix_power_series};
use tailop::mrv::{mo_pareto_intensity_oracle, pareto4_intensity_oracle};
use tailop::taildep::{
    homogeneity_residual, mo_bl_operator, mo_bl_standard, mo_operator_index, pareto4_lower_exponent,
    pareto4_lower_tail,
};
use tailop::{MoParams, TailIndexMatrix};

fn spd(seed: u64, d: usize) -> TailIndexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TailIndexMatrix::new(random_spd(&mut rng, d, 0.1, 5.0)).unwrap()
}

fn mo_params() -> impl Strategy<Value = MoParams> {
    (0.05f64..5.0, 0.05f64..5.0, 0.05f64..5.0).prop_map(|(a, b, c)| MoParams::new(a, b, c).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn power_semigroup(seed in any::<u64>(), d in 2usize..=4, u in 0.01f64..=1.0, v in 0.01f64..=1.0) {
        let a = spd(seed, d);
        let lhs = matrix_power(&a, u).unwrap() * matrix_power(&a, v).unwrap();
        let rhs = matrix_power(&a, u * v).unwrap();
        prop_assert!(max_abs_diff(&lhs, &rhs) <= 1e-10);
    }

    #[test]
    fn power_inverse(seed in any::<u64>(), d in 2usize..=4, u in 0.05f64..=1.0) {
        let a = spd(seed, d);
        let prod = matrix_power(&a, u).unwrap() * matrix_power(&a, 1.0 / u).unwrap();
        prop_assert!(max_abs_diff(&prod, &DMatrix::identity(d, d)) <= 1e-9);
    }

    #[test]
    fn power_matches_series(seed in any::<u64>(), d in 2usize..=4, u in 0.2f64..=5.0) {
        let a = spd(seed, d);
        let series = matrix_power_series(a.entries(), u, 80).unwrap();
        prop_assert!(max_abs_diff(&matrix_power(&a, u).unwrap(), &series) <= 1e-8);
    }

    #[test]
    fn scaled_points_decay(seed in any::<u64>(), d in 2usize..=4, w in prop::collection::vec(0.1f64..10.0, 4)) {
        let a = spd(seed, d);
        let norms: Vec<f64> = (0..40)
            .map(|k| {
                let s = apply_scaling(&a, 0.5f64.powi(k), &w[..d]).unwrap();
                s.iter().fold(0.0f64, |m, x| m.max(x.abs()))
            })
            .collect();
        prop_assert!(norms[30..].windows(2).all(|p| p[1] < p[0]), "{norms:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn copula_axioms_at_random_points(u1 in 0.0f64..=1.0, u2 in 0.0f64..=1.0) {
        for (name, c) in shipped_copulas() {
            prop_assert!(axiom_violation(c.as_ref(), [u1, u2]) <= 1e-12, "{name} at {:?}", (u1, u2));
        }
    }

    #[test]
    fn copula_rectangles_at_random_points(
        a1 in 0.0f64..=1.0, a2 in 0.0f64..=1.0, b1 in 0.0f64..=1.0, b2 in 0.0f64..=1.0,
    ) {
        let (lo, hi) = ([a1.min(b1), a2.min(b2)], [a1.max(b1), a2.max(b2)]);
        for (name, c) in shipped_copulas() {
            prop_assert!(rectangle_deficit(c.as_ref(), lo, hi) <= 1e-12, "{name} on {lo:?}..{hi:?}");
        }
    }

    #[test]
    fn survival_dual_round_trip(u1 in 0.0f64..=1.0, u2 in 0.0f64..=1.0) {
        for (name, c) in shipped_copulas() {
            let dual = survival_copula_of(c.clone()).unwrap();
            let lhs = c.joint_survival(&[1.0 - u1, 1.0 - u2]).unwrap();
            let rhs = dual.cdf(&[u1, u2]).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12, "{name}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn copula_axioms_on_grid() {
    let g = grid(21);
    for (name, c) in shipped_copulas() {
        for &x in &g {
            for &y in &g {
                assert!(axiom_violation(c.as_ref(), [x, y]) <= 1e-12, "{name} at ({x}, {y})");
            }
        }
        for i in 0..20 {
            for j in 0..20 {
                let (a, b) = ([g[i], g[j]], [g[i + 1], g[j + 1]]);
                assert!(rectangle_deficit(c.as_ref(), a, b) <= 1e-12, "{name} on {a:?}..{b:?}");
            }
        }
    }
}

#[test]
fn pareto4_diagonal_section() {
    // Ĉ(u, u) = [1 + (2 + λ)(u^{-1/β} - 1)/(1 + λ)]^{-β}, computed independently.
    for (lambda, beta) in [(1.0, 1.0), (2.0, 0.5), (0.5, 2.0)] {
        let c = pareto4_survival_copula(lambda, beta).unwrap();
        for k in 0..=32 {
            let u = 10f64.powf(-8.0 + 0.25 * k as f64);
            let y = u.powf(-1.0 / beta) - 1.0;
            let want = (1.0 + (2.0 + lambda) * y / (1.0 + lambda)).powf(-beta);
            let got = c.cdf(&[u, u]).unwrap();
            assert!(((got - want) / want).abs() <= 1e-12, "λ={lambda} β={beta} u={u}");
            assert!((c.diagonal(u) - got).abs() <= 1e-12 * want.max(1e-300));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn scalar_homogeneity(p in mo_params(), t in 0.01f64..100.0, w1 in 0.01f64..10.0, w2 in 0.01f64..10.0) {
        let (kappa, base) = mo_bl_standard(&[w1, w2], &p).unwrap();
        let (_, scaled) = mo_bl_standard(&[t * w1, t * w2], &p).unwrap();
        let want = t.powf(kappa) * base;
        prop_assert!((scaled - want).abs() <= 1e-12 * want.max(1.0));
    }

    #[test]
    fn operator_homogeneity_mo(p in mo_params(), t in 0.01f64..100.0, w1 in 0.01f64..10.0, w2 in 0.01f64..10.0) {
        let a = mo_operator_index(&p).unwrap();
        let r = homogeneity_residual(|w| mo_bl_operator(w, &p), &a, &[w1, w2], t).unwrap();
        prop_assert!(r <= 1e-12, "residual {r}");
    }

    #[test]
    fn operator_homogeneity_pareto4(
        lambda in 0.1f64..5.0, beta in 0.2f64..5.0, t in 0.01f64..100.0,
        w1 in 0.01f64..10.0, w2 in 0.01f64..10.0,
    ) {
        let id = TailIndexMatrix::identity(2).unwrap();
        let r = homogeneity_residual(|w| pareto4_lower_exponent(lambda, beta, w), &id, &[w1, w2], t).unwrap();
        prop_assert!(r <= 1e-12, "residual {r}");
        let r = homogeneity_residual(|w| pareto4_lower_tail(lambda, beta, w), &id, &[w1, w2], t).unwrap();
        prop_assert!(r <= 1e-12, "residual {r}");
    }

    #[test]
    fn oracles_positive_and_monotone(
        p in mo_params(), w1 in 0.01f64..10.0, w2 in 0.01f64..10.0, d1 in 0.0f64..5.0, d2 in 0.0f64..5.0,
    ) {
        let lo = mo_bl_operator(&[w1, w2], &p).unwrap();
        let hi = mo_bl_operator(&[w1 + d1, w2 + d2], &p).unwrap();
        prop_assert!(lo > 0.0 && hi >= lo);
        let (_, lo) = mo_bl_standard(&[w1, w2], &p).unwrap();
        let (_, hi) = mo_bl_standard(&[w1 + d1, w2 + d2], &p).unwrap();
        prop_assert!(lo > 0.0 && hi >= lo);
        let lo = pareto4_lower_tail(1.5, 0.7, &[w1, w2]).unwrap();
        let hi = pareto4_lower_tail(1.5, 0.7, &[w1 + d1, w2 + d2]).unwrap();
        prop_assert!(lo > 0.0 && hi >= lo * (1.0 - 1e-15));
    }

    #[test]
    fn intensity_scaling(
        lambda in 0.1f64..5.0, beta in 0.2f64..5.0, g1 in 0.2f64..3.0, g2 in 0.2f64..3.0,
        s in 0.05f64..20.0, w1 in 0.05f64..20.0, w2 in 0.05f64..20.0,
    ) {
        let mu = pareto4_intensity_oracle(lambda, beta, g1, g2).unwrap();
        let w = [w1, w2];
        let sw = mu.scale_point(s, &w);
        for (lhs, rhs) in [
            (mu.box_complement(&sw).unwrap(), s.powf(-beta) * mu.box_complement(&w).unwrap()),
            (mu.upper_orthant(&sw).unwrap(), s.powf(-beta) * mu.upper_orthant(&w).unwrap()),
        ] {
            prop_assert!(((lhs - rhs) / rhs).abs() <= 1e-10, "{lhs} vs {rhs}");
        }
        let inf = f64::INFINITY;
        let joint = mu.box_complement(&[w1, inf]).unwrap() + mu.box_complement(&[inf, w2]).unwrap()
            - mu.upper_orthant(&w).unwrap();
        prop_assert!((joint - mu.box_complement(&w).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn hidden_intensity_scaling(
        p in mo_params(), a1 in 0.2f64..3.0, a2 in 0.2f64..3.0,
        s in 0.05f64..20.0, w1 in 0.05f64..20.0, w2 in 0.05f64..20.0,
    ) {
        let mu = mo_pareto_intensity_oracle(&p, [a1, a2]).unwrap();
        let w = [w1, w2];
        let lhs = mu.upper_orthant(&mu.scale_point(s, &w)).unwrap();
        let rhs = s.powf(-mu.beta()) * mu.upper_orthant(&w).unwrap();
        prop_assert!(((lhs - rhs) / rhs).abs() <= 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn intensity_nonincreasing(
        w1 in 0.05f64..20.0, w2 in 0.05f64..20.0, d1 in 0.0f64..5.0, d2 in 0.0f64..5.0,
    ) {
        let mu = pareto4_intensity_oracle(2.0, 0.5, 1.0, 2.0).unwrap();
        let (a, b) = (mu.box_complement(&[w1, w2]).unwrap(), mu.box_complement(&[w1 + d1, w2 + d2]).unwrap());
        prop_assert!(b <= a * (1.0 + 1e-14));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn margin_survival_monotone(t1 in 0.0f64..1e6, dt in 1e-6f64..1e6, alpha in 0.1f64..5.0) {
        let t2 = t1 + dt;
        let m = pareto_margin(alpha).unwrap();
        prop_assert!(m.survival(t2) <= m.survival(t1));
        let m = pareto4_margin(1.5, alpha, 0.8).unwrap();
        prop_assert!(m.survival(t2) <= m.survival(t1));
    }
}
