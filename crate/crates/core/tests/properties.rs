//! Invariants of the functionals checked on random inputs.

use proptest::prelude::*;
use shearmix::functionals::{
    doeblin_constants, doeblin_iterate, local_phi, local_phi_inverse, omega1, omega2_torus,
    resolvent_bound_omega1, wei_phi, wei_phi_inverse, Tiny,
};
use shearmix::kernels::{heat_torus, heat_torus_series};
use shearmix::mcsim::{clopper_pearson_lower, ks_statistic};
use shearmix::VelocityField;
use std::f64::consts::PI;

fn step_profile() -> impl Strategy<Value = VelocityField> {
    prop::collection::vec(-2.0f64..2.0, 2..7).prop_map(|values| {
        let n = values.len();
        let breaks = (0..=n).map(|i| i as f64 / n as f64).collect();
        VelocityField::piecewise_constant(breaks, values).unwrap()
    })
}

fn linear_profile() -> impl Strategy<Value = VelocityField> {
    prop::collection::vec(-1.0f64..1.0, 3..6).prop_map(|mut values| {
        let n = values.len();
        values.push(values[0]);
        let knots = (0..=n).map(|i| i as f64 / n as f64).collect();
        VelocityField::piecewise_linear(knots, values).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn osc_is_shift_invariant_and_scales(v in step_profile(), lambda in -3.0f64..3.0, c in -5.0f64..5.0) {
        let w = v.scaled(lambda).shifted(c);
        prop_assert!((w.osc() - lambda.abs() * v.osc()).abs() <= 1e-12 * (1.0 + v.osc()));
    }

    #[test]
    fn omega1_grows_with_the_window(v in linear_profile(), e1 in 0.02f64..0.25, e2 in 0.02f64..0.25) {
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let a = omega1(&v, (0.0, 1.0), lo, 64).unwrap();
        let b = omega1(&v, (0.0, 1.0), hi, 64).unwrap();
        prop_assert!(a <= b * (1.0 + 1e-9) + 1e-15);
    }

    #[test]
    fn omega1_resolvent_bound_stays_below_its_ceiling(w in 0.0f64..1e3, eps in 0.01f64..0.5) {
        let r = resolvent_bound_omega1(w, eps, 0.0);
        prop_assert!(r >= 0.0);
        prop_assert!(r <= PI * PI / (4.0 * eps * eps) * (1.0 + 1e-12));
    }

    #[test]
    fn phi_inverses_round_trip(s in 0.0f64..0.78, u in 0.0f64..1.55) {
        prop_assert!((wei_phi_inverse(wei_phi(s)) - s).abs() <= 1e-12);
        prop_assert!((local_phi_inverse(local_phi(u)) - u).abs() <= 1e-12);
    }

    #[test]
    fn doeblin_constants_are_consistent(ln_alpha in -700.0f64..-0.01, t in 0.01f64..100.0) {
        let d = doeblin_constants(Tiny::from_ln(ln_alpha), t).unwrap();
        prop_assert!(d.c >= 1.0);
        prop_assert!(d.rho.value >= 0.0 && d.rho.ln.is_finite());
        // -ln(1 - alpha) >= alpha
        prop_assert!(d.rho.ln >= ln_alpha - t.ln() - 1e-12);
    }

    #[test]
    fn torus_kernel_representations_agree(x in 0.0f64..1.0, xp in 0.0f64..1.0, t in 0.01f64..2.0) {
        let a = heat_torus(x, xp, t, 8).unwrap().value;
        let b = heat_torus_series(x, xp, t, 80).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
    }

    #[test]
    fn clopper_pearson_is_below_the_estimate(n in 1u64..100_000, frac in 0.0f64..1.0) {
        let k = ((n as f64) * frac) as u64;
        let lo = clopper_pearson_lower(k, n, 0.99);
        prop_assert!((0.0..=k as f64 / n as f64 + 1e-12).contains(&lo));
    }

    #[test]
    fn ks_statistic_is_a_distance(mut xs in prop::collection::vec(0.0f64..1.0, 1..200)) {
        let d = ks_statistic(&mut xs, |x| x.clamp(0.0, 1.0));
        prop_assert!((0.0..=1.0).contains(&d));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn omega2_is_shift_invariant_and_scales(v in linear_profile(), lambda in 0.2f64..3.0, c in -2.0f64..2.0) {
        let base = omega2_torus(&v, 32).unwrap();
        let moved = omega2_torus(&v.scaled(lambda).shifted(c), 32).unwrap();
        let flipped = omega2_torus(&v.scaled(-lambda), 32).unwrap();
        prop_assert!((moved - lambda * base).abs() <= 1e-8 * (1.0 + lambda * base));
        prop_assert!((flipped - lambda * base).abs() <= 1e-8 * (1.0 + lambda * base));
        prop_assert!(base <= 0.5 * v.osc() + 1e-9);
    }
}

#[test]
fn doeblin_iterate_holds_on_random_chains() {
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    for _ in 0..100 {
        // doubly stochastic: a random mixture of permutation matrices
        let n = rng.random_range(2..7);
        let mut kernel = vec![vec![0.0; n]; n];
        let terms = rng.random_range(1..5);
        let weights: Vec<f64> = (0..terms).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = weights.iter().sum();
        for w in &weights {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            for (i, j) in perm.into_iter().enumerate() {
                kernel[i][j] += 0.5 * w / total;
            }
        }
        for row in &mut kernel {
            row.iter_mut().for_each(|p| *p += 0.5 / n as f64);
        }
        // alpha = n * min entry is a valid one-step minorization
        let alpha = kernel.iter().flatten().copied().fold(1.0, f64::min) * n as f64;
        let check = doeblin_iterate(&kernel, 1, alpha.min(0.999), 30).unwrap();
        assert!(check.violations.is_empty(), "violations at {:?}", check.violations);
    }
}
