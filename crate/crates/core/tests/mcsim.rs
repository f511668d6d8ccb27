//! Statistical checks of the path simulator against exact laws.

use shearmix::kernels::heat_torus;
use shearmix::mcsim::{sample_histogram, simulate, tv_decay, Drift, Ensembles, PathConfig};
use shearmix::VelocityField;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use rand::Rng;

#[test]
fn zero_shear_x_marginal_is_the_torus_heat_kernel() {
    let (m, n, t, x0) = (32, 100_000, 0.05, 0.2);
    let drift = Drift::from(VelocityField::constant(0.0));
    let h = simulate((x0, 0.5), &drift, &PathConfig::new(1e-3, n, t, 5), m).unwrap();
    let mut chi2 = 0.0;
    for row in 0..m {
        let observed: u64 = (0..m).map(|c| h.count(row, c)).sum();
        // midpoint rule on 50 sub-points per cell
        let p: f64 = (0..50)
            .map(|j| {
                let x = (row as f64 + (j as f64 + 0.5) / 50.0) / m as f64;
                heat_torus(x, x0, t, 6).unwrap().value
            })
            .sum::<f64>()
            / (50 * m) as f64;
        let expected = p * n as f64;
        chi2 += (observed as f64 - expected).powi(2) / expected;
    }
    let pval = 1.0 - ChiSquared::new((m - 1) as f64).unwrap().cdf(chi2);
    assert!(pval > 1e-3, "chi2 = {chi2}, p = {pval}");
}

#[test]
fn uniform_sampler_gives_alpha_near_one() {
    let h = sample_histogram(4, 100_000, 9, |rng| (rng.random::<f64>(), rng.random::<f64>()));
    assert!(h.alpha_hat() >= 0.9, "alpha_hat {}", h.alpha_hat());
}

#[test]
fn shared_streams_from_one_start_have_zero_distance() {
    let drift = Drift::from(VelocityField::two_plateau(0.0, 1.0));
    let cfg = PathConfig::new(1e-2, 5_000, 2.0, 3);
    let tv = tv_decay(&drift, (0.3, 0.3), (0.3, 0.3), &[0.5, 1.0, 2.0], &cfg, 8, Ensembles::Shared).unwrap();
    assert!(tv.tv.iter().all(|d| *d == 0.0), "{:?}", tv.tv);
}

#[test]
fn same_seed_same_histogram() {
    let drift = Drift::from(VelocityField::cosine(1.0, 1.0));
    let cfg = PathConfig::new(1e-2, 10_000, 0.5, 77);
    let a = simulate((0.1, 0.9), &drift, &cfg, 6).unwrap();
    let b = simulate((0.1, 0.9), &drift, &cfg, 6).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    let c = simulate((0.1, 0.9), &drift, &PathConfig { seed: 78, ..cfg }, 6).unwrap();
    assert_ne!(a.to_csv(), c.to_csv());
}
