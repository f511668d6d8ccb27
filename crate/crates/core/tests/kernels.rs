//! Identities of the explicit kernels, checked by quadrature.

use shearmix::kernels::{heat_dirichlet, heat_line, heat_torus, kolmogorov_kernel, KolmogorovState};
use shearmix::validate::kolmogorov_pde_residual;
use std::f64::consts::PI;

/// Periodic trapezoid rule, spectrally accurate for smooth periodic integrands.
fn torus_integral(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    (0..n).map(|i| f(i as f64 / n as f64)).sum::<f64>() / n as f64
}

#[test]
fn torus_kernel_is_normalized_and_satisfies_chapman_kolmogorov() {
    for t in [0.01, 0.1, 0.7] {
        let mass = torus_integral(400, |z| heat_torus(0.3, z, t, 6).unwrap().value);
        assert!((mass - 1.0).abs() < 1e-10, "t = {t}: mass {mass}");
        let (s, x, xp) = (0.05, 0.2, 0.85);
        let composed = torus_integral(400, |z| {
            heat_torus(x, z, s, 6).unwrap().value * heat_torus(z, xp, t, 6).unwrap().value
        });
        let direct = heat_torus(x, xp, s + t, 6).unwrap().value;
        assert!((composed - direct).abs() < 1e-9 * direct.max(1.0), "t = {t}");
    }
}

#[test]
fn dirichlet_kernel_sits_below_the_line_kernel() {
    for (a, b) in [(0.0, 1.0), (-0.3, 0.4)] {
        for t in [0.002, 0.03, 0.5] {
            for i in 1..20 {
                for j in 1..20 {
                    let x = a + (b - a) * i as f64 / 20.0;
                    let xp = a + (b - a) * j as f64 / 20.0;
                    let d = heat_dirichlet(x, xp, (a, b), t, 4).unwrap().value;
                    assert!(d >= -1e-14);
                    assert!(d <= heat_line(x - xp, t) + 1e-12, "({x}, {xp}, {t})");
                }
            }
        }
    }
}

#[test]
fn dirichlet_smoothing_bound() {
    // ||u(t)||^2 <= (8 pi t)^{-1/2} for the solution started from a unit mass
    for t in [0.01, 0.1, 1.0] {
        for x0 in [0.1, 0.5, 0.77] {
            let n = 4000;
            let h = 1.0 / n as f64;
            let sq: f64 = (1..n)
                .map(|i| heat_dirichlet(i as f64 * h, x0, (0.0, 1.0), t, 4).unwrap().value.powi(2))
                .sum::<f64>()
                * h;
            assert!(sq <= (8.0 * PI * t).powf(-0.5) + 1e-6, "t = {t}, x0 = {x0}: {sq}");
        }
    }
}

#[test]
fn kolmogorov_kernel_integrates_to_one() {
    let state = |x: f64, y: f64| KolmogorovState { x0: 0.4, y0: -0.3, x, y, t: 1.0 };
    let h = 0.04;
    let mut total = 0.0;
    for i in -300..=300 {
        for j in -300..=300 {
            total += kolmogorov_kernel(&state(0.4 + i as f64 * h, -0.3 + j as f64 * h)).unwrap();
        }
    }
    total *= h * h;
    assert!((total - 1.0).abs() < 1e-6, "mass {total}");
}

#[test]
fn kolmogorov_kernel_solves_its_equation() {
    for (x, y, t) in [(0.3, 0.1, 0.5), (-1.0, 0.7, 1.2), (0.8, -0.9, 2.0), (0.0, 0.0, 1.0)] {
        let s = KolmogorovState { x0: 0.0, y0: 0.0, x, y, t };
        let r = kolmogorov_pde_residual(&s, 1e-2).unwrap();
        assert!(r.abs() < 1e-4, "residual {r} at ({x}, {y}, {t})");
    }
}
