//! Structural properties of the spectral evolution.

use shearmix::evolve2d::{Evolver, ModeField};
use shearmix::spectral1d::Grid1d;
use shearmix::VelocityField;
use std::f64::consts::PI;

fn sample(nx: usize, ny: usize, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    (0..nx)
        .flat_map(|i| (0..ny).map(move |l| (i, l)))
        .map(|(i, l)| f(i as f64 / nx as f64, l as f64 / ny as f64))
        .collect()
}

const NX: usize = 48;
const NY: usize = 9;
const K: usize = 4;

fn evolve(v: &VelocityField, u0: &[f64], t: f64) -> ModeField {
    let grid = Grid1d::torus(NX);
    let field = ModeField::from_samples(grid, NY, K, u0).unwrap();
    Evolver::new(v, grid, K).unwrap().step(&field, t).unwrap()
}

#[test]
fn nonnegative_data_stays_nonnegative() {
    let u0 = sample(NX, NY, |x, y| (1.0 + (2.0 * PI * x).cos()) * (1.0 + (2.0 * PI * y).sin()));
    for v in [VelocityField::cosine(1.0, 1.0), VelocityField::sawtooth(2.0, 1.0)] {
        for t in [0.01, 0.1, 1.0] {
            let u = evolve(&v, &u0, t).to_samples(NY).unwrap();
            let min = u.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-10, "min {min} at t = {t}");
        }
    }
}

#[test]
fn parseval_and_dissipation() {
    let u0 = sample(NX, NY, |x, y| (2.0 * PI * (x + y)).sin() + 0.3 * (4.0 * PI * x).cos());
    let v = VelocityField::cosine(1.0, 1.0);
    let field = ModeField::from_samples(Grid1d::torus(NX), NY, K, &u0).unwrap();
    let direct = (u0.iter().map(|u| u * u).sum::<f64>() / (NX * NY) as f64).sqrt();
    assert!((field.l2_norm() - direct).abs() < 1e-12);

    let mut last = field.l2_norm();
    for t in [0.01, 0.05, 0.2, 1.0] {
        let now = evolve(&v, &u0, t).l2_norm();
        assert!(now <= last + 1e-13);
        last = now;
    }
}

#[test]
fn modes_evolve_independently() {
    let v = VelocityField::two_plateau(0.0, 1.0);
    let a = sample(NX, NY, |x, y| (2.0 * PI * y).cos() * (1.0 + (2.0 * PI * x).sin()));
    let b = sample(NX, NY, |x, y| (4.0 * PI * y).sin() + (2.0 * PI * x).cos());
    let sum: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p + q).collect();
    let (ea, eb, es) = (evolve(&v, &a, 0.3), evolve(&v, &b, 0.3), evolve(&v, &sum, 0.3));
    for k in -(K as i64)..=(K as i64) {
        let only_a = ea.mode(k).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if k.abs() != 1 {
            assert!(only_a < 1e-12, "mode {k} was excited from a k = 1 field");
        }
        for ((x, y), z) in ea.mode(k).iter().zip(eb.mode(k)).zip(es.mode(k)) {
            assert!((*x + *y - *z).norm() < 1e-12);
        }
    }
    assert!((es.mass() - (ea.mass() + eb.mass())).abs() < 1e-12);
}
