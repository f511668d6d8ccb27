//! Heat kernels on the line, the torus and a Dirichlet interval, and the
//! Gaussian fundamental solution of the Kolmogorov operator
//! `d_t - d_xx + x d_y` on the plane.

use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// Truncated series or image sum with a certified bound on the neglected tail.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    pub tail_bound: f64,
    pub terms: usize,
}

const TAIL_TARGET: f64 = 1e-14;
const MAX_TERMS: usize = 10_000_000;

pub fn heat_line(x: f64, t: f64) -> f64 {
    (-x * x / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("time must be positive, got {t}")))
    }
}

/// Grow `terms` from `start` until `tail(terms) < TAIL_TARGET`.
fn cutoff(start: usize, tail: impl Fn(usize) -> f64) -> Result<usize> {
    let mut k = start.max(1);
    while tail(k) >= TAIL_TARGET {
        if k > MAX_TERMS {
            return Err(Error::Numeric("kernel series did not reach its tail target".into()));
        }
        k *= 2;
    }
    Ok(k)
}

/// Periodized Gaussian `sum_m G_t(x - x' + m)`, images `|m| <= truncation` at
/// least and more if the tail bound requires it.
pub fn heat_torus(x: f64, xp: f64, t: f64, truncation: usize) -> Result<KernelValue> {
    check_time(t)?;
    let d = crate::velocity::wrap_unit(x - xp + 0.5) - 0.5;
    let tail = |m: usize| {
        let edge = m as f64 + 0.5;
        let q = (-(m as f64 + 1.0) / (2.0 * t)).exp();
        2.0 * heat_line(edge, t) / (1.0 - q)
    };
    let m = cutoff(truncation, tail)?;
    let mut value = heat_line(d, t);
    for j in 1..=m {
        let j = j as f64;
        value += heat_line(d + j, t) + heat_line(d - j, t);
    }
    Ok(KernelValue {
        value,
        tail_bound: tail(m),
        terms: 2 * m + 1,
    })
}

/// The same kernel from its Fourier series `1 + 2 sum_k exp(-4 pi^2 k^2 t) cos(2 pi k d)`.
pub fn heat_torus_series(x: f64, xp: f64, t: f64, truncation: usize) -> Result<KernelValue> {
    check_time(t)?;
    let a = 4.0 * PI * PI * t;
    let tail = |k: usize| {
        let k1 = (k + 1) as f64;
        2.0 * (-a * k1 * k1).exp() / (1.0 - (-a * (2.0 * k1 + 1.0)).exp())
    };
    let m = cutoff(truncation, tail)?;
    let d = x - xp;
    let mut value = 1.0;
    for k in 1..=m {
        let k = k as f64;
        value += 2.0 * (-a * k * k).exp() * (2.0 * PI * k * d).cos();
    }
    Ok(KernelValue {
        value,
        tail_bound: tail(m),
        terms: m + 1,
    })
}

/// Dirichlet heat kernel on `[a, b]` by its sine eigen-series.
pub fn heat_dirichlet(x: f64, xp: f64, interval: (f64, f64), t: f64, truncation: usize) -> Result<KernelValue> {
    check_time(t)?;
    let (a, b) = interval;
    if !(b > a) {
        return Err(invalid("empty interval"));
    }
    for p in [x, xp] {
        if p < a || p > b {
            return Err(Error::OutOfDomain { x: p, a, b });
        }
    }
    let len = b - a;
    let rate = PI * PI * t / (len * len);
    let tail = |k: usize| {
        let k1 = (k + 1) as f64;
        2.0 / len * (-rate * k1 * k1).exp() / (1.0 - (-rate * (2.0 * k1 + 1.0)).exp())
    };
    let m = cutoff(truncation, tail)?;
    let mut value = 0.0;
    for k in 1..=m {
        let kf = k as f64;
        value += (-rate * kf * kf).exp()
            * (kf * PI * (x - a) / len).sin()
            * (kf * PI * (xp - a) / len).sin();
    }
    Ok(KernelValue {
        value: 2.0 / len * value,
        tail_bound: tail(m),
        terms: m,
    })
}

/// Start and end point of a transition of the Kolmogorov diffusion.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct KolmogorovState {
    pub x0: f64,
    pub y0: f64,
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

/// Minimal-energy control `w(s) = a + 2 b s` steering `(x0, y0)` to `(x, y)`
/// in time `t` under `x' = w`, `y' = x`, with its cost `int w^2 / 4`.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct KolmogorovControl {
    pub a: f64,
    pub b: f64,
    pub cost: f64,
}

pub fn kolmogorov_control(s: &KolmogorovState) -> Result<KolmogorovControl> {
    check_time(s.t)?;
    let t = s.t;
    let dx = s.x - s.x0;
    let dy = s.y - s.y0 - s.x0 * t;
    // endpoint conditions: a t + b t^2 = dx and a t^2 / 2 + b t^3 / 3 = dy
    let a = -2.0 * dx / t + 6.0 * dy / (t * t);
    let b = 3.0 * dx / (t * t) - 6.0 * dy / (t * t * t);
    let cost = 0.25 * (a * a * t + 2.0 * a * b * t * t + 4.0 / 3.0 * b * b * t * t * t);
    Ok(KolmogorovControl { a, b, cost })
}

/// `(x - x0)^2 / (4 t) + 3 / t^3 (y - y0 - (x + x0) t / 2)^2`.
pub fn kolmogorov_psi(s: &KolmogorovState) -> f64 {
    let t = s.t;
    let dx = s.x - s.x0;
    let m = s.y - s.y0 - 0.5 * (s.x + s.x0) * t;
    dx * dx / (4.0 * t) + 3.0 / (t * t * t) * m * m
}

/// Normalizing constant of `t^{-2} exp(-psi)` over the plane: the product of
/// the Gaussian integrals in `x` and in the shifted `y` variable is `2 pi t^2 / sqrt 3`.
pub fn kolmogorov_z() -> f64 {
    3f64.sqrt() / (2.0 * PI)
}

pub fn kolmogorov_kernel(s: &KolmogorovState) -> Result<f64> {
    check_time(s.t)?;
    Ok(kolmogorov_z() / (s.t * s.t) * (-kolmogorov_psi(s)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gl8_nodes;
    use approx::assert_relative_eq;

    #[test]
    fn heat_line_values() {
        assert_relative_eq!(heat_line(0.0, 1.0 / (4.0 * PI)), 1.0, max_relative = 1e-15);
        let want = (2.0 / (std::f64::consts::E * PI)).sqrt();
        assert_relative_eq!(heat_line(0.5, 0.125), want, max_relative = 1e-14);
        let mut total = 0.0;
        for i in 0..400 {
            let c = -10.0 + 0.05 * i as f64;
            total += gl8_nodes(c, c + 0.05).iter().map(|(x, w)| w * heat_line(*x, 0.7)).sum::<f64>();
        }
        assert!((total - 1.0).abs() < 1e-8);
    }

    #[test]
    fn torus_image_sum_and_series_agree() {
        for &t in &[0.01, 0.125, 0.5, 2.0] {
            for &x in &[0.0, 0.13, 0.5, 0.91] {
                let a = heat_torus(x, 0.2, t, 1).unwrap();
                let b = heat_torus_series(x, 0.2, t, 1).unwrap();
                assert!((a.value - b.value).abs() < 1e-12, "t={t} x={x}");
                assert!(a.tail_bound < 1e-14 && b.tail_bound < 1e-14);
            }
        }
    }

    #[test]
    fn dirichlet_kernel_vanishes_on_boundary_and_is_symmetric() {
        let i = (0.0, 1.0);
        assert!(heat_dirichlet(0.0, 0.3, i, 0.1, 1).unwrap().value.abs() < 1e-15);
        let p = heat_dirichlet(0.2, 0.7, i, 0.05, 1).unwrap().value;
        let q = heat_dirichlet(0.7, 0.2, i, 0.05, 1).unwrap().value;
        assert!((p - q).abs() < 1e-14);
        assert!(heat_dirichlet(1.2, 0.3, i, 0.1, 1).is_err());
    }

    #[test]
    fn free_streaming_costs_nothing() {
        let s = KolmogorovState {
            x0: 0.7,
            y0: -0.2,
            x: 0.7,
            y: -0.2 + 0.7 * 1.3,
            t: 1.3,
        };
        let c = kolmogorov_control(&s).unwrap();
        assert!(c.a.abs() < 1e-14 && c.b.abs() < 1e-14 && c.cost < 1e-28);
    }

    #[test]
    fn hand_evaluated_control() {
        let s = KolmogorovState {
            x0: 0.0,
            y0: 0.0,
            x: 0.0,
            y: 1.0,
            t: 1.0,
        };
        let c = kolmogorov_control(&s).unwrap();
        assert_relative_eq!(c.a, 6.0);
        assert_relative_eq!(c.b, -6.0);
        assert_relative_eq!(c.cost, 3.0);
        assert_relative_eq!(kolmogorov_psi(&s), 3.0);
    }
}
