//! Slow, independent reference computations used to cross-check the fast paths.
//!
//! Nothing here shares code with the routines it checks beyond the problem data.

use crate::functionals::Omega2Lp;
use crate::velocity::VelocityField;

/// Maximum of the `omega_2` LP found by enumerating every vertex of its
/// feasible polytope. Exponential in the number of nodes; meant for at most
/// about ten.
pub fn omega2_by_vertices(lp: &Omega2Lp) -> f64 {
    let n = lp.objective.len();
    let edges = lp.edges();
    // constraint families: node i (phi_i = +-1) then edge e (phi_j - phi_i = +-delta)
    let families = n + edges.len();
    let row_of = |f: usize| -> Vec<f64> {
        let mut r = vec![0.0; n];
        if f < n {
            r[f] = 1.0;
        } else {
            let (i, j) = edges[f - n];
            r[j] += 1.0;
            r[i] -= 1.0;
        }
        r
    };
    let level = |f: usize| if f < n { 1.0 } else { lp.max_step };
    let feasible = |phi: &[f64]| -> bool {
        let tol = 1e-9;
        phi.iter().all(|p| p.abs() <= 1.0 + tol)
            && edges
                .iter()
                .all(|&(i, j)| (phi[j] - phi[i]).abs() <= lp.max_step + tol)
    };
    let mut best = f64::NEG_INFINITY;
    let pick = n - 1;
    let mut combo: Vec<usize> = (0..pick).collect();
    loop {
        let mut m = Vec::with_capacity(n * n);
        m.extend_from_slice(&lp.mass);
        for &f in &combo {
            m.extend(row_of(f));
        }
        if let Some(lu) = DenseLu::new(n, m) {
            for signs in 0u32..(1 << pick) {
                let mut rhs = vec![0.0; n];
                for (k, &f) in combo.iter().enumerate() {
                    rhs[k + 1] = if signs >> k & 1 == 0 { level(f) } else { -level(f) };
                }
                let phi = lu.solve(rhs);
                if feasible(&phi) {
                    let val: f64 = lp.objective.iter().zip(&phi).map(|(c, p)| c * p).sum();
                    best = best.max(val);
                }
            }
        }
        // next combination in lexicographic order
        let mut k = pick;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if combo[k] < families - pick + k {
                combo[k] += 1;
                for l in k + 1..pick {
                    combo[l] = combo[l - 1] + 1;
                }
                break;
            }
        }
    }
}

struct DenseLu {
    n: usize,
    a: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseLu {
    fn new(n: usize, mut a: Vec<f64>) -> Option<DenseLu> {
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[i * n + k].abs().partial_cmp(&a[j * n + k].abs()).unwrap())
                .unwrap();
            if a[p * n + k].abs() < 1e-12 {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            for i in k + 1..n {
                let f = a[i * n + k] / a[k * n + k];
                a[i * n + k] = f;
                for j in k + 1..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
            }
        }
        Some(DenseLu { n, a, perm })
    }

    fn solve(&self, b: Vec<f64>) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                y[i] -= self.a[i * n + j] * y[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                y[i] -= self.a[i * n + j] * y[j];
            }
            y[i] /= self.a[i * n + i];
        }
        y
    }
}

/// Affine residual of the primitive of `v` on `[c, d]` by a fine Riemann sum
/// of `v` and the normal equations of a sampled least-squares fit.
pub fn affine_residual_sampled(v: &VelocityField, c: f64, d: f64, samples: usize) -> f64 {
    let h = (d - c) / samples as f64;
    // primitive on the sample nodes by the midpoint rule on a 16x finer grid
    let sub = 16;
    let mut p = Vec::with_capacity(samples + 1);
    let mut acc = 0.0;
    p.push(0.0);
    for i in 0..samples {
        let mut s = 0.0;
        for k in 0..sub {
            s += v.value(c + (i as f64 + (k as f64 + 0.5) / sub as f64) * h);
        }
        acc += s * h / sub as f64;
        p.push(acc);
    }
    let xs: Vec<f64> = (0..=samples).map(|i| c + i as f64 * h).collect();
    // trapezoid weights
    let w = |i: usize| if i == 0 || i == samples { 0.5 * h } else { h };
    let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..=samples {
        let x = xs[i] - c;
        s0 += w(i);
        s1 += w(i) * x;
        s2 += w(i) * x * x;
        t0 += w(i) * p[i];
        t1 += w(i) * x * p[i];
    }
    let det = s0 * s2 - s1 * s1;
    let q = (t0 * s2 - t1 * s1) / det;
    let slope = (s0 * t1 - s1 * t0) / det;
    (0..=samples)
        .map(|i| {
            let e = p[i] - q - slope * (xs[i] - c);
            w(i) * e * e
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampled_residual_of_linear_profile() {
        let v = VelocityField::piecewise_linear(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let r = affine_residual_sampled(&v, 0.0, 1.0, 4000);
        assert!((r - 1.0 / 720.0).abs() < 1e-8, "{r}");
    }

    #[test]
    fn vertex_enumeration_on_tiny_box() {
        // three nodes, no effective step limit: maximize phi_0 - phi_1 with
        // equal masses, the optimum is phi = (1, -1, 0) with value 2
        let lp = Omega2Lp {
            objective: vec![1.0, -1.0, 0.0],
            mass: vec![1.0, 1.0, 1.0],
            max_step: 10.0,
            periodic: true,
        };
        assert!((omega2_by_vertices(&lp) - 2.0).abs() < 1e-12);
    }
}
