//! Dense complex matrix helpers on top of faer: matrix exponential and
//! extreme singular values.

use faer::linalg::solvers::Solve;
use faer::{c64, Mat};

use crate::error::{Error, Result};

pub type CMat = Mat<c64>;

/// Maximum absolute column sum.
pub fn norm_one(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn combine(terms: &[(f64, &CMat)], identity: f64) -> CMat {
    let n = terms[0].1.nrows();
    Mat::from_fn(n, n, |i, j| {
        let mut z = c64::new(if i == j { identity } else { 0.0 }, 0.0);
        for (c, m) in terms {
            z += m[(i, j)] * *c;
        }
        z
    })
}

const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371_920_351_148_152;

/// `exp(a)` by scaling and squaring with the degree-13 diagonal Padé approximant.
pub fn expm(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::InvalidInput("expm needs a square matrix".into()));
    }
    let norm = norm_one(a);
    if !norm.is_finite() {
        return Err(Error::Numeric("non-finite matrix in expm".into()));
    }
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scale = 0.5f64.powi(s);
    let a = Mat::from_fn(n, n, |i, j| a[(i, j)] * scale);
    let b = &PADE13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = combine(&[(b[13], &a6), (b[11], &a4), (b[9], &a2)], 0.0);
    let tail_u = combine(&[(b[7], &a6), (b[5], &a4), (b[3], &a2)], b[1]);
    let u_poly = &(&a6 * &inner_u) + &tail_u;
    let u = &a * &u_poly;
    let inner_v = combine(&[(b[12], &a6), (b[10], &a4), (b[8], &a2)], 0.0);
    let tail_v = combine(&[(b[6], &a6), (b[4], &a4), (b[2], &a2)], b[0]);
    let v = &(&a6 * &inner_v) + &tail_v;
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.partial_piv_lu().solve(&p);
    for _ in 0..s {
        r = &r * &r;
    }
    for j in 0..n {
        for i in 0..n {
            let z = r[(i, j)];
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::Numeric("matrix exponential overflowed".into()));
            }
        }
    }
    Ok(r)
}

/// Singular values in descending order.
pub fn singular_values(a: &CMat) -> Result<Vec<f64>> {
    a.singular_values()
        .map_err(|e| Error::Numeric(format!("singular value decomposition failed: {e:?}")))
}

pub fn sigma_min(a: &CMat) -> Result<f64> {
    Ok(*singular_values(a)?.last().expect("non-empty matrix"))
}

/// Spectral norm.
pub fn norm_two(a: &CMat) -> Result<f64> {
    Ok(singular_values(a)?[0])
}

pub fn apply(a: &CMat, x: &[c64]) -> Vec<c64> {
    let n = a.nrows();
    let mut out = vec![c64::new(0.0, 0.0); n];
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj == c64::new(0.0, 0.0) {
            continue;
        }
        let col = a.col(j);
        for i in 0..n {
            out[i] += col[i] * xj;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_diagonal_and_nilpotent() {
        let d = Mat::from_fn(3, 3, |i, j| {
            if i == j {
                c64::new(-(i as f64) * 7.0, i as f64)
            } else {
                c64::new(0.0, 0.0)
            }
        });
        let e = expm(&d).unwrap();
        for i in 0..3 {
            let want = c64::new(-(i as f64) * 7.0, i as f64).exp();
            assert!((e[(i, i)] - want).norm() < 1e-13);
        }
        // [[0, 1], [0, 0]] -> [[1, 1], [0, 1]]
        let mut nil = Mat::<c64>::zeros(2, 2);
        nil[(0, 1)] = c64::new(1.0, 0.0);
        let e = expm(&nil).unwrap();
        assert!((e[(0, 1)] - c64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((e[(0, 0)] - c64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn expm_rotation_with_large_norm() {
        let w = 40.0;
        let mut a = Mat::<c64>::zeros(2, 2);
        a[(0, 1)] = c64::new(w, 0.0);
        a[(1, 0)] = c64::new(-w, 0.0);
        let e = expm(&a).unwrap();
        assert!((e[(0, 0)].re - w.cos()).abs() < 1e-12);
        assert!((e[(0, 1)].re - w.sin()).abs() < 1e-12);
    }

    #[test]
    fn singular_values_of_scaled_identity() {
        let a = Mat::from_fn(4, 4, |i, j| if i == j { c64::new(0.0, 3.0) } else { c64::new(0.0, 0.0) });
        assert!((sigma_min(&a).unwrap() - 3.0).abs() < 1e-14);
        assert!((norm_two(&a).unwrap() - 3.0).abs() < 1e-14);
    }
}
