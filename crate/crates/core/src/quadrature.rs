//! Fixed Gauss-Legendre rules on a reference interval.

const GL5_X: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL5_W: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

const GL8_X: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_W: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Five-point rule on `[c, d]`; exact for polynomials of degree nine or less.
pub fn gl5(c: f64, d: f64, f: impl Fn(f64) -> f64) -> f64 {
    rule(&GL5_X, &GL5_W, c, d, f)
}

/// Eight-point rule on `[c, d]`.
pub fn gl8(c: f64, d: f64, f: impl Fn(f64) -> f64) -> f64 {
    rule(&GL8_X, &GL8_W, c, d, f)
}

/// Nodes and weights of the eight-point rule mapped to `[c, d]`.
pub fn gl8_nodes(c: f64, d: f64) -> [(f64, f64); 8] {
    let half = 0.5 * (d - c);
    let mid = 0.5 * (c + d);
    let mut out = [(0.0, 0.0); 8];
    for i in 0..8 {
        out[i] = (mid + half * GL8_X[i], half * GL8_W[i]);
    }
    out
}

fn rule(xs: &[f64], ws: &[f64], c: f64, d: f64, f: impl Fn(f64) -> f64) -> f64 {
    let half = 0.5 * (d - c);
    let mid = 0.5 * (c + d);
    xs.iter()
        .zip(ws)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Composite five-point rule over consecutive break points.
pub fn composite_gl5(breaks: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    breaks.windows(2).map(|w| gl5(w[0], w[1], &f)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl5_is_exact_through_degree_nine() {
        for p in 0..=9 {
            let got = gl5(-0.3, 1.7, |x| x.powi(p));
            let want = (1.7f64.powi(p + 1) - (-0.3f64).powi(p + 1)) / (p + 1) as f64;
            assert!((got - want).abs() < 1e-13 * want.abs().max(1.0), "degree {p}");
        }
    }

    #[test]
    fn gl8_weights_sum_to_length() {
        let s: f64 = gl8_nodes(2.0, 5.0).iter().map(|(_, w)| w).sum();
        assert!((s - 3.0).abs() < 1e-14);
        let got = gl8(0.0, 1.0, |x| x.powi(15));
        assert!((got - 1.0 / 16.0).abs() < 1e-14);
    }
}
