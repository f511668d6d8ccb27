//! Least-squares distance from the primitive of `V` to affine functions.

use crate::velocity::VelocityField;

/// Best affine fit `q + p (x - mid)` to `P = int V` on `[c, d]`, with the
/// squared L2 residual of that fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
}

/// `inf_{p,q} int_c^d |P(x) - p x - q|^2 dx` for the primitive `P` of `v`.
///
/// Two passes over the smooth pieces of `P`: moments first, then the squared
/// deviation from the fitted line, so that a nearly affine primitive does not
/// lose its residual to cancellation.
pub fn affine_fit(v: &VelocityField, c: f64, d: f64) -> AffineFit {
    let mid = 0.5 * (c + d);
    let len = d - c;
    let pieces = v.smooth_pieces(c, d);
    let p_mid = v.primitive(mid);
    let centred = |x: f64| v.primitive(x) - p_mid;

    let m0 = crate::quadrature::composite_gl5(&pieces, centred);
    let m1 = crate::quadrature::composite_gl5(&pieces, |x| (x - mid) * centred(x));
    let intercept = m0 / len;
    let slope = m1 / (len * len * len / 12.0);
    let residual = crate::quadrature::composite_gl5(&pieces, |x| {
        let e = centred(x) - intercept - slope * (x - mid);
        e * e
    });
    AffineFit {
        slope,
        intercept: intercept + p_mid,
        residual,
    }
}

pub fn affine_residual(v: &VelocityField, c: f64, d: f64) -> f64 {
    affine_fit(v, c, d).residual
}

/// Residual below which a window is treated as exactly affine: a few ulps of
/// the natural size `sup|V| |J|` of the deviation, squared and integrated.
pub(crate) fn numerically_zero(v: &VelocityField, len: f64, residual: f64) -> bool {
    let scale = 1e-12 * (v.bound() * len).max(f64::MIN_POSITIVE);
    residual <= scale * scale * len
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn linear_profile_gives_one_over_720() {
        let v = VelocityField::piecewise_linear(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert_relative_eq!(affine_residual(&v, 0.0, 1.0), 1.0 / 720.0, max_relative = 1e-12);
        // P = x^2/2 scales like |J|^5
        assert_relative_eq!(
            affine_residual(&v, 0.2, 0.7),
            0.5f64.powi(5) / 720.0,
            max_relative = 1e-10
        );
    }

    #[test]
    fn cosine_on_unit_interval() {
        let v = VelocityField::cosine(1.0, 1.0);
        let want = 1.0 / (8.0 * PI * PI) - 3.0 / (4.0 * PI.powi(4));
        assert_relative_eq!(affine_residual(&v, 0.0, 1.0), want, max_relative = 1e-10);
    }

    #[test]
    fn plateau_window_is_zero() {
        let v = VelocityField::two_plateau(0.0, 1.0);
        let r = affine_residual(&v, 0.1, 0.4);
        assert!(numerically_zero(&v, 0.3, r), "{r}");
        let r = affine_residual(&v, 0.3, 0.7);
        assert!(!numerically_zero(&v, 0.4, r));
    }

    #[test]
    fn residual_ignores_added_constants() {
        let v = VelocityField::sawtooth(1.0, 2.0);
        let a = affine_residual(&v, 0.1, 0.9);
        let b = affine_residual(&v.shifted(5.0), 0.1, 0.9);
        assert_relative_eq!(a, b, max_relative = 1e-9);
    }
}
