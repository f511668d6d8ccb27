//! Discretizations of `A_k = -d_xx + 2 pi i k V(x)` on an interval, with
//! periodic or Dirichlet conditions, and the quantities read off them: the
//! resolvent gap on the line `Re z = lambda_1`, semigroup norms and propagators.

use faer::{c64, Mat};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::functionals::Boundary;
use crate::linalg::{expm, norm_two, sigma_min, CMat};
use crate::velocity::VelocityField;

/// Second-order centred differences, or the spectral scheme matching the
/// boundary (Fourier collocation when periodic, sine transform when Dirichlet).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    FiniteDifference,
    Spectral,
}

/// Uniform grid on `[a, b]`. Periodic grids hold `x_j = a + j h` with
/// `h = |I| / n`; Dirichlet grids hold the `n` interior points, `h = |I| / (n + 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid1d {
    pub boundary: Boundary,
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub scheme: Scheme,
}

impl Grid1d {
    /// Fourier collocation on the unit torus.
    pub fn torus(n: usize) -> Grid1d {
        Grid1d {
            boundary: Boundary::Periodic,
            a: 0.0,
            b: 1.0,
            n,
            scheme: Scheme::Spectral,
        }
    }

    /// Centred differences on `[a, b]` with zero boundary values.
    pub fn dirichlet(a: f64, b: f64, n: usize) -> Grid1d {
        Grid1d {
            boundary: Boundary::Dirichlet,
            a,
            b,
            n,
            scheme: Scheme::FiniteDifference,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Grid1d {
        self.scheme = scheme;
        self
    }

    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    pub fn h(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => self.len() / self.n as f64,
            Boundary::Dirichlet => self.len() / (self.n + 1) as f64,
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.h();
        let off = match self.boundary {
            Boundary::Periodic => 0.0,
            Boundary::Dirichlet => 1.0,
        };
        (0..self.n).map(|j| self.a + (j as f64 + off) * h).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 16 {
            return Err(invalid(format!("grid size {} below 16", self.n)));
        }
        if !(self.a.is_finite() && self.b.is_finite() && self.b > self.a) {
            return Err(invalid("grid interval must be non-empty"));
        }
        Ok(())
    }

    /// First two eigenvalues of the discrete `-d_xx`.
    pub fn discrete_eigenvalues(&self) -> (f64, f64) {
        let h = self.h();
        let len = self.len();
        let n = self.n as f64;
        match (self.boundary, self.scheme) {
            (Boundary::Periodic, Scheme::Spectral) => (0.0, (2.0 * PI / len).powi(2)),
            (Boundary::Periodic, Scheme::FiniteDifference) => {
                (0.0, 4.0 / (h * h) * (PI / n).sin().powi(2))
            }
            (Boundary::Dirichlet, Scheme::Spectral) => {
                ((PI / len).powi(2), (2.0 * PI / len).powi(2))
            }
            (Boundary::Dirichlet, Scheme::FiniteDifference) => {
                let s = |m: f64| 4.0 / (h * h) * (m * PI / (2.0 * (n + 1.0))).sin().powi(2);
                (s(1.0), s(2.0))
            }
        }
    }

    /// Dense symmetric positive semi-definite matrix of `-d_xx`.
    pub fn laplacian(&self) -> Mat<f64> {
        let n = self.n;
        let h = self.h();
        let len = self.len();
        match (self.boundary, self.scheme) {
            (Boundary::Periodic, Scheme::FiniteDifference) => Mat::from_fn(n, n, |i, j| {
                let d = (i + n - j) % n;
                if d == 0 {
                    2.0 / (h * h)
                } else if d == 1 || d == n - 1 {
                    -1.0 / (h * h)
                } else {
                    0.0
                }
            }),
            (Boundary::Dirichlet, Scheme::FiniteDifference) => Mat::from_fn(n, n, |i, j| {
                if i == j {
                    2.0 / (h * h)
                } else if i.abs_diff(j) == 1 {
                    -1.0 / (h * h)
                } else {
                    0.0
                }
            }),
            (Boundary::Periodic, Scheme::Spectral) => {
                // symbol kappa_m^2 summed over the symmetric band of wave numbers
                let mut row = vec![0.0; n];
                for (d, r) in row.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for m in 1..=(n - 1) / 2 {
                        let kappa = 2.0 * PI * m as f64 / len;
                        s += 2.0 * kappa * kappa * (2.0 * PI * (m * d) as f64 / n as f64).cos();
                    }
                    if n.is_multiple_of(2) {
                        let kappa = PI * n as f64 / len;
                        s += kappa * kappa * if d % 2 == 0 { 1.0 } else { -1.0 };
                    }
                    *r = s / n as f64;
                }
                Mat::from_fn(n, n, |i, j| row[(i + n - j) % n])
            }
            (Boundary::Dirichlet, Scheme::Spectral) => {
                let np1 = (n + 1) as f64;
                let basis = Mat::from_fn(n, n, |j, m| {
                    (2.0 / np1).sqrt() * (PI * ((j + 1) * (m + 1)) as f64 / np1).sin()
                });
                let diag = Mat::from_fn(n, n, |i, j| {
                    if i == j {
                        (PI * (i + 1) as f64 / len).powi(2)
                    } else {
                        0.0
                    }
                });
                let l = &(&basis * &diag) * &basis;
                // symmetrize away rounding
                Mat::from_fn(n, n, |i, j| 0.5 * (l[(i, j)] + l[(j, i)]))
            }
        }
    }
}

/// Closed-form Laplace eigen-data of the continuous problem, with `e_1`
/// sampled on the grid and normalized in the discrete L2 norm.
#[derive(Clone, Debug, Serialize)]
pub struct LaplaceEigs {
    pub lambda1: f64,
    pub lambda2: f64,
    pub e1: Vec<f64>,
}

pub fn laplace_eigs(grid: &Grid1d) -> LaplaceEigs {
    let len = grid.len();
    let (lambda1, lambda2) = match grid.boundary {
        Boundary::Periodic => (0.0, (2.0 * PI / len).powi(2)),
        Boundary::Dirichlet => ((PI / len).powi(2), (2.0 * PI / len).powi(2)),
    };
    let mut e1: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&x| match grid.boundary {
            Boundary::Periodic => 1.0,
            Boundary::Dirichlet => (PI * (x - grid.a) / len).sin(),
        })
        .collect();
    let norm = (grid.h() * e1.iter().map(|v| v * v).sum::<f64>()).sqrt();
    e1.iter_mut().for_each(|v| *v /= norm);
    LaplaceEigs {
        lambda1,
        lambda2,
        e1,
    }
}

/// Discretized `A_k`.
#[derive(Clone, Debug)]
pub struct ModeOperator {
    grid: Grid1d,
    k: i64,
    v: Vec<f64>,
    laplacian: Mat<f64>,
    lambda1: f64,
    lambda2: f64,
}

impl ModeOperator {
    pub fn new(field: &VelocityField, grid: Grid1d, k: i64) -> Result<ModeOperator> {
        let v = grid.nodes().iter().map(|&x| field.value(x)).collect();
        ModeOperator::from_samples(grid, v, k)
    }

    pub fn from_samples(grid: Grid1d, v_samples: Vec<f64>, k: i64) -> Result<ModeOperator> {
        grid.validate()?;
        if v_samples.len() != grid.n {
            return Err(invalid("need one velocity sample per grid node"));
        }
        if v_samples.iter().any(|v| !v.is_finite()) {
            return Err(invalid("velocity samples must be finite"));
        }
        let (lambda1, lambda2) = grid.discrete_eigenvalues();
        Ok(ModeOperator {
            laplacian: grid.laplacian(),
            grid,
            k,
            v: v_samples,
            lambda1,
            lambda2,
        })
    }

    pub fn grid(&self) -> &Grid1d {
        &self.grid
    }

    pub fn k(&self) -> i64 {
        self.k
    }

    pub fn v_samples(&self) -> &[f64] {
        &self.v
    }

    /// Same operator for another mode.
    pub fn with_mode(&self, k: i64) -> ModeOperator {
        ModeOperator { k, ..self.clone() }
    }

    /// `lambda_1` of the discrete Laplacian; the closed-form value is in [`laplace_eigs`].
    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    /// The skew part `2 pi k V` on the nodes.
    pub fn skew(&self) -> Vec<f64> {
        self.v.iter().map(|v| 2.0 * PI * self.k as f64 * v).collect()
    }

    /// `range` of the skew part.
    pub fn skew_range(&self) -> (f64, f64) {
        let w = self.skew();
        let lo = w.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// `L - shift + i diag(W - s)`.
    pub fn shifted_matrix(&self, shift: f64, s: f64) -> CMat {
        let n = self.grid.n;
        let w = self.skew();
        Mat::from_fn(n, n, |i, j| {
            let re = self.laplacian[(i, j)] - if i == j { shift } else { 0.0 };
            let im = if i == j { w[i] - s } else { 0.0 };
            c64::new(re, im)
        })
    }

    /// Dense `A_k`.
    pub fn matrix(&self) -> CMat {
        self.shifted_matrix(0.0, 0.0)
    }

    /// `sigma_min(A_k - lambda_1 - i s)`.
    pub fn sigma(&self, s: f64) -> Result<f64> {
        sigma_min(&self.shifted_matrix(self.lambda1, s))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralSummary {
    pub lambda1: f64,
    pub lambda2: f64,
    pub e1: Vec<f64>,
    pub r_lambda1: f64,
    pub s_argmin: f64,
    pub window: (f64, f64),
    pub s_points: usize,
    /// Final bracket around the minimizer and whether it reached the tolerance.
    pub bracket: (f64, f64),
    pub converged: bool,
    pub window_extensions: usize,
    /// Uniform sweep followed by refinement evaluations, as `(s, sigma_min)`.
    pub trace: Vec<(f64, f64)>,
}

/// Default sweep window `[min W - 3 osc W - 1, max W + 3 osc W + 1]`.
pub fn default_window(op: &ModeOperator) -> (f64, f64) {
    let (lo, hi) = op.skew_range();
    let osc = hi - lo;
    (lo - 3.0 * osc - 1.0, hi + 3.0 * osc + 1.0)
}

const REFINE_TOL: f64 = 1e-6;
const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Infimum over `s` of `sigma_min(A - lambda_1 - i s)`.
pub fn r_lambda1(
    op: &ModeOperator,
    window: Option<(f64, f64)>,
    s_points: usize,
) -> Result<SpectralSummary> {
    if s_points < 64 {
        return Err(invalid("need at least 64 sweep points"));
    }
    let (wlo, whi) = op.skew_range();
    let mut window = window.unwrap_or_else(|| default_window(op));
    if !(window.1 > window.0) {
        return Err(invalid("empty sweep window"));
    }
    let mut extensions = 0;
    loop {
        let (a, b) = window;
        let step = (b - a) / (s_points - 1) as f64;
        let grid: Vec<f64> = (0..s_points).map(|i| a + i as f64 * step).collect();
        let sig: Vec<f64> = grid
            .par_iter()
            .map(|&s| op.sigma(s))
            .collect::<Result<Vec<f64>>>()?;
        let mut trace: Vec<(f64, f64)> = grid.iter().cloned().zip(sig.iter().cloned()).collect();
        let imin = (0..s_points)
            .min_by(|&i, &j| sig[i].partial_cmp(&sig[j]).unwrap())
            .unwrap();
        let mut best = (grid[imin], sig[imin]);
        // outside the range of W, sigma_min(s) >= dist(s, range W)
        let covered = a <= wlo - best.1 && b >= whi + best.1;
        if !covered && extensions < 20 {
            let pad = 2.0 * best.1.max(1.0);
            window = ((wlo - pad).min(a), (whi + pad).max(b));
            extensions += 1;
            continue;
        }
        let mut lo = grid[imin.saturating_sub(1)];
        let mut hi = grid[(imin + 1).min(s_points - 1)];
        let mut x1 = hi - GOLDEN * (hi - lo);
        let mut x2 = lo + GOLDEN * (hi - lo);
        let mut f1 = op.sigma(x1)?;
        let mut f2 = op.sigma(x2)?;
        trace.push((x1, f1));
        trace.push((x2, f2));
        let mut iters = 0;
        while hi - lo > REFINE_TOL && iters < 200 {
            iters += 1;
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - GOLDEN * (hi - lo);
                f1 = op.sigma(x1)?;
                trace.push((x1, f1));
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + GOLDEN * (hi - lo);
                f2 = op.sigma(x2)?;
                trace.push((x2, f2));
            }
        }
        for &(s, f) in &trace {
            if f < best.1 {
                best = (s, f);
            }
        }
        let eigs = laplace_eigs(&op.grid);
        return Ok(SpectralSummary {
            lambda1: op.lambda1,
            lambda2: op.lambda2,
            e1: eigs.e1,
            r_lambda1: best.1.max(0.0),
            s_argmin: best.0,
            window,
            s_points,
            bracket: (lo, hi),
            converged: hi - lo <= REFINE_TOL,
            window_extensions: extensions,
            trace,
        });
    }
}

/// `||exp(-t A_k)||_2` at each time.
pub fn semigroup_norm(op: &ModeOperator, times: &[f64]) -> Result<Vec<f64>> {
    if times.iter().any(|t| !(*t >= 0.0)) {
        return Err(invalid("times must be nonnegative"));
    }
    let a = op.matrix();
    times
        .par_iter()
        .map(|&t| {
            if t == 0.0 {
                return Ok(1.0);
            }
            let n = a.nrows();
            let m = Mat::from_fn(n, n, |i, j| a[(i, j)] * -t);
            norm_two(&expm(&m)?)
        })
        .collect()
}

/// `exp(-dt A_k)`.
pub fn mode_propagator(op: &ModeOperator, dt: f64) -> Result<CMat> {
    if !(dt > 0.0) {
        return Err(invalid("dt must be positive"));
    }
    let a = op.matrix();
    let n = a.nrows();
    expm(&Mat::from_fn(n, n, |i, j| a[(i, j)] * -dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn discrete_eigenvalues_match_matrices() {
        let grids = [
            Grid1d::torus(32),
            Grid1d::torus(33),
            Grid1d::torus(32).with_scheme(Scheme::FiniteDifference),
            Grid1d::dirichlet(0.0, 1.0, 31),
            Grid1d::dirichlet(0.2, 0.7, 31).with_scheme(Scheme::Spectral),
        ];
        for g in grids {
            let ev = g
                .laplacian()
                .self_adjoint_eigenvalues(faer::Side::Lower)
                .unwrap();
            let (l1, l2) = g.discrete_eigenvalues();
            assert!((ev[0] - l1).abs() < 1e-8 * l2, "{g:?}: {} vs {l1}", ev[0]);
            let second = ev.iter().cloned().find(|&x| x > l1 + 1e-6 * l2).unwrap();
            assert_relative_eq!(second, l2, max_relative = 1e-9);
        }
    }

    #[test]
    fn laplace_eigs_closed_forms() {
        let d = laplace_eigs(&Grid1d::dirichlet(0.0, 1.0, 64));
        assert_relative_eq!(d.lambda1, PI * PI);
        assert_relative_eq!(d.lambda2, 4.0 * PI * PI);
        let h = 1.0 / 65.0;
        let norm: f64 = d.e1.iter().map(|x| x * x).sum::<f64>() * h;
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(d.e1.iter().all(|&x| x > 0.0));
        let half = laplace_eigs(&Grid1d::dirichlet(0.0, 0.5, 64));
        assert_relative_eq!(half.lambda1, 4.0 * PI * PI, max_relative = 1e-14);
        let p = laplace_eigs(&Grid1d::torus(64));
        assert_eq!(p.lambda1, 0.0);
        assert_relative_eq!(p.lambda2, 4.0 * PI * PI);
    }

    #[test]
    fn constant_velocity_has_zero_gap() {
        let op = ModeOperator::new(&VelocityField::constant(0.7), Grid1d::torus(32), 1).unwrap();
        let s = r_lambda1(&op, None, 64).unwrap();
        assert!(s.r_lambda1 < 1e-6, "{}", s.r_lambda1);
        assert!((s.s_argmin - 2.0 * PI * 0.7).abs() < 1e-5);
    }

    #[test]
    fn sigma_exceeds_distance_to_range() {
        let op = ModeOperator::new(&VelocityField::cosine(1.0, 1.0), Grid1d::torus(32), 1).unwrap();
        let (lo, hi) = op.skew_range();
        for s in [lo - 3.0, hi + 0.5, hi + 10.0] {
            let d = if s < lo { lo - s } else { s - hi };
            assert!(op.sigma(s).unwrap() >= d - 1e-9);
        }
    }

    #[test]
    fn propagator_semigroup_and_constant_shift() {
        let c = 0.3;
        let g = Grid1d::torus(24);
        let op = ModeOperator::new(&VelocityField::constant(c), g, 2).unwrap();
        let heat = ModeOperator::new(&VelocityField::constant(0.0), g, 0).unwrap();
        let p = mode_propagator(&op, 0.05).unwrap();
        let h = mode_propagator(&heat, 0.05).unwrap();
        let phase = c64::new(0.0, -2.0 * PI * 2.0 * c * 0.05).exp();
        for i in 0..24 {
            for j in 0..24 {
                assert!((p[(i, j)] - h[(i, j)] * phase).norm() < 1e-12);
            }
        }
        let cos = ModeOperator::new(&VelocityField::cosine(1.0, 1.0), g, 1).unwrap();
        let a = mode_propagator(&cos, 0.02).unwrap();
        let b = mode_propagator(&cos, 0.03).unwrap();
        let ab = &a * &b;
        let direct = mode_propagator(&cos, 0.05).unwrap();
        for i in 0..24 {
            for j in 0..24 {
                assert!((ab[(i, j)] - direct[(i, j)]).norm() < 1e-10);
            }
        }
        // constants are fixed by the mass mode
        for i in 0..24 {
            let row: c64 = (0..24).map(|j| h[(i, j)]).sum();
            assert!((row - c64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn semigroup_norm_is_contractive_after_shift() {
        let op = ModeOperator::new(&VelocityField::sawtooth(1.0, 1.0), Grid1d::torus(32), 1).unwrap();
        let times = [0.0, 0.01, 0.1, 1.0];
        let norms = semigroup_norm(&op, &times).unwrap();
        assert_eq!(norms[0], 1.0);
        for (t, n) in times.iter().zip(&norms) {
            assert!(*n <= (-op.lambda1() * t).exp() * (1.0 + 1e-12));
        }
    }
}
