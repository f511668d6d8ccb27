//! Scalar functionals of a shear profile and the explicit constants built from them.

use serde::Serialize;
use std::f64::consts::{E, PI};

use crate::affine::{affine_fit, numerically_zero};
use crate::error::{invalid, Error, Result};
use crate::lp::{maximize, BoundedLp};
use crate::quadrature;
use crate::velocity::{Plateau, VelocityField};

/// Boundary behaviour of the one-dimensional Laplacian on an interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Periodic,
    Dirichlet,
}

/// `inf over J in I, |J| >= 2 eps` of the affine residual of `P V` on `J`.
///
/// The residual is monotone under inclusion, so only windows of length exactly
/// `2 eps` are scanned; their left ends step through `a + i |I| / resolution`.
pub fn omega1(v: &VelocityField, interval: (f64, f64), eps: f64, resolution: usize) -> Result<f64> {
    Ok(min_window(v, interval, 2.0 * eps, resolution)?.1)
}

/// `(left end, residual)` of the scanned window of length `len` with least residual.
fn min_window(
    v: &VelocityField,
    (a, b): (f64, f64),
    len: f64,
    resolution: usize,
) -> Result<(f64, f64)> {
    let span = b - a;
    if !(len > 0.0 && len <= span * (1.0 + 1e-12)) {
        return Err(invalid(format!("window length {len} does not fit in [{a}, {b}]")));
    }
    if resolution == 0 {
        return Err(invalid("resolution must be positive"));
    }
    let h = span / resolution as f64;
    let last = (((span - len) / h) + 1e-9).floor() as usize;
    let mut best = (a, f64::INFINITY);
    for i in 0..=last {
        let left = a + i as f64 * h;
        let right = (left + len).min(b);
        let r = affine_fit(v, left, right).residual;
        if r < best.1 {
            best = (left, r);
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, Serialize)]
pub struct HEstimate {
    /// `max(1, max_eps eps^2 log(1 / (eps r(eps))))`; infinite when infeasible.
    pub k_hat: f64,
    pub feasible: bool,
    /// Window on which the primitive is affine, when one was found.
    pub witness: Option<(f64, f64)>,
    /// `(eps, least residual over windows of length eps, its left end)`.
    pub table: Vec<(f64, f64, f64)>,
}

/// Smallest `K >= 1` consistent with the quantitative non-degeneracy condition
/// on the scanned windows of each length in `eps_grid`.
pub fn estimate_h_constant(
    v: &VelocityField,
    interval: (f64, f64),
    eps_grid: &[f64],
    resolution: usize,
) -> Result<HEstimate> {
    let (a, b) = interval;
    let mut k_hat: f64 = 1.0;
    let mut table = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        if !(eps > 0.0 && eps < b - a) {
            return Err(invalid(format!("eps = {eps} must lie in (0, |I|)")));
        }
        let (left, r) = min_window(v, interval, eps, resolution)?;
        table.push((eps, r, left));
        if numerically_zero(v, eps, r) {
            return Ok(HEstimate {
                k_hat: f64::INFINITY,
                feasible: false,
                witness: Some((left, left + eps)),
                table,
            });
        }
        k_hat = k_hat.max(eps * eps * (1.0 / (eps * r)).ln());
    }
    Ok(HEstimate {
        k_hat,
        feasible: k_hat.is_finite(),
        witness: None,
        table,
    })
}

/// The data of the discretized `omega_2` problem: maximize `objective . phi`
/// over nodal values of a piecewise-linear `phi` with `|phi| <= 1`, steps
/// bounded by `max_step`, and `mass . phi = 0`.
#[derive(Clone, Debug)]
pub struct Omega2Lp {
    pub objective: Vec<f64>,
    pub mass: Vec<f64>,
    pub max_step: f64,
    pub periodic: bool,
}

impl Omega2Lp {
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.objective.len();
        if self.periodic {
            (0..n).map(|i| (i, (i + 1) % n)).collect()
        } else {
            (0..n - 1).map(|i| (i, i + 1)).collect()
        }
    }
}

/// Squared first Laplace eigenfunction on `[a, b]`.
pub fn e1_squared(boundary: Boundary, (a, b): (f64, f64), x: f64) -> f64 {
    let len = b - a;
    match boundary {
        Boundary::Periodic => 1.0 / len,
        Boundary::Dirichlet => {
            let s = (PI * (x - a) / len).sin();
            2.0 / len * s * s
        }
    }
}

/// Assemble the LP on `nodes` grid points. Periodic grids are cyclic with
/// spacing `|I| / nodes`; Dirichlet grids include both ends.
pub fn omega2_lp(
    v: &VelocityField,
    boundary: Boundary,
    interval: (f64, f64),
    nodes: usize,
) -> Result<Omega2Lp> {
    let (a, b) = interval;
    if nodes < 3 {
        return Err(invalid("need at least three nodes"));
    }
    if !(b > a) {
        return Err(invalid("empty interval"));
    }
    let periodic = boundary == Boundary::Periodic;
    let len = b - a;
    let h = if periodic {
        len / nodes as f64
    } else {
        len / (nodes - 1) as f64
    };
    let x = |i: isize| a + i as f64 * h;
    let mut objective = vec![0.0; nodes];
    let mut mass = vec![0.0; nodes];
    for i in 0..nodes as isize {
        // the two linear halves of the hat at node i, as (from, to, node end)
        let mut halves = Vec::with_capacity(2);
        if periodic || i > 0 {
            halves.push((x(i - 1), x(i)));
        }
        if periodic || i + 1 < nodes as isize {
            halves.push((x(i), x(i + 1)));
        }
        let xi = x(i);
        for (c, d) in halves {
            let hat = |t: f64| 1.0 - (t - xi).abs() / h;
            let (c_eff, d_eff, shift) = if periodic && c < a {
                (c + len, d + len, len)
            } else if periodic && d > b + 1e-12 * len {
                (c - len, d - len, -len)
            } else {
                (c, d, 0.0)
            };
            let weight = |t: f64| e1_squared(boundary, interval, t) * hat(t - shift);
            objective[i as usize] += v.integrate_with(c_eff, d_eff, |t| v.value(t) * weight(t));
            mass[i as usize] += quadrature::gl8(c_eff, d_eff, weight);
        }
    }
    Ok(Omega2Lp {
        objective,
        mass,
        max_step: 2.0 * PI / len * h,
        periodic,
    })
}

/// Solve the assembled LP with the bounded simplex.
pub fn solve_omega2_lp(lp: &Omega2Lp) -> Result<f64> {
    let n = lp.objective.len();
    let edges = lp.edges();
    let ne = edges.len();
    let nv = n + ne;
    let mut matrix = Vec::with_capacity(ne + 1);
    for (e, &(i, j)) in edges.iter().enumerate() {
        let mut row = vec![0.0; nv];
        row[j] += 1.0;
        row[i] -= 1.0;
        row[n + e] = -1.0;
        matrix.push(row);
    }
    let mut mass_row = vec![0.0; nv];
    mass_row[..n].copy_from_slice(&lp.mass);
    matrix.push(mass_row);
    let mut objective = lp.objective.clone();
    objective.extend(std::iter::repeat_n(0.0, ne));
    let mut lower = vec![-1.0; n];
    lower.extend(std::iter::repeat_n(-lp.max_step, ne));
    let upper: Vec<f64> = lower.iter().map(|l| -l).collect();
    let sol = maximize(&BoundedLp {
        objective,
        matrix,
        rhs: vec![0.0; ne + 1],
        lower,
        upper,
    })?;
    Ok(sol.value.max(0.0))
}

/// Lower bound for `omega_2` from the piecewise-linear restriction on `nodes`
/// points; at least 16 are required. Coarser problems can still be assembled
/// with [`omega2_lp`].
pub fn omega2(
    v: &VelocityField,
    boundary: Boundary,
    interval: (f64, f64),
    nodes: usize,
) -> Result<f64> {
    if nodes < 16 {
        return Err(Error::Precondition(format!("omega2 needs at least 16 nodes, got {nodes}")));
    }
    solve_omega2_lp(&omega2_lp(v, boundary, interval, nodes)?)
}

/// `omega_2` over the whole torus.
pub fn omega2_torus(v: &VelocityField, nodes: usize) -> Result<f64> {
    omega2(v, Boundary::Periodic, (0.0, 1.0), nodes)
}

/// Invert a continuous increasing map on `[0, hi)` by bisection.
fn invert_increasing(f: impl Fn(f64) -> f64, y: f64, hi: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut up) = (0.0, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + up);
        if f(mid) < y {
            lo = mid;
        } else {
            up = mid;
        }
        if up - lo <= 1e-15 * up.max(1e-300) {
            break;
        }
    }
    0.5 * (lo + up)
}

/// `s -> 144 s tan(2 s)` on `[0, pi/4)`.
pub fn wei_phi(s: f64) -> f64 {
    144.0 * s * (2.0 * s).tan()
}

pub fn wei_phi_inverse(y: f64) -> f64 {
    invert_increasing(wei_phi, y, PI / 4.0)
}

/// `s -> 36 s tan s` on `[0, pi/2)`.
pub fn local_phi(s: f64) -> f64 {
    36.0 * s * s.tan()
}

pub fn local_phi_inverse(y: f64) -> f64 {
    invert_increasing(local_phi, y, PI / 2.0)
}

/// Rate from the affine-residual functional on the whole torus.
pub fn rho_wei(omega1_full: f64) -> f64 {
    wei_phi_inverse(omega1_full).powi(2)
}

/// `(omega_2 / (2 pi (1 + osc)))^2`.
pub fn rho_v(omega2: f64, osc: f64) -> f64 {
    (omega2 / (2.0 * PI * (1.0 + osc))).powi(2)
}

/// Lower bound for the spectral quantity of `-d_xx + i W` in terms of `omega_2(W)`.
/// With `improved` on the unit torus the sharper periodic form
/// `(omega_2 / (2 pi (1 + osc)))^2` is returned instead.
pub fn resolvent_bound_omega2(omega2: f64, osc: f64, len: f64, improved: bool) -> f64 {
    if improved && (len - 1.0).abs() < 1e-15 {
        return rho_v(omega2, osc);
    }
    omega2 * omega2 / 18.0 / (PI * PI / (len * len) + len * len * osc * osc / (PI * PI))
}

/// Lower bound for the spectral quantity from the local residual `omega_1(eps)`.
pub fn resolvent_bound_omega1(omega1_eps: f64, eps: f64, lambda1: f64) -> f64 {
    (local_phi_inverse(eps * omega1_eps).powi(2) / (eps * eps) - lambda1).max(0.0)
}

/// A positive quantity carried with its natural logarithm so that values far
/// below the smallest double stay meaningful.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct Tiny {
    pub value: f64,
    pub ln: f64,
}

impl Tiny {
    pub fn from_ln(ln: f64) -> Tiny {
        Tiny { value: ln.exp(), ln }
    }

    pub fn log10(&self) -> f64 {
        self.ln / std::f64::consts::LN_10
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PlateauPair {
    pub first: Plateau,
    pub second: Plateau,
    pub ell: f64,
    pub dv: f64,
}

/// Choose two plateaus with distinct values, maximizing the shorter length,
/// then `|dV|`, then preferring the leftmost pair.
pub fn check_plateaus(v: &VelocityField) -> Option<PlateauPair> {
    let ps = v.plateaus(f64::MIN_POSITIVE);
    let mut best: Option<PlateauPair> = None;
    for i in 0..ps.len() {
        for j in i + 1..ps.len() {
            if ps[i].value == ps[j].value {
                continue;
            }
            let cand = PlateauPair {
                first: ps[i],
                second: ps[j],
                ell: ps[i].length().min(ps[j].length()),
                dv: (ps[i].value - ps[j].value).abs(),
            };
            let better = match &best {
                None => true,
                Some(b) => cand.ell > b.ell || (cand.ell == b.ell && cand.dv > b.dv),
            };
            if better {
                best = Some(cand);
            }
        }
    }
    best
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PlateauConstants {
    pub t_p: f64,
    pub alpha_p: Tiny,
}

pub fn plateau_constants(ell: f64, dv: f64) -> Result<PlateauConstants> {
    if !(ell > 0.0 && ell <= 0.5) {
        return Err(Error::Precondition(format!("plateau length {ell} not in (0, 1/2]")));
    }
    if !(dv > 0.0 && dv.is_finite()) {
        return Err(Error::Precondition("plateau values must differ".into()));
    }
    let t_p = 1.0 / dv + (3.0 + 2.0 * ell * ell) / 8.0;
    let ln = -1.5 * (8.0 * PI * E).ln() - PI * PI / 4.0 + 2.0 * ell.ln() - PI * PI / (ell * ell * dv);
    Ok(PlateauConstants {
        t_p,
        alpha_p: Tiny::from_ln(ln),
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HormanderConstants {
    pub beta: f64,
    pub t_h: f64,
    pub alpha_h: Tiny,
}

pub fn hypoelliptic_constants(len: f64, osc: f64, omega2: f64, k: f64) -> Result<HormanderConstants> {
    if !(len > 0.0 && len <= 1.0) {
        return Err(Error::Precondition(format!("interval length {len} not in (0, 1]")));
    }
    if !(omega2 > 0.0) {
        return Err(Error::Precondition("omega_2 must be positive".into()));
    }
    if !(k >= 1.0 && k.is_finite()) {
        return Err(Error::Precondition("K must be finite and at least one".into()));
    }
    let beta = 1.0 + 2.0 * PI * osc * len * len;
    let t_h = (10.0 * beta / (len * omega2)).powi(2) * (1.0 + beta.ln() + k / (len * len));
    let ln = (len / 3.0).ln() - PI * PI * t_h / (len * len);
    Ok(HormanderConstants {
        beta,
        t_h,
        alpha_h: Tiny::from_ln(ln),
    })
}

/// `C = 1 / (1 - alpha)` and `rho = log C / t` for a one-step minorization.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DoeblinConstants {
    pub c: f64,
    pub rho: Tiny,
}

pub fn doeblin_constants(alpha: Tiny, t_star: f64) -> Result<DoeblinConstants> {
    if !(alpha.ln < 0.0 && t_star > 0.0) {
        return Err(Error::Precondition("need 0 < alpha < 1 and t > 0".into()));
    }
    // ln(-ln(1 - alpha)), accurate when alpha is far below machine precision
    let ln_log_c = if alpha.ln > -18.0 {
        (-(-alpha.value).ln_1p()).ln()
    } else {
        alpha.ln + (alpha.value / 2.0).ln_1p()
    };
    Ok(DoeblinConstants {
        c: 1.0 / (1.0 - alpha.value),
        rho: Tiny::from_ln(ln_log_c - t_star.ln()),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DoeblinCheck {
    pub c: f64,
    pub rho: f64,
    /// Worst-row total variation distance to uniform after each step.
    pub tv: Vec<f64>,
    /// Steps at which either the pointwise or the contraction bound failed.
    pub violations: Vec<usize>,
}

/// Iterate a finite Markov chain and check the exponential convergence that
/// a minorization `K^t_star >= alpha_star * uniform` implies. The uniform law
/// must be invariant, so the kernel has to be doubly stochastic.
pub fn doeblin_iterate(
    kernel: &[Vec<f64>],
    t_star: usize,
    alpha_star: f64,
    horizon: usize,
) -> Result<DoeblinCheck> {
    let n = kernel.len();
    if n == 0 || kernel.iter().any(|r| r.len() != n) {
        return Err(invalid("kernel must be a non-empty square matrix"));
    }
    for row in kernel {
        let s: f64 = row.iter().sum();
        if row.iter().any(|p| *p < 0.0) || (s - 1.0).abs() > 1e-12 {
            return Err(invalid("kernel rows must be probability vectors"));
        }
    }
    for j in 0..n {
        if (kernel.iter().map(|r| r[j]).sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(invalid("columns must sum to one so that the uniform law is invariant"));
        }
    }
    if !(alpha_star > 0.0 && alpha_star < 1.0) || t_star == 0 {
        return Err(invalid("need 0 < alpha < 1 and t_star >= 1"));
    }
    let unif = 1.0 / n as f64;
    let matmul = |a: &Vec<Vec<f64>>, b: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|l| a[i][l] * b[l][j]).sum())
                    .collect()
            })
            .collect()
    };
    let mut power: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _ in 0..t_star {
        power = matmul(&power, kernel);
    }
    let floor = alpha_star * unif * (1.0 - 1e-12);
    if power.iter().flatten().any(|p| *p < floor) {
        return Err(Error::Precondition(format!(
            "K^{t_star} is not bounded below by {alpha_star} times the uniform kernel"
        )));
    }
    let c = 1.0 / (1.0 - alpha_star);
    let rho = c.ln() / t_star as f64;
    let tv0 = 1.0 - unif;
    let mut tv = Vec::with_capacity(horizon + 1);
    let mut violations = Vec::new();
    let mut power: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for step in 0..=horizon {
        if step > 0 {
            power = matmul(&power, kernel);
        }
        let env = c * (-rho * step as f64).exp();
        let worst = power
            .iter()
            .map(|row| 0.5 * row.iter().map(|p| (p - unif).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let min_entry = power.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
        let slack = 1e-12;
        if worst > env * tv0 + slack || min_entry < (1.0 - env) * unif - slack {
            violations.push(step);
        }
        tv.push(worst);
    }
    Ok(DoeblinCheck {
        c,
        rho,
        tv,
        violations,
    })
}

/// Inputs of [`bounds_report`] that are discretization choices rather than data.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsOptions {
    pub omega2_nodes: usize,
    /// Half-widths `eps` for the residual table; entries outside `(0, |I|/2]` are rejected.
    pub eps_grid: Vec<f64>,
    /// Window lengths for the quantitative non-degeneracy constant `K`.
    pub h_eps_grid: Vec<f64>,
    pub resolution: usize,
    /// Interval on which the hypoelliptic constants are evaluated; the whole domain by default.
    pub h_interval: Option<(f64, f64)>,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        BoundsOptions {
            omega2_nodes: 512,
            eps_grid: vec![1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0, 1.0 / 2.0],
            h_eps_grid: vec![1.0 / 64.0, 1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0, 1.0 / 2.0],
            resolution: 256,
            h_interval: None,
        }
    }
}

/// Every constant available for one profile. Each value has a sibling
/// `*_source` string saying how it was obtained; constants whose hypotheses
/// fail are `null` with the reason in the source.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct BoundsReport {
    pub boundary: Boundary,
    pub interval_len: f64,
    pub lambda1: f64,
    pub osc: f64,
    pub osc_source: String,
    pub omega2: f64,
    pub omega2_source: String,
    pub omega1_eps: Vec<f64>,
    pub omega1_table: Vec<f64>,
    pub omega1_source: String,
    pub rho_v: f64,
    pub rho_v_source: String,
    pub rho_wei: Option<f64>,
    pub rho_wei_source: String,
    pub r_lower_omega2: f64,
    pub r_lower_omega2_source: String,
    pub r_lower_omega2_periodic: Option<f64>,
    pub r_lower_omega2_periodic_source: String,
    pub r_lower_omega1: Vec<f64>,
    pub r_lower_omega1_source: String,
    pub plateau_ell: Option<f64>,
    pub plateau_dv: Option<f64>,
    pub t_p: Option<f64>,
    pub alpha_p: Option<f64>,
    pub alpha_p_log10: Option<f64>,
    pub t_p_source: String,
    pub k_hat: Option<f64>,
    pub omega2_dirichlet: Option<f64>,
    pub beta: Option<f64>,
    pub t_h: Option<f64>,
    pub alpha_h: Option<f64>,
    pub alpha_h_log10: Option<f64>,
    pub t_h_source: String,
    pub doeblin_c: Option<f64>,
    pub doeblin_c_minus_one_log10: Option<f64>,
    pub doeblin_rho: Option<f64>,
    pub doeblin_rho_log10: Option<f64>,
    pub doeblin_source: String,
}

impl BoundsReport {
    /// Names of the violated type invariants; empty when the report is consistent.
    pub fn invariant_failures(&self) -> Vec<&'static str> {
        let mut bad = Vec::new();
        if !(self.omega2 >= 0.0 && self.omega2 <= 0.5 * self.osc + 1e-9) {
            bad.push("0 <= omega2 <= osc / 2");
        }
        let in_unit = |ln: Option<f64>| ln.is_none_or(|l| l.is_finite() && l < 0.0);
        if !in_unit(self.alpha_p_log10) {
            bad.push("alpha_p in (0, 1)");
        }
        if !in_unit(self.alpha_h_log10) {
            bad.push("alpha_h in (0, 1)");
        }
        if self.doeblin_c_minus_one_log10.is_some_and(|l| !l.is_finite()) {
            bad.push("doeblin_c > 1");
        }
        if self.doeblin_rho_log10.is_some_and(|l| !l.is_finite()) {
            bad.push("doeblin_rho > 0");
        }
        bad
    }
}

/// Evaluate every constant for `v` on its own domain: periodic on the torus,
/// Dirichlet on an interval.
pub fn bounds_report(v: &VelocityField, opts: &BoundsOptions) -> Result<BoundsReport> {
    let domain = v.domain();
    let (a, b) = domain.bounds();
    let len = b - a;
    let boundary = if domain.is_periodic() { Boundary::Periodic } else { Boundary::Dirichlet };
    let lambda1 = match boundary {
        Boundary::Periodic => 0.0,
        Boundary::Dirichlet => PI * PI / (len * len),
    };
    let osc = v.osc();
    let om2 = omega2(v, boundary, (a, b), opts.omega2_nodes)?;
    let lp_source = |n: usize| format!("linear program over {n} nodal values (lower bound)");

    let mut omega1_table = Vec::with_capacity(opts.eps_grid.len());
    let mut r32 = Vec::with_capacity(opts.eps_grid.len());
    for &eps in &opts.eps_grid {
        if !(eps > 0.0 && eps <= 0.5 * len) {
            return Err(invalid(format!("eps = {eps} must lie in (0, |I|/2]")));
        }
        let w1 = omega1(v, (a, b), eps, opts.resolution)?;
        omega1_table.push(w1);
        r32.push(resolvent_bound_omega1(w1, eps, lambda1));
    }
    let full = (boundary == Boundary::Periodic && (len - 1.0).abs() < 1e-15)
        .then(|| omega1(v, (a, b), 0.5, opts.resolution))
        .transpose()?;

    let mut report = BoundsReport {
        boundary,
        interval_len: len,
        lambda1,
        osc,
        osc_source: "exact sup minus inf of the profile".into(),
        omega2: om2,
        omega2_source: lp_source(opts.omega2_nodes),
        omega1_eps: opts.eps_grid.clone(),
        omega1_table,
        omega1_source: format!(
            "least affine residual of the primitive over windows of length 2 eps, left ends on a {}-point lattice",
            opts.resolution
        ),
        rho_v: rho_v(om2, osc),
        rho_v_source: "closed form in omega2 and osc".into(),
        rho_wei: full.map(rho_wei),
        rho_wei_source: if full.is_some() {
            "squared inverse of 144 s tan 2s at the full-torus residual".into()
        } else {
            "undefined: needs the unit torus".into()
        },
        r_lower_omega2: resolvent_bound_omega2(om2, osc, len, false),
        r_lower_omega2_source: "closed form in omega2, osc and |I|".into(),
        r_lower_omega2_periodic: (boundary == Boundary::Periodic)
            .then(|| resolvent_bound_omega2(om2, osc, len, true)),
        r_lower_omega2_periodic_source: if boundary == Boundary::Periodic {
            "closed form, periodic variant".into()
        } else {
            "undefined: periodic variant only".into()
        },
        r_lower_omega1: r32,
        r_lower_omega1_source: "squared inverse of 36 s tan s, minus lambda1, per eps".into(),
        plateau_ell: None,
        plateau_dv: None,
        t_p: None,
        alpha_p: None,
        alpha_p_log10: None,
        t_p_source: String::new(),
        k_hat: None,
        omega2_dirichlet: None,
        beta: None,
        t_h: None,
        alpha_h: None,
        alpha_h_log10: None,
        t_h_source: String::new(),
        doeblin_c: None,
        doeblin_c_minus_one_log10: None,
        doeblin_rho: None,
        doeblin_rho_log10: None,
        doeblin_source: String::new(),
    };

    let mut minorization: Option<(Tiny, f64, &str)> = None;
    match check_plateaus(v).filter(|p| p.ell <= 0.5) {
        Some(p) => {
            let c = plateau_constants(p.ell, p.dv)?;
            report.plateau_ell = Some(p.ell);
            report.plateau_dv = Some(p.dv);
            report.t_p = Some(c.t_p);
            report.alpha_p = Some(c.alpha_p.value);
            report.alpha_p_log10 = Some(c.alpha_p.log10());
            report.t_p_source = "closed form in the plateau length and value gap".into();
            minorization = Some((c.alpha_p, c.t_p, "t_p"));
        }
        None => report.t_p_source = "undefined: no two plateaus with distinct values".into(),
    }

    let hi = opts.h_interval.unwrap_or((a, b));
    let h = estimate_h_constant(v, hi, &opts.h_eps_grid, opts.resolution)?;
    if !h.feasible {
        report.t_h_source = "undefined: the primitive is affine on a scanned window".into();
    } else {
        let od = omega2(v, Boundary::Dirichlet, hi, opts.omega2_nodes)?;
        report.k_hat = Some(h.k_hat);
        report.omega2_dirichlet = Some(od);
        match hypoelliptic_constants(hi.1 - hi.0, osc, od, h.k_hat) {
            Ok(c) => {
                report.beta = Some(c.beta);
                report.t_h = Some(c.t_h);
                report.alpha_h = Some(c.alpha_h.value);
                report.alpha_h_log10 = Some(c.alpha_h.log10());
                report.t_h_source =
                    "closed form in |I|, osc, the Dirichlet omega2 on I and the scanned K".into();
                if minorization.is_none() {
                    minorization = Some((c.alpha_h, c.t_h, "t_h"));
                }
            }
            Err(e) => report.t_h_source = format!("undefined: {e}"),
        }
    }

    match minorization {
        Some((alpha, t, which)) => {
            let d = doeblin_constants(alpha, t)?;
            // C - 1 = alpha / (1 - alpha)
            let ln_cm1 = alpha.ln - (-alpha.value).ln_1p();
            report.doeblin_c = Some(d.c);
            report.doeblin_c_minus_one_log10 = Some(ln_cm1 / std::f64::consts::LN_10);
            report.doeblin_rho = Some(d.rho.value);
            report.doeblin_rho_log10 = Some(d.rho.log10());
            report.doeblin_source = format!("minorization at {which}");
        }
        None => report.doeblin_source = "undefined: no minorization constant available".into(),
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wei_phi_fixed_point() {
        assert_relative_eq!(wei_phi(PI / 8.0), 18.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(wei_phi_inverse(18.0 * PI), PI / 8.0, max_relative = 1e-12);
        assert_relative_eq!(local_phi(PI / 4.0), 9.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(local_phi_inverse(9.0 * PI), PI / 4.0, max_relative = 1e-12);
        assert_eq!(wei_phi_inverse(0.0), 0.0);
    }

    #[test]
    fn plateau_constants_example() {
        let c = plateau_constants(0.5, 2.0).unwrap();
        assert_relative_eq!(c.t_p, 0.5 + 3.5 / 8.0, max_relative = 1e-15);
        let direct = (8.0 * PI * E).powf(-1.5)
            * (-PI * PI / 4.0).exp()
            * 0.25
            * (-2.0 * PI * PI).exp();
        assert_relative_eq!(c.alpha_p.value, direct, max_relative = 1e-12);
        assert!(c.alpha_p.value > 9e-14 && c.alpha_p.value < 1.1e-13);
        assert!(plateau_constants(0.6, 1.0).is_err());
        assert!(plateau_constants(0.5, 0.0).is_err());
    }

    #[test]
    fn hormander_constants_example() {
        let c = hypoelliptic_constants(1.0, 1.0, 0.25, 1.0).unwrap();
        let beta = 1.0 + 2.0 * PI;
        assert_relative_eq!(c.beta, beta, max_relative = 1e-15);
        let t = (40.0 * beta).powi(2) * (2.0 + beta.ln());
        assert_relative_eq!(c.t_h, t, max_relative = 1e-14);
        assert!((c.t_h - 3.383e5).abs() / 3.383e5 < 1e-3);
        assert!(c.alpha_h.ln.is_finite() && c.alpha_h.ln < 0.0);
        assert!(hypoelliptic_constants(1.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn doeblin_constants_stay_positive_below_underflow() {
        let d = doeblin_constants(Tiny::from_ln(-1e6), 2.0).unwrap();
        assert!(d.c >= 1.0);
        assert_relative_eq!(d.rho.ln, -1e6 - 2f64.ln(), max_relative = 1e-12);
        let d = doeblin_constants(Tiny::from_ln(0.5f64.ln()), 1.0).unwrap();
        assert_relative_eq!(d.c, 2.0);
        assert_relative_eq!(d.rho.value, 2f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn two_state_chain() {
        let k = vec![vec![0.75, 0.25], vec![0.25, 0.75]];
        let chk = doeblin_iterate(&k, 1, 0.5, 20).unwrap();
        assert!(chk.violations.is_empty());
        for (n, tv) in chk.tv.iter().enumerate() {
            assert_relative_eq!(*tv, 0.5 * 0.5f64.powi(n as i32), max_relative = 1e-12);
        }
        let unif = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let chk = doeblin_iterate(&unif, 1, 0.99, 3).unwrap();
        assert!(chk.tv[1] < 1e-15);
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(matches!(doeblin_iterate(&id, 1, 0.5, 3), Err(Error::Precondition(_))));
    }

    #[test]
    fn plateau_pair_selection() {
        let v = VelocityField::two_plateau(0.0, 2.0);
        let p = check_plateaus(&v).unwrap();
        assert_eq!(p.ell, 0.5);
        assert_eq!(p.dv, 2.0);
        assert!(check_plateaus(&VelocityField::cosine(1.0, 1.0)).is_none());
        assert!(check_plateaus(&VelocityField::constant(1.0)).is_none());
        let three = VelocityField::piecewise_constant(
            vec![0.0, 0.3, 0.6, 1.0],
            vec![0.0, 1.0, 3.0],
        )
        .unwrap();
        let p = check_plateaus(&three).unwrap();
        assert_relative_eq!(p.ell, 0.3);
        assert_eq!(p.dv, 3.0);
    }

    #[test]
    fn omega1_examples() {
        let lin = VelocityField::piecewise_linear(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert_relative_eq!(omega1(&lin, (0.0, 1.0), 0.5, 64).unwrap(), 1.0 / 720.0, max_relative = 1e-12);
        let cos = VelocityField::cosine(1.0, 1.0);
        let want = 1.0 / (8.0 * PI * PI) - 3.0 / (4.0 * PI.powi(4));
        assert_relative_eq!(omega1(&cos, (0.0, 1.0), 0.5, 64).unwrap(), want, max_relative = 1e-9);
        assert!(omega1(&cos, (0.0, 1.0), 0.6, 64).is_err());
    }

    #[test]
    fn h_estimate_detects_plateaus() {
        let v = VelocityField::two_plateau(0.0, 1.0);
        let h = estimate_h_constant(&v, (0.0, 1.0), &[0.25, 0.5], 64).unwrap();
        assert!(!h.feasible);
        let (l, r) = h.witness.unwrap();
        assert!(r <= 0.5 + 1e-12 || l >= 0.5 - 1e-12);
    }

    #[test]
    fn report_for_two_plateaus() {
        let r = bounds_report(&VelocityField::two_plateau(0.0, 1.0), &BoundsOptions::default()).unwrap();
        assert_relative_eq!(r.t_p.unwrap(), 1.4375, max_relative = 1e-15);
        assert!(r.t_h.is_none());
        assert!(r.invariant_failures().is_empty(), "{:?}", r.invariant_failures());
        let json = serde_json::to_value(&r).unwrap();
        assert!(json.as_object().unwrap().values().all(|v| !v.is_object()));
        let back: BoundsReport = serde_json::from_value(json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn report_for_cosine_uses_the_hypoelliptic_constants() {
        let r = bounds_report(&VelocityField::cosine(1.0, 1.0), &BoundsOptions::default()).unwrap();
        assert!(r.t_p.is_none());
        assert!(r.t_h.unwrap() > 1e3);
        assert!(r.doeblin_source.contains("t_h"));
        assert!(r.invariant_failures().is_empty());
        assert!(r.r_lower_omega2_periodic.unwrap() > 0.0);
    }

    #[test]
    fn resolvent_bound_examples() {
        assert_relative_eq!(resolvent_bound_omega2(0.5, 2.0, 1.0, true), (0.5 / (6.0 * PI)).powi(2), max_relative = 1e-14);
        let plain = 0.25 / 18.0 / (PI * PI + 4.0 / (PI * PI));
        assert_relative_eq!(resolvent_bound_omega2(0.5, 2.0, 1.0, false), plain, max_relative = 1e-14);
        assert!((plain - 1.352e-3).abs() < 1e-6);
        assert_eq!(resolvent_bound_omega2(0.0, 2.0, 1.0, false), 0.0);
    }

    #[test]
    fn omega2_of_constant_is_zero_and_bounded_by_half_osc() {
        assert!(matches!(omega2_torus(&VelocityField::constant(1.0), 8), Err(Error::Precondition(_))));
        let c = VelocityField::constant(3.0);
        assert!(omega2_torus(&c, 32).unwrap() < 1e-12);
        let v = VelocityField::two_plateau(0.0, 1.0);
        let w = omega2_torus(&v, 64).unwrap();
        assert!(w > 0.0 && w <= 0.5 + 1e-12, "{w}");
    }
}
