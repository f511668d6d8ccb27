//! Monte Carlo for the diffusion `dX = sqrt(2) dW`, `dY = V(X) dt`, on the
//! torus `T^2` or on the plane.
//!
//! `X` moves by exact Gaussian increments, so its law at any recorded time
//! carries no discretization error; only the `Y` quadrature is approximate.
//! Every path draws from its own ChaCha8 stream selected by `(seed, stream)`
//! and paths are simulated in fixed blocks that are merged in block order, so
//! results do not depend on the number of rayon workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::kernels::{kolmogorov_kernel, KolmogorovState};
use crate::quadrature::gl8_nodes;
use crate::velocity::{wrap_unit, VelocityField};

const BLOCK: usize = 4096;
/// Paths of ensemble `e` use ChaCha streams `e << STREAM_SHIFT | path`.
const STREAM_SHIFT: u32 = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    #[default]
    Torus,
    Plane,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum YIntegrator {
    /// `Y += V(X_n) dt`.
    #[default]
    LeftEndpoint,
    /// Each step is split into `substeps` exact Gaussian sub-increments and
    /// `Y` takes the trapezoid rule over them.
    SubstepTrapezoid { substeps: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub t_end: f64,
    pub seed: u64,
    #[serde(default)]
    pub y_integrator: YIntegrator,
    #[serde(default)]
    pub geometry: Geometry,
    /// Kill a path once `X` leaves this open interval (checked after every step).
    #[serde(default)]
    pub kill_outside: Option<(f64, f64)>,
}

impl PathConfig {
    pub fn new(dt: f64, n_paths: usize, t_end: f64, seed: u64) -> PathConfig {
        PathConfig {
            dt,
            n_paths,
            t_end,
            seed,
            y_integrator: YIntegrator::LeftEndpoint,
            geometry: Geometry::Torus,
            kill_outside: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_paths == 0 {
            return Err(invalid("n_paths must be at least 1"));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(invalid("t_end must be finite and nonnegative"));
        }
        if let YIntegrator::SubstepTrapezoid { substeps: 0 } = self.y_integrator {
            return Err(invalid("substep count must be positive"));
        }
        if let Some((a, b)) = self.kill_outside {
            if !(a < b) {
                return Err(invalid("killing interval is empty"));
            }
        }
        Ok(())
    }
}

/// The drift of `Y` as a function of `X`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "drift", rename_all = "snake_case")]
pub enum Drift {
    Field { velocity: VelocityField },
    /// `1_{x > 0}` on the line.
    Indicator,
    /// `V(x) = x`, unwrapped.
    Linear,
}

impl Drift {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Drift::Field { velocity } => velocity.value(x),
            Drift::Indicator => f64::from(u8::from(x > 0.0)),
            Drift::Linear => x,
        }
    }
}

impl From<VelocityField> for Drift {
    fn from(velocity: VelocityField) -> Self {
        Drift::Field { velocity }
    }
}

/// A drift prepared for the inner loop: piecewise-constant fields become a
/// flat table, which is several times cheaper than general evaluation.
enum Prepared<'a> {
    Steps {
        lo: f64,
        hi: f64,
        periodic: bool,
        /// interior break points
        inner: Vec<f64>,
        values: Vec<f64>,
    },
    General(&'a Drift),
}

impl<'a> Prepared<'a> {
    fn new(drift: &'a Drift) -> Self {
        if let Drift::Field { velocity } = drift {
            if let Some((breaks, values)) = velocity.step_table() {
                let d = velocity.domain();
                return Prepared::Steps {
                    lo: breaks[0],
                    hi: breaks[breaks.len() - 1],
                    periodic: d.is_periodic(),
                    inner: breaks[1..breaks.len() - 1].to_vec(),
                    values,
                };
            }
        }
        Prepared::General(drift)
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        match self {
            Prepared::Steps {
                lo,
                hi,
                periodic,
                inner,
                values,
            } => {
                let u = if *periodic { wrap_unit(x) } else { x.clamp(*lo, *hi) };
                let mut j = 0;
                for &b in inner {
                    j += usize::from(b <= u);
                }
                values[j]
            }
            Prepared::General(d) => d.eval(x),
        }
    }
}

/// Common step `dt_eff <= dt` that hits every requested time exactly, and the
/// step index of each time.
fn schedule(times: &[f64], dt: f64) -> Result<(f64, Vec<usize>)> {
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(invalid("record times must be finite and nonnegative"));
    }
    let t_min = times.iter().cloned().filter(|t| *t > 0.0).fold(f64::INFINITY, f64::min);
    if !t_min.is_finite() {
        return Ok((dt, vec![0; times.len()]));
    }
    let dt_eff = t_min / (t_min / dt - 1e-9).ceil().max(1.0);
    Ok((dt_eff, times.iter().map(|t| (t / dt_eff).round() as usize).collect()))
}

fn path_rng(seed: u64, ensemble: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((ensemble << STREAM_SHIFT) | path as u64);
    rng
}

/// Simulate one path and report its position at each recorded step, `None`
/// once killed. `order` lists `(step, slot)` sorted by step.
fn run_path(
    drift: &Prepared,
    start: (f64, f64),
    cfg: &PathConfig,
    dt: f64,
    order: &[(usize, usize)],
    rng: &mut ChaCha8Rng,
    out: &mut [Option<(f64, f64)>],
) {
    let (mut x, mut y) = start;
    let sub = match cfg.y_integrator {
        YIntegrator::LeftEndpoint => 1,
        YIntegrator::SubstepTrapezoid { substeps } => substeps,
    };
    let h = dt / sub as f64;
    let sd = (2.0 * h).sqrt();
    let alive = |x: f64| cfg.kill_outside.is_none_or(|(a, b)| x > a && x < b);
    let mut dead = !alive(x);
    let mut step = 0;
    let mut v = drift.eval(x);
    for &(target, slot) in order {
        while step < target && !dead {
            match cfg.y_integrator {
                YIntegrator::LeftEndpoint => {
                    let z: f64 = rng.sample(StandardNormal);
                    y += v * dt;
                    x += sd * z;
                    v = drift.eval(x);
                    dead = !alive(x);
                }
                YIntegrator::SubstepTrapezoid { .. } => {
                    for _ in 0..sub {
                        let z: f64 = rng.sample(StandardNormal);
                        x += sd * z;
                        let v1 = drift.eval(x);
                        y += 0.5 * (v + v1) * h;
                        v = v1;
                        if !alive(x) {
                            dead = true;
                            break;
                        }
                    }
                }
            }
            step += 1;
        }
        out[slot] = if dead { None } else { Some((x, y)) };
    }
}

/// Run `n_paths` paths of ensemble `ensemble` block by block and fold each
/// block with `visit`. Blocks are returned in order.
fn simulate_blocks<A: Send>(
    drift: &Drift,
    start: (f64, f64),
    cfg: &PathConfig,
    ensemble: u64,
    times: &[f64],
    init: impl Fn() -> A + Sync,
    visit: impl Fn(&mut A, &[Option<(f64, f64)>]) + Sync,
) -> Result<(f64, Vec<A>)> {
    cfg.validate()?;
    let (dt, steps) = schedule(times, cfg.dt)?;
    let mut order: Vec<(usize, usize)> = steps.iter().cloned().zip(0..).collect();
    order.sort();
    let drift = Prepared::new(drift);
    let n_blocks = cfg.n_paths.div_ceil(BLOCK);
    let blocks = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = init();
            let mut out = vec![None; times.len()];
            for p in b * BLOCK..((b + 1) * BLOCK).min(cfg.n_paths) {
                let mut rng = path_rng(cfg.seed, ensemble, p);
                run_path(&drift, start, cfg, dt, &order, &mut rng, &mut out);
                visit(&mut acc, &out);
            }
            acc
        })
        .collect();
    Ok((dt, blocks))
}

/// Rectangle `x x y` split into `m x m` cells; periodic windows wrap first.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub periodic: bool,
}

impl Window {
    pub fn unit_torus() -> Window {
        Window {
            x: (0.0, 1.0),
            y: (0.0, 1.0),
            periodic: true,
        }
    }

    fn cell(&self, m: usize, x: f64, y: f64) -> Option<(usize, usize)> {
        let (x, y) = if self.periodic { (wrap_unit(x), wrap_unit(y)) } else { (x, y) };
        let index = |u: f64, (a, b): (f64, f64)| {
            let r = (u - a) / (b - a);
            (0.0..1.0).contains(&r).then(|| ((r * m as f64) as usize).min(m - 1))
        };
        Some((index(x, self.x)?, index(y, self.y)?))
    }
}

/// Final positions binned on an `m x m` grid; `counts[row * m + col]` with
/// rows indexing `x`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransitionHistogram {
    pub m: usize,
    pub counts: Vec<u64>,
    pub n_paths: u64,
    pub start: (f64, f64),
    pub t: f64,
    pub dt: f64,
    pub seed: u64,
    pub window: Window,
    pub outside: u64,
    pub killed: u64,
}

impl TransitionHistogram {
    fn empty(m: usize, start: (f64, f64), window: Window, seed: u64) -> Self {
        TransitionHistogram {
            m,
            counts: vec![0; m * m],
            n_paths: 0,
            start,
            t: 0.0,
            dt: 0.0,
            seed,
            window,
            outside: 0,
            killed: 0,
        }
    }

    fn add(&mut self, p: Option<(f64, f64)>) {
        self.n_paths += 1;
        match p {
            None => self.killed += 1,
            Some((x, y)) => match self.window.cell(self.m, x, y) {
                Some((r, c)) => self.counts[r * self.m + c] += 1,
                None => self.outside += 1,
            },
        }
    }

    fn merge(&mut self, other: &TransitionHistogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.n_paths += other.n_paths;
        self.outside += other.outside;
        self.killed += other.killed;
    }

    pub fn count(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.m + col]
    }

    /// `(count, row, col)` of the emptiest cell, first in row-major order on ties.
    pub fn min_cell(&self) -> (u64, usize, usize) {
        let (i, c) = self
            .counts
            .iter()
            .enumerate()
            .min_by_key(|(i, c)| (**c, *i))
            .expect("non-empty histogram");
        (*c, i / self.m, i % self.m)
    }

    /// `m^2 min_cell / n_paths`.
    pub fn alpha_hat(&self) -> f64 {
        (self.m * self.m) as f64 * self.min_cell().0 as f64 / self.n_paths as f64
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.counts.iter().map(|c| *c as f64 / self.n_paths as f64).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("row,col,count\n");
        for r in 0..self.m {
            for c in 0..self.m {
                s.push_str(&format!("{r},{c},{}\n", self.count(r, c)));
            }
        }
        s
    }

    /// Everything but the counts: enough to regenerate the histogram.
    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "seed": self.seed,
            "dt": self.dt,
            "t": self.t,
            "M": self.m,
            "start": [self.start.0, self.start.1],
            "n_paths": self.n_paths,
            "window": self.window,
            "outside": self.outside,
            "killed": self.killed,
        })
    }
}

/// Histograms at each of `times` from one ensemble of paths.
pub fn simulate_window(
    start: (f64, f64),
    drift: &Drift,
    cfg: &PathConfig,
    window: Window,
    m: usize,
    times: &[f64],
) -> Result<Vec<TransitionHistogram>> {
    simulate_ensemble(start, drift, cfg, window, m, times, 0)
}

fn simulate_ensemble(
    start: (f64, f64),
    drift: &Drift,
    cfg: &PathConfig,
    window: Window,
    m: usize,
    times: &[f64],
    ensemble: u64,
) -> Result<Vec<TransitionHistogram>> {
    if m == 0 {
        return Err(invalid("need at least one cell per axis"));
    }
    if !(start.0.is_finite() && start.1.is_finite()) {
        return Err(invalid("start point must be finite"));
    }
    let blank = TransitionHistogram::empty(m, start, window, cfg.seed);
    let (dt, blocks) = simulate_blocks(
        drift,
        start,
        cfg,
        ensemble,
        times,
        || vec![blank.clone(); times.len()],
        |acc, out| {
            for (h, p) in acc.iter_mut().zip(out) {
                h.add(*p);
            }
        },
    )?;
    let mut total = vec![blank.clone(); times.len()];
    for block in &blocks {
        for (t, b) in total.iter_mut().zip(block) {
            t.merge(b);
        }
    }
    let (_, steps) = schedule(times, cfg.dt)?;
    for (h, s) in total.iter_mut().zip(steps) {
        h.t = s as f64 * dt;
        h.dt = dt;
    }
    Ok(total)
}

/// Transition histogram on the unit torus at `cfg.t_end`.
pub fn simulate(start: (f64, f64), drift: &Drift, cfg: &PathConfig, m: usize) -> Result<TransitionHistogram> {
    if cfg.geometry != Geometry::Torus {
        return Err(Error::Precondition(
            "plane histograms need an explicit window, use simulate_window".into(),
        ));
    }
    Ok(simulate_window(start, drift, cfg, Window::unit_torus(), m, &[cfg.t_end])?.remove(0))
}

/// Histogram of `n_paths` draws from an arbitrary sampler on the unit torus.
pub fn sample_histogram(
    m: usize,
    n_paths: usize,
    seed: u64,
    sampler: impl Fn(&mut ChaCha8Rng) -> (f64, f64) + Sync,
) -> TransitionHistogram {
    let blank = TransitionHistogram::empty(m, (f64::NAN, f64::NAN), Window::unit_torus(), seed);
    let blocks: Vec<TransitionHistogram> = (0..n_paths.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut h = blank.clone();
            for p in b * BLOCK..((b + 1) * BLOCK).min(n_paths) {
                let mut rng = path_rng(seed, 0, p);
                h.add(Some(sampler(&mut rng)));
            }
            h
        })
        .collect();
    let mut total = blank;
    for b in &blocks {
        total.merge(b);
    }
    total
}

/// One-sided lower confidence bound for a binomial proportion from the exact
/// (Clopper-Pearson) construction: the `p` with `P(Bin(n, p) >= count) = 1 - confidence`.
pub fn clopper_pearson_lower(count: u64, n: u64, confidence: f64) -> f64 {
    if count == 0 || n == 0 {
        return 0.0;
    }
    let target = 1.0 - confidence;
    let (a, b) = (count as f64, (n - count + 1) as f64);
    let (mut lo, mut hi) = (0.0, count as f64 / n as f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if statrs::function::beta::beta_reg(a, b, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub const CONFIDENCE: f64 = 0.99;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DoeblinEstimate {
    pub t: f64,
    pub alpha_hat: f64,
    /// `m^2` times the 99% lower bound of the emptiest cell, minimized over starts.
    pub alpha_lower: f64,
    pub per_start: Vec<f64>,
    /// `(start index, row, col)` of the minimizing cell.
    pub worst_cell: (usize, usize, usize),
    pub empty_cell: Option<(usize, usize, usize)>,
}

/// Aggregate histograms taken at a common time from different starts.
pub fn alpha_from_histograms(hists: &[TransitionHistogram]) -> Result<DoeblinEstimate> {
    let first = hists.first().ok_or_else(|| invalid("need at least one histogram"))?;
    let mut est = DoeblinEstimate {
        t: first.t,
        alpha_hat: f64::INFINITY,
        alpha_lower: f64::INFINITY,
        per_start: Vec::with_capacity(hists.len()),
        worst_cell: (0, 0, 0),
        empty_cell: None,
    };
    for (i, h) in hists.iter().enumerate() {
        if h.m != first.m {
            return Err(invalid("histograms have different cell counts"));
        }
        let cells = (h.m * h.m) as f64;
        let (c, r, col) = h.min_cell();
        let a = h.alpha_hat();
        est.per_start.push(a);
        if a < est.alpha_hat {
            est.alpha_hat = a;
            est.worst_cell = (i, r, col);
        }
        est.alpha_lower = est.alpha_lower.min(cells * clopper_pearson_lower(c, h.n_paths, CONFIDENCE));
        if c == 0 && est.empty_cell.is_none() {
            est.empty_cell = Some((i, r, col));
        }
    }
    Ok(est)
}

/// Doeblin estimates at each of `times`; `cfg.n_paths` paths per start, start
/// `i` drawing from ensemble `i`.
pub fn doeblin_profile(
    drift: &Drift,
    times: &[f64],
    starts: &[(f64, f64)],
    cfg: &PathConfig,
    m: usize,
) -> Result<Vec<DoeblinEstimate>> {
    if starts.is_empty() {
        return Err(invalid("need at least one start"));
    }
    let per_start = starts
        .iter()
        .enumerate()
        .map(|(i, s)| simulate_ensemble(*s, drift, cfg, Window::unit_torus(), m, times, i as u64))
        .collect::<Result<Vec<_>>>()?;
    (0..times.len())
        .map(|j| alpha_from_histograms(&per_start.iter().map(|h| h[j].clone()).collect::<Vec<_>>()))
        .collect()
}

pub fn doeblin_estimate(
    drift: &Drift,
    t_star: f64,
    starts: &[(f64, f64)],
    cfg: &PathConfig,
    m: usize,
) -> Result<DoeblinEstimate> {
    Ok(doeblin_profile(drift, &[t_star], starts, cfg, m)?.remove(0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensembles {
    /// The second start draws from a different stream family.
    Independent,
    /// Both starts reuse the same streams (common random numbers).
    Shared,
}

/// Least-squares line through `(t, ln(tv - floor))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TvDecay {
    pub times: Vec<f64>,
    pub tv: Vec<f64>,
    /// Expected TV between two ensembles drawn from the same law.
    pub bias_floor: Vec<f64>,
    pub fit: Option<DecayFit>,
}

impl TvDecay {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,tv,bias_floor\n");
        for i in 0..self.times.len() {
            s.push_str(&format!("{},{},{}\n", self.times[i], self.tv[i], self.bias_floor[i]));
        }
        s
    }
}

/// `E (1/2) sum |p_hat - q_hat|` for two independent multinomial samples of
/// size `n` from the law `p`, to leading order.
pub fn tv_bias_floor(p: &[f64], n: u64) -> f64 {
    p.iter().map(|p| (p * (1.0 - p) / (PI * n as f64)).sqrt()).sum()
}

/// Fit on the points where `tv` exceeds three times its floor; `None` with fewer than two.
pub fn fit_decay(times: &[f64], tv: &[f64], floor: &[f64]) -> Option<DecayFit> {
    let pts: Vec<(f64, f64)> = (0..times.len())
        .filter(|&i| tv[i] > 3.0 * floor[i])
        .map(|i| (times[i], (tv[i] - floor[i]).ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum::<f64>() / sxx;
    Some(DecayFit {
        slope,
        intercept: ml - slope * mt,
        points: pts.len(),
    })
}

pub fn tv_decay(
    drift: &Drift,
    start1: (f64, f64),
    start2: (f64, f64),
    times: &[f64],
    cfg: &PathConfig,
    m: usize,
    ensembles: Ensembles,
) -> Result<TvDecay> {
    let w = Window::unit_torus();
    let second = match ensembles {
        Ensembles::Independent => 1,
        Ensembles::Shared => 0,
    };
    let p = simulate_ensemble(start1, drift, cfg, w, m, times, 0)?;
    let q = simulate_ensemble(start2, drift, cfg, w, m, times, second)?;
    let mut out = TvDecay {
        times: p.iter().map(|h| h.t).collect(),
        tv: Vec::new(),
        bias_floor: Vec::new(),
        fit: None,
    };
    for (a, b) in p.iter().zip(&q) {
        let (pa, pb) = (a.probabilities(), b.probabilities());
        out.tv.push(0.5 * pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).sum::<f64>());
        let pooled: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| 0.5 * (x + y)).collect();
        out.bias_floor.push(tv_bias_floor(&pooled, a.n_paths));
    }
    out.fit = fit_decay(&out.times, &out.tv, &out.bias_floor);
    Ok(out)
}

/// Kolmogorov-Smirnov distance between the empirical law of `samples` and `cdf`.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < samples.len() {
        let mut j = i;
        while j + 1 < samples.len() && samples[j + 1] == samples[i] {
            j += 1;
        }
        let f = cdf(samples[i]);
        d = d.max(f - i as f64 / n).max((j + 1) as f64 / n - f);
        i = j + 1;
    }
    d
}

/// `P(Z <= a) = (2 / pi) asin(sqrt a)` on `[0, 1]`.
pub fn arcsine_cdf(a: f64) -> f64 {
    2.0 / PI * a.clamp(0.0, 1.0).sqrt().asin()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcsineConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub t: f64,
    pub seed: u64,
    #[serde(default)]
    pub y_integrator: YIntegrator,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArcsineResult {
    pub ks: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub t: f64,
    pub mean: f64,
}

/// Fraction of `[0, t]` a Brownian path from the origin spends in `x > 0`,
/// compared with the arcsine law.
pub fn arcsine_experiment(cfg: &ArcsineConfig) -> Result<ArcsineResult> {
    if !(cfg.t > 0.0) {
        return Err(invalid("arcsine experiment needs t > 0"));
    }
    let pc = PathConfig {
        dt: cfg.dt,
        n_paths: cfg.n_paths,
        t_end: cfg.t,
        seed: cfg.seed,
        y_integrator: cfg.y_integrator,
        geometry: Geometry::Plane,
        kill_outside: None,
    };
    let (dt, blocks) = simulate_blocks(
        &Drift::Indicator,
        (0.0, 0.0),
        &pc,
        0,
        &[cfg.t],
        Vec::new,
        |acc: &mut Vec<f64>, out| acc.push(out[0].expect("no killing").1 / cfg.t),
    )?;
    let mut z: Vec<f64> = blocks.into_iter().flatten().collect();
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    Ok(ArcsineResult {
        ks: ks_statistic(&mut z, arcsine_cdf),
        n_paths: cfg.n_paths,
        dt,
        t: cfg.t,
        mean,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KolmogorovConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub t: f64,
    pub seed: u64,
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default = "default_trapezoid")]
    pub y_integrator: YIntegrator,
}

fn default_cells() -> usize {
    24
}

fn default_trapezoid() -> YIntegrator {
    YIntegrator::SubstepTrapezoid { substeps: 1 }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KolmogorovResult {
    /// Largest `|p_hat - p| / p` over cells holding at least 1% of the mass.
    pub max_rel_error: f64,
    pub compared_cells: usize,
    /// Chi-square p-value of the `x` marginal against `N(0, 2t)`.
    pub x_chi2_p: f64,
    pub y_mean: f64,
    pub y_var: f64,
    /// `int y^2 K` by quadrature of the closed-form kernel.
    pub y_var_kernel: f64,
    /// Deviations of the sample mean and variance of `Y` in standard errors.
    pub y_mean_z: f64,
    pub y_var_z: f64,
    pub histogram: TransitionHistogram,
    /// Cell probabilities of the kernel, row-major like the histogram.
    pub kernel_cells: Vec<f64>,
}

/// `int int f(x, y) K_t((0,0) -> (x, y))` over a rectangle by a tensor
/// Gauss-Legendre rule on `panels x panels` sub-rectangles.
fn kernel_integral(t: f64, xr: (f64, f64), yr: (f64, f64), panels: usize, f: impl Fn(f64, f64) -> f64) -> f64 {
    let hx = (xr.1 - xr.0) / panels as f64;
    let hy = (yr.1 - yr.0) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let xs = gl8_nodes(xr.0 + i as f64 * hx, xr.0 + (i + 1) as f64 * hx);
        for j in 0..panels {
            let ys = gl8_nodes(yr.0 + j as f64 * hy, yr.0 + (j + 1) as f64 * hy);
            for (x, wx) in xs {
                for (y, wy) in ys {
                    let s = KolmogorovState { x0: 0.0, y0: 0.0, x, y, t };
                    total += wx * wy * f(x, y) * kolmogorov_kernel(&s).expect("t > 0");
                }
            }
        }
    }
    total
}

/// `V(x) = x` on the plane from the origin: histogram against the cell
/// averages of the closed-form kernel over a +-4 standard deviation box.
pub fn kolmogorov_experiment(cfg: &KolmogorovConfig) -> Result<KolmogorovResult> {
    if !(cfg.t > 0.0) || cfg.cells < 2 {
        return Err(invalid("need t > 0 and at least two cells"));
    }
    let t = cfg.t;
    let sx = (2.0 * t).sqrt();
    let sy = (2.0 * t * t * t / 3.0).sqrt();
    let window = Window {
        x: (-4.0 * sx, 4.0 * sx),
        y: (-4.0 * sy, 4.0 * sy),
        periodic: false,
    };
    let pc = PathConfig {
        dt: cfg.dt,
        n_paths: cfg.n_paths,
        t_end: t,
        seed: cfg.seed,
        y_integrator: cfg.y_integrator,
        geometry: Geometry::Plane,
        kill_outside: None,
    };
    let m = cfg.cells;
    let nx = m + 2;
    // per block: histogram, x-marginal counts with two tail bins, sum y, sum y^2
    type Acc = (TransitionHistogram, Vec<u64>, f64, f64);
    let blank = TransitionHistogram::empty(m, (0.0, 0.0), window, cfg.seed);
    let (dt, blocks) = simulate_blocks(
        &Drift::Linear,
        (0.0, 0.0),
        &pc,
        0,
        &[t],
        || (blank.clone(), vec![0u64; nx], 0.0, 0.0),
        |acc: &mut Acc, out| {
            let (x, y) = out[0].expect("no killing");
            acc.0.add(Some((x, y)));
            let r = (x - window.x.0) / (window.x.1 - window.x.0);
            let bin = if r < 0.0 { 0 } else if r >= 1.0 { nx - 1 } else { 1 + ((r * m as f64) as usize).min(m - 1) };
            acc.1[bin] += 1;
            acc.2 += y;
            acc.3 += y * y;
        },
    )?;
    let mut hist = blank;
    let mut xcounts = vec![0u64; nx];
    let (mut sy1, mut sy2) = (0.0, 0.0);
    for (h, xc, a, b) in &blocks {
        hist.merge(h);
        for (u, v) in xcounts.iter_mut().zip(xc) {
            *u += v;
        }
        sy1 += a;
        sy2 += b;
    }
    hist.t = t;
    hist.dt = dt;
    let n = cfg.n_paths as f64;

    let wx = (window.x.1 - window.x.0) / m as f64;
    let wy = (window.y.1 - window.y.0) / m as f64;
    let mut kernel_cells = Vec::with_capacity(m * m);
    for r in 0..m {
        for c in 0..m {
            let xr = (window.x.0 + r as f64 * wx, window.x.0 + (r + 1) as f64 * wx);
            let yr = (window.y.0 + c as f64 * wy, window.y.0 + (c + 1) as f64 * wy);
            kernel_cells.push(kernel_integral(t, xr, yr, 1, |_, _| 1.0));
        }
    }
    let mut max_rel_error: f64 = 0.0;
    let mut compared_cells = 0;
    for (count, p) in hist.counts.iter().zip(&kernel_cells) {
        if *p >= 0.01 {
            compared_cells += 1;
            max_rel_error = max_rel_error.max((*count as f64 / n - p).abs() / p);
        }
    }

    let normal = Normal::new(0.0, sx).map_err(|e| Error::Numeric(e.to_string()))?;
    let mut chi2 = 0.0;
    for (b, count) in xcounts.iter().enumerate() {
        let p = match b {
            0 => normal.cdf(window.x.0),
            _ if b == nx - 1 => normal.sf(window.x.1),
            _ => {
                let lo = window.x.0 + (b - 1) as f64 * wx;
                normal.cdf(lo + wx) - normal.cdf(lo)
            }
        };
        let e = n * p;
        chi2 += (*count as f64 - e).powi(2) / e;
    }
    let dist = ChiSquared::new((nx - 1) as f64).map_err(|e| Error::Numeric(e.to_string()))?;
    let x_chi2_p = dist.sf(chi2);

    let y_mean = sy1 / n;
    let y_var = sy2 / n - y_mean * y_mean;
    let wide = (-12.0 * sx, 12.0 * sx);
    let tall = (-12.0 * sy - 6.0 * sx * t, 12.0 * sy + 6.0 * sx * t);
    let y_var_kernel = kernel_integral(t, wide, tall, 48, |_, y| y * y);
    Ok(KolmogorovResult {
        max_rel_error,
        compared_cells,
        x_chi2_p,
        y_mean,
        y_var,
        y_var_kernel,
        y_mean_z: y_mean / (y_var_kernel / n).sqrt(),
        y_var_z: (y_var - y_var_kernel) / (y_var_kernel * (2.0 / n).sqrt()),
        histogram: hist,
        kernel_cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(t_end: f64, n: usize) -> PathConfig {
        PathConfig::new(1e-3, n, t_end, 7)
    }

    #[test]
    fn constant_drift_moves_y_exactly() {
        let d = Drift::from(VelocityField::constant(0.75));
        let cfg = small(0.5, 50);
        let (_, blocks) = simulate_blocks(&d, (0.2, 0.1), &cfg, 0, &[0.5], Vec::new, |acc: &mut Vec<f64>, out| {
            acc.push(out[0].unwrap().1)
        })
        .unwrap();
        for y in blocks.into_iter().flatten() {
            assert!((y - (0.1 + 0.75 * 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn histogram_conserves_paths_and_zero_time_is_a_dirac() {
        let d = Drift::from(VelocityField::two_plateau(0.0, 1.0));
        let h = simulate((0.3, 0.6), &d, &small(0.05, 5000), 4).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), 5000);
        let z = simulate((0.3, 0.6), &d, &small(0.0, 100), 4).unwrap();
        assert_eq!(z.count(1, 2), 100);
        assert_eq!(z.alpha_hat(), 0.0);
    }

    #[test]
    fn schedule_hits_multiples_exactly() {
        let (dt, steps) = schedule(&[1.4375, 2.875, 5.75], 1e-3).unwrap();
        assert_eq!(steps, vec![1438, 2876, 5752]);
        assert!((dt * 1438.0 - 1.4375).abs() < 1e-12);
    }

    #[test]
    fn clopper_pearson_brackets() {
        assert_eq!(clopper_pearson_lower(0, 100, 0.99), 0.0);
        // with n = count the bound solves p^n = 0.01
        let p = clopper_pearson_lower(10, 10, 0.99);
        assert!((p - 0.01f64.powf(0.1)).abs() < 1e-10);
        let q = clopper_pearson_lower(500, 1000, 0.99);
        assert!(q < 0.5 && q > 0.45);
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        let n = 1000;
        let mut s: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        assert!((ks_statistic(&mut s, |a| a) - 0.5 / n as f64).abs() < 1e-12);
        assert_eq!(arcsine_cdf(0.0), 0.0);
        assert_eq!(arcsine_cdf(1.0), 1.0);
        assert!((arcsine_cdf(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn killed_paths_are_counted() {
        let mut cfg = small(1.0, 2000);
        cfg.kill_outside = Some((0.4, 0.6));
        let h = simulate((0.5, 0.5), &Drift::from(VelocityField::constant(0.0)), &cfg, 4).unwrap();
        assert_eq!(h.killed + h.counts.iter().sum::<u64>(), 2000);
        assert!(h.killed > 1900);
    }
}
