use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{exit, Plan, TaskOutput};
use crate::error::{invalid, Error, Result};
use crate::evolve2d::{relax_trace, RelaxOptions};
use crate::functionals::{bounds_report, check_plateaus, plateau_constants, BoundsOptions};
use crate::mcsim::{
    arcsine_experiment, doeblin_profile, kolmogorov_experiment, simulate as simulate_paths,
    tv_decay, ArcsineConfig, Drift, Ensembles, KolmogorovConfig, PathConfig, YIntegrator,
};
use crate::spectral1d::{r_lambda1, semigroup_norm, Grid1d, ModeOperator};
use crate::validate::{doeblin_starts, run_criterion, semigroup_times, table, CRITERIA};
use crate::velocity::{wrap_unit, Domain, VelocityField};

pub(super) fn bounds(plan: &Plan, opts: &BoundsOptions) -> Result<TaskOutput> {
    let report = bounds_report(plan.velocity()?, opts)?;
    let mut out = TaskOutput::default();
    out.add_json("bounds.json", &report)?;
    let failures = report.invariant_failures();
    out.message = if failures.is_empty() {
        format!("bounds: omega2 = {:.6e}, rho_V = {:.6e}\n", report.omega2, report.rho_v)
    } else {
        format!("bounds: invariant failures: {}\n", failures.join(", "))
    };
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumParams {
    /// Grid points in `x`.
    pub n: usize,
    /// Fourier mode in `y`; the operator is `-d_xx + 2 pi i k V`.
    pub k: i64,
    pub s_points: usize,
    pub window: Option<(f64, f64)>,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        SpectrumParams {
            n: 256,
            k: 1,
            s_points: 256,
            window: None,
        }
    }
}

impl SpectrumParams {
    pub(super) fn check(&self) -> Result<()> {
        if self.n < 8 {
            return Err(invalid("spectrum needs n >= 8"));
        }
        if self.k == 0 {
            return Err(invalid("mode k = 0 has no shear term"));
        }
        if self.s_points < 64 {
            return Err(invalid("spectrum needs s_points >= 64"));
        }
        if let Some((lo, hi)) = self.window {
            if !(lo < hi) {
                return Err(invalid("window must satisfy lo < hi"));
            }
        }
        Ok(())
    }
}

fn grid_for(v: &VelocityField, n: usize) -> Grid1d {
    match v.domain() {
        Domain::Torus => Grid1d::torus(n),
        Domain::Interval { a, b } => Grid1d::dirichlet(a, b, n),
    }
}

#[derive(Serialize)]
struct SpectrumFile {
    k: i64,
    n: usize,
    lambda1: f64,
    lambda2: f64,
    r_lambda1: f64,
    s_argmin: f64,
    window: (f64, f64),
    bracket: (f64, f64),
    converged: bool,
    window_extensions: usize,
    resolvent_bound_omega2: f64,
    resolvent_bound_omega1: f64,
    semigroup_max_weighted: f64,
    semigroup_cap: f64,
}

pub(super) fn spectrum(plan: &Plan, p: &SpectrumParams) -> Result<TaskOutput> {
    let v = plan.velocity()?;
    let op = ModeOperator::new(v, grid_for(v, p.n), p.k)?;
    let summary = r_lambda1(&op, p.window, p.s_points)?;
    let theory = bounds_report(&v.scaled(2.0 * PI * p.k as f64), &BoundsOptions::default())?;
    let omega1_bound = theory.r_lower_omega1.iter().copied().fold(0.0, f64::max);

    let times = semigroup_times(op.lambda2());
    let norms = semigroup_norm(&op, &times)?;
    let mut semi = String::from("t,norm,weighted\n");
    let mut worst: f64 = 0.0;
    for (t, n) in times.iter().zip(&norms) {
        let w = n * ((op.lambda1() + summary.r_lambda1) * t).exp();
        worst = worst.max(w);
        semi.push_str(&format!("{t},{n},{w}\n"));
    }

    let mut trace = summary.trace.clone();
    trace.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut sigma = String::from("s,sigma_min\n");
    for (s, y) in trace {
        sigma.push_str(&format!("{s},{y}\n"));
    }

    let file = SpectrumFile {
        k: p.k,
        n: p.n,
        lambda1: summary.lambda1,
        lambda2: summary.lambda2,
        r_lambda1: summary.r_lambda1,
        s_argmin: summary.s_argmin,
        window: summary.window,
        bracket: summary.bracket,
        converged: summary.converged,
        window_extensions: summary.window_extensions,
        resolvent_bound_omega2: theory.r_lower_omega2,
        resolvent_bound_omega1: omega1_bound,
        semigroup_max_weighted: worst,
        semigroup_cap: (PI / 2.0).exp(),
    };
    let mut out = TaskOutput::default();
    out.add_json("spectrum.json", &file)?;
    out.add("sigma_trace.csv", sigma);
    out.add("semigroup.csv", semi);
    out.message = format!(
        "spectrum: r(lambda1) = {:.6e} at s = {:.4}; lower bounds {:.3e}, {:.3e}\n",
        summary.r_lambda1, summary.s_argmin, theory.r_lower_omega2, omega1_bound
    );
    Ok(out)
}

/// Initial data for the relaxation run, sampled on the torus.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialField {
    /// Periodized Gaussian centred at `(x0, y0)`.
    Bump { x0: f64, y0: f64, width: f64 },
    /// `sum a cos(2 pi (kx x + ky y) + phase)`.
    Fourier { terms: Vec<FourierTerm> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    pub kx: i64,
    pub ky: i64,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

impl InitialField {
    pub fn value(&self, x: f64, y: f64) -> f64 {
        match self {
            InitialField::Bump { x0, y0, width } => {
                let dx = wrap_unit(x - x0 + 0.5) - 0.5;
                let dy = wrap_unit(y - y0 + 0.5) - 0.5;
                (-(dx * dx + dy * dy) / (2.0 * width * width)).exp()
            }
            InitialField::Fourier { terms } => terms
                .iter()
                .map(|t| {
                    t.amplitude
                        * (2.0 * PI * (t.kx as f64 * x + t.ky as f64 * y) + t.phase).cos()
                })
                .sum(),
        }
    }

    pub fn sample(&self, nx: usize, ny: usize) -> Vec<f64> {
        let mut u = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for l in 0..ny {
                u.push(self.value(i as f64 / nx as f64, l as f64 / ny as f64));
            }
        }
        u
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveParams {
    pub n: usize,
    pub ny: usize,
    pub k_max: usize,
    pub t_end: f64,
    pub samples: usize,
    pub omega2_nodes: usize,
    pub initial: InitialField,
}

impl Default for EvolveParams {
    fn default() -> Self {
        let o = RelaxOptions::default();
        EvolveParams {
            n: o.grid.n,
            ny: o.ny,
            k_max: o.k_max,
            t_end: 20.0,
            samples: 81,
            omega2_nodes: o.omega2_nodes,
            initial: InitialField::Bump {
                x0: 0.3,
                y0: 0.6,
                width: 0.08,
            },
        }
    }
}

impl EvolveParams {
    pub(super) fn check(&self, v: &VelocityField) -> Result<()> {
        if !v.domain().is_periodic() {
            return Err(invalid("evolve runs on the torus; the velocity must use the torus domain"));
        }
        if self.n < 4 || self.ny < 2 * self.k_max + 1 {
            return Err(invalid("need n >= 4 and ny >= 2 k_max + 1"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) || self.samples < 2 {
            return Err(invalid("need t_end > 0 and samples >= 2"));
        }
        if self.omega2_nodes < 16 {
            return Err(invalid("omega2_nodes must be at least 16"));
        }
        if let InitialField::Bump { width, .. } = self.initial {
            if !(width > 0.0) {
                return Err(invalid("bump width must be positive"));
            }
        }
        Ok(())
    }
}

pub(super) fn evolve(plan: &Plan, p: &EvolveParams) -> Result<TaskOutput> {
    let v = plan.velocity()?;
    let opts = RelaxOptions {
        grid: Grid1d::torus(p.n),
        ny: p.ny,
        k_max: p.k_max,
        omega2_nodes: p.omega2_nodes,
    };
    let u0 = p.initial.sample(p.n, p.ny);
    let (trace, last) = relax_trace(&u0, v, p.t_end, p.samples, &opts)?;
    let snapshot = last.to_samples(p.ny)?;
    let bytes: Vec<u8> = snapshot.iter().flat_map(|x| x.to_le_bytes()).collect();
    let violations = trace.violated.iter().filter(|b| **b).count();

    let mut out = TaskOutput::default();
    out.add("decay.csv", trace.to_csv());
    out.add_json(
        "decay.json",
        &serde_json::json!({
            "rho": trace.rho,
            "omega2": trace.omega2,
            "violations": violations,
            "first_violation": trace.first_violation,
        }),
    )?;
    out.add("field_final.f64", bytes);
    out.add_json(
        "field_final.json",
        &serde_json::json!({
            "dtype": "f64 little-endian",
            "nx": p.n,
            "ny": p.ny,
            "layout": "u[i * ny + l] = u(i / nx, l / ny)",
            "t": last.time,
        }),
    )?;
    out.message = format!(
        "evolve: rho(V) = {:.4e}, {violations} envelope violation(s) over {} samples\n",
        trace.rho, p.samples
    );
    Ok(out)
}

fn default_m() -> usize {
    8
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case", deny_unknown_fields)]
pub enum SimulateParams {
    /// Histogram of the law at time `t` from one start.
    Transition {
        start: (f64, f64),
        t: f64,
        #[serde(default = "transition_dt")]
        dt: f64,
        #[serde(default = "transition_paths")]
        n_paths: usize,
        #[serde(default = "default_m")]
        m: usize,
        #[serde(default)]
        y_integrator: YIntegrator,
    },
    /// Empirical Doeblin constant at each time; defaults to `t_P, 2 t_P, 4 t_P`.
    Doeblin {
        #[serde(default)]
        times: Option<Vec<f64>>,
        #[serde(default)]
        starts: Option<Vec<(f64, f64)>>,
        #[serde(default = "doeblin_dt")]
        dt: f64,
        #[serde(default = "mc_paths")]
        n_paths: usize,
        #[serde(default = "default_m")]
        m: usize,
    },
    TvDecay {
        #[serde(default = "start_a")]
        start_a: (f64, f64),
        #[serde(default = "start_b")]
        start_b: (f64, f64),
        #[serde(default = "tv_times")]
        times: Vec<f64>,
        #[serde(default = "doeblin_dt")]
        dt: f64,
        #[serde(default = "mc_paths")]
        n_paths: usize,
        #[serde(default = "default_m")]
        m: usize,
        #[serde(default = "independent")]
        ensembles: Ensembles,
    },
    Arcsine {
        #[serde(default = "arcsine_paths")]
        n_paths: usize,
        #[serde(default = "arcsine_dt")]
        dt: f64,
        #[serde(default = "unit")]
        t: f64,
        #[serde(default)]
        y_integrator: YIntegrator,
    },
    Kolmogorov {
        #[serde(default = "kolmogorov_paths")]
        n_paths: usize,
        #[serde(default = "transition_dt")]
        dt: f64,
        #[serde(default = "unit")]
        t: f64,
        #[serde(default = "kolmogorov_cells")]
        cells: usize,
        #[serde(default = "trapezoid")]
        y_integrator: YIntegrator,
    },
}

fn transition_dt() -> f64 {
    1e-3
}
fn transition_paths() -> usize {
    100_000
}
fn doeblin_dt() -> f64 {
    crate::validate::DOEBLIN_DT
}
fn mc_paths() -> usize {
    125_000
}
fn start_a() -> (f64, f64) {
    (0.1, 0.1)
}
fn start_b() -> (f64, f64) {
    (0.6, 0.6)
}
fn tv_times() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 8.0]
}
fn independent() -> Ensembles {
    Ensembles::Independent
}
fn arcsine_paths() -> usize {
    200_000
}
fn arcsine_dt() -> f64 {
    1e-4
}
fn unit() -> f64 {
    1.0
}
fn kolmogorov_paths() -> usize {
    1_000_000
}
fn kolmogorov_cells() -> usize {
    24
}
fn trapezoid() -> YIntegrator {
    YIntegrator::SubstepTrapezoid { substeps: 1 }
}

impl SimulateParams {
    pub(super) fn needs_velocity(&self) -> bool {
        matches!(
            self,
            SimulateParams::Transition { .. }
                | SimulateParams::Doeblin { .. }
                | SimulateParams::TvDecay { .. }
        )
    }

    pub(super) fn check(&self) -> Result<()> {
        let positive = |x: f64, what: &str| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{what} must be positive")))
            }
        };
        let paths = |n: usize| {
            if n == 0 {
                Err(invalid("n_paths must be at least 1"))
            } else {
                Ok(())
            }
        };
        let cells = |m: usize| {
            if m == 0 {
                Err(invalid("m must be at least 1"))
            } else {
                Ok(())
            }
        };
        match self {
            SimulateParams::Transition { t, dt, n_paths, m, .. } => {
                positive(*t, "t")?;
                positive(*dt, "dt")?;
                paths(*n_paths)?;
                cells(*m)
            }
            SimulateParams::Doeblin { times, starts, dt, n_paths, m } => {
                if let Some(ts) = times {
                    if ts.is_empty() {
                        return Err(invalid("times must not be empty"));
                    }
                    for t in ts {
                        positive(*t, "every time")?;
                    }
                }
                if starts.as_ref().is_some_and(Vec::is_empty) {
                    return Err(invalid("starts must not be empty"));
                }
                positive(*dt, "dt")?;
                paths(*n_paths)?;
                cells(*m)
            }
            SimulateParams::TvDecay { times, dt, n_paths, m, .. } => {
                if times.is_empty() {
                    return Err(invalid("times must not be empty"));
                }
                for t in times {
                    positive(*t, "every time")?;
                }
                positive(*dt, "dt")?;
                paths(*n_paths)?;
                cells(*m)
            }
            SimulateParams::Arcsine { n_paths, dt, t, .. } => {
                positive(*t, "t")?;
                positive(*dt, "dt")?;
                paths(*n_paths)
            }
            SimulateParams::Kolmogorov { n_paths, dt, t, cells: c, .. } => {
                positive(*t, "t")?;
                positive(*dt, "dt")?;
                paths(*n_paths)?;
                cells(*c)
            }
        }
    }
}

pub(super) fn simulate(plan: &Plan, p: &SimulateParams) -> Result<TaskOutput> {
    let mut out = TaskOutput::default();
    let seed = plan.seed;
    match p {
        SimulateParams::Transition { start, t, dt, n_paths, m, y_integrator } => {
            let drift = Drift::from(plan.velocity()?.clone());
            let mut cfg = PathConfig::new(*dt, *n_paths, *t, seed);
            cfg.y_integrator = *y_integrator;
            let h = simulate_paths(*start, &drift, &cfg, *m)?;
            out.add("transition.csv", h.to_csv());
            out.add_json("transition.json", &h.metadata())?;
            out.message = format!("transition: alpha_hat = {:.4e}\n", h.alpha_hat());
        }
        SimulateParams::Doeblin { times, starts, dt, n_paths, m } => {
            let v = plan.velocity()?;
            let plateau = check_plateaus(v);
            let theory = match plateau {
                Some(pair) => Some(plateau_constants(pair.ell, pair.dv)?),
                None => None,
            };
            let times = match (times, &theory) {
                (Some(ts), _) => ts.clone(),
                (None, Some(c)) => vec![c.t_p, 2.0 * c.t_p, 4.0 * c.t_p],
                (None, None) => {
                    return Err(Error::Precondition(
                        "no plateau pair, so doeblin needs explicit `times`".into(),
                    ))
                }
            };
            let starts = starts.clone().unwrap_or_else(doeblin_starts);
            let t_end = times.iter().copied().fold(0.0, f64::max);
            let cfg = PathConfig::new(*dt, *n_paths, t_end, seed);
            let est = doeblin_profile(&Drift::from(v.clone()), &times, &starts, &cfg, *m)?;
            let mut csv = String::from("t,alpha_hat,alpha_lower\n");
            for e in &est {
                csv.push_str(&format!("{},{},{}\n", e.t, e.alpha_hat, e.alpha_lower));
            }
            out.add("doeblin.csv", csv);
            out.add_json(
                "doeblin.json",
                &serde_json::json!({
                    "m": m,
                    "n_paths_per_start": n_paths,
                    "dt": dt,
                    "starts": starts,
                    "t_p": theory.as_ref().map(|c| c.t_p),
                    "alpha_p_log10": theory.as_ref().map(|c| c.alpha_p.log10()),
                    "estimates": est,
                }),
            )?;
            out.message = est
                .iter()
                .map(|e| format!("doeblin: t = {:.4}, alpha_hat = {:.4e}\n", e.t, e.alpha_hat))
                .collect();
        }
        SimulateParams::TvDecay { start_a, start_b, times, dt, n_paths, m, ensembles } => {
            let t_end = times.iter().copied().fold(0.0, f64::max);
            let cfg = PathConfig::new(*dt, *n_paths, t_end, seed);
            let drift = Drift::from(plan.velocity()?.clone());
            let tv = tv_decay(&drift, *start_a, *start_b, times, &cfg, *m, *ensembles)?;
            out.add("tv_decay.csv", tv.to_csv());
            out.add_json("tv_decay.json", &tv)?;
            out.message = match tv.fit {
                Some(f) => format!("tv_decay: slope {:.4} over {} points\n", f.slope, f.points),
                None => "tv_decay: no point above the bias floor\n".into(),
            };
        }
        SimulateParams::Arcsine { n_paths, dt, t, y_integrator } => {
            let r = arcsine_experiment(&ArcsineConfig {
                n_paths: *n_paths,
                dt: *dt,
                t: *t,
                seed,
                y_integrator: *y_integrator,
            })?;
            out.add_json("arcsine.json", &r)?;
            out.message = format!("arcsine: KS = {:.5}\n", r.ks);
        }
        SimulateParams::Kolmogorov { n_paths, dt, t, cells, y_integrator } => {
            let r = kolmogorov_experiment(&KolmogorovConfig {
                n_paths: *n_paths,
                dt: *dt,
                t: *t,
                seed,
                cells: *cells,
                y_integrator: *y_integrator,
            })?;
            out.add("kolmogorov_histogram.csv", r.histogram.to_csv());
            out.add_json("kolmogorov.json", &r)?;
            out.message = format!(
                "kolmogorov: max relative error {:.4} over {} cells\n",
                r.max_rel_error, r.compared_cells
            );
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateParams {
    /// Subset of criterion ids; all of them when absent.
    pub criteria: Option<Vec<u8>>,
}

impl ValidateParams {
    pub(super) fn check(&self) -> Result<()> {
        if let Some(ids) = &self.criteria {
            for id in ids {
                if !CRITERIA.iter().any(|c| c.0 == *id) {
                    return Err(invalid(format!("no criterion {id}")));
                }
            }
        }
        Ok(())
    }
}

pub(super) fn validate(plan: &Plan, p: &ValidateParams) -> Result<TaskOutput> {
    let ids: Vec<u8> = p
        .criteria
        .clone()
        .unwrap_or_else(|| CRITERIA.iter().map(|c| c.0).collect());
    let mut out = TaskOutput::default();
    let mut outcomes = Vec::with_capacity(ids.len());
    for id in ids {
        let o = run_criterion(id, plan.seed);
        for a in &o.artifacts {
            out.add(format!("c{id:02}_{}", a.name), a.contents.clone());
        }
        outcomes.push(o);
    }
    let text = table(&outcomes);
    out.add("validation.txt", text.clone());
    out.add_json("validation.json", &outcomes)?;
    out.exit = if outcomes.iter().all(|o| o.passed) {
        exit::OK
    } else {
        exit::VALIDATION
    };
    out.message = text;
    Ok(out)
}
