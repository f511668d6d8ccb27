//! Evolution of `d_t u - d_xx u + V(x) d_y u = 0` on the torus (or on a strip
//! `I x T` with zero boundary values) by Fourier transform in `y`. Each mode
//! `u_k(x)` evolves independently under `exp(-t A_k)`.

use faer::c64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use crate::error::{invalid, Result};
use crate::functionals::{omega2_torus, rho_v, Boundary};
use crate::linalg::{apply, CMat};
use crate::spectral1d::{mode_propagator, r_lambda1, Grid1d, ModeOperator};
use crate::velocity::VelocityField;

/// `u(x, y) = sum_{|k| <= k_max} u_k(x) exp(2 pi i k y)` on a shared x-grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeField {
    pub grid: Grid1d,
    pub k_max: usize,
    /// `modes[k + k_max]` holds `u_k` on the grid nodes.
    pub modes: Vec<Vec<c64>>,
    pub time: f64,
}

impl ModeField {
    /// Transform samples `u[i * ny + l] = u(x_i, l / ny)` in `y`.
    pub fn from_samples(grid: Grid1d, ny: usize, k_max: usize, samples: &[f64]) -> Result<ModeField> {
        if ny < 2 * k_max + 1 {
            return Err(invalid(format!(
                "aliasing: {ny} samples in y cannot carry modes up to {k_max}"
            )));
        }
        if samples.len() != grid.n * ny {
            return Err(invalid("sample count does not match the grid"));
        }
        let fft = FftPlanner::<f64>::new().plan_fft_forward(ny);
        let mut modes = vec![vec![c64::new(0.0, 0.0); grid.n]; 2 * k_max + 1];
        let mut buf = vec![rustfft::num_complex::Complex::new(0.0, 0.0); ny];
        for i in 0..grid.n {
            for (l, b) in buf.iter_mut().enumerate() {
                *b = rustfft::num_complex::Complex::new(samples[i * ny + l], 0.0);
            }
            fft.process(&mut buf);
            for k in -(k_max as i64)..=(k_max as i64) {
                let idx = k.rem_euclid(ny as i64) as usize;
                let z = buf[idx] / ny as f64;
                modes[(k + k_max as i64) as usize][i] = c64::new(z.re, z.im);
            }
        }
        Ok(ModeField {
            grid,
            k_max,
            modes,
            time: 0.0,
        })
    }

    /// Sample the real part back on `ny` equispaced `y` points.
    pub fn to_samples(&self, ny: usize) -> Result<Vec<f64>> {
        if ny < 2 * self.k_max + 1 {
            return Err(invalid("too few y samples for the retained modes"));
        }
        let ifft = FftPlanner::<f64>::new().plan_fft_inverse(ny);
        let mut out = vec![0.0; self.grid.n * ny];
        let mut buf = vec![rustfft::num_complex::Complex::new(0.0, 0.0); ny];
        for i in 0..self.grid.n {
            buf.iter_mut().for_each(|b| *b = rustfft::num_complex::Complex::new(0.0, 0.0));
            for k in -(self.k_max as i64)..=(self.k_max as i64) {
                let z = self.mode(k)[i];
                buf[k.rem_euclid(ny as i64) as usize] += rustfft::num_complex::Complex::new(z.re, z.im);
            }
            ifft.process(&mut buf);
            for l in 0..ny {
                out[i * ny + l] = buf[l].re;
            }
        }
        Ok(out)
    }

    pub fn mode(&self, k: i64) -> &[c64] {
        &self.modes[(k + self.k_max as i64) as usize]
    }

    /// `int u` over the cell (torus) or the strip.
    pub fn mass(&self) -> f64 {
        self.grid.h() * self.mode(0).iter().map(|z| z.re).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.modes.iter().flatten().map(|z| z.norm_sqr()).sum();
        (self.grid.h() * s).sqrt()
    }

    /// `||u - mean(u)||` in L2.
    pub fn deviation(&self) -> f64 {
        let h = self.grid.h();
        let mean = self.mass() / self.grid.len();
        let mut s = 0.0;
        for k in -(self.k_max as i64)..=(self.k_max as i64) {
            for z in self.mode(k) {
                s += if k == 0 {
                    (*z - c64::new(mean, 0.0)).norm_sqr()
                } else {
                    z.norm_sqr()
                };
            }
        }
        (h * s).sqrt()
    }
}

/// Per-mode operators for one velocity field with a propagator cache keyed by
/// `(k, dt)`.
pub struct Evolver {
    ops: Vec<ModeOperator>,
    cache: Mutex<HashMap<(usize, u64), Arc<CMat>>>,
}

impl Evolver {
    pub fn new(v: &VelocityField, grid: Grid1d, k_max: usize) -> Result<Evolver> {
        let base = ModeOperator::new(v, grid, 0)?;
        let ops = (0..=k_max as i64).map(|k| base.with_mode(k)).collect();
        Ok(Evolver {
            ops,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn operator(&self, k: usize) -> &ModeOperator {
        &self.ops[k]
    }

    fn propagator(&self, k: usize, dt: f64) -> Result<Arc<CMat>> {
        let key = (k, dt.to_bits());
        if let Some(p) = self.cache.lock().unwrap().get(&key) {
            return Ok(p.clone());
        }
        let p = Arc::new(mode_propagator(&self.ops[k], dt)?);
        self.cache.lock().unwrap().insert(key, p.clone());
        Ok(p)
    }

    /// Advance every mode by `dt`. Negative modes use the conjugate propagator.
    pub fn step(&self, field: &ModeField, dt: f64) -> Result<ModeField> {
        if field.k_max + 1 > self.ops.len() {
            return Err(invalid("field carries more modes than the evolver"));
        }
        if field.grid != *self.ops[0].grid() {
            return Err(invalid("field and evolver grids differ"));
        }
        let km = field.k_max as i64;
        let modes = (-km..=km)
            .into_par_iter()
            .map(|k| {
                let p = self.propagator(k.unsigned_abs() as usize, dt)?;
                let u = field.mode(k);
                Ok(if k >= 0 {
                    apply(&p, u)
                } else {
                    let conj: Vec<c64> = u.iter().map(|z| z.conj()).collect();
                    apply(&p, &conj).into_iter().map(|z| z.conj()).collect()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModeField {
            grid: field.grid,
            k_max: field.k_max,
            modes,
            time: field.time + dt,
        })
    }
}

/// One-shot step for callers that do not keep an [`Evolver`].
pub fn step(field: &ModeField, v: &VelocityField, dt: f64) -> Result<ModeField> {
    Evolver::new(v, field.grid, field.k_max)?.step(field, dt)
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayTrace {
    pub times: Vec<f64>,
    pub deviation: Vec<f64>,
    pub envelope: Vec<f64>,
    pub violated: Vec<bool>,
    pub rho: f64,
    pub omega2: f64,
    pub first_violation: Option<usize>,
}

impl DecayTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,deviation,envelope,violated_flag\n");
        for i in 0..self.times.len() {
            s.push_str(&format!(
                "{},{},{},{}\n",
                self.times[i],
                self.deviation[i],
                self.envelope[i],
                u8::from(self.violated[i])
            ));
        }
        s
    }
}

/// Options shared by the relaxation runs.
#[derive(Clone, Copy, Debug)]
pub struct RelaxOptions {
    pub grid: Grid1d,
    pub ny: usize,
    pub k_max: usize,
    pub omega2_nodes: usize,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        RelaxOptions {
            grid: Grid1d::torus(64),
            ny: 65,
            k_max: 32,
            omega2_nodes: 512,
        }
    }
}

/// Deviation from the mean at `samples` equispaced times in `[0, t_end]`
/// against the envelope `exp(pi/2 - rho(V) t)` times the initial deviation.
pub fn relax_trace(
    u0: &[f64],
    v: &VelocityField,
    t_end: f64,
    samples: usize,
    opts: &RelaxOptions,
) -> Result<(DecayTrace, ModeField)> {
    if !(t_end > 0.0) || samples < 2 {
        return Err(invalid("need t_end > 0 and at least two samples"));
    }
    if opts.grid.boundary != Boundary::Periodic {
        return Err(invalid("relaxation traces live on the torus"));
    }
    let om2 = omega2_torus(v, opts.omega2_nodes)?;
    let rho = rho_v(om2, v.osc());
    let evolver = Evolver::new(v, opts.grid, opts.k_max)?;
    let mut field = ModeField::from_samples(opts.grid, opts.ny, opts.k_max, u0)?;
    let dt = t_end / (samples - 1) as f64;
    let d0 = field.deviation();
    let mut trace = DecayTrace {
        times: Vec::with_capacity(samples),
        deviation: Vec::with_capacity(samples),
        envelope: Vec::with_capacity(samples),
        violated: Vec::with_capacity(samples),
        rho,
        omega2: om2,
        first_violation: None,
    };
    for i in 0..samples {
        if i > 0 {
            field = evolver.step(&field, dt)?;
        }
        let t = i as f64 * dt;
        let dev = field.deviation();
        let env = (PI / 2.0 - rho * t).exp() * d0;
        let bad = dev > env * (1.0 + 1e-12) + 1e-14;
        if bad && trace.first_violation.is_none() {
            trace.first_violation = Some(i);
        }
        trace.times.push(t);
        trace.deviation.push(dev);
        trace.envelope.push(env);
        trace.violated.push(bad);
    }
    Ok((trace, field))
}

/// `min over active modes` of the decay rate read off the discrete operators:
/// `lambda_1 + r(A_k)` for `k != 0`, and `lambda_2` for the fluctuating part of mode 0.
pub fn spectral_rate(v: &VelocityField, field: &ModeField) -> Result<f64> {
    let evolver = Evolver::new(v, field.grid, field.k_max)?;
    let active: Vec<usize> = (1..=field.k_max)
        .filter(|&k| field.mode(k as i64).iter().any(|z| z.norm() > 1e-13))
        .collect();
    let rates = active
        .iter()
        .map(|&k| {
            let op = evolver.operator(k);
            Ok(op.lambda1() + r_lambda1(op, None, 64)?.r_lambda1)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut rate = rates.into_iter().fold(f64::INFINITY, f64::min);
    let mean = field.mass() / field.grid.len();
    if field.mode(0).iter().any(|z| (*z - c64::new(mean, 0.0)).norm() > 1e-13) {
        rate = rate.min(evolver.operator(0).lambda2());
    }
    Ok(rate)
}

#[derive(Clone, Debug, Serialize)]
pub struct StripTrace {
    pub times: Vec<f64>,
    /// `sup_x |nu_k(t, x)|` for `k = 0..=k_max`, one row per time.
    pub mode_sup: Vec<Vec<f64>>,
    pub mass: Vec<f64>,
    pub kappa0: f64,
    /// Least value over the grid of `nu_0(t) - kappa0 exp(-pi^2 t / |I|^2) sin(pi (x - a) / |I|)`.
    pub envelope_margin: Vec<f64>,
}

/// Evolve nonnegative data on `I x T` with zero values on `dI x T`.
pub fn dirichlet_strip_trace(
    nu0: &[f64],
    ny: usize,
    v: &VelocityField,
    grid: Grid1d,
    k_max: usize,
    t_end: f64,
    samples: usize,
) -> Result<StripTrace> {
    if grid.boundary != Boundary::Dirichlet {
        return Err(invalid("strip traces need a Dirichlet grid"));
    }
    if nu0.iter().any(|x| *x < 0.0) {
        return Err(invalid("initial data must be nonnegative"));
    }
    if !(t_end > 0.0) || samples < 2 {
        return Err(invalid("need t_end > 0 and at least two samples"));
    }
    let kappa0 = nu0.iter().cloned().fold(f64::INFINITY, f64::min);
    let evolver = Evolver::new(v, grid, k_max)?;
    let mut field = ModeField::from_samples(grid, ny, k_max, nu0)?;
    let dt = t_end / (samples - 1) as f64;
    let len = grid.len();
    let nodes = grid.nodes();
    let mut out = StripTrace {
        times: Vec::new(),
        mode_sup: Vec::new(),
        mass: Vec::new(),
        kappa0,
        envelope_margin: Vec::new(),
    };
    for i in 0..samples {
        if i > 0 {
            field = evolver.step(&field, dt)?;
        }
        let t = i as f64 * dt;
        out.times.push(t);
        out.mode_sup.push(
            (0..=k_max as i64)
                .map(|k| field.mode(k).iter().map(|z| z.norm()).fold(0.0, f64::max))
                .collect(),
        );
        out.mass.push(field.mass());
        let decay = (-PI * PI * t / (len * len)).exp();
        let margin = nodes
            .iter()
            .zip(field.mode(0))
            .map(|(x, z)| z.re - kappa0 * decay * (PI * (x - grid.a) / len).sin())
            .fold(f64::INFINITY, f64::min);
        out.envelope_margin.push(margin);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(grid: &Grid1d, ny: usize, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(grid.n * ny);
        for x in grid.nodes() {
            for l in 0..ny {
                out.push(f(x, l as f64 / ny as f64));
            }
        }
        out
    }

    #[test]
    fn transform_round_trip_and_modes() {
        let g = Grid1d::torus(16);
        let u = sample(&g, 9, |x, y| 1.0 + (2.0 * PI * y).cos() + x * (4.0 * PI * y).sin());
        let f = ModeField::from_samples(g, 9, 4, &u).unwrap();
        assert!((f.mode(1)[3] - c64::new(0.5, 0.0)).norm() < 1e-14);
        assert!((f.mode(-1)[3] - c64::new(0.5, 0.0)).norm() < 1e-14);
        assert!((f.mode(0)[5] - c64::new(1.0, 0.0)).norm() < 1e-14);
        for k in 1..=4 {
            for i in 0..16 {
                assert!((f.mode(k)[i] - f.mode(-k)[i].conj()).norm() < 1e-14);
            }
        }
        let back = f.to_samples(9).unwrap();
        for (a, b) in u.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(ModeField::from_samples(g, 8, 4, &vec![0.0; 16 * 8]).is_err());
    }

    #[test]
    fn shear_free_mode_keeps_its_deviation() {
        let g = Grid1d::torus(16);
        let u = sample(&g, 9, |_, y| (2.0 * PI * y).cos());
        let opts = RelaxOptions {
            grid: g,
            ny: 9,
            k_max: 4,
            omega2_nodes: 16,
        };
        let (tr, _) = relax_trace(&u, &VelocityField::constant(0.0), 2.0, 5, &opts).unwrap();
        // each propagator carries ~1e-12 relative rounding from repeated squaring
        for d in &tr.deviation {
            assert!((d - tr.deviation[0]).abs() < 1e-10, "{:?}", tr.deviation);
        }
    }

    #[test]
    fn half_steps_compose() {
        let g = Grid1d::torus(16);
        let v = VelocityField::cosine(1.0, 1.0);
        let u = sample(&g, 9, |x, y| (2.0 * PI * (x + y)).sin() + 0.3 * (4.0 * PI * y).cos());
        let f = ModeField::from_samples(g, 9, 4, &u).unwrap();
        let ev = Evolver::new(&v, g, 4).unwrap();
        let one = ev.step(&f, 0.1).unwrap();
        let two = ev.step(&ev.step(&f, 0.05).unwrap(), 0.05).unwrap();
        for (a, b) in one.modes.iter().flatten().zip(two.modes.iter().flatten()) {
            assert!((a - b).norm() < 1e-10);
        }
        assert!((one.mass() - f.mass()).abs() < 1e-12);
        assert!(one.l2_norm() <= f.l2_norm() + 1e-12);
    }
}
