//! Shear profiles `V(x)` on the unit torus or on a bounded interval.
//!
//! A [`VelocityField`] couples a [`Profile`] (the shape) with a [`Domain`] and an
//! affine post-map `offset + scale * profile(x)`. Every representation exposes
//! point evaluation, the exact oscillation, an exact primitive, and the list of
//! break points where that primitive stops being a single polynomial, which is
//! what the residual and LP code integrate against.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::quadrature;

/// Where `x` lives. Cells of piecewise profiles are right-open.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    #[default]
    Torus,
    Interval { a: f64, b: f64 },
}

impl Domain {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Domain::Torus => (0.0, 1.0),
            Domain::Interval { a, b } => (a, b),
        }
    }

    pub fn length(&self) -> f64 {
        let (a, b) = self.bounds();
        b - a
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Domain::Torus)
    }
}

/// Shape of the profile, in the coordinates of its domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// `values[j]` on `[breaks[j], breaks[j+1])`; breaks span the domain.
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<f64> },
    /// Linear interpolation between knots spanning the domain.
    PiecewiseLinear { knots: Vec<f64>, values: Vec<f64> },
    /// `samples[j]` held on the j-th of `samples.len()` equal cells.
    Grid { samples: Vec<f64> },
    /// `amplitude * sin(2 pi frequency x + phase)`.
    Sine {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amplitude * (2 frac(frequency x) - 1)`.
    Sawtooth { amplitude: f64, frequency: f64 },
    /// `amplitude` left of `split`, zero to the right. `split` defaults to the midpoint.
    Heaviside {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        split: Option<f64>,
    },
    /// `sum_k exp(-rate 4^k) (-1)^{b_k(x)}` where `b_k` is the k-th binary digit
    /// of the relative position; terms below 1e-15 are dropped.
    BinaryCascade { rate: f64 },
}

fn one() -> f64 {
    1.0
}

/// Serialized form of a field: the profile's own keys plus optional `domain`,
/// `offset` and `scale`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "serde_json::Value", into = "serde_json::Value")]
pub struct VelocitySpec {
    pub profile: Profile,
    pub domain: Domain,
    pub offset: f64,
    pub scale: f64,
}

impl TryFrom<serde_json::Value> for VelocitySpec {
    type Error = String;
    fn try_from(v: serde_json::Value) -> std::result::Result<Self, String> {
        let serde_json::Value::Object(mut map) = v else {
            return Err("velocity must be a JSON object".into());
        };
        let domain = match map.remove("domain") {
            Some(d) => serde_json::from_value(d).map_err(|e| e.to_string())?,
            None => Domain::Torus,
        };
        let number = |key: &str, map: &mut serde_json::Map<String, serde_json::Value>, default| {
            match map.remove(key) {
                None => Ok(default),
                Some(x) => x.as_f64().ok_or_else(|| format!("`{key}` must be a number")),
            }
        };
        let offset = number("offset", &mut map, 0.0)?;
        let scale = number("scale", &mut map, 1.0)?;
        let profile = serde_json::from_value(serde_json::Value::Object(map))
            .map_err(|e| e.to_string())?;
        Ok(VelocitySpec {
            profile,
            domain,
            offset,
            scale,
        })
    }
}

impl From<VelocitySpec> for serde_json::Value {
    fn from(s: VelocitySpec) -> Self {
        let mut v = serde_json::to_value(&s.profile).expect("profile serializes");
        if let serde_json::Value::Object(map) = &mut v {
            map.insert("domain".into(), serde_json::to_value(s.domain).expect("domain"));
            map.insert("offset".into(), s.offset.into());
            map.insert("scale".into(), s.scale.into());
        }
        v
    }
}

const CASCADE_CUTOFF: f64 = 1e-15;
const CASCADE_MAX_DEPTH: usize = 24;

/// A validated shear profile. Construct through the named constructors or
/// [`VelocityField::from_spec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VelocitySpec", into = "VelocitySpec")]
pub struct VelocityField {
    profile: Profile,
    domain: Domain,
    offset: f64,
    scale: f64,
    cascade: Vec<f64>,
    /// Cumulative integrals of the base profile at its break points.
    cumulative: Vec<f64>,
    /// Integral of the base profile over the whole domain.
    total: f64,
    /// `(inf, sup)` of the base profile.
    base_range: (f64, f64),
}

/// A maximal interval on which `V` is constant. On the torus `right` may exceed
/// one when the plateau wraps through zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Plateau {
    pub left: f64,
    pub right: f64,
    pub value: f64,
}

impl Plateau {
    pub fn length(&self) -> f64 {
        self.right - self.left
    }
}

impl TryFrom<VelocitySpec> for VelocityField {
    type Error = Error;
    fn try_from(s: VelocitySpec) -> Result<Self> {
        VelocityField::from_spec(s)
    }
}

impl From<VelocityField> for VelocitySpec {
    fn from(v: VelocityField) -> Self {
        v.to_spec()
    }
}

impl VelocityField {
    pub fn from_spec(spec: VelocitySpec) -> Result<Self> {
        let mut field = VelocityField::build(spec.profile, spec.domain)?;
        if !spec.offset.is_finite() || !spec.scale.is_finite() {
            return Err(invalid("offset and scale must be finite"));
        }
        field.offset = spec.offset;
        field.scale = spec.scale;
        Ok(field)
    }

    pub fn to_spec(&self) -> VelocitySpec {
        VelocitySpec {
            profile: self.profile.clone(),
            domain: self.domain,
            offset: self.offset,
            scale: self.scale,
        }
    }

    fn build(profile: Profile, domain: Domain) -> Result<Self> {
        let (lo, hi) = domain.bounds();
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid(format!("degenerate domain [{lo}, {hi}]")));
        }
        let finite = |v: &[f64], what: &str| -> Result<()> {
            if v.iter().all(|x| x.is_finite()) {
                Ok(())
            } else {
                Err(invalid(format!("{what} must be finite")))
            }
        };
        let mut cascade = Vec::new();
        let mut cumulative = Vec::new();
        match &profile {
            Profile::PiecewiseConstant { breaks, values } => {
                finite(breaks, "breaks")?;
                finite(values, "values")?;
                if values.is_empty() || breaks.len() != values.len() + 1 {
                    return Err(invalid("need len(breaks) == len(values) + 1 >= 2"));
                }
                check_partition(breaks, lo, hi)?;
                cumulative.push(0.0);
                for j in 0..values.len() {
                    let last = cumulative[j];
                    cumulative.push(last + values[j] * (breaks[j + 1] - breaks[j]));
                }
            }
            Profile::PiecewiseLinear { knots, values } => {
                finite(knots, "knots")?;
                finite(values, "values")?;
                if knots.len() < 2 || knots.len() != values.len() {
                    return Err(invalid("need matching knots and values, at least two"));
                }
                check_partition(knots, lo, hi)?;
                cumulative.push(0.0);
                for j in 0..knots.len() - 1 {
                    let last = cumulative[j];
                    let h = knots[j + 1] - knots[j];
                    cumulative.push(last + 0.5 * h * (values[j] + values[j + 1]));
                }
            }
            Profile::Grid { samples } => {
                finite(samples, "samples")?;
                if samples.is_empty() {
                    return Err(invalid("grid needs at least one sample"));
                }
                let h = (hi - lo) / samples.len() as f64;
                cumulative.push(0.0);
                for (j, v) in samples.iter().enumerate() {
                    let last = cumulative[j];
                    cumulative.push(last + v * h);
                }
            }
            Profile::Sine {
                amplitude,
                frequency,
                phase,
            } => {
                finite(&[*amplitude, *frequency, *phase], "sine parameters")?;
                if *frequency <= 0.0 {
                    return Err(invalid("sine frequency must be positive"));
                }
            }
            Profile::Sawtooth {
                amplitude,
                frequency,
            } => {
                finite(&[*amplitude, *frequency], "sawtooth parameters")?;
                if *frequency <= 0.0 {
                    return Err(invalid("sawtooth frequency must be positive"));
                }
            }
            Profile::Heaviside { amplitude, split } => {
                finite(&[*amplitude], "amplitude")?;
                if let Some(s) = split {
                    if !(s.is_finite() && *s >= lo && *s <= hi) {
                        return Err(invalid("heaviside split must lie in the domain"));
                    }
                }
            }
            Profile::BinaryCascade { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(invalid("cascade rate must be positive"));
                }
                for k in 1..=CASCADE_MAX_DEPTH {
                    let a = (-rate * 4f64.powi(k as i32)).exp();
                    if a < CASCADE_CUTOFF {
                        break;
                    }
                    cascade.push(a);
                }
                if cascade.len() == CASCADE_MAX_DEPTH {
                    return Err(invalid(format!(
                        "cascade rate {rate} needs more than {CASCADE_MAX_DEPTH} levels"
                    )));
                }
            }
        }
        let mut field = VelocityField {
            profile,
            domain,
            offset: 0.0,
            scale: 1.0,
            cascade,
            cumulative,
            total: 0.0,
            base_range: (0.0, 0.0),
        };
        field.total = field.base_primitive_raw(hi);
        field.base_range = field.compute_base_range();
        Ok(field)
    }

    fn with_profile(profile: Profile) -> Self {
        VelocityField::build(profile, Domain::Torus).expect("valid built-in profile")
    }

    /// `V = c` on the torus.
    pub fn constant(c: f64) -> Self {
        VelocityField::piecewise_constant(vec![0.0, 1.0], vec![c]).expect("valid constant")
    }

    pub fn piecewise_constant(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        VelocityField::build(Profile::PiecewiseConstant { breaks, values }, Domain::Torus)
    }

    pub fn piecewise_linear(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        VelocityField::build(Profile::PiecewiseLinear { knots, values }, Domain::Torus)
    }

    pub fn grid(samples: Vec<f64>) -> Result<Self> {
        VelocityField::build(Profile::Grid { samples }, Domain::Torus)
    }

    /// Value `v0` on `[0, 1/2)` and `v1` on `[1/2, 1)`.
    pub fn two_plateau(v0: f64, v1: f64) -> Self {
        VelocityField::piecewise_constant(vec![0.0, 0.5, 1.0], vec![v0, v1]).expect("valid")
    }

    pub fn sine(amplitude: f64, frequency: f64, phase: f64) -> Self {
        VelocityField::with_profile(Profile::Sine {
            amplitude,
            frequency,
            phase,
        })
    }

    /// `amplitude * cos(2 pi frequency x)`.
    pub fn cosine(amplitude: f64, frequency: f64) -> Self {
        VelocityField::sine(amplitude, frequency, PI / 2.0)
    }

    pub fn sawtooth(amplitude: f64, frequency: f64) -> Self {
        VelocityField::with_profile(Profile::Sawtooth {
            amplitude,
            frequency,
        })
    }

    pub fn heaviside() -> Self {
        VelocityField::with_profile(Profile::Heaviside {
            amplitude: 1.0,
            split: None,
        })
    }

    pub fn binary_cascade(rate: f64) -> Result<Self> {
        VelocityField::build(Profile::BinaryCascade { rate }, Domain::Torus)
    }

    /// The same profile re-read on another domain.
    pub fn on(self, domain: Domain) -> Result<Self> {
        let (offset, scale) = (self.offset, self.scale);
        let mut f = VelocityField::build(self.profile, domain)?;
        f.offset = offset;
        f.scale = scale;
        Ok(f)
    }

    /// `lambda * V`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let mut f = self.clone();
        f.offset *= lambda;
        f.scale *= lambda;
        f
    }

    /// `V + c`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut f = self.clone();
        f.offset += c;
        f
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    /// Break points and final values `offset + scale * v` when the field is
    /// piecewise constant.
    pub fn step_table(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let (lo, hi) = self.bounds();
        let (breaks, values) = match &self.profile {
            Profile::PiecewiseConstant { breaks, values } => (breaks.clone(), values.clone()),
            Profile::Grid { samples } => {
                let n = samples.len();
                let breaks = (0..=n).map(|j| lo + (hi - lo) * j as f64 / n as f64).collect();
                (breaks, samples.clone())
            }
            Profile::Heaviside { amplitude, split } => {
                let s = split.unwrap_or(0.5 * (lo + hi));
                (vec![lo, s, hi], vec![*amplitude, 0.0])
            }
            _ => return None,
        };
        Some((breaks, values.into_iter().map(|v| self.map(v)).collect()))
    }

    /// Cascade coefficients after truncation (empty for other profiles).
    pub fn cascade_coefficients(&self) -> &[f64] {
        &self.cascade
    }

    fn bounds(&self) -> (f64, f64) {
        self.domain.bounds()
    }

    /// Evaluate `V(x)`. Torus points are wrapped; interval points must lie in `[a, b]`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let u = self.locate(x)?;
        Ok(self.map(self.base_value(u)))
    }

    /// Evaluation without the domain check; torus points are wrapped and
    /// interval points are clamped.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let (lo, hi) = self.bounds();
        let u = if self.domain.is_periodic() {
            wrap_unit(x)
        } else {
            x.clamp(lo, hi)
        };
        self.map(self.base_value(u))
    }

    fn locate(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(invalid("evaluation point must be finite"));
        }
        match self.domain {
            Domain::Torus => Ok(wrap_unit(x)),
            Domain::Interval { a, b } => {
                if x < a || x > b {
                    Err(Error::OutOfDomain { x, a, b })
                } else {
                    Ok(x)
                }
            }
        }
    }

    #[inline]
    fn map(&self, v: f64) -> f64 {
        self.offset + self.scale * v
    }

    fn base_value(&self, u: f64) -> f64 {
        let (lo, hi) = self.bounds();
        match &self.profile {
            Profile::PiecewiseConstant { breaks, values } => values[cell_index(breaks, u)],
            Profile::PiecewiseLinear { knots, values } => {
                let j = cell_index(knots, u);
                let t = (u - knots[j]) / (knots[j + 1] - knots[j]);
                values[j] + t * (values[j + 1] - values[j])
            }
            Profile::Grid { samples } => {
                let n = samples.len();
                let j = (((u - lo) / (hi - lo)) * n as f64).floor() as isize;
                samples[j.clamp(0, n as isize - 1) as usize]
            }
            Profile::Sine {
                amplitude,
                frequency,
                phase,
            } => amplitude * (2.0 * PI * frequency * u + phase).sin(),
            Profile::Sawtooth {
                amplitude,
                frequency,
            } => {
                let z = frequency * u;
                amplitude * (2.0 * (z - z.floor()) - 1.0)
            }
            Profile::Heaviside { amplitude, split } => {
                let s = split.unwrap_or(0.5 * (lo + hi));
                if u < s {
                    *amplitude
                } else {
                    0.0
                }
            }
            Profile::BinaryCascade { .. } => {
                let r = ((u - lo) / (hi - lo)).clamp(0.0, 1.0);
                let mut v = 0.0;
                for (k, a) in self.cascade.iter().enumerate() {
                    let digit = ((r * 2f64.powi(k as i32 + 1)).floor() as u64) & 1;
                    v += if digit == 0 { *a } else { -*a };
                }
                v
            }
        }
    }

    /// Supremum of `|V|`.
    pub fn bound(&self) -> f64 {
        let (lo, hi) = self.range();
        lo.abs().max(hi.abs())
    }

    /// `(ess inf V, ess sup V)` over the domain.
    pub fn range(&self) -> (f64, f64) {
        let (a, b) = self.base_range;
        let (x, y) = (self.map(a), self.map(b));
        (x.min(y), x.max(y))
    }

    /// `sup V - inf V`.
    pub fn osc(&self) -> f64 {
        let (lo, hi) = self.range();
        hi - lo
    }

    fn compute_base_range(&self) -> (f64, f64) {
        let (lo, hi) = self.bounds();
        let minmax = |v: &[f64]| {
            v.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
        };
        match &self.profile {
            Profile::PiecewiseConstant { values, .. } | Profile::PiecewiseLinear { values, .. } => {
                minmax(values)
            }
            Profile::Grid { samples } => minmax(samples),
            Profile::Heaviside { amplitude, split } => {
                let s = split.unwrap_or(0.5 * (lo + hi));
                let mut vals = Vec::new();
                if s > lo {
                    vals.push(*amplitude);
                }
                if s < hi {
                    vals.push(0.0);
                }
                minmax(&vals)
            }
            Profile::Sine {
                amplitude,
                frequency,
                phase,
            } => {
                let w = 2.0 * PI * frequency;
                if (hi - lo) * frequency >= 1.0 {
                    return (-amplitude.abs(), amplitude.abs());
                }
                let mut vals = vec![
                    amplitude * (w * lo + phase).sin(),
                    amplitude * (w * hi + phase).sin(),
                ];
                // critical points w u + phase = pi/2 + m pi
                let m0 = ((w * lo + phase - PI / 2.0) / PI).ceil() as i64;
                let m1 = ((w * hi + phase - PI / 2.0) / PI).floor() as i64;
                for m in m0..=m1 {
                    let sgn = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                    vals.push(amplitude * sgn);
                }
                minmax(&vals)
            }
            Profile::Sawtooth {
                amplitude,
                frequency,
            } => {
                if (hi - lo) * frequency >= 1.0 {
                    return (-amplitude.abs(), amplitude.abs());
                }
                let z0 = frequency * lo;
                let z1 = frequency * hi;
                let f0 = z0 - z0.floor();
                let f1_left = z1 - (z1.ceil() - 1.0);
                let mut vals = vec![amplitude * (2.0 * f0 - 1.0), amplitude * (2.0 * f1_left - 1.0)];
                if z1.ceil() - 1.0 > z0.floor() {
                    vals.push(*amplitude);
                    vals.push(-amplitude);
                }
                minmax(&vals)
            }
            Profile::BinaryCascade { .. } => {
                let s: f64 = self.cascade.iter().sum();
                (-s, s)
            }
        }
    }

    /// `int_lo^u base` for `u` in the domain (or anywhere, for the torus).
    fn base_primitive_raw(&self, u: f64) -> f64 {
        let (lo, hi) = self.bounds();
        match &self.profile {
            Profile::PiecewiseConstant { breaks, values } => {
                let j = cell_index(breaks, u);
                self.cumulative[j] + values[j] * (u - breaks[j])
            }
            Profile::PiecewiseLinear { knots, values } => {
                let j = cell_index(knots, u);
                let h = knots[j + 1] - knots[j];
                let d = u - knots[j];
                let slope = (values[j + 1] - values[j]) / h;
                self.cumulative[j] + values[j] * d + 0.5 * slope * d * d
            }
            Profile::Grid { samples } => {
                let n = samples.len();
                let h = (hi - lo) / n as f64;
                let j = (((u - lo) / h).floor() as isize).clamp(0, n as isize - 1) as usize;
                self.cumulative[j] + samples[j] * (u - lo - j as f64 * h)
            }
            Profile::Sine {
                amplitude,
                frequency,
                phase,
            } => {
                let w = 2.0 * PI * frequency;
                amplitude / w * ((w * lo + phase).cos() - (w * u + phase).cos())
            }
            Profile::Sawtooth {
                amplitude,
                frequency,
            } => {
                let g = |z: f64| {
                    let r = z - z.floor();
                    r * r - r
                };
                amplitude * (g(frequency * u) - g(frequency * lo)) / frequency
            }
            Profile::Heaviside { amplitude, split } => {
                let s = split.unwrap_or(0.5 * (lo + hi));
                amplitude * (u.min(s) - lo).max(0.0)
            }
            Profile::BinaryCascade { .. } => {
                let len = hi - lo;
                let r = (u - lo) / len;
                let mut acc = 0.0;
                for (k, a) in self.cascade.iter().enumerate() {
                    let p = 2f64.powi(k as i32 + 1);
                    acc += a * len / p * tri(p * r);
                }
                acc
            }
        }
    }

    fn base_primitive(&self, u: f64) -> f64 {
        let (lo, hi) = self.bounds();
        if self.domain.is_periodic() {
            let n = u.floor();
            n * self.total + self.base_primitive_raw(u - n)
        } else if u < lo {
            (u - lo) * self.base_value(lo)
        } else if u > hi {
            self.total + (u - hi) * self.base_value(hi)
        } else {
            self.base_primitive_raw(u)
        }
    }

    /// `P(u) = int_lo^u V` where `lo` is the left end of the domain. On the torus
    /// the profile is extended periodically so `P` is defined on the whole line;
    /// on an interval `V` is extended by its end values.
    pub fn primitive(&self, u: f64) -> f64 {
        let (lo, _) = self.bounds();
        self.offset * (u - lo) + self.scale * self.base_primitive(u)
    }

    /// Sorted points in `[c, d]`, including both ends, between which the primitive
    /// is a single polynomial of degree at most two (or, for the sine profile, a
    /// piece short enough for the five-point rule to be accurate to rounding).
    pub fn smooth_pieces(&self, c: f64, d: f64) -> Vec<f64> {
        let (lo, hi) = self.bounds();
        let mut pts = vec![c, d];
        let len = hi - lo;
        let base_breaks: Vec<f64> = match &self.profile {
            Profile::PiecewiseConstant { breaks, .. } => breaks.clone(),
            Profile::PiecewiseLinear { knots, .. } => knots.clone(),
            Profile::Grid { samples } => {
                let n = samples.len();
                (0..=n).map(|j| lo + len * j as f64 / n as f64).collect()
            }
            Profile::Heaviside { split, .. } => vec![lo, split.unwrap_or(0.5 * (lo + hi)), hi],
            Profile::BinaryCascade { .. } => {
                let n = 1usize << self.cascade.len();
                (0..=n).map(|j| lo + len * j as f64 / n as f64).collect()
            }
            Profile::Sawtooth { frequency, .. } => {
                let m1 = (frequency * d).ceil() as i64;
                let m0 = (frequency * c).floor() as i64;
                pts.extend((m0..=m1).map(|m| m as f64 / frequency));
                Vec::new()
            }
            Profile::Sine { frequency, .. } => {
                let step = 1.0 / (32.0 * frequency);
                let n = ((d - c) / step).ceil().max(1.0) as usize;
                pts.extend((1..n).map(|j| c + (d - c) * j as f64 / n as f64));
                Vec::new()
            }
        };
        if !base_breaks.is_empty() {
            if self.domain.is_periodic() {
                let p0 = c.floor() as i64;
                let p1 = d.ceil() as i64;
                for p in p0..=p1 {
                    pts.extend(base_breaks.iter().map(|b| b + p as f64));
                }
            } else {
                pts.extend(base_breaks);
            }
        }
        pts.retain(|&x| x >= c && x <= d);
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * (1.0 + b.abs()));
        if let Some(last) = pts.last_mut() {
            *last = d;
        }
        pts
    }

    /// `int_c^d g(x) dx` by the five-point rule on the smooth pieces of `V`.
    pub fn integrate_with(&self, c: f64, d: f64, g: impl Fn(f64) -> f64) -> f64 {
        quadrature::composite_gl5(&self.smooth_pieces(c, d), g)
    }

    /// Maximal plateaus with length at least `min_length`.
    pub fn plateaus(&self, min_length: f64) -> Vec<Plateau> {
        let (lo, hi) = self.bounds();
        // flat segments of the base profile: (left, right, value)
        let mut segs: Vec<(f64, f64, f64)> = Vec::new();
        if self.scale == 0.0 {
            segs.push((lo, hi, 0.0));
        } else {
            match &self.profile {
                Profile::PiecewiseConstant { breaks, values } => {
                    for j in 0..values.len() {
                        segs.push((breaks[j], breaks[j + 1], values[j]));
                    }
                }
                Profile::Grid { samples } => {
                    let n = samples.len();
                    let h = (hi - lo) / n as f64;
                    for (j, v) in samples.iter().enumerate() {
                        let right = if j + 1 == n { hi } else { lo + (j + 1) as f64 * h };
                        segs.push((lo + j as f64 * h, right, *v));
                    }
                }
                Profile::Heaviside { amplitude, split } => {
                    let s = split.unwrap_or(0.5 * (lo + hi));
                    if s > lo {
                        segs.push((lo, s, *amplitude));
                    }
                    if s < hi {
                        segs.push((s, hi, 0.0));
                    }
                }
                Profile::PiecewiseLinear { knots, values } => {
                    for j in 0..knots.len() - 1 {
                        if values[j] == values[j + 1] {
                            segs.push((knots[j], knots[j + 1], values[j]));
                        }
                    }
                }
                Profile::Sine { amplitude, .. } | Profile::Sawtooth { amplitude, .. } => {
                    if *amplitude == 0.0 {
                        segs.push((lo, hi, 0.0));
                    }
                }
                Profile::BinaryCascade { .. } => {}
            }
        }
        let mut merged: Vec<(f64, f64, f64)> = Vec::new();
        for s in segs {
            match merged.last_mut() {
                Some(last) if last.1 == s.0 && last.2 == s.2 => last.1 = s.1,
                _ => merged.push(s),
            }
        }
        if self.domain.is_periodic() && merged.len() > 1 {
            let first = merged[0];
            let last = *merged.last().unwrap();
            if first.0 == lo && last.1 == hi && first.2 == last.2 {
                merged.pop();
                merged[0] = (last.0, hi + (first.1 - lo), first.2);
            }
        }
        let mut out: Vec<Plateau> = merged
            .into_iter()
            .map(|(l, r, v)| Plateau {
                left: l,
                right: r,
                value: self.map(v),
            })
            .filter(|p| p.length() >= min_length)
            .collect();
        out.sort_by(|a, b| a.left.partial_cmp(&b.left).unwrap());
        out
    }
}

/// `x mod 1` in `[0, 1)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    // `f64::floor` is a libm call on baseline x86-64; the cast is exact for
    // the magnitudes that reach this hot path
    let fl = if x.abs() < 4.5e15 {
        let t = x as i64 as f64;
        if t > x {
            t - 1.0
        } else {
            t
        }
    } else {
        x.floor()
    };
    let r = x - fl;
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Index `j` with `breaks[j] <= u < breaks[j+1]`, clamped to the valid cells.
#[inline]
fn cell_index(breaks: &[f64], u: f64) -> usize {
    // a branch-free count is much faster than bisection for short break lists
    // evaluated at random points
    let j = if breaks.len() <= 16 {
        breaks.iter().map(|&b| usize::from(b <= u)).sum()
    } else {
        breaks.partition_point(|&b| b <= u)
    };
    j.saturating_sub(1).min(breaks.len() - 2)
}

/// Primitive of `(-1)^{floor(z)}` from zero: the period-two triangle wave.
fn tri(z: f64) -> f64 {
    let m = z.rem_euclid(2.0);
    if m < 1.0 {
        m
    } else {
        2.0 - m
    }
}

fn check_partition(pts: &[f64], lo: f64, hi: f64) -> Result<()> {
    if pts[0] != lo || *pts.last().unwrap() != hi {
        return Err(invalid(format!("break points must span [{lo}, {hi}]")));
    }
    if pts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("break points must be strictly increasing"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn brute_primitive(v: &VelocityField, u: f64) -> f64 {
        let n = 200_000;
        let (lo, _) = v.domain().bounds();
        let h = (u - lo) / n as f64;
        (0..n).map(|i| v.value(lo + (i as f64 + 0.5) * h)).sum::<f64>() * h
    }

    #[test]
    fn osc_of_closed_forms() {
        assert_abs_diff_eq!(VelocityField::cosine(1.0, 1.0).osc(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(VelocityField::sawtooth(1.0, 3.0).osc(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(VelocityField::heaviside().osc(), 1.0);
        assert_abs_diff_eq!(VelocityField::two_plateau(0.0, 2.0).osc(), 2.0);
        assert_eq!(VelocityField::constant(3.5).osc(), 0.0);
        let c = VelocityField::binary_cascade(1.0).unwrap();
        assert_eq!(c.cascade_coefficients().len(), 2);
        let s = (-4f64).exp() + (-16f64).exp();
        assert_abs_diff_eq!(c.osc(), 2.0 * s, epsilon = 1e-16);
    }

    #[test]
    fn sine_range_on_short_interval() {
        let v = VelocityField::sine(1.0, 1.0, 0.0)
            .on(Domain::Interval { a: 0.0, b: 0.2 })
            .unwrap();
        let (lo, hi) = v.range();
        assert_abs_diff_eq!(lo, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, (0.4 * PI).sin(), epsilon = 1e-15);
        let w = VelocityField::sine(1.0, 1.0, 0.0)
            .on(Domain::Interval { a: 0.1, b: 0.4 })
            .unwrap();
        assert_abs_diff_eq!(w.range().1, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn interval_eval_rejects_outside_points() {
        let v = VelocityField::constant(1.0)
            .on(Domain::Interval { a: 0.0, b: 2.0 })
            .unwrap_err();
        assert!(matches!(v, Error::InvalidInput(_)));
        let v = VelocityField::cosine(1.0, 1.0)
            .on(Domain::Interval { a: 0.0, b: 2.0 })
            .unwrap();
        assert!(matches!(v.eval(2.5), Err(Error::OutOfDomain { .. })));
        assert!(v.eval(2.0).is_ok());
    }

    #[test]
    fn torus_eval_wraps() {
        let v = VelocityField::two_plateau(0.0, 1.0);
        assert_eq!(v.eval(1.25).unwrap(), 0.0);
        assert_eq!(v.eval(-0.25).unwrap(), 1.0);
        assert_eq!(v.eval(0.5).unwrap(), 1.0);
    }

    #[test]
    fn primitives_match_brute_force() {
        let fields = vec![
            VelocityField::cosine(1.3, 2.0),
            VelocityField::sawtooth(0.7, 3.0),
            VelocityField::heaviside(),
            VelocityField::binary_cascade(0.05).unwrap(),
            VelocityField::piecewise_linear(vec![0.0, 0.3, 1.0], vec![1.0, -1.0, 2.0]).unwrap(),
            VelocityField::grid(vec![0.1, 0.5, -0.3, 0.9]).unwrap(),
            VelocityField::two_plateau(0.0, 2.0).shifted(0.5).scaled(-2.0),
        ];
        for v in &fields {
            for &u in &[0.0, 0.13, 0.5, 0.77, 1.0] {
                let got = v.primitive(u);
                let want = brute_primitive(v, u);
                assert!((got - want).abs() < 1e-5, "{:?} at {u}: {got} vs {want}", v.profile());
            }
        }
    }

    #[test]
    fn torus_primitive_extends_periodically() {
        let v = VelocityField::two_plateau(1.0, 3.0);
        assert_abs_diff_eq!(v.primitive(1.0), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.primitive(1.75), 2.0 + 0.5 + 0.75, epsilon = 1e-14);
        assert_abs_diff_eq!(v.primitive(-0.25), -0.75, epsilon = 1e-14);
    }

    #[test]
    fn plateau_lists() {
        assert!(VelocityField::cosine(1.0, 1.0).plateaus(0.0).is_empty());
        assert!(VelocityField::sawtooth(1.0, 1.0).plateaus(0.0).is_empty());
        assert!(VelocityField::binary_cascade(1.0).unwrap().plateaus(0.0).is_empty());
        assert_eq!(VelocityField::heaviside().plateaus(0.0).len(), 2);
        let wrapped =
            VelocityField::piecewise_constant(vec![0.0, 0.25, 0.75, 1.0], vec![2.0, 0.0, 2.0])
                .unwrap();
        let p = wrapped.plateaus(0.0);
        assert_eq!(p.len(), 2);
        let w = p.iter().find(|q| q.value == 2.0).unwrap();
        assert_abs_diff_eq!(w.left, 0.75);
        assert_abs_diff_eq!(w.right, 1.25);
        assert_eq!(wrapped.plateaus(0.6).len(), 0);
    }

    #[test]
    fn spec_roundtrip_and_unknown_fields() {
        let v = VelocityField::cosine(2.0, 1.0).shifted(1.0);
        let s = serde_json::to_string(&v).unwrap();
        let back: VelocityField = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
        let bad = r#"{"kind":"sine","amplitude":1,"frequency":1,"colour":3}"#;
        assert!(serde_json::from_str::<VelocityField>(bad).is_err());
        let bad_len = r#"{"kind":"piecewise_constant","breaks":[0,1],"values":[1,2]}"#;
        assert!(serde_json::from_str::<VelocityField>(bad_len).is_err());
    }
}
