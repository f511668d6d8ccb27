//! Summary of earlier runs: one table row per theoretical constant next to its
//! numeric counterpart, plus CSVs ready for external plotting.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fmt::Write as _;
use std::path::PathBuf;

use super::{Plan, TaskOutput};
use crate::error::{Error, Result};
use crate::functionals::BoundsReport;

/// Paths of earlier artifacts, relative to the working directory.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportParams {
    /// `bounds.json` from the bounds task.
    pub bounds: Option<PathBuf>,
    /// `spectrum.json` from the spectrum task.
    pub spectrum: Option<PathBuf>,
    /// `sigma_trace.csv` from the spectrum task.
    pub sigma: Option<PathBuf>,
    /// `decay.csv` from the evolve task.
    pub decay: Option<PathBuf>,
    /// `doeblin.json` from the doeblin simulation.
    pub doeblin: Option<PathBuf>,
}

struct Row {
    quantity: String,
    value: String,
    reference: String,
    check: Option<bool>,
}

fn row(quantity: &str, value: impl ToString, reference: impl ToString, check: Option<bool>) -> Row {
    Row {
        quantity: quantity.into(),
        value: value.to_string(),
        reference: reference.to_string(),
        check,
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| format!("{v:.6e}"))
}

fn parse_csv(text: &str, name: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::InvalidInput(format!("{name}: empty file")))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let parsed: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let r = parsed.map_err(|e| Error::InvalidInput(format!("{name} line {}: {e}", i + 2)))?;
        if r.len() != header.len() {
            return Err(Error::InvalidInput(format!("{name} line {}: wrong column count", i + 2)));
        }
        rows.push(r);
    }
    Ok((header, rows))
}

fn column(header: &[String], name: &str, file: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::InvalidInput(format!("{file}: no `{name}` column")))
}

pub(super) fn report(_plan: &Plan, p: &ReportParams) -> Result<TaskOutput> {
    let named = [
        ("bounds", &p.bounds),
        ("spectrum", &p.spectrum),
        ("sigma", &p.sigma),
        ("decay", &p.decay),
        ("doeblin", &p.doeblin),
    ];
    let mut missing = Vec::new();
    let mut texts: Vec<Option<String>> = Vec::new();
    for (name, path) in named {
        match path {
            None => texts.push(None),
            Some(rel) => {
                match std::fs::read_to_string(rel) {
                    Ok(t) => texts.push(Some(t)),
                    Err(_) => {
                        missing.push(format!("{name} ({})", rel.display()));
                        texts.push(None);
                    }
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingInput(missing.join(", ")));
    }
    let mut out = TaskOutput::default();
    let [bounds_t, spectrum_t, sigma_t, decay_t, doeblin_t]: [Option<String>; 5] =
        texts.try_into().expect("five inputs");
    if named.iter().all(|(_, p)| p.is_none()) {
        out.warnings.push("report: no inputs given, writing an empty summary".into());
    }

    let bounds: Option<BoundsReport> = match &bounds_t {
        Some(t) => Some(serde_json::from_str(t).map_err(|e| Error::InvalidInput(format!("bounds: {e}")))?),
        None => None,
    };
    let spectrum: Option<Value> = match &spectrum_t {
        Some(t) => Some(serde_json::from_str(t).map_err(|e| Error::InvalidInput(format!("spectrum: {e}")))?),
        None => None,
    };
    let mut rows = Vec::new();

    if let Some(b) = &bounds {
        let fails = b.invariant_failures();
        rows.push(row("bounds invariants", fails.len(), "0 failures", Some(fails.is_empty())));
        rows.push(row("omega2", format!("{:.6e}", b.omega2), "<= osc / 2", None));
        rows.push(row("rho(V)", format!("{:.6e}", b.rho_v), "relaxation rate", None));
        rows.push(row("rho_Wei", fmt_opt(b.rho_wei), "relaxation rate", None));
        rows.push(row("r lower (omega2)", format!("{:.6e}", b.r_lower_omega2), "resolvent bound", None));
        let by_omega1 = b.r_lower_omega1.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        rows.push(row("r lower (omega1)", format!("{by_omega1:.6e}"), "resolvent bound", None));
        rows.push(row("t_P", fmt_opt(b.t_p), "plateau time", None));
        rows.push(row("log10 alpha_P", fmt_opt(b.alpha_p_log10), "plateau minorization", None));
        rows.push(row("t_H", fmt_opt(b.t_h), "hypoelliptic time", None));
        rows.push(row("log10 alpha_H", fmt_opt(b.alpha_h_log10), "hypoelliptic minorization", None));
        rows.push(row("log10 Doeblin rate", fmt_opt(b.doeblin_rho_log10), "TV decay rate", None));
    }

    let num = |v: &Value, key: &str| v.get(key).and_then(Value::as_f64);
    let refs = match (&spectrum, &bounds) {
        (Some(s), _) => (num(s, "resolvent_bound_omega2"), num(s, "resolvent_bound_omega1")),
        (None, Some(b)) => (
            Some(b.r_lower_omega2),
            b.r_lower_omega1.iter().copied().reduce(f64::max),
        ),
        (None, None) => (None, None),
    };
    if let Some(s) = &spectrum {
        let r = num(s, "r_lambda1").ok_or_else(|| Error::InvalidInput("spectrum: no r_lambda1".into()))?;
        for (name, bound) in [("r vs omega2 bound", refs.0), ("r vs omega1 bound", refs.1)] {
            if let Some(b) = bound {
                rows.push(row(name, format!("{r:.6e}"), format!(">= {b:.6e}"), Some(r >= b - 1e-8)));
            }
        }
        if let (Some(w), Some(cap)) = (num(s, "semigroup_max_weighted"), num(s, "semigroup_cap")) {
            rows.push(row(
                "semigroup weighted max",
                format!("{w:.6}"),
                format!("<= {cap:.6}"),
                Some(w <= cap * (1.0 + 1e-4)),
            ));
        }
    }

    if let Some(t) = &sigma_t {
        let (h, data) = parse_csv(t, "sigma")?;
        let (is, iy) = (column(&h, "s", "sigma")?, column(&h, "sigma_min", "sigma")?);
        let cell = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
        let mut csv = String::from("s,sigma_min,omega2_bound,omega1_bound\n");
        let mut min = f64::INFINITY;
        for r in &data {
            min = min.min(r[iy]);
            let _ = writeln!(csv, "{},{},{},{}", r[is], r[iy], cell(refs.0), cell(refs.1));
        }
        out.add("sigma_plot.csv", csv);
        let best = refs.0.into_iter().chain(refs.1).fold(f64::NEG_INFINITY, f64::max);
        let check = (best > f64::NEG_INFINITY).then_some(min >= best - 1e-8);
        rows.push(row("min sigma_min on sweep", format!("{min:.6e}"), format!(">= {best:.6e}"), check));
    }

    if let Some(t) = &decay_t {
        let (h, data) = parse_csv(t, "decay")?;
        let it = column(&h, "t", "decay")?;
        let id = column(&h, "deviation", "decay")?;
        let ie = column(&h, "envelope", "decay")?;
        let mut csv = String::from("t,deviation,envelope\n");
        let mut bad = 0;
        for r in &data {
            if r[id] > r[ie] {
                bad += 1;
            }
            let _ = writeln!(csv, "{},{},{}", r[it], r[id], r[ie]);
        }
        out.add("decay_plot.csv", csv);
        rows.push(row("envelope violations", bad, "0", Some(bad == 0)));
    }

    if let Some(t) = &doeblin_t {
        let d: Value = serde_json::from_str(t).map_err(|e| Error::InvalidInput(format!("doeblin: {e}")))?;
        let t_p = num(&d, "t_p");
        let floor = num(&d, "alpha_p_log10");
        let est = d
            .get("estimates")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::InvalidInput("doeblin: no estimates".into()))?;
        for e in est {
            let (t, a) = match (num(e, "t"), num(e, "alpha_hat")) {
                (Some(t), Some(a)) => (t, a),
                _ => return Err(Error::InvalidInput("doeblin: malformed estimate".into())),
            };
            let applies = t_p.is_some_and(|tp| t >= tp * (1.0 - 1e-12));
            let (reference, check) = match (floor, applies) {
                (Some(f), true) => (format!(">= 10^{f:.2}"), Some(a > 0.0 && a.log10() >= f)),
                _ => ("n/a".to_string(), None),
            };
            rows.push(row(&format!("alpha_hat(t = {t:.4})"), format!("{a:.4e}"), reference, check));
        }
    }

    let mut summary = String::new();
    let _ = writeln!(summary, "{:<26} {:>16} {:>24}  check", "quantity", "value", "reference");
    for r in &rows {
        let check = match r.check {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "-",
        };
        let _ = writeln!(summary, "{:<26} {:>16} {:>24}  {check}", r.quantity, r.value, r.reference);
    }
    let failed = rows.iter().filter(|r| r.check == Some(false)).count();
    let _ = writeln!(summary, "{failed} ordering check(s) failed");
    out.add("summary.txt", summary.clone());
    out.message = summary;
    Ok(out)
}
