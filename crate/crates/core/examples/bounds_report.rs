//! Every theoretical constant for a profile, printed from one report.
//!
//! `cargo run --example bounds_report` shows a plateau profile (whose
//! minorization constants exist) next to a smooth one (whose constants come
//! from the non-degeneracy route instead).

use shearmix::functionals::{bounds_report, BoundsOptions};
use shearmix::VelocityField;

fn show(name: &str, v: &VelocityField) -> shearmix::Result<()> {
    let r = bounds_report(v, &BoundsOptions::default())?;
    println!("== {name}");
    println!("  osc = {:.4}, omega2 = {:.6e}, rho(V) = {:.6e}", r.osc, r.omega2, r.rho_v);
    println!("  resolvent lower bounds: {:.4e} (omega2), {:?} (omega1 per eps)", r.r_lower_omega2, r.r_lower_omega1);
    match (r.t_p, r.alpha_p_log10) {
        (Some(t), Some(a)) => println!("  plateau route: t_P = {t}, alpha_P = 10^{a:.2}"),
        _ => println!("  plateau route: {}", r.t_p_source),
    }
    match (r.t_h, r.alpha_h_log10) {
        (Some(t), Some(a)) => println!("  hypoelliptic route: t_H = {t:.4e}, alpha_H = 10^{a:.3e}"),
        _ => println!("  hypoelliptic route: {}", r.t_h_source),
    }
    if let Some(rho) = r.doeblin_rho_log10 {
        println!("  Doeblin rate = 10^{rho:.3e}");
    }
    let bad = r.invariant_failures();
    assert!(bad.is_empty(), "{bad:?}");
    Ok(())
}

fn main() -> shearmix::Result<()> {
    show("two plateaus", &VelocityField::two_plateau(0.0, 1.0))?;
    show("cos(2 pi x)", &VelocityField::cosine(1.0, 1.0))
}
