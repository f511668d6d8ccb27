//! Monte Carlo on the torus: one transition histogram, then empirical
//! Doeblin constants for the two-plateau shear at a few multiples of t_P.
//! Path counts are small so this finishes in seconds; the acceptance suite
//! uses far more.

use shearmix::functionals::{check_plateaus, plateau_constants};
use shearmix::mcsim::{doeblin_profile, simulate, Drift, PathConfig};
use shearmix::validate::doeblin_starts;
use shearmix::VelocityField;

fn main() -> shearmix::Result<()> {
    let v = VelocityField::two_plateau(0.0, 1.0);
    let pair = check_plateaus(&v).expect("two plateaus");
    let theory = plateau_constants(pair.ell, pair.dv)?;
    let drift = Drift::from(v);

    let h = simulate((0.1, 0.1), &drift, &PathConfig::new(1e-3, 50_000, 1.0, 1), 4)?;
    println!("law at t = 1 from (0.1, 0.1) on a 4x4 grid (rows are x):");
    for row in h.probabilities().chunks(4) {
        println!("  {}", row.iter().map(|p| format!("{:.4}", p * 16.0)).collect::<Vec<_>>().join(" "));
    }

    let times = [theory.t_p, 2.0 * theory.t_p, 4.0 * theory.t_p];
    let cfg = PathConfig::new(2e-3, 20_000, times[2], 2);
    for e in doeblin_profile(&drift, &times, &doeblin_starts(), &cfg, 8)? {
        println!("t = {:.4}: alpha_hat = {:.3e} (99% lower {:.3e})", e.t, e.alpha_hat, e.alpha_lower);
    }
    println!("theory: alpha_P = 10^{:.1} at t_P = {}", theory.alpha_p.log10(), theory.t_p);
    Ok(())
}
