//! Pseudospectral sweep of `-d_xx + 2 pi i V` on the torus: the minimum
//! singular value along the line Re z = lambda_1, then the semigroup norm
//! against the bound it implies.

use shearmix::spectral1d::{r_lambda1, semigroup_norm, Grid1d, ModeOperator};
use shearmix::validate::semigroup_times;
use shearmix::VelocityField;

fn main() -> shearmix::Result<()> {
    let v = VelocityField::cosine(1.0, 1.0);
    let op = ModeOperator::new(&v, Grid1d::torus(128), 1)?;
    let s = r_lambda1(&op, None, 128)?;
    println!(
        "lambda1 = {:.3e}, r(lambda1) = {:.6} at s = {:.4} (converged: {})",
        s.lambda1, s.r_lambda1, s.s_argmin, s.converged
    );

    let times = semigroup_times(op.lambda2());
    let norms = semigroup_norm(&op, &times)?;
    let cap = (std::f64::consts::PI / 2.0).exp();
    for (t, n) in times.iter().zip(&norms).step_by(8) {
        let weighted = n * ((s.lambda1 + s.r_lambda1) * t).exp();
        println!("t = {t:9.3e}   |exp(-tA)| = {n:.4e}   weighted = {weighted:.4} (cap {cap:.4})");
    }
    Ok(())
}
