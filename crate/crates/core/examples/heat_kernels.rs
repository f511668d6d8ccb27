//! Closed-form kernels: heat on the line, torus and an interval, and the
//! Kolmogorov kernel with its optimal-control cost.

use shearmix::kernels::{
    heat_dirichlet, heat_line, heat_torus, heat_torus_series, kolmogorov_control,
    kolmogorov_kernel, kolmogorov_psi, KolmogorovState,
};

fn main() -> shearmix::Result<()> {
    let t = 0.125;
    let images = heat_torus(0.5, 0.0, t, 1)?;
    let series = heat_torus_series(0.5, 0.0, t, 40)?;
    println!("torus kernel at distance 1/2, t = 1/8: images {:.12}, series {:.12}", images.value, series.value);
    println!("line kernel there: {:.12} (the torus kernel dominates it)", heat_line(0.5, t));

    let d = heat_dirichlet(0.5, 0.5, (0.0, 1.0), t, 1)?;
    println!("Dirichlet kernel on [0, 1] at the centre: {:.6} (tail bound {:.1e})", d.value, d.tail_bound);

    let s = KolmogorovState { x0: 0.3, y0: -0.2, x: -0.5, y: 0.4, t: 1.5 };
    let control = kolmogorov_control(&s)?;
    println!(
        "Kolmogorov: control cost {:.12} vs closed form {:.12}; density {:.6e}",
        control.cost,
        kolmogorov_psi(&s),
        kolmogorov_kernel(&s)?
    );
    Ok(())
}
