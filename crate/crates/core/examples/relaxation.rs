//! Evolve a Gaussian bump under the cosine shear and compare its deviation
//! from the mean with the exponential envelope.

use shearmix::cli::InitialField;
use shearmix::evolve2d::{relax_trace, RelaxOptions};
use shearmix::spectral1d::Grid1d;
use shearmix::VelocityField;

fn main() -> shearmix::Result<()> {
    let opts = RelaxOptions { grid: Grid1d::torus(48), ny: 33, k_max: 16, omega2_nodes: 256 };
    let bump = InitialField::Bump { x0: 0.3, y0: 0.6, width: 0.08 };
    let u0 = bump.sample(opts.grid.n, opts.ny);
    let (trace, last) = relax_trace(&u0, &VelocityField::cosine(1.0, 1.0), 20.0, 11, &opts)?;
    println!("rho(V) = {:.4e}", trace.rho);
    for i in 0..trace.times.len() {
        println!(
            "t = {:5.1}  deviation {:.4e}  envelope {:.4e}{}",
            trace.times[i],
            trace.deviation[i],
            trace.envelope[i],
            if trace.violated[i] { "  VIOLATED" } else { "" }
        );
    }
    println!("mass is conserved: {:.12} at t = {}", last.mass(), last.time);
    Ok(())
}
