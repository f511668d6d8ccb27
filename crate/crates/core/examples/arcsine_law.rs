//! Occupation time of Brownian motion on the positive half-line against the
//! arcsine law, through the indicator drift.

use shearmix::mcsim::{arcsine_experiment, ArcsineConfig, YIntegrator};

fn main() -> shearmix::Result<()> {
    for n_paths in [2_000, 20_000] {
        let r = arcsine_experiment(&ArcsineConfig {
            n_paths,
            dt: 1e-3,
            t: 1.0,
            seed: 11,
            y_integrator: YIntegrator::LeftEndpoint,
        })?;
        println!("{n_paths:>6} paths: KS = {:.4}, mean occupation {:.4}", r.ks, r.mean);
    }
    Ok(())
}
