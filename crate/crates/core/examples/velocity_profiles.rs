//! Build the standard shear profiles and inspect what the rest of the crate
//! reads from them: oscillation, primitive, plateaus.

use shearmix::velocity::{Domain, VelocityField};

fn main() -> shearmix::Result<()> {
    let profiles = [
        ("cos(2 pi x)", VelocityField::cosine(1.0, 1.0)),
        ("sawtooth", VelocityField::sawtooth(1.0, 1.0)),
        ("two plateaus", VelocityField::two_plateau(0.0, 1.0)),
        ("binary cascade", VelocityField::binary_cascade(1.0)?),
        ("x on [0, 1]", VelocityField::piecewise_linear(vec![0.0, 1.0], vec![0.0, 1.0])?.on(Domain::Interval { a: 0.0, b: 1.0 })?),
    ];
    println!("{:<16} {:>8} {:>12} {:>10}", "profile", "osc", "int_0^1 V", "plateaus");
    for (name, v) in &profiles {
        println!(
            "{name:<16} {:>8.4} {:>12.3e} {:>10}",
            v.osc(),
            v.primitive(1.0),
            v.plateaus(1e-3).len()
        );
    }

    // Fields round-trip through the JSON schema used by config files.
    let json = serde_json::to_string(&profiles[2].1)?;
    println!("\ntwo plateaus as config JSON: {json}");
    let back: VelocityField = serde_json::from_str(&json)?;
    assert_eq!(back, profiles[2].1);
    Ok(())
}
