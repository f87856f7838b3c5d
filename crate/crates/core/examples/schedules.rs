//! Branching schedules for the four variants.
//!
//! `cargo run --example schedules`

use salem_cantor::schedule::{build_schedule, PhiSpec, Variant};

fn main() -> salem_cantor::Result<()> {
    let phi = PhiSpec::parse("log:1")?;
    let runs = [
        (Variant::EndpointDecay, 0.5, 0.5, 16),
        (Variant::EndpointRegular, 0.5, 0.5, 16),
        (Variant::Progression, 0.5, 0.5, 12),
        (Variant::ProgressionPowerRegular, 0.6, 0.4, 12),
    ];
    for (variant, alpha, beta, levels) in runs {
        let s = build_schedule(variant, alpha, beta, Some(phi.clone()), levels)?;
        println!("{variant} alpha={alpha} beta={beta}: start level N0 = {}", s.start_level);
        println!("  psi = {:?}", &s.psi[1..]);
        println!("  t   = {:?}", &s.t[1..]);
        if variant.has_progression() {
            println!("  tau = {:?}", &s.tau[1..]);
            println!("  tau ratio band = {:?}", s.tau_ratio_band());
        }
        let (lo, hi) = s.theta_band();
        println!("  theta band [{lo:.3}, {hi:.3}], Psi({levels}) = {}, T({levels}) = {}", s.cap_psi(levels), s.cap_t(levels));
        println!("  hash {}", &s.hash()[..16]);
    }
    Ok(())
}
