//! Fourier decay of the step measures against the endpoint envelopes.
//!
//! `cargo run --example decay_profile`

use salem_cantor::fourier::{decay_profile, tail_certificate, Envelope, StepMeasure};
use salem_cantor::schedule::{build_dyadic_schedule, build_flat_schedule};
use salem_cantor::tree::build_tree;

fn main() -> salem_cantor::Result<()> {
    let k_max = 1 << 13;
    let s = build_dyadic_schedule(0.5, 16)?;
    println!("|mu_N^(k)| k^(alpha/2), 2 <= k <= {k_max}");
    for seed in 0..4 {
        let tree = build_tree(&s, seed, 16)?;
        let sups: Vec<String> = (13..=16)
            .map(|n| Ok(format!("{:.3}", decay_profile(&StepMeasure::new(&tree, n)?, k_max)?.sup_constant)))
            .collect::<salem_cantor::Result<_>>()?;
        println!("  seed {seed}: N = 13..16 -> {}", sups.join(" "));
    }
    println!("tail certificate at N = 16, k = 1000: {:.4}", tail_certificate(&s, 16, 1000)?);

    // the flat schedule needs the square-root log factor
    let s = build_flat_schedule(0.5, 16)?;
    let tree = build_tree(&s, 1, 16)?;
    let report = decay_profile(&StepMeasure::new(&tree, 16)?, k_max)?;
    let pure = report.against(Envelope::PurePower { exponent: 0.25 });
    for (lo, hi) in [(2u64, 64u64), (64, 512), (512, 4096), (4096, 8192)] {
        let block = |r: &salem_cantor::fourier::DecayReport| {
            let first = r.per_k.partition_point(|p| p.0 < lo);
            let last = r.per_k.partition_point(|p| p.0 < hi);
            (first..last).map(|i| r.ratio(i)).fold(0.0, f64::max)
        };
        println!("  k in [{lo}, {hi}): with log {:.3}, pure power {:.3}", block(&report), block(&pure));
    }
    Ok(())
}
