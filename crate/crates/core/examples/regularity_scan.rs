//! Two-sided regularity: exact interval masses against the variant envelopes.
//!
//! `cargo run --example regularity_scan`

use salem_cantor::regularity::{regularity_margin, regularity_scan};
use salem_cantor::schedule::{build_dyadic_schedule, build_flat_schedule};
use salem_cantor::tree::build_tree;

fn main() -> salem_cantor::Result<()> {
    for (name, s) in [("thm2", build_dyadic_schedule(0.5, 24)?), ("thm3", build_flat_schedule(0.5, 24)?)] {
        let last = 14;
        let tree = build_tree(&s, 3, 20)?;
        assert_eq!(regularity_margin(&tree, last), Some(6));
        let report = regularity_scan(&tree, last, 40)?;
        println!("{name}: {} samples, band [{:.3}, {:.3}], width {:.2}", report.samples.len(), report.band_lower, report.band_upper, report.band_width());
        for (n, lo, hi) in report.per_scale() {
            println!("  N = {n:>2}: centered lower {lo:.3}, upper {hi:.3}");
        }
        println!("  contained-cell mechanism on every centered sample: {}", report.lower_mechanism_holds());
    }
    Ok(())
}
