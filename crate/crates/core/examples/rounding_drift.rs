//! How far integer branching drifts from the ideal `N^alpha`.
//!
//! `cargo run --example rounding_drift`

use salem_cantor::schedule::rounding_drift_demo;

fn main() {
    let alpha = 0.5;
    for l in [1_000u64, 10_000, 100_000] {
        let v = rounding_drift_demo(alpha, l);
        println!("L = {l:>6}: log prod = {v:>9.3}, / L^(1-alpha) = {:.4}", v / (l as f64).powf(1.0 - alpha));
    }
}
