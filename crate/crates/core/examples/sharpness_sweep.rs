//! Certificates for the extension quotient on either side of the critical exponent.
//!
//! `cargo run --example sharpness_sweep`

use salem_cantor::restriction::{certificate_sweep, q_critical};
use salem_cantor::schedule::{build_general_schedule, PhiSpec};

fn main() -> salem_cantor::Result<()> {
    let (alpha, beta) = (0.5, 0.5);
    let s = build_general_schedule(alpha, beta, PhiSpec::log_power(1.0)?, false, 11)?;
    let q0 = q_critical(alpha, beta)?;
    println!("q0 = {q0}, N0 = {}", s.start_level);
    for q in [q0 - 0.5, q0 + 1.0] {
        println!("q = {q}");
        println!("   l  quotient  e(q)     compensated");
        for c in certificate_sweep(&s, 10, q, 4)? {
            println!("  {:>2}  {:.5}   {:+.4}  {:+.4}", c.l, c.quotient_lower_q, c.growth_exponent, c.compensated);
        }
    }
    Ok(())
}
