//! Exact rational masses of grid-aligned intervals, and the cdf Cauchy gap.
//!
//! `cargo run --example interval_mass`

use num_rational::BigRational;
use num_traits::Zero;
use salem_cantor::fourier::cdf_sup_gap;
use salem_cantor::regularity::{measure_of_interval, IntervalQuery};
use salem_cantor::schedule::build_dyadic_schedule;
use salem_cantor::tree::build_tree;

fn main() -> salem_cantor::Result<()> {
    let s = build_dyadic_schedule(0.5, 16)?;
    let tree = build_tree(&s, 11, 16)?;
    let q = tree.cells(10);
    let query = IntervalQuery::from_grid(q / 5, q / 3, q)?;
    for n in [10, 13, 16] {
        println!("mu_{n}([{}/{q}, {}/{q}]) = {}", q / 5, q / 3, measure_of_interval(&tree, n, &query)?);
    }

    // additivity over a partition of [0, 1] into aligned pieces
    let cuts = [0, q / 7, q / 2, q / 2 + 3, q];
    let total = cuts
        .windows(2)
        .map(|w| measure_of_interval(&tree, 16, &IntervalQuery::from_grid(w[0], w[1], q)?))
        .try_fold(BigRational::zero(), |acc, m| m.map(|m| acc + m))?;
    println!("sum over partition = {total}");

    for n in 8..16 {
        let t = tree.levels[n].numerators.len() as f64;
        let gap = cdf_sup_gap(&tree, n)?;
        println!("N = {n}: sup |F_(N+1) - F_N| = {gap:.3e}, bound 1/T_N + 2/Psi(N+1) = {:.3e}", 1.0 / t + 2.0 / tree.cells(n + 1) as f64);
    }
    Ok(())
}
