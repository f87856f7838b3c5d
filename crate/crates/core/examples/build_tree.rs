//! Resample-and-verify construction of a tree, with its verification records.
//!
//! `cargo run --example build_tree -- [seed]`

use salem_cantor::schedule::build_dyadic_schedule;
use salem_cantor::tree::{build_tree, CantorTree};

fn main() -> salem_cantor::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let s = build_dyadic_schedule(0.5, 18)?;
    let tree = build_tree(&s, seed, 18)?;
    tree.check_structure()?;
    println!("level  attempts  sup|random|  threshold  ratio");
    for r in &tree.verification {
        println!(
            "{:>5}  {:>8}  {:>11.5}  {:>9.5}  {:.3}",
            r.level,
            r.attempts,
            r.sup_random_part,
            r.threshold,
            r.sup_random_part / r.threshold
        );
    }
    // the stored records are recomputed from the node sets alone
    let (random, _) = tree.recheck_level(18)?;
    println!("recheck level 18: {random:.5}");

    let back = CantorTree::from_json(&tree.to_json()?)?;
    assert_eq!(back.hash(), tree.hash());
    println!("{} nodes at level 18, tree hash {}", tree.levels[18].numerators.len(), &tree.hash()[..16]);
    Ok(())
}
