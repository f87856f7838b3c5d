//! Additive energy of the progression set and the exact `L^{2r}` norm.
//!
//! `cargo run --example additive_energy`

use salem_cantor::restriction::{
    additive_energy, energy_lower_bound, energy_via_convolution, salem_norm_exact, salem_norm_quadrature, sumset_bound,
    sumset_size, to_f64, EnergyInstance,
};
use salem_cantor::schedule::{build_general_schedule, PhiSpec};
use salem_cantor::tree::build_tree;

fn main() -> salem_cantor::Result<()> {
    let s = build_general_schedule(0.5, 0.5, PhiSpec::log_power(1.0)?, false, 12)?;
    let l = s.start_level + 1;
    let n = l + 3;
    let tree = build_tree(&s, 7, n)?;

    // brute force is only feasible on a slice of the points
    let full = EnergyInstance::from_tree(&tree, n - 1, n, 2)?;
    let small = EnergyInstance::new(full.points[..48].to_vec(), n - 1, n, 2)?;
    println!(
        "first {} of {} points, r = 2: enumerated {} = convolved {}",
        small.points.len(),
        full.points.len(),
        additive_energy(&small)?,
        energy_via_convolution(&small)?
    );

    let r = 3;
    let inst = EnergyInstance::from_tree(&tree, l, n, r)?;
    println!("l = {l}, N = {n}, r = {r}: {} points", inst.points.len());
    println!("  energy {} >= lower bound {:.1}", energy_via_convolution(&inst)?, to_f64(&energy_lower_bound(&s, l, n, r)?));
    println!("  sumset {} <= bound {}", sumset_size(&inst.points, r)?, sumset_bound(&s, l, n, r)?);

    let exact = salem_norm_exact(&tree, l, n, r)?;
    println!("  ||(f mu)^||_6^6 = {:.6e} (exact rational with {}-digit denominator)", exact.value_f64(), exact.value.denom().to_string().len());
    println!("  m = 0 term {:.6e}, schedule-only bound {:.6e}", to_f64(&exact.energy_term), to_f64(&exact.norm_below));
    let mut xi = 4.0 * tree.cells(n) as f64;
    let quad = loop {
        let quad = salem_norm_quadrature(&tree, l, n, 6.0, xi)?;
        if quad.tail_bound < 0.01 * quad.value {
            break quad;
        }
        xi *= 2.0;
    };
    println!("  quadrature {:.6e} + tail {:.2e} on {} points up to |xi| = {:.3e}", quad.value, quad.tail_bound, quad.grid, quad.xi);
    Ok(())
}
