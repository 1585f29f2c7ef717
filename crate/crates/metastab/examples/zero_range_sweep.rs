//! The condensing zero-range process across a size sweep: well masses,
//! the separating-set conditions, the reduced label chain, and the
//! convergence of the state law to a mixture of well measures.

use metastab::metastability::{
    check_condition_03, check_h2, check_m1, check_m2, check_measure_ratios, estimate_limit_chain,
    fdd_compare, limit_rate_via_capacity, state_convergence, StartPolicy,
};
use metastab::models::zero_range;
use metastab::potential::capacity;

fn main() -> metastab::Result<()> {
    println!("condensing zero-range, two sites, alpha = 1, ell = n/4");
    println!(
        "{:>4} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "n", "mu(E1)", "H2(t=1)", "(03)", "TV(t=1)", "thetaCap", "r(1,2)"
    );
    for &n in &[10usize, 20, 40] {
        let inst = zero_range(2, n, 1.0, 0.5, n / 4)?;
        let mass = inst.stationary.mass_of(inst.partition.well(0));
        let h2 = check_h2(&inst.chain, &inst.partition, 1.0, StartPolicy::Auto)?.value();
        let c03 = check_condition_03(&inst.chain, &inst.partition, 0.1, StartPolicy::Auto)?.value();
        let limit = estimate_limit_chain(&inst.chain, &inst.partition)?;
        let init = inst.partition.bottoms().unwrap()[0][0];
        let tv = state_convergence(&inst.chain, &inst.partition, &limit, &[1.0], init)?.tv;
        let cap = capacity(&inst.chain, inst.partition.well(0), inst.partition.well(1))?.value;
        println!(
            "{n:>4} {mass:>10.6} {h2:>10.6} {c03:>10.6} {tv:>10.6} {cap:>10.6} {:>10.6}",
            limit.rate(0, 1)
        );
    }
    println!("(every column after mu(E1) decreases along the sweep; theta Cap stabilizes)");

    // a closer look at n = 20
    let inst = zero_range(2, 20, 1.0, 0.5, 5)?;
    let limit = estimate_limit_chain(&inst.chain, &inst.partition)?;
    println!("\nn = 20 reduced chain: r(1,2) = {:.6}, r(2,1) = {:.6}", limit.rate(0, 1), limit.rate(1, 0));
    println!(
        "capacity route gives r(1,2) = {:.6}",
        limit_rate_via_capacity(&inst.chain, &inst.partition, 0, 1)?
    );

    let init = inst.partition.bottoms().unwrap()[0][0];
    let cmp = fdd_compare(&inst.chain, &inst.partition, &limit, &[0.5, 1.5], init)?;
    println!("\njoint label law vs the limit chain at t = (0.5, 1.5):");
    for (tuple, (p, q)) in cmp.table.iter() {
        if *p > 5e-3 || *q > 5e-3 {
            println!("  labels {tuple:?}: projected {p:.4}, limit {q:.4}");
        }
    }
    println!("  max abs difference {:.4}; mass at label 0: {:?}", cmp.max_abs_diff, cmp.mass_at_zero.iter().map(|m| (m * 1e4).round() / 1e4).collect::<Vec<_>>());

    // the bottom-set machinery: hitting the condensed configuration fast
    let m1 = check_m1(&inst.chain, &inst.partition, 0.5)?;
    println!("\n(M1) at delta = 0.5: sup tail {:.6}", m1.value());
    let m2 = check_m2(&inst.chain, &inst.partition, 0.02)?;
    println!("(M2) at epsilon = 0.02: early exit {:.6}, reflected TV {:.6}", m2.b04.value(), m2.b07.value());
    let ratios = check_measure_ratios(&inst.chain, &inst.partition)?;
    println!(
        "measure ratios: max mu(Delta)/mu(E^y) = {:.6}, well-mass spread = {:.8}",
        ratios.b09a.value(),
        ratios.b09.values["spread"]
    );
    Ok(())
}
