//! Chain surgeries on a hand-sized metastable chain: the trace process,
//! the reflected process, and the path-level time change that connects
//! them.

use metastab::chain::build_chain;
use metastab::metastability::Partition;
use metastab::reductions::{hitting_profile, reflected_chain, trace_chain, trace_surgery};
use metastab::simulate::{gillespie, SimConfig};

fn main() -> metastab::Result<()> {
    // two fast wells {0,1} and {4,5}, a slow corridor {2,3}
    let chain = build_chain(
        (0..6).map(|i| format!("s{i}")).collect(),
        &[
            (0, 1, 4.0),
            (1, 0, 4.0),
            (4, 5, 4.0),
            (5, 4, 4.0),
            (1, 2, 0.08),
            (2, 1, 3.0),
            (2, 3, 1.0),
            (3, 2, 1.0),
            (3, 4, 3.0),
            (4, 3, 0.08),
        ],
        1.0,
    )?;
    let partition = Partition::new(6, vec![vec![0, 1], vec![4, 5]], None)?;

    // hitting data out of the corridor
    let profile = hitting_profile(&chain, 2, &[0, 1, 4, 5])?;
    println!("from the corridor state s2:");
    for (k, &target) in profile.target_set.iter().enumerate() {
        println!("  enters the wells at s{target} with probability {:.4}", profile.absorb_probs.get(k));
    }
    println!("  mean hitting time {:.4}", profile.mean_time);

    // trace on the union of wells: corridor excursions fold into the rates
    let union = partition.wells_union();
    let traced = trace_chain(&chain, &union)?;
    println!("\ntrace on the wells (rates gain the excursion mass):");
    for (l, &g) in union.iter().enumerate() {
        for (lz, &gz) in union.iter().enumerate() {
            if l != lz && traced.rate(l, lz) > 0.0 {
                println!(
                    "  R^T(s{g}, s{gz}) = {:.5}   (original {:.5})",
                    traced.rate(l, lz),
                    chain.rate(g, gz)
                );
            }
        }
    }
    let mu = chain.stationary()?;
    let mu_t = traced.stationary()?;
    let mass: f64 = union.iter().map(|&g| mu.get(g)).sum();
    println!(
        "  stationary of the trace vs conditioned law at s0: {:.8} vs {:.8}",
        mu_t.get(0),
        mu.get(0) / mass
    );

    // reflection deletes the escape rates
    let reflected = reflected_chain(&chain, &[0, 1])?;
    println!("\nreflection in the left well: holding(s1) {:.3} -> {:.3}", chain.holding(1), reflected.holding(1));

    // path surgery: excise corridor sojourns and re-glue time
    let cfg = SimConfig { seed: 12, paths: 1, horizon: 200.0 };
    let path = &gillespie(&chain, 0, &cfg)[0];
    let surgered = trace_surgery(path, &partition.wells_mask());
    println!("\none sampled path over horizon {}:", path.horizon);
    println!("  jumps: {}, trace-time kept: {:.3}", path.records.len(), surgered.horizon);
    let labels = partition.project_path(path);
    let crossings = labels
        .records
        .iter()
        .filter(|v| v.state == 0)
        .count();
    println!("  separating-set visits along the path: {crossings}");

    // empirical occupation agrees with the trace-chain law
    let long = SimConfig { seed: 5, paths: 1, horizon: 4000.0 };
    let path = &gillespie(&chain, 0, &long)[0];
    let surgered = trace_surgery(path, &partition.wells_mask());
    let mut occ = [0.0f64; 6];
    for v in &surgered.records {
        occ[v.state] += v.exit - v.entry;
    }
    println!("\nlong-run occupation of the surgered path vs trace stationary:");
    for (l, &g) in union.iter().enumerate() {
        println!("  s{g}: {:.4} vs {:.4}", occ[g] / surgered.horizon, mu_t.get(l));
    }
    Ok(())
}
