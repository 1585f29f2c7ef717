//! The report layer: deterministic JSON condition reports, sweep trend
//! verdicts, and the three-term well-escape bound as a worked diagnostic.

use metastab::metastability::{check_h2, StartPolicy};
use metastab::models::{zero_range, ModelSpec};
use metastab::potential::lemma_l06_bound;
use metastab::report::sweep_condition;

fn main() -> metastab::Result<()> {
    // a single-size report: nonzero value of an asymptotic condition
    let inst = zero_range(2, 12, 1.0, 0.5, 3)?;
    let report = check_h2(&inst.chain, &inst.partition, 1.0, StartPolicy::Auto)?;
    println!("single-size H2 report:\n{}", report.to_json());

    // the sweep driver turns per-size values into a trend verdict
    let spec = ModelSpec::ZeroRange { l: 2, n: 12, alpha: 1.0, p: 0.5, ell: 3 };
    let swept = sweep_condition(&[10, 20, 40], |n| {
        let inst = spec.with_size(n as usize).build()?;
        check_h2(&inst.chain, &inst.partition, 1.0, StartPolicy::Auto)
    })?;
    println!("\nswept H2 report:\n{}", swept.to_json());

    // the well-escape bound, term by term
    let inst = zero_range(2, 16, 1.0, 0.5, 4)?;
    let eta = inst.partition.bottoms().unwrap()[0][0];
    let bound = lemma_l06_bound(
        &inst.chain,
        eta,
        inst.partition.well(0),
        inst.partition.delta(),
        0.05,
        0.3,
    )?;
    println!("\nwell-escape bound from the condensed state (T = 0.05, s = 0.3):");
    println!("  exit term            {:.6}", bound.exit_term);
    println!("  reflected TV term    {:.6}", bound.tv_term);
    println!("  measure ratio term   {:.6}", bound.ratio_term);
    println!("  bound                {:.6}", bound.bound);
    println!("  exact P[xi(s) in Delta] = {:.6}", bound.exact);
    println!("  conditioned measure stationary for the reflection: {}", bound.conditioned_is_stationary);
    Ok(())
}
