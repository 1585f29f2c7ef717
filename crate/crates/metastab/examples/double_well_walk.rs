//! Random walk in a double-well potential: critical-point detection, the
//! Eyring-Kramers-style time scale, the partition-function ratio, and the
//! separation of scales between mixing inside a well and escaping it.

use metastab::models::{potential_partition_ratio, potential_walk, NamedPotential};
use metastab::potential::spectral_gap;
use metastab::reductions::reflected_chain;

fn main() -> metastab::Result<()> {
    println!("F(x) = (x^2 - 1)^2 on (-1.6, 1.6), kappa = 0.25");
    println!(
        "{:>4} {:>8} {:>14} {:>12} {:>12}",
        "n", "states", "theta", "Z-ratio", "refl. gap"
    );
    for &n in &[12usize, 24, 48] {
        let grid = NamedPotential::DoubleWell1d { bound: 1.6 }.sample(n)?;
        let inst = potential_walk(&grid, n, 0.25)?;
        let (lhs, rhs) = potential_partition_ratio(&grid, &inst)?;
        let reflected = reflected_chain(&inst.chain, inst.partition.well(0))?;
        let gap = spectral_gap(&reflected)?.gap;
        println!(
            "{n:>4} {:>8} {:>14.6e} {:>12.6} {:>12.4e}",
            inst.chain.n_states(),
            inst.theta,
            lhs / rhs,
            gap
        );
    }
    println!("(the Z-ratio drifts toward 1; the reflected gap stays fat on the theta scale)");

    let n = 24;
    let grid = NamedPotential::DoubleWell1d { bound: 1.6 }.sample(n)?;
    let inst = potential_walk(&grid, n, 0.25)?;
    let bottoms = inst.partition.bottoms().unwrap();
    println!(
        "\nn = {n}: wells of {} and {} lattice points, bottoms at keys {} and {}",
        inst.partition.well(0).len(),
        inst.partition.well(1).len(),
        inst.chain.key(bottoms[0][0]),
        inst.chain.key(bottoms[1][0]),
    );
    for w in &inst.warnings {
        println!("warning: {w}");
    }

    // the scales: reflected relaxation vs escape, both in speeded time
    let reflected = reflected_chain(&inst.chain, inst.partition.well(0))?;
    let trel = spectral_gap(&reflected)?.relaxation_time;
    let escape = metastab::potential::hitting_prob_exact_all(
        &inst.chain,
        inst.partition.delta(),
        trel * 10.0,
    )?[bottoms[0][0]];
    println!("reflected relaxation time {trel:.3e} (speeded units)");
    println!("P[leave the well within 10 relaxation times] = {escape:.3e}  (separation of scales)");

    // two-dimensional variant
    let grid = NamedPotential::DoubleWell2d { bound: 1.3, a: 1.0 }.sample(10)?;
    let inst = potential_walk(&grid, 10, 0.3)?;
    println!(
        "\n2-d double well at n = 10: {} states, theta = {:.4e}, wells {} / {}",
        inst.chain.n_states(),
        inst.theta,
        inst.partition.well(0).len(),
        inst.partition.well(1).len()
    );
    Ok(())
}
