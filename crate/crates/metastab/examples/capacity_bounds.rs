//! Capacities through the variational sandwich: the exact value from
//! escape probabilities, the Dirichlet upper bound from test functions,
//! and the Thomson lower bound from unit flows.

use metastab::chain::build_chain;
use metastab::potential::{capacity, dirichlet_bound, thomson_bound, Flow};

fn main() -> metastab::Result<()> {
    // a reversible ladder with a weak middle rung
    let mut entries = Vec::new();
    let weights = [1.0, 0.7, 0.2, 0.05, 0.2, 0.7, 1.0];
    for i in 0..6usize {
        let c = if i == 2 || i == 3 { 0.03 } else { 1.0 };
        entries.push((i, i + 1, c / weights[i]));
        entries.push((i + 1, i, c / weights[i + 1]));
    }
    let chain = build_chain((0..7).map(|i| i.to_string()).collect(), &entries, 1.0)?;
    let a = vec![0usize];
    let b = vec![6usize];

    let cap = capacity(&chain, &a, &b)?;
    println!("Cap(0, 6) = {:.8}", cap.value);
    println!("equilibrium potential: {:?}", cap.potential.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>());
    println!("equilibrium measure on A sums to {:.12}", cap.equilibrium_measure.mass());

    // the harmonic optimizers make both bounds tight
    println!("\ntight bounds at the optimizers:");
    println!("  Dirichlet(V_AB)      = {:.8}", cap.dirichlet_upper.unwrap());
    println!("  1/Thomson(harmonic)  = {:.8}", cap.thomson_lower.unwrap());

    // any admissible test function sits above, any unit flow below
    let mut cut = vec![0.0; 7];
    for f in cut.iter_mut().take(3) {
        *f = 1.0;
    }
    let upper = dirichlet_bound(&chain, &a, &b, &cut)?;
    let path_flow = Flow::unit_path(&[0, 1, 2, 3, 4, 5, 6]);
    let lower = thomson_bound(&chain, &a, &b, &path_flow)?;
    println!("\ngeneric bounds:");
    println!("  cut indicator:   {upper:.8} (>= value)");
    println!("  single-path flow: {lower:.8} (<= value)");

    // capacity grows with the source set
    let grown = capacity(&chain, &[0, 1], &b)?;
    println!("\nmonotonicity: Cap({{0}}, {{6}}) = {:.8} <= Cap({{0,1}}, {{6}}) = {:.8}", cap.value, grown.value);

    // and is symmetric for reversible chains
    let swapped = capacity(&chain, &b, &a)?;
    println!("symmetry: Cap(B, A) = {:.10} (relative gap {:.2e})", swapped.value, (swapped.value - cap.value).abs() / cap.value);
    Ok(())
}
