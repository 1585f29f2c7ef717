//! The gamma-enlargement and what it buys: capacity identities on the
//! doubled space and short-time hitting probability bounds compared with
//! the exact absorbing-chain values.

use metastab::chain::build_chain;
use metastab::potential::{capacity, hitting_prob_bound, hitting_prob_exact_all};
use metastab::reductions::{enlarge_chain, enlargement_original_indices, trace_chain};
use rand::{Rng, SeedableRng};

fn main() -> metastab::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(40);
    let n = 6;
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let mut entries = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if j == i + 1 || rng.gen_bool(0.5) {
                let c: f64 = rng.gen_range(0.1..1.5);
                entries.push((i, j, c / w[i]));
                entries.push((j, i, c / w[j]));
            }
        }
    }
    let chain = build_chain((0..n).map(|i| format!("s{i}")).collect(), &entries, 1.0)?;

    let gamma = 0.37;
    let enlarged = enlarge_chain(&chain, gamma)?;
    println!("gamma-enlargement with gamma = {gamma}: {} -> {} states", n, enlarged.n_states());

    let pi = chain.stationary()?;
    let pistar = enlarged.stationary()?;
    println!("stationary halves onto each copy: pi*(s0) = {:.6}, pi(s0)/2 = {:.6}", pistar.get(0), pi.get(0) / 2.0);

    let cap = capacity(&chain, &[0], &[n - 1])?.value;
    let cap_star = capacity(&enlarged, &[0], &[n - 1])?.value;
    println!("Cap*(A, B) = {cap_star:.10} vs Cap(A, B)/2 = {:.10}", cap / 2.0);

    let mut b_star: Vec<usize> = vec![n - 1];
    b_star.extend(n..2 * n);
    let cap_mixed = capacity(&enlarged, &[0], &b_star)?.value;
    let lower = 0.5 * (pi.get(0) * gamma + cap);
    println!("Cap*(A, B + E*) = {cap_mixed:.10} >= (pi(A) gamma + Cap)/2 = {lower:.10}");

    let back = trace_chain(&enlarged, &enlargement_original_indices(&enlarged))?;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((back.rate(i, j) - chain.rate(i, j)).abs());
        }
    }
    println!("trace of the enlargement restores the chain (worst rate gap {worst:.2e})");

    // the capacity route to short-time hitting probabilities
    println!("\nhitting probability bounds, target {{s4, s5}}:");
    println!("{:>6} {:>14} {:>14} {:>14}", "b", "exact", "e b Cap/pi", "boundary form");
    for &b in &[0.01, 0.05, 0.2, 0.8] {
        let bound = hitting_prob_bound(&chain, 0, &[4, 5], b)?;
        let exact = hitting_prob_exact_all(&chain, &[4, 5], b)?[0];
        println!(
            "{b:>6} {exact:>14.8} {:>14.8} {:>14.8}",
            bound.capacity_bound, bound.boundary_bound
        );
    }
    println!("(the capacity form dominates the exact value; slope e Cap/pi as b -> 0)");
    Ok(())
}
