//! Shared generators for the integration suites: seeded random chains,
//! partitions, and small statistical helpers.
#![allow(dead_code)] // each test binary uses its own subset

use metastab::chain::{build_chain, Chain};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random irreducible chain with a guaranteed directed ring plus random
/// extra edges.
pub fn random_chain(n: usize, rng: &mut ChaCha8Rng) -> Chain {
    let states: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let mut entries = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && (j == (i + 1) % n || rng.gen_bool(0.45)) {
                entries.push((i, j, rng.gen_range(0.05..2.0)));
            }
        }
    }
    build_chain(states, &entries, 1.0).expect("random chain builds")
}

/// Random reversible chain from weights and conductances (detailed balance
/// holds by construction up to roundoff).
pub fn random_reversible_chain(n: usize, rng: &mut ChaCha8Rng) -> Chain {
    let states: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let mut entries = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if j == i + 1 || rng.gen_bool(0.45) {
                let c: f64 = rng.gen_range(0.1..2.0);
                entries.push((i, j, c / w[i]));
                entries.push((j, i, c / w[j]));
            }
        }
    }
    build_chain(states, &entries, 1.0).expect("random reversible chain builds")
}

/// Two random disjoint nonempty subsets of {0, .., n-1}.
pub fn random_disjoint_sets(n: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    loop {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for i in 0..n {
            match rng.gen_range(0..4) {
                0 => a.push(i),
                1 => b.push(i),
                _ => {}
            }
        }
        if !a.is_empty() && !b.is_empty() && a.len() + b.len() < n {
            return (a, b);
        }
    }
}

/// Chi-square 99% critical values for df = 1..=8.
pub const CHI2_99: [f64; 8] = [6.635, 9.210, 11.345, 13.277, 15.086, 16.812, 18.475, 20.090];
