//! Event-driven Monte Carlo (Gillespie) with reproducible, counter-based
//! randomness, plus the empirical estimators used to cross-check the exact
//! solvers on state spaces too large for transients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

use crate::chain::{Chain, Trajectory, Visit};
use crate::error::{Error, Result};
use crate::metastability::Partition;
use crate::reductions::trace_surgery;

/// Simulation parameters. `seed` and the path index fully determine each
/// path: the RNG is ChaCha8 keyed by the seed with one stream per path, so
/// results are identical across platforms and worker counts.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SimConfig {
    pub seed: u64,
    pub paths: usize,
    pub horizon: f64,
}

/// The per-path generator: ChaCha8 seeded by `cfg.seed`, stream = path index.
pub fn path_rng(cfg: &SimConfig, path_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(path_index as u64);
    rng
}

/// One embedded-chain jump from `state` (used by tests and estimators).
pub fn step_jump(chain: &Chain, state: usize, rng: &mut ChaCha8Rng) -> usize {
    let lambda = chain.holding(state);
    let u: f64 = rng.gen::<f64>() * lambda;
    let mut acc = 0.0;
    let row = chain.row(state);
    for &(j, r) in row {
        acc += r;
        if u < acc {
            return j;
        }
    }
    row.last().expect("no outgoing rates").0
}

fn exponential(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.gen::<f64>();
    let u = if u <= 0.0 { f64::MIN_POSITIVE } else { u };
    -u.ln() / rate
}

/// Simulate one path up to the horizon. Draw order is fixed (holding time,
/// then jump target), so the path is a pure function of the RNG stream.
pub fn gillespie_path(chain: &Chain, init: usize, horizon: f64, rng: &mut ChaCha8Rng) -> Trajectory {
    let mut records: Vec<Visit> = Vec::new();
    let mut state = init;
    let mut t = 0.0;
    while t < horizon {
        let lambda = chain.holding(state);
        if lambda <= 0.0 {
            records.push(Visit { state, entry: t, exit: horizon });
            break;
        }
        let dwell = exponential(rng, lambda);
        let exit = (t + dwell).min(horizon);
        records.push(Visit { state, entry: t, exit });
        t += dwell;
        if t >= horizon {
            break;
        }
        state = step_jump(chain, state, rng);
    }
    Trajectory { records, horizon }
}

/// Simulate `cfg.paths` independent paths from `init`. Paths are produced
/// in index order regardless of the worker count.
pub fn gillespie(chain: &Chain, init: usize, cfg: &SimConfig) -> Vec<Trajectory> {
    (0..cfg.paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(cfg, p);
            gillespie_path(chain, init, cfg.horizon, &mut rng)
        })
        .collect()
}

/// Point estimate with a binomial/std-error bar.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
}

impl Estimate {
    pub fn binomial(count: usize, n: usize) -> Estimate {
        let p = count as f64 / n as f64;
        Estimate { value: p, std_error: (p * (1.0 - p) / n as f64).sqrt(), n }
    }
}

/// Empirical finite-dimensional distributions of the projected chain:
/// frequencies of label tuples (Phi(xi(t_1)), ..., Phi(xi(t_k))).
///
/// The map covers every observed tuple; estimates over all tuples sum to
/// one exactly.
pub fn empirical_fdd(
    paths: &[Trajectory],
    partition: &Partition,
    times: &[f64],
) -> Result<BTreeMap<Vec<usize>, Estimate>> {
    if paths.is_empty() {
        return Err(Error::ParameterOutOfRange("no paths supplied".into()));
    }
    for p in paths {
        if times.iter().any(|&t| t > p.horizon) {
            return Err(Error::TimesBeyondHorizon);
        }
    }
    let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for p in paths {
        let tuple: Vec<usize> = times
            .iter()
            .map(|&t| {
                let s = p.state_at(t).expect("time within horizon");
                partition.phi(s)
            })
            .collect();
        *counts.entry(tuple).or_insert(0) += 1;
    }
    let n = paths.len();
    Ok(counts
        .into_iter()
        .map(|(k, c)| (k, Estimate::binomial(c, n)))
        .collect())
}

/// Exit-time statistics for one well, measured in trace time (the clock
/// that skips sojourns outside the wells) with the wall-clock time kept
/// alongside. Includes a plug-in exponentiality diagnostic: the sup
/// distance between the empirical law of exit/mean and 1 - e^{-u}.
#[derive(Debug, Clone, Serialize)]
pub struct ExitLaw {
    pub trace_times: Vec<f64>,
    pub wall_times: Vec<f64>,
    pub mean: Estimate,
    /// sup_u |F_hat(u * mean) - (1 - e^{-u})|
    pub exp_diagnostic: f64,
    pub n_exits: usize,
    pub n_paths: usize,
}

pub fn empirical_exit_law(
    paths: &[Trajectory],
    partition: &Partition,
    well: usize,
) -> Result<ExitLaw> {
    let label = well + 1;
    let union_mask = partition.wells_mask();
    let mut trace_times = Vec::new();
    let mut wall_times = Vec::new();
    for p in paths {
        let first = match p.records.first() {
            Some(v) => v.state,
            None => continue,
        };
        if partition.phi(first) != label {
            return Err(Error::ParameterOutOfRange(
                "exit-law paths must start inside the chosen well".into(),
            ));
        }
        let surgered = trace_surgery(p, &union_mask);
        let exit = surgered
            .records
            .iter()
            .find(|v| partition.phi(v.state) != label)
            .map(|v| v.entry);
        if let Some(te) = exit {
            trace_times.push(te);
            // wall time: first moment the original path enters another well
            let wall = p
                .records
                .iter()
                .find(|v| {
                    let l = partition.phi(v.state);
                    l != 0 && l != label
                })
                .map(|v| v.entry)
                .unwrap_or(p.horizon);
            wall_times.push(wall);
        }
    }
    if trace_times.is_empty() {
        return Err(Error::NoExitsObserved);
    }
    let n = trace_times.len();
    let mean_val = trace_times.iter().sum::<f64>() / n as f64;
    let var = trace_times.iter().map(|&t| (t - mean_val).powi(2)).sum::<f64>() / n as f64;
    let mean = Estimate { value: mean_val, std_error: (var / n as f64).sqrt(), n };

    let mut sorted = trace_times.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut sup = 0.0f64;
    for (i, &t) in sorted.iter().enumerate() {
        let u = t / mean_val;
        let cdf = 1.0 - (-u).exp();
        let lo = i as f64 / n as f64;
        let hi = (i + 1) as f64 / n as f64;
        sup = sup.max((cdf - lo).abs()).max((cdf - hi).abs());
    }
    Ok(ExitLaw {
        trace_times,
        wall_times,
        mean,
        exp_diagnostic: sup,
        n_exits: n,
        n_paths: paths.len(),
    })
}
