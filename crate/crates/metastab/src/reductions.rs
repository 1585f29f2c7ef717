//! The three chain surgeries — trace on a subset, reflection in a subset,
//! gamma-enlargement — plus the shared absorbing/harmonic solver and the
//! path-level trace surgery.

use nalgebra::DMatrix;

use crate::chain::{build_chain, Chain, Measure, Trajectory, Visit};
use crate::error::{Error, Result};
use crate::linalg::LuSolver;

/// Hitting data from one source state against a target set.
#[derive(Debug, Clone)]
pub struct HittingProfile {
    pub source: usize,
    /// Target states in the order given to `hitting_profile`.
    pub target_set: Vec<usize>,
    /// Distribution of the entry state, indexed like `target_set`.
    pub absorb_probs: Measure,
    pub mean_time: f64,
}

/// Shared factorization of the sub-generator on the complement of an
/// absorbing set. One LU, reused for every harmonic extension and for the
/// mean hitting times.
pub struct AbsorptionSolver {
    /// Global indices of the transient (non-absorbed) states.
    pub transient: Vec<usize>,
    local_of: Vec<Option<usize>>,
    lu: Option<LuSolver>,
}

impl AbsorptionSolver {
    /// `absorbing[i]` marks the states where the chain is stopped.
    pub fn new(chain: &Chain, absorbing: &[bool]) -> Result<AbsorptionSolver> {
        let n = chain.n_states();
        assert_eq!(absorbing.len(), n);
        let transient: Vec<usize> = (0..n).filter(|&i| !absorbing[i]).collect();
        let mut local_of = vec![None; n];
        for (l, &g) in transient.iter().enumerate() {
            local_of[g] = Some(l);
        }
        let m = transient.len();
        if m == 0 {
            return Ok(AbsorptionSolver { transient, local_of, lu: None });
        }
        let mut q = DMatrix::zeros(m, m);
        for (l, &g) in transient.iter().enumerate() {
            for &(j, r) in chain.row(g) {
                if let Some(lj) = local_of[j] {
                    q[(l, lj)] = r;
                }
            }
            q[(l, l)] = -chain.holding(g);
        }
        let lu = LuSolver::new(q).map_err(|_| {
            Error::Reducible("absorbing set unreachable from part of the complement".into())
        })?;
        Ok(AbsorptionSolver { transient, local_of, lu: Some(lu) })
    }

    pub fn local_index(&self, global: usize) -> Option<usize> {
        self.local_of[global]
    }

    /// h(x) = P_x[chain enters the absorbing set at `target`], on the
    /// transient states (local indexing).
    pub fn entry_distribution(&self, chain: &Chain, target: usize) -> Result<Vec<f64>> {
        let lu = match &self.lu {
            Some(lu) => lu,
            None => return Ok(Vec::new()),
        };
        let mut rhs = vec![0.0; self.transient.len()];
        for (l, &g) in self.transient.iter().enumerate() {
            rhs[l] = -chain.rate(g, target);
        }
        lu.solve(&rhs)
    }

    /// Expected hitting times of the absorbing set, on the transient states.
    pub fn mean_times(&self) -> Result<Vec<f64>> {
        let lu = match &self.lu {
            Some(lu) => lu,
            None => return Ok(Vec::new()),
        };
        let rhs = vec![-1.0; self.transient.len()];
        lu.solve(&rhs)
    }

    /// Solve Q_DD x = rhs directly (harmonic systems with custom data).
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match &self.lu {
            Some(lu) => lu.solve(rhs),
            None => Ok(Vec::new()),
        }
    }
}

/// Absorption probabilities and mean hitting time from one source.
pub fn hitting_profile(chain: &Chain, source: usize, target_set: &[usize]) -> Result<HittingProfile> {
    let n = chain.n_states();
    if target_set.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut absorbing = vec![false; n];
    for &i in target_set {
        absorbing[i] = true;
    }
    if absorbing.iter().all(|&a| a) {
        return Err(Error::TargetIsWholeSpace);
    }
    if !chain.is_irreducible() {
        return Err(Error::Reducible("hitting profile needs an irreducible chain".into()));
    }
    if absorbing[source] {
        let k = target_set.iter().position(|&s| s == source).unwrap();
        return Ok(HittingProfile {
            source,
            target_set: target_set.to_vec(),
            absorb_probs: Measure::dirac(target_set.len(), k),
            mean_time: 0.0,
        });
    }
    let solver = AbsorptionSolver::new(chain, &absorbing)?;
    let src_local = solver.local_index(source).unwrap();
    let mut probs = vec![0.0; target_set.len()];
    for (k, &target) in target_set.iter().enumerate() {
        let reachable = solver
            .transient
            .iter()
            .any(|&g| chain.rate(g, target) > 0.0);
        if reachable {
            let h = solver.entry_distribution(chain, target)?;
            probs[k] = h[src_local];
        }
    }
    let mean = solver.mean_times()?[src_local];
    Ok(HittingProfile {
        source,
        target_set: target_set.to_vec(),
        absorb_probs: Measure::from_weights(probs)?.into_normalized()?,
        mean_time: mean,
    })
}

/// P_eta[H_target <= t] for every starting state, by uniformization of the
/// chain killed on the target (states already in the target get 1).
pub fn hitting_cdf_all(chain: &Chain, target: &[usize], t: f64) -> Result<Vec<f64>> {
    let n = chain.n_states();
    let mut absorbing = vec![false; n];
    for &i in target {
        absorbing[i] = true;
    }
    let survival = killed_survival(chain, &absorbing, t)?;
    Ok((0..n)
        .map(|i| if absorbing[i] { 1.0 } else { 1.0 - survival[i] })
        .collect())
}

/// `P_eta[H_absorbing > t]` on the full index space (0 on the absorbing set).
pub fn killed_survival(chain: &Chain, absorbing: &[bool], t: f64) -> Result<Vec<f64>> {
    let n = chain.n_states();
    let lambda = chain.max_holding();
    let lt = lambda * t;
    if lt > crate::chain::UNIFORMIZATION_GUARD {
        return Err(Error::NonconvergentSeries(lt));
    }
    let mut cur: Vec<f64> = (0..n).map(|i| if absorbing[i] { 0.0 } else { 1.0 }).collect();
    if lt == 0.0 {
        return Ok(cur);
    }
    let window = crate::numeric::poisson_window(lt, 1e-12);
    let mut next = vec![0.0; n];
    let mut out = vec![0.0; n];
    for k in 0..=window.kmax {
        let w = window.weight(k);
        if w > 0.0 {
            for i in 0..n {
                out[i] += w * cur[i];
            }
        }
        if k == window.kmax {
            break;
        }
        for i in 0..n {
            if absorbing[i] {
                next[i] = 0.0;
                continue;
            }
            let mut acc = (1.0 - chain.holding(i) / lambda) * cur[i];
            for &(j, r) in chain.row(i) {
                if !absorbing[j] {
                    acc += r / lambda * cur[j];
                }
            }
            next[i] = acc;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(out)
}

/// Trace of the chain on `a_set`: sojourns outside are excised and their
/// exit distributions folded into augmented jump rates
/// R^T(eta, zeta) = R(eta, zeta) + sum_{xi outside} R(eta, xi) P_xi[enter at zeta].
///
/// One factorization of the sub-generator on the complement is shared by
/// all boundary targets.
pub fn trace_chain(chain: &Chain, a_set: &[usize]) -> Result<Chain> {
    let n = chain.n_states();
    if a_set.is_empty() {
        return Err(Error::EmptySubset);
    }
    if !chain.is_irreducible() {
        return Err(Error::Reducible("trace needs an irreducible chain".into()));
    }
    let mut sorted: Vec<usize> = a_set.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() == n {
        return Ok(chain.clone());
    }

    let mut in_a = vec![false; n];
    for &i in &sorted {
        in_a[i] = true;
    }
    let local: std::collections::HashMap<usize, usize> =
        sorted.iter().enumerate().map(|(l, &g)| (g, l)).collect();
    let solver = AbsorptionSolver::new(chain, &in_a)?;

    // targets reachable in one step from the complement
    let mut is_entry = vec![false; sorted.len()];
    for &g in &solver.transient {
        for &(j, _) in chain.row(g) {
            if in_a[j] {
                is_entry[local[&j]] = true;
            }
        }
    }
    let mut entry_dists: Vec<Option<Vec<f64>>> = vec![None; sorted.len()];
    for (l, &flag) in is_entry.iter().enumerate() {
        if flag {
            entry_dists[l] = Some(solver.entry_distribution(chain, sorted[l])?);
        }
    }

    let m = sorted.len();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    for (l, &eta) in sorted.iter().enumerate() {
        let mut row = vec![0.0; m];
        for &(j, r) in chain.row(eta) {
            if in_a[j] {
                row[local[&j]] += r;
            } else {
                let xi_local = solver.local_index(j).unwrap();
                for (lz, dist) in entry_dists.iter().enumerate() {
                    if let Some(h) = dist {
                        if lz != l {
                            row[lz] += r * h[xi_local];
                        }
                    }
                }
            }
        }
        rows[l] = row
            .into_iter()
            .enumerate()
            .filter(|&(lz, v)| lz != l && v > 0.0)
            .collect();
    }

    let states: Vec<_> = sorted.iter().map(|&g| chain.key(g).clone()).collect();
    let traced = Chain::from_rows(states, rows, chain.time_scale());
    if !traced.is_irreducible() {
        return Err(Error::Reducible("trace chain is reducible".into()));
    }
    verify_trace_stationarity(chain, &traced, &sorted)?;
    Ok(traced)
}

/// Post-condition of the trace construction: its stationary law is the
/// original one conditioned to the subset (tolerance 1e-9).
fn verify_trace_stationarity(chain: &Chain, traced: &Chain, sorted: &[usize]) -> Result<()> {
    let mu = chain.stationary()?;
    let cond: Vec<f64> = {
        let mass: f64 = sorted.iter().map(|&g| mu.get(g)).sum();
        sorted.iter().map(|&g| mu.get(g) / mass).collect()
    };
    let res = traced.stationary_residual(&cond);
    let tol = 1e-9 * traced.max_holding().max(1.0);
    if res > tol {
        return Err(Error::Reducible(format!(
            "trace stationarity check failed: residual {res:.3e} > {tol:.3e}"
        )));
    }
    Ok(())
}

/// Chain reflected in `a_set`: every rate leaving the set is deleted.
/// Fails with `ReducibleReflection` when the induced graph is not strongly
/// connected — the signal that this well choice breaks the assumption.
pub fn reflected_chain(chain: &Chain, a_set: &[usize]) -> Result<Chain> {
    let n = chain.n_states();
    if a_set.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut sorted: Vec<usize> = a_set.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() == n {
        return Ok(chain.clone());
    }
    if sorted.len() < 2 {
        return Err(Error::EmptyStateSet(sorted.len()));
    }
    let local: std::collections::HashMap<usize, usize> =
        sorted.iter().enumerate().map(|(l, &g)| (g, l)).collect();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); sorted.len()];
    for (l, &g) in sorted.iter().enumerate() {
        for &(j, r) in chain.row(g) {
            if let Some(&lj) = local.get(&j) {
                rows[l].push((lj, r));
            }
        }
    }
    let states: Vec<_> = sorted.iter().map(|&g| chain.key(g).clone()).collect();
    let reflected = Chain::from_rows(states, rows, chain.time_scale());
    if !reflected.is_irreducible() {
        return Err(Error::ReducibleReflection);
    }
    Ok(reflected)
}

/// Suffix marking the mirrored copy in a gamma-enlargement.
pub const ENLARGED_SUFFIX: &str = "*";

/// Gamma-enlargement: a mirrored copy of the state space, each state
/// connected to its copy at rate gamma both ways, no rates inside the copy.
pub fn enlarge_chain(chain: &Chain, gamma: f64) -> Result<Chain> {
    if !(gamma > 0.0) {
        return Err(Error::NonpositiveGamma(gamma));
    }
    if !chain.is_irreducible() {
        return Err(Error::Reducible("enlargement needs an irreducible chain".into()));
    }
    let n = chain.n_states();
    let mut states: Vec<String> = chain.states().to_vec();
    states.extend(chain.states().iter().map(|k| format!("{k}{ENLARGED_SUFFIX}")));
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..n {
        for &(j, r) in chain.row(i) {
            entries.push((i, j, r));
        }
        entries.push((i, n + i, gamma));
        entries.push((n + i, i, gamma));
    }
    build_chain(states, &entries, 1.0)
}

/// Indices of the original states inside an enlargement built by
/// `enlarge_chain` (they come first).
pub fn enlargement_original_indices(enlarged: &Chain) -> Vec<usize> {
    (0..enlarged.n_states() / 2).collect()
}

/// Path surgery: excise the sojourns outside `a_mask` and re-glue time.
/// Consecutive visits to the same state (created by excision) are merged;
/// the empty trajectory comes back if the path never visits the set.
pub fn trace_surgery(trajectory: &Trajectory, a_mask: &[bool]) -> Trajectory {
    let mut records: Vec<Visit> = Vec::new();
    let mut clock = 0.0;
    for v in &trajectory.records {
        if !a_mask[v.state] {
            continue;
        }
        let dur = v.exit - v.entry;
        match records.last_mut() {
            Some(last) if last.state == v.state && (last.exit - clock).abs() < 1e-15 => {
                last.exit += dur;
            }
            _ => {
                records.push(Visit { state: v.state, entry: clock, exit: clock + dur });
            }
        }
        clock += dur;
    }
    Trajectory { records, horizon: clock }
}
