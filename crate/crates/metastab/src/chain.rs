//! Finite continuous-time Markov chains and the exact linear-algebra
//! primitives everything else builds on: stationary distributions,
//! uniformized transients, total variation, occupation times.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::LuSolver;
use crate::numeric::{log_sum_exp, poisson_window};

/// Opaque state descriptor. Models format occupation vectors and lattice
/// points into these; the chain never interprets them.
pub type StateKey = String;

/// Longest uniformization series we accept before asking the caller to
/// sub-step (`lambda_max * t` beyond this raises `NonconvergentSeries`).
pub const UNIFORMIZATION_GUARD: f64 = 5e6;

/// Above this size the stationary solve abandons dense LU and requires the
/// detailed-balance route.
const DENSE_STATIONARY_LIMIT: usize = 2600;

/// A finite, continuous-time Markov chain with sparse jump rates.
///
/// Immutable after construction; all operations are pure functions, so
/// sharing across threads is safe. Rates are stored already multiplied by
/// `time_scale` (the chain is the speeded-up process when a model asks
/// for one).
#[derive(Debug, Clone)]
pub struct Chain {
    states: Arc<Vec<StateKey>>,
    index: Arc<HashMap<StateKey, usize>>,
    rows: Vec<Vec<(usize, f64)>>,
    holding: Vec<f64>,
    time_scale: f64,
    irreducible: bool,
    stationary_cache: OnceLock<Arc<Measure>>,
}

/// One rate entry (from, to, rate). Rates are per unit time, off-diagonal.
pub type RateEntry = (usize, usize, f64);

/// Build a chain from state keys and sparse rate entries.
///
/// Zero rates are dropped; `time_scale` multiplies every rate, realizing
/// the speeded-up process. Irreducibility is computed by graph search.
pub fn build_chain(states: Vec<StateKey>, entries: &[RateEntry], time_scale: f64) -> Result<Chain> {
    if states.len() < 2 {
        return Err(Error::EmptyStateSet(states.len()));
    }
    if !(time_scale > 0.0) || !time_scale.is_finite() {
        return Err(Error::ParameterOutOfRange(format!(
            "time_scale must be positive and finite, got {time_scale}"
        )));
    }
    let n = states.len();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut seen: std::collections::HashSet<(usize, usize)> = std::collections::HashSet::new();
    for &(i, j, r) in entries {
        if i >= n || j >= n {
            return Err(Error::StateOutOfRange { index: i.max(j), n });
        }
        if i == j {
            return Err(Error::DuplicateEntry { from: i, to: j });
        }
        if r < 0.0 || !r.is_finite() {
            return Err(Error::NegativeRate { from: i, to: j, rate: r });
        }
        if !seen.insert((i, j)) {
            return Err(Error::DuplicateEntry { from: i, to: j });
        }
        if r > 0.0 {
            rows[i].push((j, r * time_scale));
        }
    }
    for row in rows.iter_mut() {
        row.sort_unstable_by_key(|&(j, _)| j);
    }
    Ok(Chain::from_rows(states, rows, time_scale))
}

impl Chain {
    pub(crate) fn from_rows(states: Vec<StateKey>, rows: Vec<Vec<(usize, f64)>>, time_scale: f64) -> Chain {
        let holding: Vec<f64> = rows.iter().map(|r| r.iter().map(|&(_, v)| v).sum()).collect();
        let irreducible = strongly_connected(&rows);
        let index: HashMap<StateKey, usize> =
            states.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        Chain {
            states: Arc::new(states),
            index: Arc::new(index),
            rows,
            holding,
            time_scale,
            irreducible,
            stationary_cache: OnceLock::new(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[StateKey] {
        &self.states
    }

    pub fn key(&self, i: usize) -> &StateKey {
        &self.states[i]
    }

    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }

    /// Outgoing rate entries from `i`, sorted by target index.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(t, _)| t)
            .map(|p| self.rows[i][p].1)
            .unwrap_or(0.0)
    }

    /// Holding rate lambda(i) = sum_j R(i, j).
    pub fn holding(&self, i: usize) -> f64 {
        self.holding[i]
    }

    pub fn holding_rates(&self) -> &[f64] {
        &self.holding
    }

    pub fn max_holding(&self) -> f64 {
        self.holding.iter().cloned().fold(0.0, f64::max)
    }

    pub fn time_scale(&self) -> f64 {
        self.time_scale
    }

    pub fn is_irreducible(&self) -> bool {
        self.irreducible
    }

    pub fn n_edges(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }

    /// Row-sum consistency check (cached holding vs recomputed).
    pub fn verify_holding(&self, rel_tol: f64) -> bool {
        self.rows.iter().zip(&self.holding).all(|(row, &h)| {
            let s: f64 = row.iter().map(|&(_, v)| v).sum();
            (s - h).abs() <= rel_tol * h.max(1.0)
        })
    }

    /// y = v Q (distributions act on the left of the generator).
    pub fn apply_generator_left(&self, v: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|x| *x = 0.0);
        for (i, row) in self.rows.iter().enumerate() {
            let vi = v[i];
            if vi != 0.0 {
                for &(j, r) in row {
                    y[j] += vi * r;
                }
            }
            y[i] -= vi * self.holding[i];
        }
    }

    /// y = Q f (functions act on the right).
    pub fn apply_generator_right(&self, f: &[f64], y: &mut [f64]) {
        for (i, row) in self.rows.iter().enumerate() {
            let mut acc = 0.0;
            for &(j, r) in row {
                acc += r * (f[j] - f[i]);
            }
            y[i] = acc;
        }
    }

    /// Dense generator matrix Q (Q_ij = R(i,j), Q_ii = -lambda_i).
    pub fn generator_dense(&self) -> DMatrix<f64> {
        let n = self.n_states();
        let mut q = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, r) in row {
                q[(i, j)] = r;
            }
            q[(i, i)] = -self.holding[i];
        }
        q
    }

    /// Detailed balance against `mu` on every edge, relative tolerance.
    pub fn is_reversible(&self, mu: &[f64], rel_tol: f64) -> bool {
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, r) in row {
                let fwd = mu[i] * r;
                let bwd = mu[j] * self.rate(j, i);
                if (fwd - bwd).abs() > rel_tol * fwd.max(bwd).max(f64::MIN_POSITIVE) {
                    return false;
                }
            }
        }
        true
    }

    /// Unique stationary distribution (cached).
    ///
    /// Reversible chains are solved by the detailed-balance construction
    /// in log space (exact ratios, immune to the enormous weight ranges
    /// the landscape models produce); everything else goes through a
    /// direct LU with a replaced normalization row, up to a size
    /// threshold. Either route must pass the residual check
    /// |mu^T Q|_inf <= 1e-10 * max lambda.
    pub fn stationary(&self) -> Result<Arc<Measure>> {
        if !self.irreducible {
            return Err(Error::Reducible("stationary distribution is not unique".into()));
        }
        if let Some(m) = self.stationary_cache.get() {
            return Ok(m.clone());
        }
        let n = self.n_states();
        let tol = 1e-10 * self.max_holding();
        let measure = match self.stationary_reversible_log() {
            Some(m) if self.stationary_residual(m.weights()) <= tol => m,
            _ if n <= DENSE_STATIONARY_LIMIT => {
                let m = self.stationary_dense()?;
                let res = self.stationary_residual(m.weights());
                if res > tol {
                    return Err(Error::Reducible(format!(
                        "stationary solve residual {res:.3e} exceeds tolerance {tol:.3e}"
                    )));
                }
                m
            }
            _ => return Err(Error::StationarySolveTooLarge(n)),
        };
        let arc = Arc::new(measure);
        let _ = self.stationary_cache.set(arc.clone());
        Ok(self.stationary_cache.get().unwrap().clone())
    }

    pub fn stationary_residual(&self, mu: &[f64]) -> f64 {
        let mut y = vec![0.0; self.n_states()];
        self.apply_generator_left(mu, &mut y);
        y.iter().cloned().fold(0.0, |a, b| a.max(b.abs()))
    }

    fn stationary_dense(&self) -> Result<Measure> {
        let n = self.n_states();
        // solve A x = b with A = Q^T, last row replaced by ones
        let mut a = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, r) in row {
                a[(j, i)] = r;
            }
            a[(i, i)] = -self.holding[i];
        }
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        let mut b = vec![0.0; n];
        b[n - 1] = 1.0;
        let lu = LuSolver::new(a.clone())?;
        let mut x = lu.solve(&b)?;
        // one round of iterative refinement tightens the residual
        let ax = &a * nalgebra::DVector::from_column_slice(&x);
        let mut r = vec![0.0; n];
        for i in 0..n {
            r[i] = b[i] - ax[i];
        }
        let dx = lu.solve(&r)?;
        for i in 0..n {
            x[i] += dx[i];
            if x[i] < 0.0 {
                x[i] = 0.0;
            }
        }
        Measure::from_weights(x)?.into_normalized()
    }

    fn stationary_reversible_log(&self) -> Option<Measure> {
        let n = self.n_states();
        let mut logw = vec![f64::NAN; n];
        logw[0] = 0.0;
        let mut queue = std::collections::VecDeque::from([0usize]);
        let mut seen = vec![false; n];
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &(j, r) in &self.rows[i] {
                if !seen[j] {
                    let back = self.rate(j, i);
                    if back <= 0.0 {
                        return None; // one-directional edge: not reversible
                    }
                    logw[j] = logw[i] + (r / back).ln();
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        if seen.iter().any(|&s| !s) {
            return None;
        }
        Some(Measure::from_log_weights(logw))
    }

    /// Distribution of xi(t) started from `init`, by uniformization.
    ///
    /// Poisson-weighted powers of P = I + Q/Lambda with truncation tail
    /// below 1e-12; the result is renormalized.
    pub fn transient_distribution(&self, init: &Measure, t: f64) -> Result<Measure> {
        if init.len() != self.n_states() {
            return Err(Error::SupportMismatch(init.len(), self.n_states()));
        }
        if t < 0.0 {
            return Err(Error::ParameterOutOfRange(format!("time must be >= 0, got {t}")));
        }
        let v = self.uniformized_sum(init.weights(), t, false)?;
        Measure::from_weights(v)?.into_normalized()
    }

    /// e^{tQ} f — expected value of `f` at time t as a function of the
    /// starting state (backward/adjoint evolution, all starts at once).
    pub fn transient_expectation(&self, f: &[f64], t: f64) -> Result<Vec<f64>> {
        if f.len() != self.n_states() {
            return Err(Error::SupportMismatch(f.len(), self.n_states()));
        }
        if t < 0.0 {
            return Err(Error::ParameterOutOfRange(format!("time must be >= 0, got {t}")));
        }
        self.uniformized_sum(f, t, true)
    }

    /// Backward evolution evaluated on a strictly increasing time grid,
    /// reusing the previous point as the starting vector for the next.
    pub fn transient_expectation_grid(&self, f: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(times.len());
        let mut cur = f.to_vec();
        let mut last_t = 0.0;
        for &t in times {
            if t < last_t {
                return Err(Error::ParameterOutOfRange("time grid must be nondecreasing".into()));
            }
            cur = self.uniformized_sum(&cur, t - last_t, true)?;
            out.push(cur.clone());
            last_t = t;
        }
        Ok(out)
    }

    fn uniformized_sum(&self, v0: &[f64], t: f64, right: bool) -> Result<Vec<f64>> {
        let lambda = self.max_holding();
        let lt = lambda * t;
        if lt > UNIFORMIZATION_GUARD {
            return Err(Error::NonconvergentSeries(lt));
        }
        if lt == 0.0 {
            return Ok(v0.to_vec());
        }
        let window = poisson_window(lt, 1e-12);
        let n = self.n_states();
        let mut cur = v0.to_vec();
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
            self.uniformized_step(&cur, &mut next, lambda, right);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(out)
    }

    fn uniformized_step(&self, v: &[f64], y: &mut [f64], lambda: f64, right: bool) {
        let n = self.n_states();
        if right {
            for i in 0..n {
                let mut acc = (1.0 - self.holding[i] / lambda) * v[i];
                for &(j, r) in &self.rows[i] {
                    acc += r / lambda * v[j];
                }
                y[i] = acc;
            }
        } else {
            for i in 0..n {
                y[i] = (1.0 - self.holding[i] / lambda) * v[i];
            }
            for (i, row) in self.rows.iter().enumerate() {
                let vi = v[i];
                if vi != 0.0 {
                    for &(j, r) in row {
                        y[j] += vi * r / lambda;
                    }
                }
            }
        }
    }

    /// Expected time spent in `a_set` on [0, t], from `init`.
    ///
    /// Evaluated in closed form through the integrated uniformization
    /// series (exact to the series tail, well inside the 1e-8 * t contract).
    pub fn occupation_time(&self, init: &Measure, a_set: &[usize], t: f64) -> Result<f64> {
        if init.len() != self.n_states() {
            return Err(Error::SupportMismatch(init.len(), self.n_states()));
        }
        let all = self.occupation_time_all(a_set, t)?;
        Ok(init.weights().iter().zip(&all).map(|(w, o)| w * o).sum())
    }

    /// Expected occupation of `a_set` on [0, t] for every starting state.
    pub fn occupation_time_all(&self, a_set: &[usize], t: f64) -> Result<Vec<f64>> {
        if t < 0.0 {
            return Err(Error::ParameterOutOfRange(format!("time must be >= 0, got {t}")));
        }
        let n = self.n_states();
        let mut ind = vec![0.0; n];
        for &i in a_set {
            assert!(i < n, "occupation set index out of range");
            ind[i] = 1.0;
        }
        let lambda = self.max_holding();
        let lt = lambda * t;
        if lt > UNIFORMIZATION_GUARD {
            return Err(Error::NonconvergentSeries(lt));
        }
        if lt == 0.0 {
            // generator is zero or t = 0: occupation is t * indicator
            return Ok(ind.iter().map(|&x| x * t).collect());
        }
        // int_0^t poisson_k(Lambda s) ds = P[Pois(Lambda t) >= k+1] / Lambda
        let window = poisson_window(lt, 1e-13);
        let survival = window.survival_from();
        let mut cur = ind;
        let mut next = vec![0.0; n];
        let mut out = vec![0.0; n];
        for k in 0..=window.kmax {
            // P[Pois >= k+1]: ~1 below the window, suffix sums inside it,
            // and the sub-1e-13 mass above kmax is dropped with the tail
            let c = if k < window.kmin { 1.0 } else { survival[k - window.kmin] };
            if c > 0.0 {
                for i in 0..n {
                    out[i] += c / lambda * cur[i];
                }
            }
            if k == window.kmax {
                break;
            }
            self.uniformized_step(&cur, &mut next, lambda, true);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(out)
    }
}

fn strongly_connected(rows: &[Vec<(usize, f64)>]) -> bool {
    let n = rows.len();
    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, row) in rows.iter().enumerate() {
        for &(j, _) in row {
            rev[j].push(i);
        }
    }
    let reach = |start: usize, fwd: bool| -> usize {
        let mut seen = vec![false; n];
        seen[start] = true;
        let mut stack = vec![start];
        let mut count = 1;
        while let Some(i) = stack.pop() {
            if fwd {
                for &(j, _) in &rows[i] {
                    if !seen[j] {
                        seen[j] = true;
                        count += 1;
                        stack.push(j);
                    }
                }
            } else {
                for &j in &rev[i] {
                    if !seen[j] {
                        seen[j] = true;
                        count += 1;
                        stack.push(j);
                    }
                }
            }
        }
        count
    };
    reach(0, true) == n && reach(0, false) == n
}

/// Probability vector over a chain's states, optionally kept in log space
/// where weights span many orders of magnitude.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Measure {
    weights: Vec<f64>,
    log_weights: Option<Vec<f64>>,
    normalized: bool,
}

impl Measure {
    pub fn from_weights(weights: Vec<f64>) -> Result<Measure> {
        if let Some((i, &w)) = weights.iter().enumerate().find(|(_, &w)| w < 0.0 || !w.is_finite()) {
            return Err(Error::ParameterOutOfRange(format!(
                "measure weight {w} at index {i} is not a finite nonnegative number"
            )));
        }
        Ok(Measure { weights, log_weights: None, normalized: false })
    }

    /// Build from log weights; exponentiates after subtracting the maximum,
    /// so weights far below the peak underflow to zero gracefully while the
    /// log representation stays exact.
    pub fn from_log_weights(log_weights: Vec<f64>) -> Measure {
        let log_z = log_sum_exp(&log_weights);
        let norm_logs: Vec<f64> = log_weights.iter().map(|&l| l - log_z).collect();
        let weights: Vec<f64> = norm_logs.iter().map(|&l| l.exp()).collect();
        Measure { weights, log_weights: Some(norm_logs), normalized: true }
    }

    pub fn dirac(n: usize, at: usize) -> Measure {
        let mut w = vec![0.0; n];
        w[at] = 1.0;
        Measure { weights: w, log_weights: None, normalized: true }
    }

    pub fn uniform(n: usize) -> Measure {
        Measure {
            weights: vec![1.0 / n as f64; n],
            log_weights: None,
            normalized: true,
        }
    }

    pub fn into_normalized(mut self) -> Result<Measure> {
        let s: f64 = self.weights.iter().sum();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::ParameterOutOfRange(format!("measure mass {s} cannot be normalized")));
        }
        for w in self.weights.iter_mut() {
            *w /= s;
        }
        if let Some(lw) = self.log_weights.as_mut() {
            let ls = s.ln();
            for l in lw.iter_mut() {
                *l -= ls;
            }
        }
        self.normalized = true;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// Log weight, from the log representation when present.
    pub fn log_weight(&self, i: usize) -> f64 {
        match &self.log_weights {
            Some(lw) => lw[i],
            None => self.weights[i].ln(),
        }
    }

    pub fn log_weights(&self) -> Option<&[f64]> {
        self.log_weights.as_deref()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Total mass of a subset; uses log-sum-exp when logs are kept.
    pub fn mass_of(&self, subset: &[usize]) -> f64 {
        subset.iter().map(|&i| self.weights[i]).sum()
    }

    pub fn log_mass_of(&self, subset: &[usize]) -> f64 {
        match &self.log_weights {
            Some(lw) => log_sum_exp(&subset.iter().map(|&i| lw[i]).collect::<Vec<_>>()),
            None => self.mass_of(subset).ln(),
        }
    }

    /// The measure conditioned to `subset`, still indexed over the full
    /// state space (zeros outside the subset).
    pub fn conditioned(&self, subset: &[usize]) -> Result<Measure> {
        let mut w = vec![0.0; self.len()];
        for &i in subset {
            w[i] = self.weights[i];
        }
        let lw = self.log_weights.as_ref().map(|lw| {
            let log_m = self.log_mass_of(subset);
            let mut out = vec![f64::NEG_INFINITY; self.len()];
            for &i in subset {
                out[i] = lw[i] - log_m;
            }
            out
        });
        let mut m = Measure::from_weights(w)?.into_normalized()?;
        m.log_weights = lw;
        Ok(m)
    }

    /// Consistency checks from the type contract.
    pub fn validate(&self) -> Result<()> {
        if self.normalized {
            let s = self.mass();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::ParameterOutOfRange(format!(
                    "normalized measure sums to {s}, off by {:.3e}",
                    (s - 1.0).abs()
                )));
            }
        }
        if let Some(lw) = &self.log_weights {
            for (i, (&l, &w)) in lw.iter().zip(&self.weights).enumerate() {
                if l.is_finite() && w > 0.0 {
                    let rel = (l.exp() - w).abs() / w.max(f64::MIN_POSITIVE);
                    if rel > 1e-9 {
                        return Err(Error::ParameterOutOfRange(format!(
                            "log/linear weights disagree at index {i}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Total variation distance (1/2) sum |mu - nu| between measures on the
/// same support.
pub fn tv_distance(mu: &Measure, nu: &Measure) -> Result<f64> {
    if mu.len() != nu.len() {
        return Err(Error::SupportMismatch(mu.len(), nu.len()));
    }
    Ok(tv_distance_slices(mu.weights(), nu.weights()))
}

pub(crate) fn tv_distance_slices(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Piecewise-constant path: ordered visits with absolute entry/exit times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<Visit>,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Visit {
    pub state: usize,
    pub entry: f64,
    pub exit: f64,
}

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        for (k, v) in self.records.iter().enumerate() {
            if !(v.exit > v.entry) {
                return Err(Error::InvalidTrajectory(format!(
                    "record {k} has non-increasing times [{}, {}]",
                    v.entry, v.exit
                )));
            }
            if k > 0 {
                let prev = &self.records[k - 1];
                if (v.entry - prev.exit).abs() > 1e-12 * v.entry.abs().max(1.0) {
                    return Err(Error::InvalidTrajectory(format!(
                        "record {k} entry {} does not continue from exit {}",
                        v.entry, prev.exit
                    )));
                }
                if v.state == prev.state {
                    return Err(Error::InvalidTrajectory(format!(
                        "records {} and {k} repeat state {}",
                        k - 1,
                        v.state
                    )));
                }
            }
        }
        Ok(())
    }

    /// State occupied at time `t` (right-continuous), if within the path.
    pub fn state_at(&self, t: f64) -> Option<usize> {
        if self.records.is_empty() || t < self.records[0].entry || t > self.horizon {
            return None;
        }
        let pos = self
            .records
            .partition_point(|v| v.exit <= t)
            .min(self.records.len() - 1);
        Some(self.records[pos].state)
    }

    pub fn total_duration(&self) -> f64 {
        self.records.iter().map(|v| v.exit - v.entry).sum()
    }

    /// Time spent in `a_set` along the path.
    pub fn occupation_of(&self, a_set: &[bool]) -> f64 {
        self.records
            .iter()
            .filter(|v| a_set[v.state])
            .map(|v| v.exit - v.entry)
            .sum()
    }

    /// CSV rows (entry_time, exit_time, state_key).
    pub fn to_csv(&self, chain: &Chain) -> String {
        let mut out = String::from("entry_time,exit_time,state_key\n");
        for v in &self.records {
            out.push_str(&format!("{},{},{}\n", v.entry, v.exit, chain.key(v.state)));
        }
        out
    }

    pub fn from_csv(text: &str, chain: &Chain) -> Result<Trajectory> {
        let mut records = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            if ln == 0 || line.trim().is_empty() {
                continue;
            }
            let mut parts = line.splitn(3, ',');
            let entry: f64 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::InvalidTrajectory(format!("bad entry time on line {ln}")))?;
            let exit: f64 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::InvalidTrajectory(format!("bad exit time on line {ln}")))?;
            let key = parts
                .next()
                .ok_or_else(|| Error::InvalidTrajectory(format!("missing state on line {ln}")))?;
            let state = chain
                .index_of(key)
                .ok_or_else(|| Error::InvalidTrajectory(format!("unknown state `{key}`")))?;
            records.push(Visit { state, entry, exit });
        }
        let horizon = records.last().map(|v| v.exit).unwrap_or(0.0);
        let t = Trajectory { records, horizon };
        t.validate()?;
        Ok(t)
    }
}

#[derive(Serialize, Deserialize)]
struct ChainJson {
    states: Vec<StateKey>,
    rates: Vec<(usize, usize, f64)>,
    time_scale: f64,
}

impl Chain {
    /// JSON document {states, rates, time_scale}. The stored rates are the
    /// effective (already speeded) ones, so the round trip is bit-faithful;
    /// `time_scale` is bookkeeping and is not re-applied on load.
    pub fn to_json(&self) -> String {
        let rates: Vec<(usize, usize, f64)> = self
            .rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&(j, r)| (i, j, r)))
            .collect();
        serde_json::to_string_pretty(&ChainJson {
            states: self.states.as_ref().clone(),
            rates,
            time_scale: self.time_scale,
        })
        .expect("chain serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Chain> {
        let parsed: ChainJson = serde_json::from_str(text)?;
        let n = parsed.states.len();
        if n < 2 {
            return Err(Error::EmptyStateSet(n));
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut seen = std::collections::HashSet::new();
        for (i, j, r) in parsed.rates {
            if i >= n || j >= n {
                return Err(Error::StateOutOfRange { index: i.max(j), n });
            }
            if i == j || !seen.insert((i, j)) {
                return Err(Error::DuplicateEntry { from: i, to: j });
            }
            if r < 0.0 || !r.is_finite() {
                return Err(Error::NegativeRate { from: i, to: j, rate: r });
            }
            if r > 0.0 {
                rows[i].push((j, r));
            }
        }
        for row in rows.iter_mut() {
            row.sort_unstable_by_key(|&(j, _)| j);
        }
        Ok(Chain::from_rows(parsed.states, rows, parsed.time_scale))
    }
}
