//! Potential theory on a chain: capacities with variational bounds,
//! equilibrium potentials and measures, spectral gaps, relaxation and
//! mixing times, and the capacity-based hitting-time bounds.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::chain::{tv_distance_slices, Chain, Measure};
use crate::error::{Error, Result};
use crate::linalg::{smallest_eigen_spd, sym_eigen};
use crate::reductions::{killed_survival, AbsorptionSolver};

/// Mixing times use the 1/(2e) threshold unless the caller overrides it.
pub const DEFAULT_MIXING_THRESHOLD: f64 = 1.0 / (2.0 * std::f64::consts::E);

/// Relative tolerance for the edge-wise detailed-balance test.
pub const REVERSIBILITY_TOL: f64 = 1e-12;

/// Dense eigensolves are used up to this many states; larger reversible
/// chains go through shift-inverted subspace iteration.
pub const DENSE_EIGEN_LIMIT: usize = 2000;

/// Capacity between two disjoint sets, with the equilibrium potential,
/// the equilibrium measure on A, and (for reversible chains) the
/// Dirichlet/Thomson bounds evaluated at the harmonic optimizers.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CapacityResult {
    pub value: f64,
    /// Equilibrium potential V_{A,B} on the full state space: 1 on A, 0 on B.
    pub potential: Vec<f64>,
    /// Equilibrium measure, full-length with support on A.
    pub equilibrium_measure: Measure,
    /// Dirichlet form of the potential; reversible chains only.
    pub dirichlet_upper: Option<f64>,
    /// Thomson energy of the harmonic unit flow, inverted; reversible only.
    pub thomson_lower: Option<f64>,
    pub reversible: bool,
    pub a_set: Vec<usize>,
    pub b_set: Vec<usize>,
}

/// Spectral gap and the times derived from it.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SpectralResult {
    pub gap: f64,
    pub relaxation_time: f64,
    /// Filled by `mixing_time`-style searches when requested.
    pub mixing_time: Option<f64>,
    /// False when the gap refers to the additive symmetrization.
    pub reversible: bool,
}

fn normalize_sets(chain: &Chain, a_set: &[usize], b_set: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = chain.n_states();
    let mut a: Vec<usize> = a_set.to_vec();
    let mut b: Vec<usize> = b_set.to_vec();
    a.sort_unstable();
    a.dedup();
    b.sort_unstable();
    b.dedup();
    if a.is_empty() || b.is_empty() {
        return Err(Error::Overlap);
    }
    if a.iter().any(|&i| i >= n) || b.iter().any(|&i| i >= n) {
        return Err(Error::StateOutOfRange { index: n, n });
    }
    let bset: std::collections::HashSet<usize> = b.iter().copied().collect();
    if a.iter().any(|i| bset.contains(i)) {
        return Err(Error::Overlap);
    }
    Ok((a, b))
}

/// Equilibrium potential `V(x) = P_x[H_A < H_B]`: 1 on A, 0 on B, harmonic
/// in between (one shared factorization).
pub fn equilibrium_potential(chain: &Chain, a: &[usize], b: &[usize]) -> Result<Vec<f64>> {
    let n = chain.n_states();
    let mut absorbing = vec![false; n];
    for &i in a.iter().chain(b) {
        absorbing[i] = true;
    }
    let mut v = vec![0.0; n];
    for &i in a {
        v[i] = 1.0;
    }
    let solver = AbsorptionSolver::new(chain, &absorbing)?;
    if !solver.transient.is_empty() {
        let mut rhs = vec![0.0; solver.transient.len()];
        for (l, &g) in solver.transient.iter().enumerate() {
            let into_a: f64 = a.iter().map(|&t| chain.rate(g, t)).sum();
            rhs[l] = -into_a;
        }
        let sol = solver.solve(&rhs)?;
        for (l, &g) in solver.transient.iter().enumerate() {
            v[g] = sol[l].clamp(0.0, 1.0);
        }
    }
    Ok(v)
}

/// Capacity Cap(A, B) = sum_{eta in A} mu(eta) lambda(eta) P_eta[H_B < H+_A],
/// with escape probabilities read off the equilibrium potential by one-step
/// decomposition. For reversible chains the Dirichlet form of the potential
/// is computed as an independent cross-check and the harmonic flow gives
/// the (tight) Thomson lower bound.
pub fn capacity(chain: &Chain, a_set: &[usize], b_set: &[usize]) -> Result<CapacityResult> {
    if !chain.is_irreducible() {
        return Err(Error::Reducible("capacity needs an irreducible chain".into()));
    }
    let (a, b) = normalize_sets(chain, a_set, b_set)?;
    let mu = chain.stationary()?;
    let v = equilibrium_potential(chain, &a, &b)?;
    let n = chain.n_states();
    let mut in_a = vec![false; n];
    for &i in &a {
        in_a[i] = true;
    }
    let mut in_b = vec![false; n];
    for &i in &b {
        in_b[i] = true;
    }

    // escape(eta) = sum_xi R(eta, xi) * P_xi[H_B < H_A] (u = 1 on B, 0 on A)
    let mut value = 0.0;
    let mut eq_weights = vec![0.0; n];
    for &eta in &a {
        let mut flux = 0.0;
        for &(xi, r) in chain.row(eta) {
            let u = if in_b[xi] {
                1.0
            } else if in_a[xi] {
                0.0
            } else {
                1.0 - v[xi]
            };
            flux += r * u;
        }
        let contribution = mu.get(eta) * flux;
        eq_weights[eta] = contribution;
        value += contribution;
    }
    let equilibrium_measure = Measure::from_weights(eq_weights)?.into_normalized()?;

    let reversible = chain.is_reversible(mu.weights(), REVERSIBILITY_TOL);
    let (dirichlet_upper, thomson_lower) = if reversible {
        let d = dirichlet_form(chain, mu.weights(), &v);
        // Thomson energy of the harmonic unit flow phi = c * grad(V) / Cap
        let mut energy = 0.0;
        for i in 0..n {
            for &(j, r) in chain.row(i) {
                if i < j {
                    let c = mu.get(i) * r;
                    let f = c * (v[i] - v[j]) / value;
                    if c > 0.0 {
                        energy += f * f / c;
                    }
                }
            }
        }
        (Some(d), Some(1.0 / energy))
    } else {
        (None, None)
    };

    Ok(CapacityResult {
        value,
        potential: v,
        equilibrium_measure,
        dirichlet_upper,
        thomson_lower,
        reversible,
        a_set: a,
        b_set: b,
    })
}

/// Dirichlet form D(f) = (1/2) sum mu(eta) R(eta,xi) [f(xi)-f(eta)]^2.
pub fn dirichlet_form(chain: &Chain, mu: &[f64], f: &[f64]) -> f64 {
    let mut d = 0.0;
    for i in 0..chain.n_states() {
        for &(j, r) in chain.row(i) {
            let diff = f[j] - f[i];
            d += 0.5 * mu[i] * r * diff * diff;
        }
    }
    d
}

/// Dirichlet upper bound on the capacity from a test function that is 1 on
/// A and 0 on B. Reversible chains only.
pub fn dirichlet_bound(chain: &Chain, a_set: &[usize], b_set: &[usize], f: &[f64]) -> Result<f64> {
    let (a, b) = normalize_sets(chain, a_set, b_set)?;
    let mu = chain.stationary()?;
    if let Some((i, j)) = find_irreversible_edge(chain, mu.weights()) {
        return Err(Error::NotReversible(i, j));
    }
    for &s in &a {
        if (f[s] - 1.0).abs() > 1e-12 {
            return Err(Error::BoundaryViolation { state: s, expected: 1.0, got: f[s] });
        }
    }
    for &s in &b {
        if f[s].abs() > 1e-12 {
            return Err(Error::BoundaryViolation { state: s, expected: 0.0, got: f[s] });
        }
    }
    Ok(dirichlet_form(chain, mu.weights(), f))
}

fn find_irreversible_edge(chain: &Chain, mu: &[f64]) -> Option<(usize, usize)> {
    for i in 0..chain.n_states() {
        for &(j, r) in chain.row(i) {
            let fwd = mu[i] * r;
            let bwd = mu[j] * chain.rate(j, i);
            if (fwd - bwd).abs() > REVERSIBILITY_TOL * fwd.max(bwd).max(f64::MIN_POSITIVE) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Antisymmetric edge flow, stored on canonical (low, high) pairs.
#[derive(Debug, Clone, Default)]
pub struct Flow {
    entries: BTreeMap<(usize, usize), f64>,
}

impl Flow {
    pub fn new() -> Flow {
        Flow::default()
    }

    /// Add `v` units of flow along the directed edge (i, j).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert_ne!(i, j, "flow needs distinct endpoints");
        if i < j {
            *self.entries.entry((i, j)).or_insert(0.0) += v;
        } else {
            *self.entries.entry((j, i)).or_insert(0.0) -= v;
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i < j {
            self.entries.get(&(i, j)).copied().unwrap_or(0.0)
        } else {
            -self.entries.get(&(j, i)).copied().unwrap_or(0.0)
        }
    }

    /// Unit flow along a path of states.
    pub fn unit_path(path: &[usize]) -> Flow {
        let mut f = Flow::new();
        for w in path.windows(2) {
            f.add(w[0], w[1], 1.0);
        }
        f
    }

    /// The harmonic unit current of a capacity computation.
    pub fn harmonic(chain: &Chain, cap: &CapacityResult) -> Result<Flow> {
        let mu = chain.stationary()?;
        let mut f = Flow::new();
        for i in 0..chain.n_states() {
            for &(j, r) in chain.row(i) {
                if i < j {
                    let c = mu.get(i) * r;
                    let phi = c * (cap.potential[i] - cap.potential[j]) / cap.value;
                    if phi != 0.0 {
                        f.add(i, j, phi);
                    }
                }
            }
        }
        Ok(f)
    }

    fn divergence(&self, n: usize) -> Vec<f64> {
        let mut div = vec![0.0; n];
        for (&(i, j), &v) in &self.entries {
            div[i] += v;
            div[j] -= v;
        }
        div
    }
}

/// Thomson lower bound 1 / sum_e flow(e)^2 / c(e) from a unit flow A -> B.
/// The flow must be divergence-free off A and B and push net flux one out
/// of A; both are checked at 1e-10.
pub fn thomson_bound(chain: &Chain, a_set: &[usize], b_set: &[usize], flow: &Flow) -> Result<f64> {
    let (a, b) = normalize_sets(chain, a_set, b_set)?;
    let mu = chain.stationary()?;
    if let Some((i, j)) = find_irreversible_edge(chain, mu.weights()) {
        return Err(Error::NotReversible(i, j));
    }
    let n = chain.n_states();
    let mut special = vec![0u8; n];
    for &i in &a {
        special[i] = 1;
    }
    for &i in &b {
        special[i] = 2;
    }
    let div = flow.divergence(n);
    for (i, &d) in div.iter().enumerate() {
        if special[i] == 0 && d.abs() > 1e-10 {
            return Err(Error::NotAFlow(format!("divergence {d:.3e} at interior state {i}")));
        }
    }
    let out_a: f64 = a.iter().map(|&i| div[i]).sum();
    if (out_a - 1.0).abs() > 1e-10 {
        return Err(Error::NotAFlow(format!("net flux out of A is {out_a}, expected 1")));
    }
    let mut energy = 0.0;
    for (&(i, j), &v) in &flow.entries {
        if v == 0.0 {
            continue;
        }
        let c = mu.get(i) * chain.rate(i, j);
        if c <= 0.0 {
            return Err(Error::NotAFlow(format!("flow on the non-edge ({i}, {j})")));
        }
        energy += v * v / c;
    }
    if energy <= 0.0 {
        return Err(Error::NotAFlow("flow carries no energy".into()));
    }
    Ok(1.0 / energy)
}

/// Off-diagonal entries of the mu-symmetrized generator
/// M_ij = R(i,j) sqrt(mu_i / mu_j); symmetric exactly when reversible.
fn symmetrized_entries(chain: &Chain, mu: &[f64]) -> Vec<Vec<(usize, f64)>> {
    let sqrt_mu: Vec<f64> = mu.iter().map(|&m| m.sqrt()).collect();
    (0..chain.n_states())
        .map(|i| {
            chain
                .row(i)
                .iter()
                .map(|&(j, r)| (j, r * sqrt_mu[i] / sqrt_mu[j]))
                .collect()
        })
        .collect()
}

/// Additive symmetrization: rates (mu_i R_ij + mu_j R_ji) / (2 mu_i),
/// reversible with the same stationary measure.
pub fn additive_symmetrization(chain: &Chain) -> Result<Chain> {
    let mu = chain.stationary()?;
    let n = chain.n_states();
    let mut entries = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let r = (mu.get(i) * chain.rate(i, j) + mu.get(j) * chain.rate(j, i)) / (2.0 * mu.get(i));
            if r > 0.0 {
                entries.push((i, j, r));
            }
        }
    }
    crate::chain::build_chain(chain.states().to_vec(), &entries, 1.0)
}

/// Spectral gap: the smallest nonzero eigenvalue of -Q in the mu-weighted
/// inner product. Reversible chains are solved exactly (dense symmetric up
/// to `DENSE_EIGEN_LIMIT`, shift-inverted iteration beyond); non-reversible
/// input is symmetrized additively and flagged.
pub fn spectral_gap(chain: &Chain) -> Result<SpectralResult> {
    if !chain.is_irreducible() {
        return Err(Error::Reducible("spectral gap needs an irreducible chain".into()));
    }
    let mu = chain.stationary()?;
    let reversible = chain.is_reversible(mu.weights(), REVERSIBILITY_TOL);
    let (work, mu) = if reversible {
        (chain.clone(), mu)
    } else {
        let sym = additive_symmetrization(chain)?;
        let mu_sym = sym.stationary()?;
        (sym, mu_sym)
    };
    let n = work.n_states();
    let gap = if n <= DENSE_EIGEN_LIMIT {
        let m = symmetrized_dense(&work, mu.weights());
        let eig = sym_eigen(m);
        // eigenvalues of -M ascending: [~0, gap, ...]
        eig.values[1].max(0.0)
    } else {
        let entries = symmetrized_entries(&work, mu.weights());
        let holding = work.holding_rates().to_vec();
        let c = 2.2 * work.max_holding();
        let w: Vec<f64> = mu.weights().iter().map(|&m| m.sqrt()).collect();
        let apply = move |x: &[f64], y: &mut [f64]| {
            let wx: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
            for (i, row) in entries.iter().enumerate() {
                let mut acc = holding[i] * x[i] + c * w[i] * wx;
                for &(j, s) in row {
                    acc -= s * x[j];
                }
                y[i] = acc;
            }
        };
        let diag: Vec<f64> = (0..n)
            .map(|i| work.holding(i) + c * mu.get(i))
            .collect();
        smallest_eigen_spd(apply, n, &diag, 4, 1e-11, 400)
    };
    Ok(SpectralResult { gap, relaxation_time: 1.0 / gap, mixing_time: None, reversible })
}

/// -M as a dense symmetric matrix (for the dense eigensolve).
fn symmetrized_dense(chain: &Chain, mu: &[f64]) -> DMatrix<f64> {
    let n = chain.n_states();
    let entries = symmetrized_entries(chain, mu);
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in entries.iter().enumerate() {
        for &(j, s) in row {
            m[(i, j)] -= s;
        }
        m[(i, i)] = chain.holding(i);
    }
    // exact symmetry for the solver
    let mt = m.transpose();
    (m + mt) * 0.5
}

pub fn relaxation_time(chain: &Chain) -> Result<f64> {
    Ok(spectral_gap(chain)?.relaxation_time)
}

/// Worst-case total variation to stationarity as a function of time, with
/// two evaluation routes: spectral (reversible, exact per time point) and
/// per-start uniformization for small non-reversible chains.
pub struct TvEvaluator {
    route: TvRoute,
    mu: Vec<f64>,
}

enum TvRoute {
    Eigen {
        // columns: eigenvectors of the symmetrized -M, eigenvalues ascending
        lambdas: Vec<f64>,
        phi: DMatrix<f64>,
        sqrt_mu: Vec<f64>,
    },
    Direct,
}

impl TvEvaluator {
    pub fn new(chain: &Chain) -> Result<TvEvaluator> {
        let mu = chain.stationary()?;
        // route choice tolerates solver-level detailed-balance noise
        // (trace chains carry it); a 1e-9 asymmetry perturbs the spectral
        // route at the same order, well inside the search resolution
        let reversible = chain.is_reversible(mu.weights(), 1e-9);
        let n = chain.n_states();
        if reversible && n <= DENSE_EIGEN_LIMIT.max(2500) {
            let m = symmetrized_dense(chain, mu.weights());
            let eig = sym_eigen(m);
            let sqrt_mu: Vec<f64> = mu.weights().iter().map(|&x| x.sqrt()).collect();
            Ok(TvEvaluator {
                route: TvRoute::Eigen { lambdas: eig.values, phi: eig.vectors, sqrt_mu },
                mu: mu.weights().to_vec(),
            })
        } else if n <= 400 {
            Ok(TvEvaluator { route: TvRoute::Direct, mu: mu.weights().to_vec() })
        } else {
            Err(Error::ProductTooLarge(n))
        }
    }

    /// TV(delta_eta S(t), mu) for the chosen starting states.
    pub fn tv_from(&self, chain: &Chain, starts: &[usize], t: f64) -> Result<Vec<f64>> {
        match &self.route {
            TvRoute::Eigen { lambdas, phi, sqrt_mu } => {
                let n = self.mu.len();
                // keep the modes that can still contribute at time t
                let mut kept: Vec<(f64, usize)> = Vec::new();
                for (k, &l) in lambdas.iter().enumerate().skip(1) {
                    let decay = (-l.max(0.0) * t).exp();
                    if decay > 1e-17 {
                        kept.push((decay, k));
                    }
                }
                let mut out = Vec::with_capacity(starts.len());
                let mut dev = vec![0.0; n];
                for &eta in starts {
                    dev.iter_mut().for_each(|d| *d = 0.0);
                    for &(decay, k) in &kept {
                        let coeff = decay * phi[(eta, k)] / sqrt_mu[eta];
                        if coeff == 0.0 {
                            continue;
                        }
                        for z in 0..n {
                            dev[z] += coeff * phi[(z, k)] * sqrt_mu[z];
                        }
                    }
                    out.push(0.5 * dev.iter().map(|d| d.abs()).sum::<f64>());
                }
                Ok(out)
            }
            TvRoute::Direct => {
                let mut out = Vec::with_capacity(starts.len());
                for &eta in starts {
                    let d = chain.transient_distribution(&Measure::dirac(self.mu.len(), eta), t)?;
                    out.push(tv_distance_slices(d.weights(), &self.mu));
                }
                Ok(out)
            }
        }
    }

    pub fn max_tv(&self, chain: &Chain, t: f64) -> Result<f64> {
        let all: Vec<usize> = (0..self.mu.len()).collect();
        Ok(self
            .tv_from(chain, &all, t)?
            .into_iter()
            .fold(0.0, f64::max))
    }
}

/// Mixing time: the smallest t with max_eta TV(delta_eta S(t), mu) below
/// the threshold, found by doubling from 1/max(lambda) and 40 bisections.
/// A non-monotone TV profile switches to a linear scan and is flagged.
pub fn mixing_time_detailed(chain: &Chain, threshold: f64) -> Result<(f64, bool)> {
    if !chain.is_irreducible() {
        return Err(Error::Reducible("mixing time needs an irreducible chain".into()));
    }
    let ev = TvEvaluator::new(chain)?;
    if ev.max_tv(chain, 0.0)? <= threshold {
        return Ok((0.0, false));
    }
    let t0 = 1.0 / chain.max_holding();
    let mut t = t0;
    let mut prev_tv = f64::INFINITY;
    let mut monotone = true;
    let mut lo = 0.0;
    let mut hi = None;
    for _ in 0..200 {
        let tv = ev.max_tv(chain, t)?;
        if tv > prev_tv + 1e-12 {
            monotone = false;
        }
        prev_tv = tv;
        if tv <= threshold {
            hi = Some(t);
            break;
        }
        lo = t;
        t *= 2.0;
    }
    let mut hi = hi.ok_or(Error::NonconvergentSeries(t))?;
    if !monotone {
        // first-crossing scan at ~1e-3 relative resolution
        let step = hi / 2048.0;
        let mut s = step;
        while s < hi {
            if ev.max_tv(chain, s)? <= threshold {
                return Ok((s, true));
            }
            s += step;
        }
        return Ok((hi, true));
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if ev.max_tv(chain, mid)? <= threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((0.5 * (lo + hi), false))
}

pub fn mixing_time(chain: &Chain, threshold: f64) -> Result<f64> {
    Ok(mixing_time_detailed(chain, threshold)?.0)
}

/// Capacity-based bound on P_eta[H_A <= b] (hitting before a deterministic
/// time): e b Cap(eta, A) / pi(eta), clipped at one, together with the
/// coarser exterior-boundary form reported alongside it.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct HittingBound {
    pub capacity: f64,
    /// min(1, e * b * Cap(eta, A) / pi(eta))
    pub capacity_bound: f64,
    /// (e * b / 2 pi(eta)) * sum_{xi in boundary} pi(xi) R(xi, A)
    pub boundary_bound: f64,
}

pub fn hitting_prob_bound(chain: &Chain, eta: usize, a_set: &[usize], b: f64) -> Result<HittingBound> {
    if a_set.contains(&eta) {
        return Err(Error::EtaInA);
    }
    if !(b > 0.0) {
        return Err(Error::ParameterOutOfRange(format!("time bound must be positive, got {b}")));
    }
    let mu = chain.stationary()?;
    let cap = capacity(chain, &[eta], a_set)?.value;
    let e = std::f64::consts::E;
    let capacity_bound = (e * b * cap / mu.get(eta)).min(1.0);

    // exterior boundary: states outside A reachable in one jump from A
    let n = chain.n_states();
    let mut in_a = vec![false; n];
    for &i in a_set {
        in_a[i] = true;
    }
    let mut boundary = vec![false; n];
    for &i in a_set {
        for &(j, r) in chain.row(i) {
            if !in_a[j] && mu.get(i) * r > 0.0 {
                boundary[j] = true;
            }
        }
    }
    let mut boundary_sum = 0.0;
    for (xi, &is_b) in boundary.iter().enumerate() {
        if is_b {
            let into_a: f64 = a_set.iter().map(|&z| chain.rate(xi, z)).sum();
            boundary_sum += mu.get(xi) * into_a;
        }
    }
    let boundary_bound = e * b / (2.0 * mu.get(eta)) * boundary_sum;
    Ok(HittingBound { capacity: cap, capacity_bound, boundary_bound })
}

/// Exact P_eta[H_A <= b] for every starting state (absorbing uniformization
/// oracle route, exposed because several checkers compare against it).
pub fn hitting_prob_exact_all(chain: &Chain, a_set: &[usize], b: f64) -> Result<Vec<f64>> {
    crate::reductions::hitting_cdf_all(chain, a_set, b)
}

/// The three-term bound on P_eta[xi(s) in D] for a well and a disjoint
/// probe set D: exit probability by time T, reflected-semigroup TV at T,
/// and the stationary mass ratio, together with the exact left side.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct WellEscapeBound {
    pub exit_term: f64,
    pub tv_term: f64,
    pub ratio_term: f64,
    pub bound: f64,
    pub exact: f64,
    /// Whether the conditioned measure is stationary for the reflected
    /// chain (exact under reversibility; checked, not assumed).
    pub conditioned_is_stationary: bool,
}

pub fn lemma_l06_bound(
    chain: &Chain,
    eta: usize,
    well: &[usize],
    delta_set: &[usize],
    t_reflect: f64,
    s: f64,
) -> Result<WellEscapeBound> {
    if !(t_reflect > 0.0 && t_reflect < s) {
        return Err(Error::ParameterOutOfRange(format!(
            "need 0 < T < s, got T={t_reflect}, s={s}"
        )));
    }
    if !well.contains(&eta) {
        return Err(Error::ParameterOutOfRange("eta must lie in the well".into()));
    }
    let n = chain.n_states();
    let mut in_well = vec![false; n];
    for &i in well {
        in_well[i] = true;
    }
    if delta_set.iter().any(|&i| in_well[i]) {
        return Err(Error::Overlap);
    }
    let mu = chain.stationary()?;

    // P_eta[H_{well^c} <= T]
    let complement: Vec<bool> = in_well.iter().map(|&w| !w).collect();
    let exit_term = 1.0 - killed_survival(chain, &complement, t_reflect)?[eta];

    // reflected semigroup TV at T against the conditioned measure
    let (tv_term, conditioned_is_stationary) = if well.len() == 1 {
        (0.0, true)
    } else {
        let reflected = crate::reductions::reflected_chain(chain, well)?;
        let mut sorted = well.to_vec();
        sorted.sort_unstable();
        let eta_local = sorted.iter().position(|&g| g == eta).unwrap();
        let mass: f64 = sorted.iter().map(|&g| mu.get(g)).sum();
        let cond: Vec<f64> = sorted.iter().map(|&g| mu.get(g) / mass).collect();
        let dist = reflected.transient_distribution(&Measure::dirac(sorted.len(), eta_local), t_reflect)?;
        let tv = tv_distance_slices(dist.weights(), &cond);
        let stat = reflected.stationary_residual(&cond) <= 1e-9 * reflected.max_holding().max(1.0);
        (tv, stat)
    };

    let ratio_term = mu.mass_of(delta_set) / mu.mass_of(well);

    // exact left side
    let mut ind = vec![0.0; n];
    for &i in delta_set {
        ind[i] = 1.0;
    }
    let exact = chain.transient_expectation(&ind, s)?[eta];

    Ok(WellEscapeBound {
        exit_term,
        tv_term,
        ratio_term,
        bound: exit_term + tv_term + ratio_term,
        exact,
        conditioned_is_stationary,
    })
}
