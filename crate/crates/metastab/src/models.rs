//! Generators for the four example families: condensing zero-range,
//! inclusion, random walk in a potential field, and the singular-graph
//! random walk. Each returns the speeded-up chain, the well partition,
//! and the time scale, with the closed-form stationary measure verified
//! against the generator at build time.

use serde::{Deserialize, Serialize};

use crate::chain::{Chain, Measure, StateKey};
use crate::error::{Error, Result};
use crate::metastability::Partition;
use crate::numeric::ln_gamma;

/// Hard cap on generated state spaces.
pub const STATE_SPACE_GUARD: usize = 5_000_000;

/// A generated model instance: the theta-speeded chain, the partition from
/// the construction, the time scale, the closed-form stationary measure,
/// and any regime warnings.
#[derive(Debug, Clone)]
pub struct ModelInstance {
    pub chain: Chain,
    pub partition: Partition,
    pub theta: f64,
    pub stationary: Measure,
    pub reversible: bool,
    pub log_z: f64,
    pub warnings: Vec<String>,
}

/// Family plus parameters, loadable from TOML or JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    ZeroRange { l: usize, n: usize, alpha: f64, p: f64, ell: usize },
    Inclusion { l: usize, n: usize, d: f64 },
    PotentialWalk { potential: NamedPotential, n: usize, kappa: f64 },
    SingularGraph { n: usize, d: usize, ell: usize, m: usize },
}

impl ModelSpec {
    pub fn from_toml(text: &str) -> Result<ModelSpec> {
        toml::from_str(text).map_err(|e| Error::SpecParseError(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<ModelSpec> {
        serde_json::from_str(text).map_err(|e| Error::SpecParseError(e.to_string()))
    }

    pub fn build(&self) -> Result<ModelInstance> {
        match *self {
            ModelSpec::ZeroRange { l, n, alpha, p, ell } => zero_range(l, n, alpha, p, ell),
            ModelSpec::Inclusion { l, n, d } => inclusion(l, n, d),
            ModelSpec::PotentialWalk { ref potential, n, kappa } => {
                let grid = potential.sample(n)?;
                potential_walk(&grid, n, kappa)
            }
            ModelSpec::SingularGraph { n, d, ell, m } => singular_graph(n, d, ell, m),
        }
    }

    /// Copy with the size parameter replaced; size-coupled parameters
    /// (ell, d) follow their standard schedules. Used by the sweep driver.
    pub fn with_size(&self, size: usize) -> ModelSpec {
        let mut out = self.clone();
        match &mut out {
            ModelSpec::ZeroRange { n, ell, .. } => {
                *n = size;
                *ell = (size / 4).max(1);
            }
            ModelSpec::Inclusion { n, d, .. } => {
                *n = size;
                *d = 1.0 / (size as f64).ln().powi(2);
            }
            ModelSpec::PotentialWalk { n, .. } => *n = size,
            ModelSpec::SingularGraph { n, ell, m, .. } => {
                *n = size;
                *ell = (size / 4).max(1);
                *m = (size / 3).max(*ell + 1);
            }
        }
        out
    }
}

/// Built-in potentials for the lattice walk, named so specs stay data.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum NamedPotential {
    /// F(x) = (x^2 - 1)^2 on (-bound, bound); two equal-depth wells.
    DoubleWell1d { bound: f64 },
    /// F(x, y) = (x^2 - 1)^2 + a y^2 on (-bound, bound)^2.
    DoubleWell2d { bound: f64, a: f64 },
}

impl NamedPotential {
    pub fn sample(&self, n: usize) -> Result<PotentialGrid> {
        match *self {
            NamedPotential::DoubleWell1d { bound } => {
                PotentialGrid::sample(&[(-bound, bound)], n, |x| {
                    let v = x[0] * x[0] - 1.0;
                    v * v
                })
            }
            NamedPotential::DoubleWell2d { bound, a } => {
                PotentialGrid::sample(&[(-bound, bound), (-bound, bound)], n, |x| {
                    let v = x[0] * x[0] - 1.0;
                    v * v + a * x[1] * x[1]
                })
            }
        }
    }
}

fn check_guard(count: usize) -> Result<()> {
    if count > STATE_SPACE_GUARD {
        Err(Error::StateSpaceTooLarge(count, STATE_SPACE_GUARD))
    } else {
        Ok(())
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// All compositions of `n` into `l` parts, enumerated in colexicographic
/// order (the reversed tuple compared lexicographically); the rank lookup
/// is a binary search with the same comparator, so indices are identical
/// across runs and platforms.
pub struct CompositionSpace {
    pub l: usize,
    pub n: usize,
    pub states: Vec<Vec<usize>>,
}

fn colex_cmp(a: &[usize], b: &[usize]) -> std::cmp::Ordering {
    for j in (0..a.len()).rev() {
        match a[j].cmp(&b[j]) {
            std::cmp::Ordering::Equal => continue,
            ord => return ord,
        }
    }
    std::cmp::Ordering::Equal
}

impl CompositionSpace {
    pub fn new(l: usize, n: usize) -> Result<CompositionSpace> {
        assert!(l >= 1);
        let count = binomial(n + l - 1, l - 1);
        check_guard(count)?;
        let mut states = Vec::with_capacity(count);
        let mut cur = vec![0usize; l];
        fn fill(states: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>, pos: usize, remaining: usize) {
            if pos + 1 == cur.len() {
                cur[pos] = remaining;
                states.push(cur.clone());
                return;
            }
            for k in 0..=remaining {
                cur[pos] = k;
                fill(states, cur, pos + 1, remaining - k);
            }
        }
        fill(&mut states, &mut cur, 0, n);
        states.sort_by(|a, b| colex_cmp(a, b));
        debug_assert_eq!(states.len(), count);
        Ok(CompositionSpace { l, n, states })
    }

    /// Index of a composition in the enumeration (the perfect-hash lookup).
    pub fn rank(&self, eta: &[usize]) -> usize {
        self.states
            .binary_search_by(|probe| colex_cmp(probe, eta))
            .expect("composition belongs to the space")
    }

    pub fn key(&self, eta: &[usize]) -> StateKey {
        eta.iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Particle moves on the torus as (from, to, weight of +1, weight of -1);
/// on the two-site torus both directions reach the same neighbor and their
/// weights add (this is what makes the condensed-state holding rate come
/// out at 2 N d for the inclusion process).
fn torus_moves(l: usize) -> Vec<(usize, usize, f64, f64)> {
    let mut moves = Vec::new();
    for x in 0..l {
        let right = (x + 1) % l;
        let left = (x + l - 1) % l;
        if right == left {
            moves.push((x, right, 1.0, 1.0));
        } else {
            moves.push((x, right, 1.0, 0.0));
            moves.push((x, left, 0.0, 1.0));
        }
    }
    moves
}

/// Condensing zero-range process on the torus with `l` sites and `n`
/// particles: a particle leaves a site with k particles at rate
/// g(k) = k^alpha / (k-1)^alpha (g(1) = 1), moving right with probability
/// p; the chain is speeded by theta = n^{1+alpha}. Wells collect the
/// configurations with all but `ell` particles on one site; the bottoms
/// are the fully condensed configurations.
pub fn zero_range(l: usize, n: usize, alpha: f64, p: f64, ell: usize) -> Result<ModelInstance> {
    if ell == 0 || 2 * ell >= n {
        return Err(Error::ParameterOutOfRange(format!("need 1 <= ell < n/2, got ell={ell}, n={n}")));
    }
    let (chain, stationary, theta, log_z, warnings) = zero_range_chain(l, n, alpha, p)?;
    let space = CompositionSpace::new(l, n)?;
    let mut wells: Vec<Vec<usize>> = vec![Vec::new(); l];
    let mut bottoms: Vec<Vec<usize>> = vec![Vec::new(); l];
    for (idx, eta) in space.states.iter().enumerate() {
        for x in 0..l {
            if eta[x] >= n - ell {
                wells[x].push(idx);
            }
            if eta[x] == n {
                bottoms[x].push(idx);
            }
        }
    }
    let partition = Partition::new(chain.n_states(), wells, Some(bottoms))?;
    let reversible = chain.is_reversible(stationary.weights(), 1e-12);
    Ok(ModelInstance { chain, partition, theta, stationary, reversible, log_z, warnings })
}

/// The zero-range chain, measure, and time scale without a well partition
/// (valid for any n >= 1, including sizes too small to carve wells).
pub fn zero_range_chain(
    l: usize,
    n: usize,
    alpha: f64,
    p: f64,
) -> Result<(Chain, Measure, f64, f64, Vec<String>)> {
    if l < 2 || n < 1 {
        return Err(Error::ParameterOutOfRange(format!("need l >= 2 and n >= 1, got l={l}, n={n}")));
    }
    if alpha < 1.0 - 1e-12 {
        return Err(Error::ParameterOutOfRange(format!("alpha must be >= 1, got {alpha}")));
    }
    if !(0.5..=1.0).contains(&p) {
        return Err(Error::ParameterOutOfRange(format!("p must lie in [1/2, 1], got {p}")));
    }
    let mut warnings = Vec::new();
    if alpha <= 1.0 + 1e-12 {
        warnings.push("alpha = 1 sits on the boundary of the condensation regime".to_string());
    }

    let space = CompositionSpace::new(l, n)?;
    let theta = (n as f64).powf(1.0 + alpha);
    let g = |k: usize| -> f64 {
        match k {
            0 => 0.0,
            1 => 1.0,
            _ => (k as f64).powf(alpha) / ((k - 1) as f64).powf(alpha),
        }
    };
    let moves = torus_moves(l);
    let mut entries = Vec::new();
    for (idx, eta) in space.states.iter().enumerate() {
        let mut row: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
        for &(x, y, wr, wl) in &moves {
            if eta[x] == 0 {
                continue;
            }
            let weight = wr * p + wl * (1.0 - p);
            if weight == 0.0 {
                continue;
            }
            let mut target = eta.clone();
            target[x] -= 1;
            target[y] += 1;
            let j = space.rank(&target);
            *row.entry(j).or_insert(0.0) += g(eta[x]) * weight;
        }
        for (j, r) in row {
            entries.push((idx, j, r));
        }
    }
    let states: Vec<StateKey> = space.states.iter().map(|e| space.key(e)).collect();
    let chain = crate::chain::build_chain(states, &entries, theta)?;

    // closed form: mu(eta) proportional to prod_x a(eta_x)^{-1}, a(k) = k^alpha
    let log_a = |k: usize| -> f64 {
        if k == 0 {
            0.0
        } else {
            alpha * (k as f64).ln()
        }
    };
    let log_weights: Vec<f64> = space
        .states
        .iter()
        .map(|eta| -eta.iter().map(|&k| log_a(k)).sum::<f64>())
        .collect();
    let log_z = crate::numeric::log_sum_exp(&log_weights);
    let stationary = Measure::from_log_weights(log_weights);
    verify_generated_stationarity(&chain, &stationary)?;
    Ok((chain, stationary, theta, log_z, warnings))
}

/// Reversible inclusion process: a particle moves from x to a neighbor y
/// at rate eta_x (d + eta_y); the chain is speeded by theta = 1/d. The
/// wells are the fully condensed singletons (which also serve as bottoms).
pub fn inclusion(l: usize, n: usize, d: f64) -> Result<ModelInstance> {
    if l < 2 || n < 1 {
        return Err(Error::ParameterOutOfRange(format!("need l >= 2 and n >= 1, got l={l}, n={n}")));
    }
    if !(d > 0.0) {
        return Err(Error::ParameterOutOfRange(format!("d must be positive, got {d}")));
    }
    let mut warnings = Vec::new();
    if d * (n as f64).ln() > 1.0 {
        warnings.push(format!(
            "condensation regime wants d log n small; here d log n = {:.3}",
            d * (n as f64).ln()
        ));
    }
    let space = CompositionSpace::new(l, n)?;
    let theta = 1.0 / d;
    let moves = torus_moves(l);
    let mut entries = Vec::new();
    for (idx, eta) in space.states.iter().enumerate() {
        let mut row: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
        for &(x, y, wr, wl) in &moves {
            if eta[x] == 0 {
                continue;
            }
            let weight = wr + wl; // r(1) = r(-1) = 1
            let mut target = eta.clone();
            target[x] -= 1;
            target[y] += 1;
            let j = space.rank(&target);
            *row.entry(j).or_insert(0.0) += (eta[x] as f64) * (d + eta[y] as f64) * weight;
        }
        for (j, r) in row {
            entries.push((idx, j, r));
        }
    }
    let states: Vec<StateKey> = space.states.iter().map(|e| space.key(e)).collect();
    let chain = crate::chain::build_chain(states, &entries, theta)?;

    // closed form: prod_x w(eta_x), w(k) = Gamma(k + d) / (k! Gamma(d))
    let log_w = |k: usize| -> f64 { ln_gamma(k as f64 + d) - ln_gamma(k as f64 + 1.0) - ln_gamma(d) };
    let log_weights: Vec<f64> = space
        .states
        .iter()
        .map(|eta| eta.iter().map(|&k| log_w(k)).sum::<f64>())
        .collect();
    let log_z = crate::numeric::log_sum_exp(&log_weights);
    let stationary = Measure::from_log_weights(log_weights);
    verify_generated_stationarity(&chain, &stationary)?;

    let mut wells: Vec<Vec<usize>> = vec![Vec::new(); l];
    for (idx, eta) in space.states.iter().enumerate() {
        for x in 0..l {
            if eta[x] == n {
                wells[x].push(idx);
            }
        }
    }
    let bottoms = wells.clone();
    let partition = Partition::new(chain.n_states(), wells, Some(bottoms))?;
    let reversible = chain.is_reversible(stationary.weights(), 1e-12);
    Ok(ModelInstance { chain, partition, theta, stationary, reversible, log_z, warnings })
}

/// Potential values on the lattice (1/n) Z^d intersected with an open box.
pub struct PotentialGrid {
    pub dim: usize,
    /// integer lattice coordinates (point = coord / n)
    pub points: Vec<Vec<i64>>,
    pub values: Vec<f64>,
    pub n: usize,
    index: std::collections::HashMap<Vec<i64>, usize>,
}

impl PotentialGrid {
    /// Sample `f` on the lattice points strictly inside the box.
    pub fn sample(bounds: &[(f64, f64)], n: usize, f: impl Fn(&[f64]) -> f64) -> Result<PotentialGrid> {
        let dim = bounds.len();
        let mut ranges = Vec::with_capacity(dim);
        let mut count: usize = 1;
        for &(lo, hi) in bounds {
            if !(lo < hi) {
                return Err(Error::ParameterOutOfRange("empty potential domain".into()));
            }
            let a = (lo * n as f64).floor() as i64 + 1;
            let b = (hi * n as f64).ceil() as i64 - 1;
            if a > b {
                return Err(Error::ParameterOutOfRange("domain too narrow for the lattice".into()));
            }
            count = count.saturating_mul((b - a + 1) as usize);
            ranges.push((a, b));
        }
        check_guard(count)?;
        let mut points = Vec::with_capacity(count);
        let mut cur: Vec<i64> = ranges.iter().map(|&(a, _)| a).collect();
        'outer: loop {
            points.push(cur.clone());
            for k in 0..dim {
                cur[k] += 1;
                if cur[k] <= ranges[k].1 {
                    continue 'outer;
                }
                cur[k] = ranges[k].0;
            }
            break;
        }
        let values: Vec<f64> = points
            .iter()
            .map(|p| {
                let x: Vec<f64> = p.iter().map(|&c| c as f64 / n as f64).collect();
                f(&x)
            })
            .collect();
        let index = points.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
        Ok(PotentialGrid { dim, points, values, n, index })
    }

    pub fn index_of(&self, point: &[i64]) -> Option<usize> {
        self.index.get(point).copied()
    }

    fn neighbor(&self, i: usize, axis: usize, step: i64) -> Option<usize> {
        let mut p = self.points[i].clone();
        p[axis] += step;
        self.index.get(&p).copied()
    }
}

/// Declared critical points (lattice coordinates) that override detection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalPoints {
    pub m1: Vec<i64>,
    pub m2: Vec<i64>,
    pub saddle: Vec<i64>,
}

/// Random walk in a potential field with detected critical points; see
/// [`potential_walk_with`] for the declared-points variant.
pub fn potential_walk(grid: &PotentialGrid, n: usize, kappa: f64) -> Result<ModelInstance> {
    potential_walk_with(grid, n, kappa, None)
}

/// Random walk in a potential field: rates e^{-(n/2)[F(xi) - F(eta)]} on
/// lattice edges, speeded by theta = 2 pi n e^{(H - h) n} with h the well
/// depth and H the saddle height located by a union-find sweep over level
/// sets (declared locations override detection). Wells are the kappa-balls
/// around the minima; bottoms the minima themselves.
pub fn potential_walk_with(
    grid: &PotentialGrid,
    n: usize,
    kappa: f64,
    declared: Option<&CriticalPoints>,
) -> Result<ModelInstance> {
    if !(kappa > 0.0) {
        return Err(Error::ParameterOutOfRange(format!("kappa must be positive, got {kappa}")));
    }
    let m = grid.points.len();
    let mut warnings = Vec::new();

    let (m1, m2, big_h) = match declared {
        Some(cp) => {
            let locate = |p: &[i64]| {
                grid.index_of(p)
                    .ok_or_else(|| Error::SaddleNotFound(format!("declared point {p:?} is off the grid")))
            };
            let m1 = locate(&cp.m1)?;
            let m2 = locate(&cp.m2)?;
            let saddle = locate(&cp.saddle)?;
            (m1, m2, grid.values[saddle])
        }
        None => {
            // discrete local minima and the boundary audit (no minimum may
            // sit against the domain boundary)
            let mut minima = Vec::new();
            for i in 0..m {
                let mut is_min = true;
                let mut boundary = false;
                for axis in 0..grid.dim {
                    for step in [-1i64, 1] {
                        match grid.neighbor(i, axis, step) {
                            Some(j) => {
                                if grid.values[j] < grid.values[i] {
                                    is_min = false;
                                }
                            }
                            None => boundary = true,
                        }
                    }
                }
                if is_min {
                    if boundary {
                        return Err(Error::NonSmoothBoundary(format!("{:?}", grid.points[i])));
                    }
                    minima.push(i);
                }
            }
            if minima.len() != 2 {
                return Err(Error::SaddleNotFound(format!(
                    "expected exactly two interior minima, found {}",
                    minima.len()
                )));
            }
            let (m1, m2) = (minima[0], minima[1]);

            // saddle height by the lowest-crossing sweep: activate points in
            // increasing F-order in a union-find until the minima connect
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| grid.values[a].partial_cmp(&grid.values[b]).unwrap());
            let mut parent: Vec<usize> = (0..m).collect();
            fn find(parent: &mut [usize], i: usize) -> usize {
                let mut root = i;
                while parent[root] != root {
                    root = parent[root];
                }
                let mut cur = i;
                while parent[cur] != root {
                    let next = parent[cur];
                    parent[cur] = root;
                    cur = next;
                }
                root
            }
            let mut active = vec![false; m];
            let mut saddle = None;
            for &i in &order {
                active[i] = true;
                for axis in 0..grid.dim {
                    for step in [-1i64, 1] {
                        if let Some(j) = grid.neighbor(i, axis, step) {
                            if active[j] {
                                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                                if ri != rj {
                                    parent[ri] = rj;
                                }
                            }
                        }
                    }
                }
                if find(&mut parent, m1) == find(&mut parent, m2) {
                    saddle = Some(i);
                    break;
                }
            }
            let saddle =
                saddle.ok_or_else(|| Error::SaddleNotFound("minima never connect inside the domain".into()))?;
            let big_h = grid.values[saddle];
            if big_h <= grid.values[m1].max(grid.values[m2]) {
                return Err(Error::SaddleNotFound("saddle is not above the wells".into()));
            }
            (m1, m2, big_h)
        }
    };

    let h = grid.values[m1].min(grid.values[m2]);
    if (grid.values[m1] - grid.values[m2]).abs() > 1e-9 {
        warnings.push(format!(
            "wells are not equal depth: F(m1) = {}, F(m2) = {}",
            grid.values[m1], grid.values[m2]
        ));
    }

    let nf = n as f64;
    let theta = 2.0 * std::f64::consts::PI * nf * ((big_h - h) * nf).exp();

    let mut entries = Vec::new();
    for i in 0..m {
        for axis in 0..grid.dim {
            for step in [-1i64, 1] {
                if let Some(j) = grid.neighbor(i, axis, step) {
                    let rate = (-(nf / 2.0) * (grid.values[j] - grid.values[i])).exp();
                    entries.push((i, j, rate));
                }
            }
        }
    }
    let states: Vec<StateKey> = grid
        .points
        .iter()
        .map(|p| p.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","))
        .collect();
    let chain = crate::chain::build_chain(states, &entries, theta)?;

    let log_weights: Vec<f64> = grid.values.iter().map(|&f| -nf * f).collect();
    let log_z = crate::numeric::log_sum_exp(&log_weights);
    let stationary = Measure::from_log_weights(log_weights);
    verify_generated_stationarity(&chain, &stationary)?;

    // wells: lattice kappa-balls around the minima
    let dist = |i: usize, j: usize| -> f64 {
        grid.points[i]
            .iter()
            .zip(&grid.points[j])
            .map(|(&a, &b)| ((a - b) as f64 / nf).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let mut wells: Vec<Vec<usize>> = vec![Vec::new(); 2];
    for i in 0..m {
        for (w, &c) in [m1, m2].iter().enumerate() {
            if dist(i, c) <= kappa {
                if grid.values[i] >= big_h && declared.is_none() {
                    return Err(Error::ParameterOutOfRange(
                        "kappa too large: the well ball reaches the saddle height".into(),
                    ));
                }
                wells[w].push(i);
            }
        }
    }
    if wells[0].iter().any(|s| wells[1].contains(s)) {
        return Err(Error::ParameterOutOfRange("kappa too large: the well balls overlap".into()));
    }
    let bottoms = vec![vec![m1], vec![m2]];
    let partition = Partition::new(chain.n_states(), wells, Some(bottoms))?;
    let reversible = chain.is_reversible(stationary.weights(), 1e-12);
    Ok(ModelInstance { chain, partition, theta, stationary, reversible, log_z, warnings })
}

/// Asymptotic partition-function comparison for the potential walk:
/// Z_n e^{n h} / (2 pi n)^{d/2} against the sum of inverse square-root
/// Hessian determinants at the minima (finite-difference Hessians).
pub fn potential_partition_ratio(grid: &PotentialGrid, instance: &ModelInstance) -> Result<(f64, f64)> {
    let n = grid.n as f64;
    let d = grid.dim;
    let bottoms = instance.partition.bottoms().ok_or(Error::NoBottoms)?;
    let h = bottoms
        .iter()
        .map(|b| grid.values[b[0]])
        .fold(f64::INFINITY, f64::min);
    let lhs = (instance.log_z + n * h - (d as f64 / 2.0) * (2.0 * std::f64::consts::PI * n).ln()).exp();
    let mut rhs = 0.0;
    for b in bottoms {
        let i = b[0];
        let mut hess = nalgebra::DMatrix::zeros(d, d);
        let step = 1.0 / n;
        for a in 0..d {
            let up = grid
                .neighbor(i, a, 1)
                .ok_or_else(|| Error::SaddleNotFound("minimum at the edge".into()))?;
            let dn = grid
                .neighbor(i, a, -1)
                .ok_or_else(|| Error::SaddleNotFound("minimum at the edge".into()))?;
            hess[(a, a)] = (grid.values[up] - 2.0 * grid.values[i] + grid.values[dn]) / (step * step);
            for bx in (a + 1)..d {
                let pp = grid.neighbor(up, bx, 1);
                let pm = grid.neighbor(up, bx, -1);
                let mp = grid.neighbor(dn, bx, 1);
                let mm = grid.neighbor(dn, bx, -1);
                if let (Some(pp), Some(pm), Some(mp), Some(mm)) = (pp, pm, mp, mm) {
                    let v = (grid.values[pp] - grid.values[pm] - grid.values[mp] + grid.values[mm])
                        / (4.0 * step * step);
                    hess[(a, bx)] = v;
                    hess[(bx, a)] = v;
                }
            }
        }
        let det = hess.determinant();
        if det <= 0.0 {
            return Err(Error::SaddleNotFound("non-positive Hessian at a minimum".into()));
        }
        rhs += 1.0 / det.sqrt();
    }
    Ok((lhs, rhs))
}

/// Random walk on four cubes of side `n` glued at single corner points.
/// Jumps go to lattice neighbors inside the graph at rate 1, or rate 2
/// when the opposite neighbor is missing; the stationary weight halves per
/// missing neighbor with the corner weight pinned at 2^{-(d-1)}. The
/// separating set is the graph-distance-`ell` neighborhood of the corners;
/// the bottoms are the centered sub-cubes with margin `m`. The chain is
/// speeded by theta = 1/(spectral gap), the scale the construction defines.
///
/// Above two dimensions the trailing coordinates of cubes 1 and 3 run in
/// the negative direction, so their bottom cubes sit at `w_x + J^2 x (-J)^{d-2}`
/// while those of cubes 0 and 2 sit at `w_x + J^d`; the asymmetry is the
/// construction's, mirrored here on purpose.
pub fn singular_graph(n: usize, d: usize, ell: usize, m: usize) -> Result<ModelInstance> {
    if ell == 0 || ell >= m || 2 * m >= n {
        return Err(Error::ParameterOutOfRange(format!(
            "need 0 < ell < m < n/2, got ell={ell}, m={m}, n={n}"
        )));
    }
    let mut warnings = Vec::new();
    if d == 2 {
        let target = (n as f64).ln();
        if ((ell as f64).ln() / target - 1.0).abs() > 0.6 {
            warnings.push("regime wants log(ell)/log(n) near 1 in dimension 2".to_string());
        }
    } else {
        let lhs = (n * n) as f64 * (ell as f64).powi(d as i32 - 2);
        let rhs = (m as f64).powi(d as i32);
        if lhs >= rhs {
            warnings.push(format!("regime wants n^2 ell^(d-2) << m^d; here {lhs:.3e} vs {rhs:.3e}"));
        }
    }
    let body = singular_graph_body(n, d)?;
    singular_graph_finish(n, d, ell, m, body, warnings)
}

/// The glued-cube chain (speeded by 1/gap), its stationary law, the gap,
/// and the construction bookkeeping, without carving a partition. Used
/// directly for spectral-scaling studies at sizes too small for wells.
pub fn singular_graph_chain(n: usize, d: usize) -> Result<(Chain, Measure, f64, f64)> {
    let body = singular_graph_body(n, d)?;
    let gap = body.gap;
    let log_z = body.log_z;
    Ok((body.chain, body.stationary, 1.0 / gap, log_z))
}

struct SingularGraphBody {
    chain: Chain,
    stationary: Measure,
    gap: f64,
    log_z: f64,
    points: Vec<Vec<i64>>,
    index: std::collections::HashMap<Vec<i64>, usize>,
    cube_of: Vec<Vec<usize>>,
    corners: Vec<usize>,
    anchors: [(Vec<i64>, i64); 4],
}

fn singular_graph_body(n: usize, d: usize) -> Result<SingularGraphBody> {
    if d < 2 {
        return Err(Error::ParameterOutOfRange(format!("dimension must be >= 2, got {d}")));
    }
    if n < 4 {
        return Err(Error::ParameterOutOfRange(format!("need n >= 4, got {n}")));
    }
    let ni = n as i64;
    // cube anchors and the sign of the trailing coordinates
    let anchors: [(Vec<i64>, i64); 4] = [
        ([vec![0, ni], vec![0; d - 2]].concat(), 1),
        ([vec![ni, 0], vec![0; d - 2]].concat(), -1),
        ([vec![0, -ni], vec![0; d - 2]].concat(), 1),
        ([vec![-ni, 0], vec![0; d - 2]].concat(), -1),
    ];
    let count_estimate = 4usize.saturating_mul((n + 1).pow(d as u32));
    check_guard(count_estimate)?;

    let mut points: Vec<Vec<i64>> = Vec::new();
    let mut index: std::collections::HashMap<Vec<i64>, usize> = std::collections::HashMap::new();
    let mut cube_of: Vec<Vec<usize>> = Vec::new();
    for (cube, (anchor, sign)) in anchors.iter().enumerate() {
        let mut cur = vec![0i64; d];
        'enumerate: loop {
            let mut p = anchor.clone();
            for k in 0..d {
                let offset = if k < 2 { cur[k] } else { sign * cur[k] };
                p[k] += offset;
            }
            match index.get(&p) {
                Some(&i) => cube_of[i].push(cube),
                None => {
                    index.insert(p.clone(), points.len());
                    cube_of.push(vec![cube]);
                    points.push(p);
                }
            }
            for k in 0..d {
                cur[k] += 1;
                if cur[k] <= ni {
                    continue 'enumerate;
                }
                cur[k] = 0;
            }
            break;
        }
    }
    let total = points.len();
    check_guard(total)?;

    let neighbor = |i: usize, axis: usize, step: i64| -> Option<usize> {
        let mut p = points[i].clone();
        p[axis] += step;
        index.get(&p).copied()
    };
    let mut entries = Vec::new();
    let mut missing = vec![0usize; total];
    for i in 0..total {
        for axis in 0..d {
            for step in [-1i64, 1] {
                match neighbor(i, axis, step) {
                    Some(j) => {
                        let rate = if neighbor(i, axis, -step).is_some() { 1.0 } else { 2.0 };
                        entries.push((i, j, rate));
                    }
                    None => missing[i] += 1,
                }
            }
        }
    }

    let corners: Vec<usize> = (0..total).filter(|&i| cube_of[i].len() > 1).collect();
    if corners.len() != 4 {
        return Err(Error::ParameterOutOfRange(format!(
            "construction expects 4 shared corners, found {}",
            corners.len()
        )));
    }

    let states: Vec<StateKey> = points
        .iter()
        .map(|p| p.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","))
        .collect();
    let raw = crate::chain::build_chain(states.clone(), &entries, 1.0)?;

    let ln2 = std::f64::consts::LN_2;
    let mut log_weights: Vec<f64> = missing.iter().map(|&k| -(k as f64) * ln2).collect();
    for &c in &corners {
        log_weights[c] = -((d - 1) as f64) * ln2;
    }
    let log_z = crate::numeric::log_sum_exp(&log_weights);
    let stationary = Measure::from_log_weights(log_weights);
    verify_generated_stationarity(&raw, &stationary)?;

    let gap = crate::potential::spectral_gap(&raw)?.gap;
    let theta = 1.0 / gap;
    let chain = crate::chain::build_chain(states, &entries, theta)?;
    Ok(SingularGraphBody { chain, stationary, gap, log_z, points, index, cube_of, corners, anchors })
}

fn singular_graph_finish(
    n: usize,
    d: usize,
    ell: usize,
    m: usize,
    body: SingularGraphBody,
    warnings: Vec<String>,
) -> Result<ModelInstance> {
    let SingularGraphBody { chain, stationary, gap, log_z, points, index, cube_of, corners, anchors } = body;
    let theta = 1.0 / gap;
    let total = points.len();
    let ni = n as i64;
    let neighbor = |i: usize, axis: usize, step: i64| -> Option<usize> {
        let mut p = points[i].clone();
        p[axis] += step;
        index.get(&p).copied()
    };

    // Delta: graph distance <= ell from a corner
    let mut dist = vec![usize::MAX; total];
    let mut queue = std::collections::VecDeque::new();
    for &c in &corners {
        dist[c] = 0;
        queue.push_back(c);
    }
    while let Some(i) = queue.pop_front() {
        if dist[i] == ell {
            continue;
        }
        for axis in 0..d {
            for step in [-1i64, 1] {
                if let Some(j) = neighbor(i, axis, step) {
                    if dist[j] == usize::MAX {
                        dist[j] = dist[i] + 1;
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    let in_delta: Vec<bool> = dist.iter().map(|&x| x != usize::MAX).collect();

    let mut wells: Vec<Vec<usize>> = vec![Vec::new(); 4];
    for i in 0..total {
        if !in_delta[i] && cube_of[i].len() == 1 {
            wells[cube_of[i][0]].push(i);
        }
    }
    let mi = m as i64;
    let mut bottoms: Vec<Vec<usize>> = vec![Vec::new(); 4];
    for (cube, (anchor, sign)) in anchors.iter().enumerate() {
        let mut cur = vec![mi; d];
        'bottom: loop {
            let mut p = anchor.clone();
            for k in 0..d {
                let offset = if k < 2 { cur[k] } else { sign * cur[k] };
                p[k] += offset;
            }
            let i = *index.get(&p).expect("bottom point inside the cube");
            bottoms[cube].push(i);
            for k in 0..d {
                cur[k] += 1;
                if cur[k] <= ni - mi {
                    continue 'bottom;
                }
                cur[k] = mi;
            }
            break;
        }
        bottoms[cube].sort_unstable();
    }
    let partition = Partition::new(chain.n_states(), wells, Some(bottoms))?;
    let reversible = chain.is_reversible(stationary.weights(), 1e-12);
    Ok(ModelInstance { chain, partition, theta, stationary, reversible, log_z, warnings })
}

/// Build-time gate for every generator: the closed-form measure must be
/// stationary for the generated rates (residual tolerance 1e-10 relative
/// to the maximal holding rate).
fn verify_generated_stationarity(chain: &Chain, mu: &Measure) -> Result<()> {
    let res = chain.stationary_residual(mu.weights());
    let tol = 1e-10 * chain.max_holding();
    if res > tol {
        return Err(Error::ParameterOutOfRange(format!(
            "generated chain disagrees with its closed-form stationary measure (residual {res:.3e}, tolerance {tol:.3e})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::tv_distance;

    #[test]
    fn composition_space_enumeration_and_rank() {
        let space = CompositionSpace::new(3, 4).unwrap();
        assert_eq!(space.states.len(), 15);
        for (i, eta) in space.states.iter().enumerate() {
            assert_eq!(space.rank(eta), i);
            assert_eq!(eta.iter().sum::<usize>(), 4);
        }
        for w in space.states.windows(2) {
            assert_eq!(colex_cmp(&w[0], &w[1]), std::cmp::Ordering::Less);
        }
        // two-site ordering matches the (n,0), (n-1,1), ..., (0,n) listing
        let two = CompositionSpace::new(2, 2).unwrap();
        assert_eq!(two.states, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn zero_range_small_stationary() {
        // two particles on two sites: too small for wells, so use the bare
        // chain constructor; the law is (1/4, 1/2, 1/4)
        let (chain, stationary, _, _, _) = zero_range_chain(2, 2, 1.0, 0.5).unwrap();
        assert_eq!(chain.n_states(), 3);
        let solved = chain.stationary().unwrap();
        let i20 = chain.index_of("2,0").unwrap();
        let i11 = chain.index_of("1,1").unwrap();
        let i02 = chain.index_of("0,2").unwrap();
        for (i, e) in [(i20, 0.25), (i11, 0.5), (i02, 0.25)] {
            assert!((solved.get(i) - e).abs() < 1e-12, "state {i}: {}", solved.get(i));
            assert!((stationary.get(i) - e).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_range_g_sequence_decreases() {
        // alpha = 2: g(2) = 4, g(3) = 9/4, decreasing toward 1
        let g = |k: usize, alpha: f64| (k as f64).powf(alpha) / ((k - 1) as f64).powf(alpha);
        assert!((g(2, 2.0) - 4.0).abs() < 1e-15);
        assert!((g(3, 2.0) - 2.25).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for k in 2..40 {
            let v = g(k, 2.0);
            assert!(v < prev && v > 1.0);
            prev = v;
        }
    }

    #[test]
    fn zero_range_well_mass_approaches_half() {
        let mut prev_gap = f64::INFINITY;
        for &n in &[10usize, 20, 40] {
            let inst = zero_range(2, n, 1.0, 0.5, n / 4).unwrap();
            let mass = inst.stationary.mass_of(inst.partition.well(0));
            let gap = (mass - 0.5).abs();
            assert!(gap < prev_gap, "n={n}: mass {mass}");
            prev_gap = gap;
        }
    }

    #[test]
    fn zero_range_translation_equivariance() {
        let inst = zero_range(3, 6, 1.5, 0.5, 2).unwrap();
        let space = CompositionSpace::new(3, 6).unwrap();
        for (idx, eta) in space.states.iter().enumerate() {
            let shifted: Vec<usize> = (0..3).map(|x| eta[(x + 1) % 3]).collect();
            let j = space.rank(&shifted);
            let a = inst.stationary.get(idx);
            let b = inst.stationary.get(j);
            assert!((a - b).abs() <= 1e-14 * a.max(b).max(1e-300), "{eta:?} vs shift");
        }
    }

    #[test]
    fn zero_range_asymmetric_is_not_reversible() {
        let sym = zero_range(3, 5, 1.5, 0.5, 1).unwrap();
        assert!(sym.reversible);
        let asym = zero_range(3, 5, 1.5, 0.8, 1).unwrap();
        assert!(!asym.reversible);
    }

    #[test]
    fn zero_range_rejects_bad_parameters() {
        assert!(zero_range(1, 5, 1.5, 0.5, 1).is_err());
        assert!(zero_range(2, 5, 0.9, 0.5, 1).is_err());
        assert!(zero_range(2, 5, 1.5, 0.4, 1).is_err());
        assert!(zero_range(2, 5, 1.5, 0.5, 3).is_err());
    }

    #[test]
    fn inclusion_single_particle_rates() {
        // l = 2, n = 1: both torus directions collapse, so the bare rate is
        // 2 d; after the 1/d speedup each state jumps at rate 2 = 2 N
        let inst = inclusion(2, 1, 0.25).unwrap();
        assert_eq!(inst.chain.n_states(), 2);
        assert!((inst.chain.rate(0, 1) - 2.0).abs() < 1e-12);
        assert!((inst.chain.rate(1, 0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn inclusion_condensed_holding_rate_scales_with_n() {
        let n = 12;
        let d = 0.1;
        let inst = inclusion(2, n, d).unwrap();
        let condensed = inst.partition.well(0)[0];
        // from full condensation the only moves push one particle out:
        // rate n * d * 2, speeded by 1/d -> 2 n
        assert!((inst.chain.holding(condensed) - 2.0 * n as f64).abs() < 1e-9);
    }

    #[test]
    fn inclusion_condensed_mass_grows() {
        let mut prev = 0.0;
        for &n in &[10usize, 20, 40] {
            let d = 1.0 / (n as f64).ln().powi(2);
            let inst = inclusion(2, n, d).unwrap();
            let mass = inst.stationary.mass_of(inst.partition.well(0));
            assert!(mass > prev, "n={n}: mass {mass}");
            assert!(mass < 0.5);
            prev = mass;
        }
    }

    #[test]
    fn inclusion_is_reversible() {
        let inst = inclusion(3, 5, 0.2).unwrap();
        assert!(inst.reversible);
    }

    #[test]
    fn potential_flat_with_declared_points_is_uniform() {
        let grid = PotentialGrid::sample(&[(-1.0, 1.0)], 8, |_| 0.0).unwrap();
        // flat potential: detection fails (no isolated minima)
        assert!(potential_walk(&grid, 8, 0.2).is_err());
        // declared critical points override detection; all rates are 1
        // (times theta) and the stationary law is uniform
        let cp = CriticalPoints { m1: vec![-4], m2: vec![4], saddle: vec![0] };
        let inst = potential_walk_with(&grid, 8, 0.2, Some(&cp)).unwrap();
        let m = inst.chain.n_states();
        for i in 0..m {
            assert!((inst.stationary.get(i) - 1.0 / m as f64).abs() < 1e-14);
            for &(_, r) in inst.chain.row(i) {
                assert!((r - inst.theta).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn potential_double_well_structure() {
        let grid = NamedPotential::DoubleWell1d { bound: 1.6 }.sample(24).unwrap();
        let inst = potential_walk(&grid, 24, 0.25).unwrap();
        assert_eq!(inst.partition.n_wells(), 2);
        assert!(inst.reversible);
        // theta = 2 pi n e^{(H - h) n}; the saddle of (x^2-1)^2 is at 0 with height 1
        let log_theta = (inst.theta / (2.0 * std::f64::consts::PI * 24.0)).ln() / 24.0;
        assert!((log_theta - 1.0).abs() < 0.05, "saddle height via theta: {log_theta}");
        // bottoms are the exact lattice minima at +-1 (coordinates +-24)
        let bottoms = inst.partition.bottoms().unwrap();
        let keys: Vec<&str> = bottoms.iter().map(|b| inst.chain.key(b[0]).as_str()).collect();
        assert!(keys.contains(&"24") && keys.contains(&"-24"), "bottoms {keys:?}");
    }

    #[test]
    fn potential_partition_function_ratio() {
        let grid = NamedPotential::DoubleWell1d { bound: 1.6 }.sample(24).unwrap();
        let inst = potential_walk(&grid, 24, 0.25).unwrap();
        let (lhs, rhs) = potential_partition_ratio(&grid, &inst).unwrap();
        // Hess F = 8 at both minima -> rhs = 2/sqrt(8); finite-n bias allowed
        assert!((rhs - 2.0 / 8.0f64.sqrt()).abs() < 0.03, "rhs {rhs}");
        assert!((lhs / rhs - 1.0).abs() < 0.2, "ratio {}", lhs / rhs);
    }

    #[test]
    fn singular_graph_small_structure() {
        let inst = singular_graph(8, 2, 2, 3).unwrap();
        let total = inst.chain.n_states();
        assert_eq!(total, 4 * 81 - 4);
        // corner audit: two neighbors in each adjoining cube, full degree 4
        let corner = inst.chain.index_of("8,8").unwrap();
        assert_eq!(inst.chain.row(corner).len(), 4);
        let solved = inst.chain.stationary().unwrap();
        assert!(tv_distance(&solved, &inst.stationary).unwrap() < 1e-10);
        assert!(inst.reversible);
    }

    #[test]
    fn singular_graph_gap_scaling_d2() {
        let mut ks = Vec::new();
        for &n in &[8usize, 12, 16] {
            let ell = (n / 4).max(1);
            let m = (n / 3).max(ell + 1);
            let inst = singular_graph(n, 2, ell, m).unwrap();
            ks.push(inst.theta / ((n * n) as f64 * (n as f64).ln()));
        }
        let max = ks.iter().cloned().fold(0.0, f64::max);
        let min = ks.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min < 2.0, "theta / (n^2 log n) drifts: {ks:?}");
    }

    #[test]
    fn model_spec_parses_toml_and_json() {
        let spec = ModelSpec::from_toml(
            "family = \"zero_range\"\nl = 2\nn = 10\nalpha = 1.0\np = 0.5\nell = 2\n",
        )
        .unwrap();
        let inst = spec.build().unwrap();
        assert_eq!(inst.chain.n_states(), 11);
        let spec = ModelSpec::from_json("{\"family\":\"inclusion\",\"l\":2,\"n\":4,\"d\":0.5}").unwrap();
        assert!(matches!(spec, ModelSpec::Inclusion { .. }));
        assert!(ModelSpec::from_toml("family = \"unknown\"").is_err());
    }
}
