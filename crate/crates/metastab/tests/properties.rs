//! Property-level invariants: semigroup identities, metric structure,
//! surgery bookkeeping, enlargement identities, and the reversible decay
//! bounds, on randomized inputs.

mod common;

use common::{random_chain, random_reversible_chain, rng, CHI2_99};
use metastab::chain::{tv_distance, Measure};
use metastab::metastability::Partition;
use metastab::potential;
use metastab::reductions;
use metastab::simulate;
use proptest::prelude::*;

fn measure_strategy(n: usize) -> impl Strategy<Value = Measure> {
    proptest::collection::vec(0.0f64..1.0, n).prop_map(|mut w| {
        // keep at least one positive weight
        if w.iter().all(|&x| x == 0.0) {
            w[0] = 1.0;
        }
        Measure::from_weights(w).unwrap().into_normalized().unwrap()
    })
}

fn chain_strategy() -> impl Strategy<Value = metastab::Chain> {
    (3usize..6, any::<u64>()).prop_map(|(n, seed)| {
        let mut r = rng(seed);
        random_chain(n, &mut r)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tv_is_a_metric(a in measure_strategy(5), b in measure_strategy(5), c in measure_strategy(5)) {
        let dab = tv_distance(&a, &b).unwrap();
        let dba = tv_distance(&b, &a).unwrap();
        prop_assert_eq!(dab, dba);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&dab));
        let dac = tv_distance(&a, &c).unwrap();
        let dcb = tv_distance(&c, &b).unwrap();
        prop_assert!(dab <= dac + dcb + 1e-12);
        prop_assert_eq!(tv_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn chapman_kolmogorov(chain in chain_strategy(), s in 0.01f64..1.0, t in 0.01f64..1.0) {
        let n = chain.n_states();
        let init = Measure::dirac(n, 0);
        let direct = chain.transient_distribution(&init, s + t).unwrap();
        let mid = chain.transient_distribution(&init, s).unwrap();
        let composed = chain.transient_distribution(&mid, t).unwrap();
        prop_assert!(tv_distance(&direct, &composed).unwrap() <= 1e-9);
    }

    #[test]
    fn stationary_is_fixed_point(chain in chain_strategy(), t in 0.01f64..4.0) {
        let mu = chain.stationary().unwrap();
        let moved = chain.transient_distribution(&mu, t).unwrap();
        prop_assert!(tv_distance(&moved, &mu).unwrap() <= 1e-9);
    }

    #[test]
    fn occupation_splits_over_complement(chain in chain_strategy(), t in 0.01f64..3.0) {
        let n = chain.n_states();
        let init = Measure::uniform(n);
        let a: Vec<usize> = (0..n / 2).collect();
        let b: Vec<usize> = (n / 2..n).collect();
        let oa = chain.occupation_time(&init, &a, t).unwrap();
        let ob = chain.occupation_time(&init, &b, t).unwrap();
        prop_assert!((oa + ob - t).abs() <= 1e-8 * t.max(1.0));
    }

    #[test]
    fn trace_dominates_and_conditions(seed in any::<u64>()) {
        let mut r = rng(seed);
        let chain = random_chain(7, &mut r);
        let a = vec![0usize, 2, 4, 5];
        let traced = reductions::trace_chain(&chain, &a).unwrap();
        for (l, &g) in a.iter().enumerate() {
            for (lz, &gz) in a.iter().enumerate() {
                if l != lz {
                    prop_assert!(traced.rate(l, lz) >= chain.rate(g, gz) - 1e-12);
                }
            }
        }
        let mu = chain.stationary().unwrap();
        let mass: f64 = a.iter().map(|&g| mu.get(g)).sum();
        let cond = Measure::from_weights(a.iter().map(|&g| mu.get(g) / mass).collect()).unwrap();
        let mu_t = traced.stationary().unwrap();
        prop_assert!(tv_distance(&cond, &mu_t).unwrap() <= 1e-9);
    }

    #[test]
    fn capacity_sandwich_on_random_reversible(seed in any::<u64>()) {
        let mut r = rng(seed);
        let chain = random_reversible_chain(7, &mut r);
        let cap = potential::capacity(&chain, &[0, 1], &[5, 6]).unwrap();
        let d = cap.dirichlet_upper.unwrap();
        let t = cap.thomson_lower.unwrap();
        prop_assert!(t <= cap.value * (1.0 + 1e-9));
        prop_assert!(cap.value <= d * (1.0 + 1e-9));
        prop_assert!((cap.equilibrium_measure.mass() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn enlargement_capacity_inequality_l3_20b() {
    // Cap*(A, B + E*) >= (pi(A) gamma + Cap(A, B)) / 2
    let mut r = rng(414);
    for trial in 0..60 {
        let n = 4 + (trial % 4);
        let chain = if trial % 2 == 0 {
            random_chain(n, &mut r)
        } else {
            random_reversible_chain(n, &mut r)
        };
        let gamma = 0.05 + 2.0 * (trial as f64 / 60.0);
        let enlarged = reductions::enlarge_chain(&chain, gamma).unwrap();
        let a = vec![0usize];
        let b = vec![n - 1];
        let cap = potential::capacity(&chain, &a, &b).unwrap().value;
        let pi = chain.stationary().unwrap();
        let mut b_star: Vec<usize> = b.clone();
        b_star.extend(n..2 * n);
        let cap_star = potential::capacity(&enlarged, &a, &b_star).unwrap().value;
        let lower = 0.5 * (pi.get(0) * gamma + cap);
        assert!(
            cap_star >= lower - 1e-11,
            "trial {trial}: cap* {cap_star} < (pi gamma + cap)/2 = {lower}"
        );
    }
}

#[test]
fn reversible_tv_decay_bound_on_reflected_wells() {
    // TV(delta_eta S^R(t), mu^x) <= mu^x(eta)^{-1/2} e^{-lambda_R t},
    // pointwise on the wells of a small zero-range instance
    let inst = metastab::models::zero_range(2, 12, 1.0, 0.5, 3).unwrap();
    for x in 0..2 {
        let well = inst.partition.well(x);
        let reflected = reductions::reflected_chain(&inst.chain, well).unwrap();
        let gap = potential::spectral_gap(&reflected).unwrap().gap;
        let mu_r = reflected.stationary().unwrap();
        let m = reflected.n_states();
        for eta in 0..m {
            for &t in &[0.3 / inst.theta, 1.0 / inst.theta, 4.0 / inst.theta] {
                let dist = reflected
                    .transient_distribution(&Measure::dirac(m, eta), t)
                    .unwrap();
                let tv = tv_distance(&dist, &mu_r).unwrap();
                let bound = (-gap * t).exp() / mu_r.get(eta).sqrt();
                assert!(
                    tv <= bound + 1e-12,
                    "well {x}, eta {eta}, t {t}: tv {tv} vs bound {bound}"
                );
            }
        }
    }
}

#[test]
fn surgery_commutes_with_projection_exactly() {
    let mut r = rng(991);
    let chain = random_chain(6, &mut r);
    let partition = Partition::new(6, vec![vec![0, 1], vec![3, 4]], None).unwrap();
    let cfg = simulate::SimConfig { seed: 17, paths: 50, horizon: 30.0 };
    let paths = simulate::gillespie(&chain, 0, &cfg);
    for path in &paths {
        // Psi(surgery(path)) must equal Phi(path) with the zero stretches excised
        let lhs = partition
            .psi_path(&reductions::trace_surgery(path, &partition.wells_mask()))
            .unwrap();
        let phi = partition.project_path(path);
        let rhs = reductions::trace_surgery(&phi, &[false, true, true]);
        assert_eq!(lhs.records.len(), rhs.records.len());
        for (a, b) in lhs.records.iter().zip(&rhs.records) {
            assert_eq!(a.state, b.state);
            assert!((a.entry - b.entry).abs() < 1e-12);
            assert!((a.exit - b.exit).abs() < 1e-12);
        }
    }
}

#[test]
fn trace_time_change_matches_path_law() {
    // distribution of the trace chain at trace-time t vs the empirical law
    // of surgered paths at the same trace time (chi-square at 1%)
    let mut r = rng(2024);
    let chain = random_chain(6, &mut r);
    let a = vec![0usize, 1, 3, 5];
    let traced = reductions::trace_chain(&chain, &a).unwrap();
    let t = 0.8;
    let exact = traced
        .transient_distribution(&Measure::dirac(4, 0), t)
        .unwrap();

    let paths = 10_000usize;
    let cfg = simulate::SimConfig { seed: 5150, paths, horizon: 40.0 };
    let mask = {
        let mut m = vec![false; 6];
        for &i in &a {
            m[i] = true;
        }
        m
    };
    let mut counts = [0usize; 4];
    let mut used = 0usize;
    for path in simulate::gillespie(&chain, 0, &cfg) {
        let surgered = reductions::trace_surgery(&path, &mask);
        if surgered.horizon < t {
            continue;
        }
        let state = surgered.state_at(t).unwrap();
        let local = a.iter().position(|&g| g == state).unwrap();
        counts[local] += 1;
        used += 1;
    }
    assert!(used as f64 >= 0.99 * paths as f64, "horizon too short: {used} paths usable");
    let mut chi2 = 0.0;
    for (k, &c) in counts.iter().enumerate() {
        let expected = exact.get(k) * used as f64;
        chi2 += (c as f64 - expected).powi(2) / expected;
    }
    let critical = CHI2_99[counts.len() - 2];
    assert!(chi2 <= critical, "chi2 {chi2} exceeds the 1% critical value {critical}");
}

#[test]
fn trace_mixing_estimate_on_random_reversible_chains() {
    // T_mix(trace on a well) <= T_rel(reflected on the well) multiplied by
    // (1 + max log 1/mu^x), the reversible mixing estimate
    let mut r = rng(808);
    for trial in 0..20 {
        let chain = random_reversible_chain(8, &mut r);
        let well = vec![0usize, 1, 2, 3, 4];
        let traced = reductions::trace_chain(&chain, &well).unwrap();
        let tmix = potential::mixing_time(&traced, potential::DEFAULT_MIXING_THRESHOLD).unwrap();
        let reflected = reductions::reflected_chain(&chain, &well).unwrap();
        let trel = potential::spectral_gap(&reflected).unwrap().relaxation_time;
        let mu = chain.stationary().unwrap();
        let mass: f64 = well.iter().map(|&g| mu.get(g)).sum();
        let log_term = well.iter().map(|&g| (mass / mu.get(g)).ln()).fold(0.0f64, f64::max);
        assert!(
            tmix <= trel * (1.0 + log_term),
            "trial {trial}: T_mix {tmix} > {}",
            trel * (1.0 + log_term)
        );
    }
}

#[test]
fn singular_graph_gap_scaling_d3() {
    // relaxation time within [c n^3, C n^3] with the constants fitted at
    // the smallest size and drift under 2x
    let mut ks = Vec::new();
    for &n in &[4usize, 6, 8] {
        let (_, _, theta, _) = metastab::models::singular_graph_chain(n, 3).unwrap();
        ks.push(theta / (n as f64).powi(3));
    }
    let k0 = ks[0];
    assert!(
        ks.iter().all(|&k| k > k0 / 2.0 && k < k0 * 2.0),
        "theta / n^3 drifts beyond 2x: {ks:?}"
    );
}

#[test]
fn m2_values_decrease_inside_the_window() {
    // zero range with alpha = 3/2 and eps theta = ell^{9/4}, squarely
    // inside ell^2 << eps theta << ell^{1+alpha}: both (M2) scalars
    // decrease along the sweep
    let mut b04 = Vec::new();
    let mut b07 = Vec::new();
    for &n in &[16usize, 32, 64] {
        let ell = n / 4;
        let inst = metastab::models::zero_range(2, n, 1.5, 0.5, ell).unwrap();
        let eps = (ell as f64).powf(2.25) / inst.theta;
        let m2 = metastab::metastability::check_m2(&inst.chain, &inst.partition, eps).unwrap();
        b04.push(m2.b04.value());
        b07.push(m2.b07.value());
    }
    assert!(b04.windows(2).all(|w| w[1] < w[0]), "early-exit values do not decrease: {b04:?}");
    assert!(b07.windows(2).all(|w| w[1] < w[0]), "reflected-TV values do not decrease: {b07:?}");
}

#[test]
fn measure_ratio_decreases_on_all_four_families() {
    let ratio = |inst: &metastab::models::ModelInstance| {
        metastab::metastability::check_measure_ratios(&inst.chain, &inst.partition)
            .unwrap()
            .b09a
            .value()
    };
    let assert_decreasing = |vals: &[f64], tag: &str| {
        assert!(vals.windows(2).all(|w| w[1] < w[0]), "{tag}: {vals:?}");
    };

    let zr: Vec<f64> = [10usize, 20, 40]
        .iter()
        .map(|&n| ratio(&metastab::models::zero_range(2, n, 1.0, 0.5, n / 4).unwrap()))
        .collect();
    assert_decreasing(&zr, "zero range");

    let inc: Vec<f64> = [10usize, 20, 40]
        .iter()
        .map(|&n| {
            let d = 1.0 / (n as f64).ln().powi(2);
            ratio(&metastab::models::inclusion(2, n, d).unwrap())
        })
        .collect();
    assert_decreasing(&inc, "inclusion");

    let pw: Vec<f64> = [12usize, 24, 48]
        .iter()
        .map(|&n| {
            let grid = metastab::models::NamedPotential::DoubleWell1d { bound: 1.6 }
                .sample(n)
                .unwrap();
            ratio(&metastab::models::potential_walk(&grid, n, 0.25).unwrap())
        })
        .collect();
    assert_decreasing(&pw, "potential walk");

    let sg: Vec<f64> = [16usize, 24, 32]
        .iter()
        .map(|&n| {
            // the corner neighborhoods must thin out relative to the cubes:
            // ell ~ n / log n
            let ell = ((n as f64) / (n as f64).ln()).ceil() as usize;
            ratio(&metastab::models::singular_graph(n, 2, ell, ell + 1).unwrap())
        })
        .collect();
    assert_decreasing(&sg, "singular graph");
}

#[test]
fn fdd_marginal_difference_decreases_for_zero_range() {
    let mut diffs = Vec::new();
    for &n in &[10usize, 20, 40] {
        let inst = metastab::models::zero_range(2, n, 1.0, 0.5, n / 4).unwrap();
        let limit =
            metastab::metastability::estimate_limit_chain(&inst.chain, &inst.partition).unwrap();
        let init = inst.partition.bottoms().unwrap()[0][0];
        let cmp = metastab::metastability::fdd_compare(&inst.chain, &inst.partition, &limit, &[1.0], init)
            .unwrap();
        diffs.push(cmp.max_abs_diff);
    }
    assert!(
        diffs.windows(2).all(|w| w[1] < w[0]),
        "one-time label-law differences do not decrease: {diffs:?}"
    );
}

#[test]
fn radial_test_function_reproduces_the_enlarged_dirichlet_shape() {
    // single cube walk, gamma-enlarged; the radial shell function around a
    // corner gives a Dirichlet bound on Cap*(simplex, mirror copy) of the
    // shape (theta/ell^2 + gamma) ell^d / n^d with a stable constant
    let build_cube = |n: usize, theta: f64| -> metastab::Chain {
        let mut entries = Vec::new();
        let idx = |i: usize, j: usize| i * (n + 1) + j;
        for i in 0..=n {
            for j in 0..=n {
                for (di, dj) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
                    let (ti, tj) = (i as i64 + di, j as i64 + dj);
                    if ti < 0 || tj < 0 || ti > n as i64 || tj > n as i64 {
                        continue;
                    }
                    let (oi, oj) = (i as i64 - di, j as i64 - dj);
                    let opposite = oi >= 0 && oj >= 0 && oi <= n as i64 && oj <= n as i64;
                    let rate = if opposite { 1.0 } else { 2.0 };
                    entries.push((idx(i, j), idx(ti as usize, tj as usize), rate));
                }
            }
        }
        let states: Vec<String> = (0..=n)
            .flat_map(|i| (0..=n).map(move |j| format!("{i},{j}")))
            .collect();
        metastab::build_chain(states, &entries, theta).unwrap()
    };

    let mut constants = Vec::new();
    for &(n, gamma) in &[(16usize, 0.5f64), (24, 0.5), (32, 0.5), (24, 2.0)] {
        let ell = n / 4;
        let big_l = 2 * ell;
        let theta = (n * n) as f64 * (n as f64).ln();
        let cube = build_cube(n, theta);
        let enlarged = reductions::enlarge_chain(&cube, gamma).unwrap();
        let total = cube.n_states();

        // the corner simplex {x + y <= ell} and the full mirror copy
        let simplex: Vec<usize> = (0..total)
            .filter(|&s| {
                let (i, j) = (s / (n + 1), s % (n + 1));
                i + j <= ell
            })
            .collect();
        let mirror: Vec<usize> = (total..2 * total).collect();

        // radial shell function: 1 inside, harmonic-like decay to 0 at 2 ell
        let shell_value = |k: usize| -> f64 {
            if k < ell {
                1.0
            } else if k >= big_l {
                0.0
            } else {
                let norm: f64 = (ell..big_l).map(|j| (j as f64).powi(-1)).sum();
                let tail: f64 = (k..big_l).map(|j| (j as f64).powi(-1)).sum();
                tail / norm
            }
        };
        let mut f = vec![0.0; 2 * total];
        for s in 0..total {
            let (i, j) = (s / (n + 1), s % (n + 1));
            f[s] = shell_value(i + j);
        }

        let bound = potential::dirichlet_bound(&enlarged, &simplex, &mirror, &f).unwrap();
        let cap = potential::capacity(&enlarged, &simplex, &mirror).unwrap().value;
        assert!(bound >= cap - 1e-12, "Dirichlet bound below the capacity");

        let shape = (theta / (ell * ell) as f64 + gamma) * (ell * ell) as f64 / (n * n) as f64;
        constants.push(bound / shape);
    }
    let c0 = constants[0];
    assert!(
        constants.iter().all(|&c| c < 3.0 * c0 && c > c0 / 3.0),
        "shape constant unstable: {constants:?}"
    );
}

#[test]
fn windowed_delta_mass_beats_the_naive_hitting_bound() {
    // bounding P[xi(s) in Delta] by P[H_Delta <= 3 delta] is useless for
    // condensing dynamics: from a well-boundary state the chain brushes
    // the separating set almost surely within the window, yet the actual
    // Delta mass at fixed times stays moderate and shrinks with size
    let inst = metastab::models::zero_range(2, 20, 1.0, 0.5, 5).unwrap();
    let delta = 0.1;
    let c03 = metastab::metastability::check_condition_03(
        &inst.chain,
        &inst.partition,
        delta,
        metastab::StartPolicy::FullMax,
    )
    .unwrap()
    .value();
    let cdf = reductions::hitting_cdf_all(&inst.chain, inst.partition.delta(), 3.0 * delta).unwrap();
    let naive = inst
        .partition
        .wells_union()
        .iter()
        .map(|&s| cdf[s])
        .fold(0.0f64, f64::max);
    assert!(naive > 0.9, "the naive bound should be near one, got {naive}");
    assert!(c03 < 0.3, "the windowed value should stay moderate, got {c03}");
}

#[test]
fn partition_function_ratio_tightens_with_size() {
    // Z e^{n h} / (2 pi n)^{d/2} approaches the inverse-sqrt-Hessian sum
    let mut gaps = Vec::new();
    for &n in &[12usize, 24, 48] {
        let grid = metastab::models::NamedPotential::DoubleWell1d { bound: 1.6 }
            .sample(n)
            .unwrap();
        let inst = metastab::models::potential_walk(&grid, n, 0.25).unwrap();
        let (lhs, rhs) = metastab::models::potential_partition_ratio(&grid, &inst).unwrap();
        gaps.push((lhs / rhs - 1.0).abs());
    }
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "ratio gaps: {gaps:?}");
    assert!(gaps[0] < 0.2, "even the smallest size should land within 20%: {gaps:?}");
}

#[test]
fn enlargement_hitting_lemma_first_form() {
    // P_eta[H_A <= b] <= (1/2) e^{gamma b} Cap(eta, A) / Cap*(eta, A + E*),
    // the intermediate bound behind the capacity hitting estimate
    let mut r = rng(313);
    for trial in 0..40 {
        let n = 4 + (trial % 4);
        let chain = if trial % 2 == 0 {
            random_chain(n, &mut r)
        } else {
            random_reversible_chain(n, &mut r)
        };
        let b: f64 = 0.01 + 0.02 * trial as f64;
        let gamma = 1.0 / b;
        let enlarged = reductions::enlarge_chain(&chain, gamma).unwrap();
        let a = vec![n - 1];
        let eta = 0usize;
        let exact = potential::hitting_prob_exact_all(&chain, &a, b).unwrap()[eta];
        let cap = potential::capacity(&chain, &[eta], &a).unwrap().value;
        let mut mixed_target = a.clone();
        mixed_target.extend(n..2 * n);
        let cap_star = potential::capacity(&enlarged, &[eta], &mixed_target).unwrap().value;
        let bound = 0.5 * (gamma * b).exp() * cap / cap_star;
        assert!(
            exact <= bound + 1e-12,
            "trial {trial}: exact {exact} above the enlargement bound {bound}"
        );
    }
}

#[test]
fn singular_graph_separating_conditions_shrink_with_size() {
    // the separating-set conditions on the glued-cube graph fall along a
    // size sweep once the corner neighborhoods thin out (ell ~ n / log n)
    let mut h2 = Vec::new();
    let mut c03 = Vec::new();
    for &n in &[12usize, 20, 32] {
        let ell = ((n as f64 / (n as f64).ln()).ceil() as usize - 1).max(1);
        let inst = metastab::models::singular_graph(n, 2, ell, ell + 1).unwrap();
        h2.push(
            metastab::metastability::check_h2(&inst.chain, &inst.partition, 1.0, metastab::StartPolicy::Auto)
                .unwrap()
                .value(),
        );
        c03.push(
            metastab::metastability::check_condition_03(
                &inst.chain,
                &inst.partition,
                0.1,
                metastab::StartPolicy::Auto,
            )
            .unwrap()
            .value(),
        );
    }
    assert!(h2.windows(2).all(|w| w[1] < w[0]), "H2 values: {h2:?}");
    assert!(c03.windows(2).all(|w| w[1] < w[0]), "(03) values: {c03:?}");
}

#[test]
fn inclusion_delta_mass_bounded_by_escape_probability() {
    // from a singleton well the windowed Delta mass sits below the
    // first-jump escape mass 1 - e^{-2 n s}, and it shrinks with the window
    for &n in &[10usize, 20] {
        let d = 1.0 / (n as f64).ln().powi(2);
        let inst = metastab::models::inclusion(2, n, d).unwrap();
        let value = |delta: f64| {
            metastab::metastability::check_condition_03(
                &inst.chain,
                &inst.partition,
                delta,
                metastab::StartPolicy::Auto,
            )
            .unwrap()
            .value()
        };
        for &delta in &[0.2, 0.1, 0.05] {
            let escape = 1.0 - (-2.0 * n as f64 * 3.0 * delta).exp();
            let v = value(delta);
            assert!(v <= escape + 1e-12, "n={n} delta={delta}: {v} above escape mass {escape}");
        }
        assert!(value(0.05) < value(0.2), "n={n}: value should shrink with the window");
    }
}

#[test]
fn fdd_joint_laws_marginalize_consistently() {
    // summing the two-time joint over the later label recovers the
    // one-time law, and the t = 0 tuple is the initial label exactly
    let inst = metastab::models::zero_range(2, 14, 1.0, 0.5, 3).unwrap();
    let init = inst.partition.bottoms().unwrap()[0][0];
    let joint2 = metastab::metastability::exact_label_joint(&inst.chain, &inst.partition, init, &[0.4, 1.0]).unwrap();
    let joint1 = metastab::metastability::exact_label_joint(&inst.chain, &inst.partition, init, &[0.4]).unwrap();
    for (tuple, p1) in &joint1 {
        let summed: f64 = joint2
            .iter()
            .filter(|(t2, _)| t2[0] == tuple[0])
            .map(|(_, p)| p)
            .sum();
        assert!((summed - p1).abs() < 1e-10, "label {tuple:?}: {summed} vs {p1}");
    }
    // three-time tuples still sum to one
    let joint3 = metastab::metastability::exact_label_joint(&inst.chain, &inst.partition, init, &[0.2, 0.5, 0.9]).unwrap();
    let total: f64 = joint3.values().sum();
    assert!((total - 1.0).abs() < 1e-9);

    // t = 0 as the first comparison time gives the initial label for free
    let limit = metastab::metastability::estimate_limit_chain(&inst.chain, &inst.partition).unwrap();
    let cmp = metastab::metastability::fdd_compare(&inst.chain, &inst.partition, &limit, &[0.0], init).unwrap();
    let (p, q) = cmp.table[&vec![1usize]];
    assert!((p - 1.0).abs() < 1e-12 && (q - 1.0).abs() < 1e-12);
    assert!(cmp.max_abs_diff < 1e-12);
}

#[test]
fn trace_comparison_diagnostic_on_model_instances() {
    // the trace-vs-projection inequality with measured remainders must
    // hold on generated models, not just random chains
    let inst = metastab::models::zero_range(2, 16, 1.0, 0.5, 4).unwrap();
    let bottoms = inst.partition.bottoms().unwrap();
    for &(r, d) in &[(1.0, 0.08), (2.0, 0.25)] {
        for eta in [bottoms[0][0], inst.partition.well(0)[1]] {
            for y in [1usize, 2] {
                let diag = metastab::metastability::trace_comparison_diagnostic(
                    &inst.chain,
                    &inst.partition,
                    eta,
                    y,
                    r,
                    d,
                )
                .unwrap();
                assert!(
                    diag.lhs <= diag.rhs + 1e-9,
                    "eta={eta} y={y} r={r} d={d}: lhs {} vs rhs {}",
                    diag.lhs,
                    diag.rhs
                );
            }
        }
    }
}

#[test]
fn early_exit_dominated_by_capacity_bound() {
    // the (M2) early-exit scalar from each bottom state is controlled by
    // the linear-in-time capacity bound (which is what vanishing eps
    // theta / ell^alpha buys); deep bottoms sit far below it
    let inst = metastab::models::zero_range(2, 24, 1.0, 0.5, 6).unwrap();
    for &eps in &[0.002, 0.01, 0.05] {
        let m2 = metastab::metastability::check_m2(&inst.chain, &inst.partition, eps).unwrap();
        for x in 0..2usize {
            let eta = inst.partition.bottoms().unwrap()[x][0];
            let bound =
                potential::hitting_prob_bound(&inst.chain, eta, inst.partition.delta(), 2.0 * eps).unwrap();
            let exact = m2.b04.values[&format!("well_{}", x + 1)];
            assert!(
                exact <= bound.capacity_bound + 1e-12,
                "eps {eps}, well {x}: exact {exact} above the capacity bound {}",
                bound.capacity_bound
            );
        }
    }
}

#[test]
fn error_paths_signal_precisely() {
    use metastab::Error;
    let mut r = rng(515);
    let chain = random_chain(5, &mut r);
    assert!(matches!(
        reductions::trace_chain(&chain, &[]).unwrap_err(),
        Error::EmptySubset
    ));
    assert!(matches!(
        reductions::reflected_chain(&chain, &[]).unwrap_err(),
        Error::EmptySubset
    ));
    assert!(matches!(
        potential::capacity(&chain, &[0, 1], &[1, 2]).unwrap_err(),
        Error::Overlap
    ));
    // state-law comparison beyond two times needs the Monte Carlo route
    let p = Partition::new(5, vec![vec![0], vec![2]], None).unwrap();
    let limit = metastab::metastability::estimate_limit_chain(&chain, &p).unwrap();
    assert!(matches!(
        metastab::metastability::state_convergence(&chain, &p, &limit, &[0.1, 0.2, 0.3], 0).unwrap_err(),
        Error::ProductTooLarge(_)
    ));
    // a potential whose minimum sits on the domain boundary violates the
    // inward-gradient assumption
    let grid = metastab::models::PotentialGrid::sample(&[(-1.0, 1.0)], 8, |x| x[0]).unwrap();
    assert!(matches!(
        metastab::models::potential_walk(&grid, 8, 0.2).unwrap_err(),
        Error::NonSmoothBoundary(_)
    ));
}

#[test]
fn condition_reports_are_bit_identical() {
    let inst = metastab::models::zero_range(2, 10, 1.0, 0.5, 2).unwrap();
    let a = metastab::metastability::check_h2(
        &inst.chain,
        &inst.partition,
        1.0,
        metastab::StartPolicy::Auto,
    )
    .unwrap();
    let b = metastab::metastability::check_h2(
        &inst.chain,
        &inst.partition,
        1.0,
        metastab::StartPolicy::Auto,
    )
    .unwrap();
    assert_eq!(a.to_json(), b.to_json());
}
