//! Independent reference implementations used to cross-check the production
//! solvers. These deliberately take different algorithmic routes (series,
//! quadrature, power iteration) and stay on small state spaces; none of them
//! is called from a production path.

use nalgebra::DMatrix;

use crate::chain::{Chain, Measure};

/// Dense matrix exponential e^{tQ} by scaling and squaring with a Taylor
/// core. Adequate to ~1e-12 on the small generators it is used for.
pub fn expm_dense(q: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let n = q.nrows();
    let a = q * t;
    let norm = a
        .row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let b = &a / 2f64.powi(squarings as i32);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = DMatrix::<f64>::identity(n, n);
    for k in 1..=24 {
        term = &term * &b / k as f64;
        sum += &term;
    }
    let mut out = sum;
    for _ in 0..squarings {
        out = &out * &out;
    }
    out
}

/// Occupation time of `a_set` by adaptive Simpson quadrature over transient
/// distribution evaluations (the slow route the exact series replaces).
pub fn occupation_by_quadrature(
    chain: &Chain,
    init: &Measure,
    a_set: &[usize],
    t: f64,
    tol: f64,
) -> f64 {
    let p = |s: f64| -> f64 {
        let dist = chain.transient_distribution(init, s).unwrap();
        a_set.iter().map(|&i| dist.get(i)).sum()
    };
    adaptive_simpson(&p, 0.0, t, tol, 24)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    simpson_step(f, a, b, fa, fm, fb, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, tol / 2.0, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, tol / 2.0, depth - 1)
    }
}

/// Stationary distribution by power iteration on the uniformized kernel.
pub fn stationary_power_iteration(chain: &Chain, iters: usize) -> Vec<f64> {
    let n = chain.n_states();
    let lambda = chain.max_holding() * 1.05;
    let mut v = vec![1.0 / n as f64; n];
    let mut y = vec![0.0; n];
    for _ in 0..iters {
        // y = v P with P = I + Q/lambda
        chain.apply_generator_left(&v, &mut y);
        for i in 0..n {
            y[i] = v[i] + y[i] / lambda;
        }
        let s: f64 = y.iter().sum();
        for i in 0..n {
            v[i] = y[i] / s;
        }
    }
    v
}

/// Hitting distribution on `a_set` starting outside it, by brute-force
/// enumeration over the embedded jump chain (Neumann series on path
/// lengths). Returns `h[state][k] = P_state[hit A at a_set[k]]`.
pub fn embedded_hitting_distribution(chain: &Chain, a_set: &[usize], iters: usize) -> Vec<Vec<f64>> {
    let n = chain.n_states();
    let mut in_a = vec![false; n];
    for &i in a_set {
        in_a[i] = true;
    }
    let mut h: Vec<Vec<f64>> = vec![vec![0.0; a_set.len()]; n];
    for (k, &a) in a_set.iter().enumerate() {
        h[a][k] = 1.0;
    }
    // value iteration: h(x) = sum_y p(x,y) h(y) for x outside A
    for _ in 0..iters {
        let mut next = h.clone();
        for x in 0..n {
            if in_a[x] {
                continue;
            }
            let lam = chain.holding(x);
            let mut acc = vec![0.0; a_set.len()];
            for &(y, r) in chain.row(x) {
                let p = r / lam;
                for (k, a) in acc.iter_mut().enumerate() {
                    *a += p * h[y][k];
                }
            }
            next[x] = acc;
        }
        h = next;
    }
    h
}

/// Trace-chain rates by the embedded-jump-chain route: R(eta, zeta) plus
/// excursion mass through the complement, with hitting probabilities from
/// `embedded_hitting_distribution`.
pub fn trace_rates_by_enumeration(chain: &Chain, a_set: &[usize], iters: usize) -> Vec<Vec<f64>> {
    let h = embedded_hitting_distribution(chain, a_set, iters);
    let n = chain.n_states();
    let mut in_a = vec![false; n];
    for &i in a_set {
        in_a[i] = true;
    }
    let m = a_set.len();
    let mut rates = vec![vec![0.0; m]; m];
    for (ai, &eta) in a_set.iter().enumerate() {
        for &(xi, r) in chain.row(eta) {
            if in_a[xi] {
                let aj = a_set.iter().position(|&s| s == xi).unwrap();
                rates[ai][aj] += r;
            } else {
                for (aj, rate) in rates[ai].iter_mut().enumerate() {
                    *rate += r * h[xi][aj];
                }
            }
        }
        rates[ai][ai] = 0.0; // returns through the complement extend the holding time
    }
    rates
}
