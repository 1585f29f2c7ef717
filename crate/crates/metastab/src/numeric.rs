//! Small numerical kernels: log-gamma, log-sum-exp, Poisson weight windows.

/// Natural log of the gamma function (Lanczos approximation, g = 7, n = 9).
///
/// Relative error below 1e-13 for x > 0, which is all this crate needs
/// (factorials and gamma-family stationary weights).
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection formula
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, &c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// log(sum exp(v)) computed stably; -inf for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = values.iter().map(|&v| (v - m).exp()).sum();
    m + s.ln()
}

/// Truncated Poisson(lambda_t) pmf on the index window `[kmin, kmax]`.
///
/// The window is chosen so each discarded tail holds at most `tail/2` mass.
/// Weights are exact pmf values (not renormalized), computed around the mode
/// to stay finite for large `lambda_t`.
#[derive(Debug, Clone)]
pub struct PoissonWindow {
    pub kmin: usize,
    pub kmax: usize,
    pub weights: Vec<f64>,
}

impl PoissonWindow {
    pub fn weight(&self, k: usize) -> f64 {
        if k < self.kmin || k > self.kmax {
            0.0
        } else {
            self.weights[k - self.kmin]
        }
    }

    /// `P[Poisson >= k+1]` restricted to the window (suffix sums; ~1 below it).
    pub fn survival_from(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.weights.len()];
        let mut acc = 0.0;
        for i in (0..self.weights.len()).rev() {
            s[i] = acc; // mass strictly above index i
            acc += self.weights[i];
        }
        s
    }
}

pub fn poisson_window(lambda_t: f64, tail: f64) -> PoissonWindow {
    assert!(lambda_t >= 0.0 && tail > 0.0);
    if lambda_t == 0.0 {
        return PoissonWindow { kmin: 0, kmax: 0, weights: vec![1.0] };
    }
    let mode = lambda_t.floor() as usize;
    let log_wm = -lambda_t + (mode as f64) * lambda_t.ln() - ln_gamma(mode as f64 + 1.0);
    let wm = log_wm.exp();

    // walk down from the mode
    let mut below = Vec::new();
    let mut w = wm;
    let mut k = mode;
    while k > 0 {
        // w_{k-1} = w_k * k / lambda_t
        let w_prev = w * (k as f64) / lambda_t;
        below.push(w_prev);
        w = w_prev;
        k -= 1;
        if w < tail * 1e-3 && cum_low_tail(&below, tail) {
            break;
        }
    }
    // trim the low side so the discarded mass is <= tail/2
    let mut kmin = mode - below.len();
    {
        let mut discard = 0.0;
        while let Some(&last) = below.last() {
            if discard + last <= tail / 2.0 {
                discard += last;
                below.pop();
                kmin += 1;
            } else {
                break;
            }
        }
    }
    below.reverse();

    // walk up from the mode until the upper tail bound is met
    let mut above = Vec::new();
    let mut w = wm;
    let mut k = mode;
    let mut total: f64 = wm + below.iter().sum::<f64>();
    loop {
        let w_next = w * lambda_t / (k as f64 + 1.0);
        k += 1;
        total += w_next;
        above.push(w_next);
        w = w_next;
        // conservative geometric tail bound once past the mode
        if k as f64 > lambda_t {
            let r = lambda_t / (k as f64 + 1.0);
            let tail_bound = w * r / (1.0 - r);
            if tail_bound <= tail / 2.0 {
                break;
            }
        }
        if k > mode + 20 + (200.0 + 20.0 * lambda_t.sqrt()) as usize {
            break;
        }
    }

    let mut weights = below;
    weights.push(wm);
    weights.extend(above);
    let _ = total;
    PoissonWindow { kmin, kmax: k, weights }
}

fn cum_low_tail(below: &[f64], tail: f64) -> bool {
    // cheap check: last pushed weight dominates the remaining lower tail
    // geometrically once k << lambda_t, so a tiny weight ends the walk
    below.last().map(|&w| w < tail * 1e-6).unwrap_or(false)
}
