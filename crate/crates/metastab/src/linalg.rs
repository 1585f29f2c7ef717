//! Dense and matrix-free linear algebra used by the solvers.
//!
//! Dense factorizations (nalgebra) cover everything up to a few thousand
//! states; the matrix-free path (CG + shift-inverted subspace iteration)
//! covers spectral gaps of larger reversible chains where a dense
//! eigensolve would dominate the runtime.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// LU factorization with partial pivoting, reusable across right-hand sides.
pub struct LuSolver {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
}

impl LuSolver {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let lu = a.lu();
        // a fully zero pivot means the matrix was singular; the packed
        // factor stores U on and above the diagonal
        for i in 0..n {
            if lu.lu_internal()[(i, i)] == 0.0 {
                return Err(Error::Reducible(
                    "singular linear system (zero pivot in LU)".into(),
                ));
            }
        }
        Ok(Self { lu, n })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(b.len(), self.n);
        let rhs = DVector::from_column_slice(b);
        match self.lu.solve(&rhs) {
            Some(x) => Ok(x.as_slice().to_vec()),
            None => Err(Error::Reducible("singular linear system".into())),
        }
    }
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Column k of `vectors` is the eigenvector of `values[k]`, orthonormal.
    pub vectors: DMatrix<f64>,
}

pub fn sym_eigen(a: DMatrix<f64>) -> SymEigen {
    let n = a.nrows();
    let se = a.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &se.eigenvectors.column(i));
    }
    SymEigen { values, vectors }
}

/// Conjugate gradient for an SPD operator given as a matvec closure.
///
/// Returns the solution and the relative residual actually reached.
pub fn cg_solve<F>(
    apply: F,
    b: &[f64],
    diag_precond: Option<&[f64]>,
    rel_tol: f64,
    max_iter: usize,
) -> (Vec<f64>, f64)
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = norm2(b).max(f64::MIN_POSITIVE);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    let precond = |r: &[f64], z: &mut [f64]| {
        if let Some(d) = diag_precond {
            for i in 0..r.len() {
                z[i] = r[i] / d[i];
            }
        } else {
            z.copy_from_slice(r);
        }
    };
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for _ in 0..max_iter {
        if norm2(&r) <= rel_tol * bnorm {
            break;
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break; // lost positive-definiteness numerically
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = norm2(&r) / bnorm;
    (x, res)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Smallest eigenvalue of an SPD operator `A` by shift-inverted subspace
/// iteration: repeatedly apply `A^{-1}` (inner CG solves) to a small block
/// and extract Ritz values.
///
/// Used for the spectral gap of large reversible chains: `A` is the negated,
/// similarity-symmetrized generator with its known null direction shifted
/// away by a rank-one term, so the smallest remaining eigenvalue is the gap.
pub fn smallest_eigen_spd<F>(
    apply: F,
    n: usize,
    diag: &[f64],
    block: usize,
    tol: f64,
    max_outer: usize,
) -> f64
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    let m = block.min(n);
    // deterministic pseudo-random start block
    let mut xs: Vec<Vec<f64>> = (0..m)
        .map(|c| {
            let mut s: u64 = 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(c as u64 + 1);
            (0..n)
                .map(|_| {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    ((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
                })
                .collect()
        })
        .collect();
    orthonormalize(&mut xs);

    let mut prev = f64::INFINITY;
    for _ in 0..max_outer {
        // X <- A^{-1} X column by column
        for x in xs.iter_mut() {
            let (sol, _res) = cg_solve(&apply, x, Some(diag), 1e-13, 50 * (n as f64).sqrt() as usize + 2000);
            *x = sol;
        }
        orthonormalize(&mut xs);
        // Rayleigh-Ritz on the block
        let mut ax: Vec<Vec<f64>> = Vec::with_capacity(m);
        for x in &xs {
            let mut y = vec![0.0; n];
            apply(x, &mut y);
            ax.push(y);
        }
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                t[(i, j)] = dot(&xs[i], &ax[j]);
            }
        }
        let t = (&t + t.transpose()) * 0.5;
        let eig = sym_eigen(t);
        // rotate the block onto the Ritz vectors
        let mut rotated: Vec<Vec<f64>> = vec![vec![0.0; n]; m];
        for (k, r) in rotated.iter_mut().enumerate() {
            for (i, x) in xs.iter().enumerate() {
                let c = eig.vectors[(i, k)];
                for (rj, xj) in r.iter_mut().zip(x) {
                    *rj += c * xj;
                }
            }
        }
        xs = rotated;
        let lambda = eig.values[0];
        if (lambda - prev).abs() <= tol * lambda.abs().max(1e-300) {
            return lambda;
        }
        prev = lambda;
    }
    prev
}

fn orthonormalize(xs: &mut [Vec<f64>]) {
    for i in 0..xs.len() {
        for j in 0..i {
            let (head, tail) = xs.split_at_mut(i);
            let c = dot(&head[j], &tail[0]);
            for (t, h) in tail[0].iter_mut().zip(&head[j]) {
                *t -= c * h;
            }
        }
        let nrm = norm2(&xs[i]);
        if nrm > 0.0 {
            for v in xs[i].iter_mut() {
                *v /= nrm;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd_test_matrix(n: usize) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = 2.0 + i as f64 * 0.01;
            if i + 1 < n {
                a[(i, i + 1)] = -1.0;
                a[(i + 1, i)] = -1.0;
            }
        }
        a
    }

    #[test]
    fn lu_roundtrip() {
        let a = spd_test_matrix(30);
        let lu = LuSolver::new(a.clone()).unwrap();
        let b: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let x = lu.solve(&b).unwrap();
        let ax = &a * DVector::from_column_slice(&x);
        for i in 0..30 {
            assert!((ax[i] - b[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn cg_matches_lu() {
        let a = spd_test_matrix(50);
        let b: Vec<f64> = (0..50).map(|i| ((i * 7 % 13) as f64) - 6.0).collect();
        let lu = LuSolver::new(a.clone()).unwrap();
        let xd = lu.solve(&b).unwrap();
        let apply = |x: &[f64], y: &mut [f64]| {
            let ax = &a * DVector::from_column_slice(x);
            y.copy_from_slice(ax.as_slice());
        };
        let diag: Vec<f64> = (0..50).map(|i| a[(i, i)]).collect();
        let (xc, res) = cg_solve(apply, &b, Some(&diag), 1e-13, 10_000);
        assert!(res < 1e-12);
        for i in 0..50 {
            assert!((xd[i] - xc[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn subspace_iteration_finds_smallest() {
        let n = 80;
        let a = spd_test_matrix(n);
        let exact = sym_eigen(a.clone()).values[0];
        let apply = |x: &[f64], y: &mut [f64]| {
            let ax = &a * DVector::from_column_slice(x);
            y.copy_from_slice(ax.as_slice());
        };
        let diag: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        let low = smallest_eigen_spd(apply, n, &diag, 4, 1e-11, 200);
        assert!(
            (low - exact).abs() < 1e-8 * exact.abs().max(1.0),
            "subspace {low} vs dense {exact}"
        );
    }
}
