//! Smallest eigenpairs of the symmetric-definite pencil `W x = λ B x`.
//!
//! The sparse path runs a block Lanczos iteration on the shift-inverted
//! operator `(W - σB)⁻¹ B`, which is self-adjoint in the `B` inner product.
//! The basis is kept fully `B`-orthogonal, Ritz values are extracted by a
//! Rayleigh–Ritz step on the projected matrix, and the iteration restarts
//! thickly from the leading Ritz vectors. Block size > 1 resolves exactly
//! repeated eigenvalues, which a single-vector Krylov space cannot.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{CsrMatrix, EnvelopeCholesky};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LanczosOptions {
    pub block_size: usize,
    /// Relative Ritz residual `‖A y - θ y‖_B / θ` at which a pair counts as converged.
    pub tolerance: f64,
    pub max_restarts: usize,
    /// Shift as a fraction of `trace(W) / trace(B)`; the operator is
    /// `(W + shift_scale * trace(W)/trace(B) * B)⁻¹ B`.
    pub shift_scale: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            block_size: 6,
            tolerance: 1e-11,
            max_restarts: 500,
            shift_scale: 1e-3,
            seed: 0,
        }
    }
}

/// Eigenvalues ascending, eigenvectors as `B`-orthonormal columns.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    /// Number of restarts (0 for the dense path).
    pub restarts: usize,
}

/// Dense generalized solve via `B = L Lᵀ` and `L⁻¹ W L⁻ᵀ`.
pub fn dense_smallest(w: &CsrMatrix, b: &CsrMatrix, k: usize) -> Result<EigenPairs> {
    let n = w.n();
    let chol = b.to_dense().cholesky().ok_or(Error::NotPositiveDefinite {
        pivot: 0,
        value: f64::NAN,
    })?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or(Error::NotPositiveDefinite {
            pivot: 0,
            value: 0.0,
        })?;
    let mut c = &linv * w.to_dense() * linv.transpose();
    c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let k = k.min(n);
    let mut vectors = DMatrix::zeros(n, k);
    let mut values = Vec::with_capacity(k);
    let lt = linv.transpose();
    for (c, &i) in idx.iter().take(k).enumerate() {
        values.push(eig.eigenvalues[i]);
        vectors.set_column(c, &(&lt * eig.eigenvectors.column(i)));
    }
    Ok(EigenPairs {
        values,
        vectors,
        restarts: 0,
    })
}

struct Basis {
    v: DMatrix<f64>,
    bv: DMatrix<f64>,
    av: DMatrix<f64>,
    cols: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// `k` algebraically smallest eigenpairs of `W x = λ B x`, sparse path.
pub fn lanczos_smallest(
    w: &CsrMatrix,
    b: &CsrMatrix,
    k: usize,
    opts: &LanczosOptions,
) -> Result<EigenPairs> {
    let n = w.n();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "need 0 < k < n (k = {k}, n = {n})"
        )));
    }
    let bs = opts.block_size.clamp(1, k);
    let keep = bs * k.div_ceil(bs) + bs;
    let max_cols = keep + bs * k.div_ceil(bs).max(3);
    if max_cols + bs > n {
        return Err(Error::InvalidParameter(format!(
            "basis of {max_cols} vectors does not fit n = {n}; use the dense solver"
        )));
    }

    let sigma = -opts.shift_scale * w.trace() / b.trace();
    let shifted = w.add_scaled(b, -sigma);
    let chol = EnvelopeCholesky::factor(&shifted)?;
    let apply = |x: &[f64]| chol.solve(&b.mul_vec(x));

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let random_vec = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    };

    let mut basis = Basis {
        v: DMatrix::zeros(n, max_cols),
        bv: DMatrix::zeros(n, max_cols),
        av: DMatrix::zeros(n, max_cols),
        cols: 0,
    };
    let mut pending: Vec<Vec<f64>> = (0..bs).map(|_| random_vec(&mut rng)).collect();

    // Orthogonalizes `x` against the first `cols` basis columns (two passes).
    let orth_against = |basis: &Basis, x: &mut [f64]| {
        for _ in 0..2 {
            for j in 0..basis.cols {
                let c = dot(basis.bv.column(j).as_slice(), x);
                axpy(-c, basis.v.column(j).as_slice(), x);
            }
        }
    };

    let mut restarts = 0;
    let mut worst_residual = f64::INFINITY;
    loop {
        // expand the Krylov basis one block at a time
        while basis.cols < max_cols {
            let start = basis.cols;
            let mut block = std::mem::take(&mut pending);
            for (c, x) in block.iter_mut().enumerate() {
                let mut attempts = 0;
                loop {
                    let before = dot(x, &b.mul_vec(x)).sqrt();
                    orth_against(&basis, x);
                    let bx = b.mul_vec(x);
                    let norm = dot(x, &bx).sqrt();
                    if norm > 1e-8 * before && norm > 0.0 {
                        x.iter_mut().for_each(|v| *v /= norm);
                        let bx: Vec<f64> = bx.iter().map(|v| v / norm).collect();
                        let col = start + c;
                        basis.v.column_mut(col).copy_from_slice(x);
                        basis.bv.column_mut(col).copy_from_slice(&bx);
                        basis.cols += 1;
                        break;
                    }
                    // deflated direction: replace with fresh randomness
                    attempts += 1;
                    if attempts > 10 {
                        return Err(Error::ConvergenceFailure {
                            iterations: restarts,
                            residual: worst_residual,
                        });
                    }
                    *x = random_vec(&mut rng);
                }
            }
            let products: Vec<Vec<f64>> = (start..basis.cols)
                .into_par_iter()
                .map(|c| apply(basis.v.column(c).as_slice()))
                .collect();
            for (c, y) in (start..basis.cols).zip(&products) {
                basis.av.column_mut(c).copy_from_slice(y);
            }
            pending = products;
        }
        for x in pending.iter_mut() {
            orth_against(&basis, x);
        }

        // Rayleigh–Ritz on span(V)
        let m = basis.cols;
        let v = basis.v.columns(0, m);
        let av = basis.av.columns(0, m);
        let bv = basis.bv.columns(0, m);
        let mut h = bv.transpose() * av;
        h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let mut s = DMatrix::zeros(m, keep);
        for (c, &i) in idx.iter().take(keep).enumerate() {
            s.set_column(c, &eig.eigenvectors.column(i));
        }
        let theta: Vec<f64> = idx.iter().take(keep).map(|&i| eig.eigenvalues[i]).collect();
        let y = v * &s;
        let ay = av * &s;
        let by = bv * &s;

        let residuals: Vec<f64> = (0..k)
            .into_par_iter()
            .map(|c| {
                let r: DVector<f64> = ay.column(c) - y.column(c) * theta[c];
                let br = b.mul_vec(r.as_slice());
                dot(r.as_slice(), &br).max(0.0).sqrt() / theta[c].abs()
            })
            .collect();
        worst_residual = residuals.iter().cloned().fold(0.0, f64::max);
        log::trace!("lanczos restart {restarts}: worst relative residual {worst_residual:e}");

        if worst_residual <= opts.tolerance || restarts >= opts.max_restarts {
            if worst_residual > opts.tolerance {
                return Err(Error::ConvergenceFailure {
                    iterations: restarts,
                    residual: worst_residual,
                });
            }
            let values: Vec<f64> = theta[..k].iter().map(|t| sigma + 1.0 / t).collect();
            let vectors = y.columns(0, k).into_owned();
            return Ok(EigenPairs {
                values,
                vectors,
                restarts,
            });
        }

        // thick restart from the leading Ritz vectors
        basis.v.columns_mut(0, keep).copy_from(&y);
        basis.av.columns_mut(0, keep).copy_from(&ay);
        basis.bv.columns_mut(0, keep).copy_from(&by);
        basis.cols = keep;
        restarts += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Path graph Laplacian with unit masses: eigenvalues 2 - 2cos(πj/n).
    fn path(n: usize) -> (CsrMatrix, CsrMatrix) {
        let mut t = Vec::new();
        for i in 0..n - 1 {
            t.push((i, i, 1.0));
            t.push((i + 1, i + 1, 1.0));
            t.push((i, i + 1, -1.0));
            t.push((i + 1, i, -1.0));
        }
        let w = CsrMatrix::from_triplets(n, t);
        let b = CsrMatrix::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect());
        (w, b)
    }

    #[test]
    fn path_graph_spectrum() {
        let n = 200;
        let (w, b) = path(n);
        let pairs = lanczos_smallest(&w, &b, 8, &LanczosOptions::default()).unwrap();
        for (j, &l) in pairs.values.iter().enumerate() {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * j as f64 / n as f64).cos();
            assert!((l - exact).abs() < 1e-10, "{j}: {l} vs {exact}");
        }
        let gram = pairs.vectors.transpose() * &pairs.vectors;
        assert!((gram - DMatrix::identity(8, 8)).amax() < 1e-10);
    }

    #[test]
    fn dense_matches_path_graph() {
        let n = 30;
        let (w, b) = path(n);
        let pairs = dense_smallest(&w, &b, 5).unwrap();
        for (j, &l) in pairs.values.iter().enumerate() {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * j as f64 / n as f64).cos();
            assert!((l - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_multiplicity_is_resolved() {
        // two disjoint copies of a path: every eigenvalue is doubled
        let n = 120;
        let (w1, _) = path(n);
        let mut t = w1.triplets();
        t.extend(w1.triplets().into_iter().map(|(i, j, v)| (i + n, j + n, v)));
        let w = CsrMatrix::from_triplets(2 * n, t);
        let b = CsrMatrix::from_triplets(2 * n, (0..2 * n).map(|i| (i, i, 1.0)).collect());
        let pairs = lanczos_smallest(&w, &b, 6, &LanczosOptions::default()).unwrap();
        for j in 0..3 {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * j as f64 / n as f64).cos();
            assert!((pairs.values[2 * j] - exact).abs() < 1e-10);
            assert!((pairs.values[2 * j + 1] - exact).abs() < 1e-10);
        }
    }
}
