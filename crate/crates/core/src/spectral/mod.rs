//! Finite-element Laplace–Beltrami operator under the α-interpolated
//! scale-invariant metric.
//!
//! The stiffness matrix `W` uses cotangent weights and is independent of α.
//! The metric only enters through the mass matrix `B`, whose per-triangle
//! weight is `|K_t|^α |t|`. Solving `W φ = λ B φ` for the smallest `k` pairs
//! yields one [`SpectralBasis`] per (shape, α).

pub mod cache;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::curvature::CurvatureField;
use crate::error::{Error, Result};
use crate::linalg::{dense_smallest, lanczos_smallest, CsrMatrix, LanczosOptions};
use crate::mesh::TriMesh;

/// `W = -A`: symmetric, positive semidefinite, zero row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessMatrix(pub CsrMatrix);

/// α-weighted consistent mass matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MassMatrix {
    pub matrix: CsrMatrix,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EigenMethod {
    /// Dense for small problems, Lanczos otherwise.
    #[default]
    Auto,
    Lanczos,
    Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenOptions {
    pub method: EigenMethod,
    pub lanczos: LanczosOptions,
    /// Problems up to this size go to the dense solver under [`EigenMethod::Auto`].
    pub dense_limit: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            method: EigenMethod::Auto,
            lanczos: LanczosOptions::default(),
            dense_limit: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    pub alpha: f64,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `n × k`, `B`-orthonormal columns.
    pub eigenfunctions: DMatrix<f64>,
    pub mass: MassMatrix,
}

impl SpectralBasis {
    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n(&self) -> usize {
        self.eigenfunctions.nrows()
    }

    /// Coefficients `Φᵀ B f` of the columns of `f` (`n × d` → `k × d`).
    pub fn project(&self, f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if f.nrows() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: f.nrows(),
            });
        }
        Ok(self.eigenfunctions.transpose() * self.mass.matrix.mul_dense(f))
    }

    /// `Φ c`.
    pub fn reconstruct(&self, coeffs: &DMatrix<f64>) -> DMatrix<f64> {
        &self.eigenfunctions * coeffs
    }

    /// The first `k` pairs only.
    pub fn truncated(&self, k: usize) -> SpectralBasis {
        let k = k.min(self.k());
        SpectralBasis {
            alpha: self.alpha,
            eigenvalues: self.eigenvalues[..k].to_vec(),
            eigenfunctions: self.eigenfunctions.columns(0, k).into_owned(),
            mass: self.mass.clone(),
        }
    }

    /// Largest entry of `|ΦᵀBΦ - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.eigenfunctions.transpose() * self.mass.matrix.mul_dense(&self.eigenfunctions);
        (g - DMatrix::identity(self.k(), self.k())).amax()
    }

    /// `‖W φ_i - λ_i B φ_i‖ / ‖B φ_i‖` per pair.
    pub fn residuals(&self, w: &StiffnessMatrix) -> Vec<f64> {
        (0..self.k())
            .map(|i| {
                let phi = self.eigenfunctions.column(i);
                let wp = w.0.mul_vec(phi.as_slice());
                let bp = self.mass.matrix.mul_vec(phi.as_slice());
                let r: f64 = wp
                    .iter()
                    .zip(&bp)
                    .map(|(a, b)| (a - self.eigenvalues[i] * b).powi(2))
                    .sum();
                let nb: f64 = bp.iter().map(|b| b * b).sum();
                (r / nb).sqrt()
            })
            .collect()
    }
}

/// Cotangent stiffness matrix; `W(i,j) = -(cot α_ij + cot β_ij) / 2` (a single
/// cotangent on boundary edges), diagonal making each row sum vanish.
///
/// With `clamp_negative`, edges whose combined weight is negative get zero weight.
pub fn assemble_stiffness(mesh: &TriMesh, clamp_negative: bool) -> Result<StiffnessMatrix> {
    mesh.triangle_areas()?;
    let n = mesh.num_vertices();
    let mut t = Vec::with_capacity(4 * mesh.num_edges());
    for e in mesh.edges() {
        let mut w: f64 = e.faces.iter().map(|&(f, o)| 0.5 * mesh.cot_at(f, o)).sum();
        if clamp_negative {
            w = w.max(0.0);
        }
        let [i, j] = e.v;
        t.push((i, j, -w));
        t.push((j, i, -w));
        t.push((i, i, w));
        t.push((j, j, w));
    }
    Ok(StiffnessMatrix(CsrMatrix::from_triplets(n, t)))
}

/// Per-triangle metric weight `|K_t|^α |t|`.
pub fn triangle_weights(mesh: &TriMesh, curv: &CurvatureField, alpha: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    if curv.triangle.len() != mesh.num_faces() {
        return Err(Error::DimensionMismatch {
            expected: mesh.num_faces(),
            got: curv.triangle.len(),
        });
    }
    let areas = mesh.triangle_areas()?;
    Ok(areas
        .iter()
        .zip(&curv.triangle)
        .map(|(a, k)| if alpha == 0.0 { *a } else { k.powf(alpha) * a })
        .collect())
}

/// Consistent mass matrix with weights `|K_t|^α |t|`: `w/12` per incident
/// triangle on edges, `w/6` per incident triangle on the diagonal.
pub fn assemble_mass(mesh: &TriMesh, curv: &CurvatureField, alpha: f64) -> Result<MassMatrix> {
    let weights = triangle_weights(mesh, curv, alpha)?;
    Ok(MassMatrix {
        matrix: mass_from_weights(mesh, &weights),
        alpha,
    })
}

pub(crate) fn mass_from_weights(mesh: &TriMesh, weights: &[f64]) -> CsrMatrix {
    let mut t = Vec::with_capacity(9 * mesh.num_faces());
    for (face, &w) in mesh.faces().iter().zip(weights) {
        for a in 0..3 {
            for b in 0..3 {
                let v = if a == b { w / 6.0 } else { w / 12.0 };
                t.push((face[a], face[b], v));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.num_vertices(), t)
}

/// `k` smallest eigenpairs of `W φ = λ B φ`, ascending, `B`-orthonormal, each
/// column's first significant entry made positive.
pub fn eigensolve(
    w: &StiffnessMatrix,
    b: &MassMatrix,
    k: usize,
    opts: &EigenOptions,
) -> Result<SpectralBasis> {
    let n = w.0.n();
    if b.matrix.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.matrix.n(),
        });
    }
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!("need 0 < k < n (k = {k}, n = {n})")));
    }
    if let Some((i, d)) = b.matrix.diagonal().into_iter().enumerate().find(|(_, d)| !(*d > 0.0)) {
        return Err(Error::NotPositiveDefinite { pivot: i, value: d });
    }
    let dense = match opts.method {
        EigenMethod::Dense => true,
        EigenMethod::Lanczos => false,
        EigenMethod::Auto => n <= opts.dense_limit,
    };
    let pairs = if dense {
        dense_smallest(&w.0, &b.matrix, k)?
    } else {
        match lanczos_smallest(&w.0, &b.matrix, k, &opts.lanczos) {
            Err(Error::InvalidParameter(_)) if opts.method == EigenMethod::Auto => {
                dense_smallest(&w.0, &b.matrix, k)?
            }
            other => other?,
        }
    };

    let mut vectors = pairs.vectors;
    for mut col in vectors.column_iter_mut() {
        let scale = col.amax();
        if let Some(first) = col.iter().copied().find(|v| v.abs() > 1e-6 * scale) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
    let basis = SpectralBasis {
        alpha: b.alpha,
        eigenvalues: pairs.values,
        eigenfunctions: vectors,
        mass: b.clone(),
    };
    let ortho = basis.orthonormality_error();
    if ortho > 1e-8 {
        return Err(Error::ConvergenceFailure {
            iterations: pairs.restarts,
            residual: ortho,
        });
    }
    // residuals are measured against the spectral scale so the check is unit-free
    let scale = basis.eigenvalues.last().copied().unwrap_or(1.0).abs().max(f64::MIN_POSITIVE);
    let worst = basis.residuals(w).into_iter().fold(0.0, f64::max) / scale;
    if !(worst <= 1e-6) {
        return Err(Error::ConvergenceFailure {
            iterations: pairs.restarts,
            residual: worst,
        });
    }
    Ok(basis)
}

/// Assembles both matrices and solves, for one (mesh, α).
pub fn build_basis(
    mesh: &TriMesh,
    curv: &CurvatureField,
    alpha: f64,
    k: usize,
    opts: &EigenOptions,
) -> Result<SpectralBasis> {
    let w = assemble_stiffness(mesh, false)?;
    let b = assemble_mass(mesh, curv, alpha)?;
    eigensolve(&w, &b, k, opts)
}
