//! Gaussian curvature estimation and the clipped per-triangle weights
//! `|K|_t` that enter the scale-invariant mass matrix.
//!
//! Pipeline: uniform Laplacian smoothing, a per-vertex quadric fit in the
//! tangent frame (`z = (a x² + 2 b x y + c y²) / 2`, `K = a c - b²`), then
//! percentile clipping of `|K|` and averaging onto triangles.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{TriMesh, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurvatureConfig {
    pub smoothing_iterations: usize,
    pub smoothing_step: f64,
    /// Lower clip percentile of `|K|`, in percent.
    pub lo_pct: f64,
    /// Upper clip percentile of `|K|`, in percent.
    pub hi_pct: f64,
    /// Floor for the lower clip bound relative to the upper one, used when the
    /// lower percentile itself is zero (flat regions).
    pub floor_ratio: f64,
}

impl Default for CurvatureConfig {
    fn default() -> Self {
        Self {
            smoothing_iterations: 3,
            smoothing_step: 0.5,
            lo_pct: 0.4,
            hi_pct: 75.0,
            floor_ratio: 1e-3,
        }
    }
}

impl CurvatureConfig {
    pub fn check(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.lo_pct)
            || !(0.0..=100.0).contains(&self.hi_pct)
            || self.lo_pct >= self.hi_pct
        {
            return Err(Error::Config(format!(
                "clip percentiles must satisfy 0 <= lo < hi <= 100 (got {} / {})",
                self.lo_pct, self.hi_pct
            )));
        }
        if !(self.smoothing_step > 0.0 && self.smoothing_step < 1.0) {
            return Err(Error::Config("smoothing_step must lie in (0, 1)".into()));
        }
        if !(self.floor_ratio > 0.0 && self.floor_ratio <= 1.0) {
            return Err(Error::Config("floor_ratio must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Per-vertex curvature plus which vertices used the angle-defect fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureEstimate {
    pub k: Vec<f64>,
    pub fallback: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureField {
    /// Signed per-vertex estimate before clipping.
    pub vertex_k: Vec<f64>,
    /// `|K|` per vertex after clamping to `[lo, hi]`.
    pub vertex_clipped: Vec<f64>,
    /// Mean of the three clipped vertex values of each face.
    pub triangle: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
    pub lo_pct: f64,
    pub hi_pct: f64,
    pub fallback: Vec<bool>,
}

/// Moves each interior vertex by `step * (ring average - vertex)`, `iterations` times.
pub fn laplacian_smooth(mesh: &TriMesh, iterations: usize, step: f64) -> TriMesh {
    if iterations == 0 {
        return mesh.clone();
    }
    let boundary = mesh.boundary_vertices();
    let mut pos = mesh.vertices().to_vec();
    for _ in 0..iterations {
        let next: Vec<Vec3> = (0..pos.len())
            .map(|i| {
                let ring = mesh.neighbors(i);
                if boundary[i] || ring.is_empty() {
                    return pos[i];
                }
                let avg = ring.iter().fold(Vec3::zeros(), |a, &j| a + pos[j]) / ring.len() as f64;
                pos[i] + (avg - pos[i]) * step
            })
            .collect();
        pos = next;
    }
    mesh.with_vertices(pos).expect("same vertex count")
}

/// Angle defect per vertex: `2π - Σθ` (interior) or `π - Σθ` (boundary).
///
/// Sums to `2π χ` on closed meshes.
pub fn angle_defects(mesh: &TriMesh) -> Vec<f64> {
    let boundary = mesh.boundary_vertices();
    let mut defect: Vec<f64> = boundary
        .iter()
        .map(|&b| if b { PI } else { 2.0 * PI })
        .collect();
    for (f, face) in mesh.faces().iter().enumerate() {
        for (c, &v) in face.iter().enumerate() {
            defect[v] -= mesh.corner_angle(f, c);
        }
    }
    defect
}

/// Angle defect divided by a third of the incident area.
fn angle_defect_curvature(mesh: &TriMesh, defects: &[f64], areas: &[f64], v: usize) -> f64 {
    let a: f64 = mesh.vertex_faces(v).iter().map(|&f| areas[f]).sum();
    if a > 0.0 {
        3.0 * defects[v] / a
    } else {
        0.0
    }
}

fn tangent_frame(n: &Vec3) -> (Vec3, Vec3) {
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = (helper - n * n.dot(&helper)).normalize();
    let e2 = n.cross(&e1);
    (e1, e2)
}

/// Quadric-fit Gaussian curvature at every vertex.
///
/// Rings with fewer than 5 neighbors are widened to the two-ring. Vertices
/// with fewer than 3 usable points, or whose fit is rank-deficient, fall back
/// to the angle-defect estimate and are flagged.
pub fn gaussian_curvature(mesh: &TriMesh) -> CurvatureEstimate {
    const MIN_RCOND: f64 = 1e-6;
    let normals = mesh.vertex_normals();
    let defects = angle_defects(mesh);
    let areas = mesh.raw_areas();
    let n = mesh.num_vertices();
    let mut k = vec![0.0; n];
    let mut fallback = vec![false; n];

    for v in 0..n {
        let mut ring = mesh.neighbors(v).to_vec();
        if ring.len() < 5 {
            ring = mesh.k_ring(v, 2);
        }
        let normal = normals[v];
        let fit = if ring.len() >= 3 && normal.norm() > 0.5 {
            let (e1, e2) = tangent_frame(&normal);
            let p = mesh.vertex(v);
            let h2 = ring
                .iter()
                .map(|&j| (mesh.vertex(j) - p).norm_squared())
                .sum::<f64>()
                / ring.len() as f64;
            let mut design = DMatrix::zeros(ring.len(), 3);
            let mut rhs = DVector::zeros(ring.len());
            for (r, &j) in ring.iter().enumerate() {
                let d = mesh.vertex(j) - p;
                let (x, y, z) = (d.dot(&e1), d.dot(&e2), d.dot(&normal));
                // columns scaled by 1/h² so the condition test is scale-free
                design[(r, 0)] = 0.5 * x * x / h2;
                design[(r, 1)] = x * y / h2;
                design[(r, 2)] = 0.5 * y * y / h2;
                rhs[r] = z;
            }
            let svd = design.svd(true, true);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            if smax > 0.0 && smin / smax > MIN_RCOND {
                svd.solve(&rhs, 0.0).ok().map(|coef| {
                    let (a, b, c) = (coef[0] / h2, coef[1] / h2, coef[2] / h2);
                    a * c - b * b
                })
            } else {
                None
            }
        } else {
            None
        };
        match fit {
            Some(kv) if kv.is_finite() => k[v] = kv,
            _ => {
                k[v] = angle_defect_curvature(mesh, &defects, &areas, v);
                fallback[v] = true;
            }
        }
    }
    CurvatureEstimate { k, fallback }
}

/// Linear-interpolation percentile of already sorted values, `pct` in percent.
pub fn percentile_sorted(sorted: &[f64], pct: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let t = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] * (1.0 - t) + sorted[hi] * t
    }
}

/// Clamps `|K|` to its `[lo_pct, hi_pct]` percentile range on this shape and
/// averages the clamped vertex values onto faces.
///
/// A zero lower percentile is lifted to `floor_ratio * hi` so that flat regions
/// keep a positive weight.
pub fn clip_curvature(
    mesh: &TriMesh,
    estimate: &CurvatureEstimate,
    lo_pct: f64,
    hi_pct: f64,
    floor_ratio: f64,
) -> Result<CurvatureField> {
    if !(0.0..=100.0).contains(&lo_pct) || !(0.0..=100.0).contains(&hi_pct) || lo_pct >= hi_pct {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= lo_pct < hi_pct <= 100, got {lo_pct} / {hi_pct}"
        )));
    }
    if estimate.k.len() != mesh.num_vertices() {
        return Err(Error::DimensionMismatch {
            expected: mesh.num_vertices(),
            got: estimate.k.len(),
        });
    }
    let mut mags: Vec<f64> = estimate.k.iter().map(|k| k.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let hi = percentile_sorted(&mags, hi_pct);
    if !(hi > 0.0) {
        return Err(Error::AllZeroCurvature);
    }
    let lo = percentile_sorted(&mags, lo_pct).max(floor_ratio * hi);

    let vertex_clipped: Vec<f64> = estimate.k.iter().map(|k| k.abs().clamp(lo, hi)).collect();
    let triangle = mesh
        .faces()
        .iter()
        .map(|f| (vertex_clipped[f[0]] + vertex_clipped[f[1]] + vertex_clipped[f[2]]) / 3.0)
        .collect();
    Ok(CurvatureField {
        vertex_k: estimate.k.clone(),
        vertex_clipped,
        triangle,
        lo,
        hi,
        lo_pct,
        hi_pct,
        fallback: estimate.fallback.clone(),
    })
}

/// Smoothing, estimation and clipping with one configuration.
pub fn curvature_field(mesh: &TriMesh, cfg: &CurvatureConfig) -> Result<CurvatureField> {
    cfg.check()?;
    let smooth = laplacian_smooth(mesh, cfg.smoothing_iterations, cfg.smoothing_step);
    let estimate = gaussian_curvature(&smooth);
    clip_curvature(mesh, &estimate, cfg.lo_pct, cfg.hi_pct, cfg.floor_ratio)
}

/// `index,K` lines for debugging.
pub fn curvature_csv(k: &[f64]) -> String {
    let mut s = String::from("index,K\n");
    for (i, v) in k.iter().enumerate() {
        s.push_str(&format!("{i},{v:e}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate::{grid, icosphere, torus};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_iterations_is_identity() {
        let m = icosphere(2);
        assert_eq!(laplacian_smooth(&m, 0, 0.5), m);
    }

    #[test]
    fn flat_grid_is_a_fixed_point() {
        let g = grid(8, 7, 0.3);
        let s = laplacian_smooth(&g, 5, 0.5);
        for (p, q) in g.vertices().iter().zip(s.vertices()) {
            assert!((p - q).norm() < 1e-12);
        }
    }

    #[test]
    fn smoothing_reduces_radial_noise() {
        let m = icosphere(3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noisy: Vec<Vec3> = m
            .vertices()
            .iter()
            .map(|v| v * (1.0 + rng.gen_range(-0.02..0.02)))
            .collect();
        let noisy = m.with_vertices(noisy).unwrap();
        let std = |mesh: &TriMesh| {
            let r: Vec<f64> = mesh.vertices().iter().map(|v| v.norm()).collect();
            let mean = r.iter().sum::<f64>() / r.len() as f64;
            (r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / r.len() as f64).sqrt()
        };
        let smooth = laplacian_smooth(&noisy, 10, 0.5);
        assert!(std(&smooth) < std(&noisy));
    }

    #[test]
    fn unit_sphere_curvature_is_one() {
        let m = icosphere(4);
        let est = gaussian_curvature(&m);
        assert!(est.fallback.iter().all(|f| !f));
        let worst = est.k.iter().map(|k| (k - 1.0).abs()).fold(0.0, f64::max);
        assert!(worst < 0.05, "worst |K-1| = {worst}");

        let est2 = gaussian_curvature(&m.scaled(2.0));
        for (a, b) in est.k.iter().zip(&est2.k) {
            assert!((b - a / 4.0).abs() <= 1e-12 * a.abs());
        }
    }

    #[test]
    fn flat_grid_has_zero_curvature() {
        let g = grid(6, 6, 0.2);
        let est = gaussian_curvature(&g);
        let boundary = g.boundary_vertices();
        for (i, k) in est.k.iter().enumerate() {
            if !boundary[i] {
                assert!(k.abs() < 1e-6);
            }
        }
    }

    #[test]
    fn gauss_bonnet() {
        let s: f64 = angle_defects(&icosphere(3)).iter().sum();
        assert!((s - 4.0 * PI).abs() < 1e-9);
        let t: f64 = angle_defects(&torus(2.0, 0.5, 30, 14)).iter().sum();
        assert!(t.abs() < 1e-9);
    }

    #[test]
    fn quadric_sign_agrees_with_angle_defect_on_torus() {
        let t = torus(2.0, 0.6, 60, 30);
        let est = gaussian_curvature(&t);
        let defects = angle_defects(&t);
        let agree = est
            .k
            .iter()
            .zip(&defects)
            .filter(|(k, d)| k.abs() > 1e-3 && k.signum() == d.signum())
            .count();
        let significant = est.k.iter().filter(|k| k.abs() > 1e-3).count();
        assert!(agree as f64 >= 0.95 * significant as f64);
    }

    #[test]
    fn constant_field_clips_to_itself() {
        let m = icosphere(1);
        let est = CurvatureEstimate {
            k: vec![0.7; m.num_vertices()],
            fallback: vec![false; m.num_vertices()],
        };
        let field = clip_curvature(&m, &est, 0.4, 75.0, 1e-3).unwrap();
        assert!(field.triangle.iter().all(|&t| (t - 0.7).abs() < 1e-15));
    }

    #[test]
    fn bumped_plane_keeps_positive_weights() {
        let g = grid(5, 5, 1.0);
        let mut v = g.vertices().to_vec();
        v[12].z = 0.5;
        let bumped = g.with_vertices(v).unwrap();
        let est = gaussian_curvature(&bumped);
        let field = clip_curvature(&bumped, &est, 0.4, 75.0, 1e-3).unwrap();
        assert!(field.lo > 0.0);
        assert!(field.triangle.iter().all(|&t| t >= field.lo && t <= field.hi));
        let flat: Vec<usize> = (0..bumped.num_faces())
            .filter(|&f| bumped.faces()[f].iter().all(|&v| est.k[v].abs() <= field.lo))
            .collect();
        assert!(!flat.is_empty());
        for f in flat {
            assert!((field.triangle[f] - field.lo).abs() <= 1e-15 * field.lo);
        }
    }

    #[test]
    fn flat_mesh_is_all_zero() {
        let g = grid(4, 4, 1.0);
        let est = gaussian_curvature(&g);
        assert!(matches!(
            clip_curvature(&g, &est, 0.4, 75.0, 1e-3),
            Err(Error::AllZeroCurvature)
        ));
    }

    #[test]
    fn clipping_is_scale_covariant() {
        let m = crate::mesh::generate::blob(3);
        let cfg = CurvatureConfig::default();
        let a = curvature_field(&m, &cfg).unwrap();
        let b = curvature_field(&m.scaled(2.0), &cfg).unwrap();
        for (x, y) in a.triangle.iter().zip(&b.triangle) {
            assert!((y - x / 4.0).abs() <= 1e-13 * x);
            assert!(*x >= a.lo && *x <= a.hi && *x > 0.0);
        }
    }

    #[test]
    fn percentile_interpolates() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile_sorted(&v, 0.0), 0.0);
        assert_eq!(percentile_sorted(&v, 100.0), 4.0);
        assert_eq!(percentile_sorted(&v, 37.5), 1.5);
    }
}
