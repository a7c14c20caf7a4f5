use nalgebra::{DMatrix, SymmetricEigen};
use sispec_core::curvature::{curvature_field, CurvatureConfig};
use sispec_core::linalg::LanczosOptions;
use sispec_core::mesh::generate::{blob, icosphere};
use sispec_core::mesh::{local_scale_deform, TriMesh};
use sispec_core::spectral::{
    assemble_mass, assemble_stiffness, build_basis, eigensolve, EigenMethod, EigenOptions,
};

fn lanczos() -> EigenOptions {
    EigenOptions {
        method: EigenMethod::Lanczos,
        ..Default::default()
    }
}

fn eigenvalues(mesh: &TriMesh, alpha: f64, k: usize) -> Vec<f64> {
    let curv = curvature_field(mesh, &CurvatureConfig::default()).unwrap();
    build_basis(mesh, &curv, alpha, k, &lanczos()).unwrap().eigenvalues
}

/// Generalized eigenvalues through `B^{-1/2} W B^{-1/2}` built from a
/// symmetric eigendecomposition of `B`.
fn oracle_eigenvalues(w: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let eb = SymmetricEigen::new(b.clone());
    let inv_sqrt = DMatrix::from_diagonal(&eb.eigenvalues.map(|v| 1.0 / v.sqrt()));
    let s = &eb.eigenvectors * inv_sqrt * eb.eigenvectors.transpose();
    let c = &s * w * &s;
    let c = (&c + c.transpose()) * 0.5;
    let mut v: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn unit_sphere_spectrum() {
    let m = icosphere(4);
    assert_eq!(m.num_vertices(), 2562);
    let vals = eigenvalues(&m, 0.0, 16);
    let expected = [0.0, 2.0, 2.0, 2.0, 6.0, 6.0, 6.0, 6.0, 6.0];
    assert!(vals[0].abs() < 1e-8 * vals[15]);
    for (i, &e) in expected.iter().enumerate().skip(1) {
        assert!((vals[i] - e).abs() < 0.05 * e, "λ{i} = {}", vals[i]);
    }
    for (i, v) in vals.iter().enumerate().skip(9) {
        assert!((v - 12.0).abs() < 0.05 * 12.0, "λ{i} = {v}");
    }
}

#[test]
fn sparse_matches_dense_oracle() {
    for (mesh, alpha) in [(icosphere(2), 0.0), (blob(2), 0.6), (blob(2), 1.0)] {
        assert!(mesh.num_vertices() <= 300);
        let curv = curvature_field(&mesh, &CurvatureConfig::default()).unwrap();
        let w = assemble_stiffness(&mesh, false).unwrap();
        let b = assemble_mass(&mesh, &curv, alpha).unwrap();
        let basis = eigensolve(&w, &b, 20, &lanczos()).unwrap();
        let oracle = oracle_eigenvalues(&w.0.to_dense(), &b.matrix.to_dense());
        let scale = oracle[19];
        for i in 0..20 {
            assert!(
                (basis.eigenvalues[i] - oracle[i]).abs() < 1e-8 * scale,
                "α={alpha} λ{i}: {} vs {}",
                basis.eigenvalues[i],
                oracle[i]
            );
        }
        assert!(basis.orthonormality_error() < 1e-8);
        let dense = eigensolve(&w, &b, 20, &EigenOptions {
            method: EigenMethod::Dense,
            ..Default::default()
        })
        .unwrap();
        for i in 0..20 {
            assert!((dense.eigenvalues[i] - oracle[i]).abs() < 1e-8 * scale);
        }
    }
}

#[test]
fn global_scaling_law() {
    let m = blob(3);
    let s = 2.0;
    let big = m.scaled(s);
    for alpha in [0.0, 0.6, 1.0] {
        let a = eigenvalues(&m, alpha, 12);
        let b = eigenvalues(&big, alpha, 12);
        let factor = s.powf(2.0 * alpha - 2.0);
        for i in 1..12 {
            let rel = (b[i] - factor * a[i]).abs() / (factor * a[i]);
            assert!(rel < 1e-4, "α={alpha} λ{i}: rel {rel:e}");
        }
    }
}

#[test]
fn scale_invariant_metric_resists_local_scaling() {
    // radius a quarter of the geodesic diameter
    let m = icosphere(4);
    let deformed = local_scale_deform(&m, 0, std::f64::consts::FRAC_PI_4, 1.5).unwrap();
    let change = |alpha: f64| {
        let a = eigenvalues(&m, alpha, 21);
        let b = eigenvalues(&deformed, alpha, 21);
        (1..21).map(|i| ((b[i] - a[i]) / a[i]).abs()).sum::<f64>() / 20.0
    };
    let (c0, c1) = (change(0.0), change(1.0));
    assert!(c1 < c0, "α=1 change {c1} vs α=0 change {c0}");
}

#[test]
fn reconstruction_improves_with_k() {
    let m = icosphere(3);
    let curv = curvature_field(&m, &CurvatureConfig::default()).unwrap();
    let basis = build_basis(&m, &curv, 0.0, 100, &lanczos()).unwrap();
    let f = DMatrix::from_iterator(
        m.num_vertices(),
        1,
        m.vertices().iter().map(|p| p.x + p.y * p.y + (3.0 * p.z).sin()),
    );
    let bnorm = |g: &DMatrix<f64>| g.dot(&basis.mass.matrix.mul_dense(g)).sqrt();
    let errors: Vec<f64> = [10, 30, 100]
        .iter()
        .map(|&k| {
            let b = basis.truncated(k);
            let rec = b.reconstruct(&b.project(&f).unwrap());
            bnorm(&(&f - rec)) / bnorm(&f)
        })
        .collect();
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}

#[test]
fn eigenfunctions_are_deterministic() {
    let m = blob(2);
    let curv = curvature_field(&m, &CurvatureConfig::default()).unwrap();
    let opts = EigenOptions {
        method: EigenMethod::Lanczos,
        lanczos: LanczosOptions {
            seed: 7,
            ..Default::default()
        },
        ..Default::default()
    };
    let a = build_basis(&m, &curv, 0.8, 10, &opts).unwrap();
    let b = build_basis(&m, &curv, 0.8, 10, &opts).unwrap();
    assert_eq!(a.eigenfunctions, b.eigenfunctions);
    for col in a.eigenfunctions.column_iter() {
        let scale = col.amax();
        let first = col.iter().find(|v| v.abs() > 1e-6 * scale).unwrap();
        assert!(*first > 0.0);
    }
}
