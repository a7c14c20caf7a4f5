use std::f64::consts::PI;

use proptest::prelude::*;

use sispec_core::eval::{
    geodesic_error, parse_curve_csv, parse_ground_truth, ground_truth_text, ErrorCurve, GeodesicOracle, CURVE_MAX,
    CURVE_SAMPLES,
};
use sispec_core::mesh::generate::{blob, icosphere};
use sispec_core::mesh::TriMesh;

fn floyd_warshall(mesh: &TriMesh) -> Vec<Vec<f64>> {
    let n = mesh.num_vertices();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for e in mesh.edges() {
        let (a, b) = (e.v[0], e.v[1]);
        let l = mesh.edge_length(a, b);
        d[a][b] = l;
        d[b][a] = l;
    }
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][m] + d[m][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

#[test]
fn dijkstra_matches_floyd_warshall() {
    for mesh in [icosphere(1), blob(1)] {
        assert!(mesh.num_vertices() <= 100);
        let oracle = GeodesicOracle::new(&mesh).unwrap();
        let all = floyd_warshall(&mesh);
        for (s, row) in all.iter().enumerate() {
            let d = oracle.distances_from(s).unwrap();
            for (t, expected) in row.iter().enumerate() {
                assert!((d[t] * oracle.normalization() - expected).abs() < 1e-12, "{s} -> {t}");
            }
        }
    }
}

#[test]
fn antipodal_distance_on_the_sphere() {
    let mesh = icosphere(4);
    let oracle = GeodesicOracle::new(&mesh).unwrap();
    let p0 = *mesh.vertex(0);
    let far = (0..mesh.num_vertices())
        .min_by(|&a, &b| mesh.vertex(a).dot(&p0).total_cmp(&mesh.vertex(b).dot(&p0)))
        .unwrap();
    let expected = PI / (4.0 * PI).sqrt();
    let got = oracle.distance(0, far).unwrap();
    assert!(got >= expected * 0.999 && got < expected * 1.08, "{got} vs {expected}");
}

#[test]
fn errors_are_scale_invariant() {
    let mesh = blob(2);
    let n = mesh.num_vertices();
    let gt: Vec<usize> = (0..n).collect();
    let mapping: Vec<usize> = (0..n).map(|i| mesh.neighbors(i)[0]).collect();
    let a = geodesic_error(&mapping, &gt, &GeodesicOracle::new(&mesh).unwrap()).unwrap();
    let big = mesh.scaled(3.5);
    let b = geodesic_error(&mapping, &gt, &GeodesicOracle::new(&big).unwrap()).unwrap();
    for (x, y) in a.errors.iter().zip(&b.errors) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn one_ring_errors_equal_normalized_edge_lengths() {
    let mesh = icosphere(3);
    let n = mesh.num_vertices();
    let oracle = GeodesicOracle::new(&mesh).unwrap();
    let gt: Vec<usize> = (0..n).collect();
    let mapping: Vec<usize> = (0..n).map(|i| mesh.neighbors(i)[0]).collect();
    let report = geodesic_error(&mapping, &gt, &oracle).unwrap();
    let expected: f64 = (0..n).map(|i| mesh.edge_length(i, mapping[i])).sum::<f64>() / n as f64 / oracle.normalization();
    assert!((report.curve.mean_error - expected).abs() < 1e-12);
    let exact = geodesic_error(&gt, &gt, &oracle).unwrap();
    assert_eq!(exact.curve.mean_error, 0.0);
    assert!(exact.curve.fractions.iter().all(|f| *f == 100.0));
}

#[test]
fn mismatched_lengths_are_rejected() {
    let mesh = icosphere(1);
    let oracle = GeodesicOracle::new(&mesh).unwrap();
    assert!(geodesic_error(&[0, 1], &[0], &oracle).is_err());
    assert!(geodesic_error(&[0, 1000], &[0, 1], &oracle).is_err());
}

#[test]
fn curve_csv_and_ground_truth_round_trip() {
    let curve = ErrorCurve::from_errors(&[0.0, 0.01, 0.02, 0.5]);
    assert_eq!(curve.thresholds.len(), CURVE_SAMPLES);
    assert_eq!(*curve.thresholds.last().unwrap(), CURVE_MAX);
    let (t, f) = parse_curve_csv(&curve.to_csv()).unwrap();
    assert_eq!(t, curve.thresholds);
    assert_eq!(f, curve.fractions);
    assert_eq!(curve.fractions[0], 25.0);
    assert_eq!(*curve.fractions.last().unwrap(), 75.0);

    let gt = vec![4, 0, 2, 2];
    assert_eq!(parse_ground_truth(&ground_truth_text(&gt)).unwrap(), gt);
    assert_eq!(parse_ground_truth("# header\n3\n\n1\n").unwrap(), vec![3, 1]);
    assert!(parse_ground_truth("1\nx\n").is_err());
}

proptest! {
    #[test]
    fn curves_are_monotone_percentages(errors in proptest::collection::vec(0.0f64..0.2, 1..200)) {
        let c = ErrorCurve::from_errors(&errors);
        prop_assert!(c.fractions.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(c.fractions.iter().all(|f| (0.0..=100.0).contains(f)));
        let below = errors.iter().filter(|e| **e <= CURVE_MAX).count() as f64;
        prop_assert!((c.fractions[CURVE_SAMPLES - 1] - 100.0 * below / errors.len() as f64).abs() < 1e-9);
    }
}
