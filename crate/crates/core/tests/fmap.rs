use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sispec_core::config::PipelineConfig;
use sispec_core::fmap::{
    loss_bijectivity, loss_descriptor_commutativity, loss_gradient, loss_lbo_commutativity, loss_orthogonality,
    loss_terms, mult_operator, read_fmap, refine, solve_lsq, total_loss, write_fmap, Direction, DomainData,
    FunctionalMapPair, LossWeights, OptimizerConfig,
};
use sispec_core::mesh::generate::icosphere;
use sispec_core::pipeline::compute_bases;

type Mat = DMatrix<f64>;

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

fn random_symmetric(rng: &mut ChaCha8Rng, k: usize) -> Mat {
    let m = random(rng, k, k);
    (&m + m.transpose()) * 0.5
}

fn random_problem(seed: u64, k: usize, channels: usize) -> (FunctionalMapPair, DomainData) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pair = FunctionalMapPair::new(0.6, random(&mut rng, k, k), random(&mut rng, k, k));
    let lambda = |rng: &mut ChaCha8Rng| {
        let mut l: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
        l.sort_by(f64::total_cmp);
        l
    };
    let data = DomainData {
        lambda_x: lambda(&mut rng),
        lambda_y: lambda(&mut rng),
        m_x: (0..channels).map(|_| random_symmetric(&mut rng, k)).collect(),
        m_y: (0..channels).map(|_| random_symmetric(&mut rng, k)).collect(),
    };
    (pair, data)
}

fn weighted(pair: &FunctionalMapPair, data: &DomainData, w: &LossWeights) -> f64 {
    loss_terms(pair, data).weighted(w)
}

#[test]
fn gradients_match_central_differences() {
    let k = 10;
    let (pair, data) = random_problem(7, k, 3);
    let h = 1e-5;
    let cases = [
        ("E1", LossWeights::new([1.0, 0.0, 0.0, 0.0])),
        ("E2", LossWeights::new([0.0, 1.0, 0.0, 0.0])),
        ("E3", LossWeights::new([0.0, 0.0, 1.0, 0.0])),
        ("E4", LossWeights::new([0.0, 0.0, 0.0, 1.0])),
        ("all", LossWeights::new([3.0, 2.0, 5.0, 0.5])),
    ];
    for (name, w) in cases {
        let (ga, gb) = loss_gradient(&pair, &data, &w);
        let scale = ga.amax().max(gb.amax());
        for which in 0..2 {
            for i in 0..k {
                for j in 0..k {
                    let shifted = |d: f64| {
                        let mut p = pair.clone();
                        let c = if which == 0 { &mut p.c_xy } else { &mut p.c_yx };
                        c[(i, j)] += d;
                        weighted(&p, &data, &w)
                    };
                    let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
                    let an = if which == 0 { ga[(i, j)] } else { gb[(i, j)] };
                    assert!(
                        (fd - an).abs() <= 1e-6 * scale,
                        "{name} d/dC{which}[{i},{j}]: analytic {an}, numeric {fd}"
                    );
                }
            }
        }
    }
}

#[test]
fn lsq_matches_pseudo_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let f = random(&mut rng, 10, 30);
        let g = random(&mut rng, 10, 30);
        let c = solve_lsq(&f, &g).unwrap();
        let pinv = f.clone().pseudo_inverse(1e-14).unwrap();
        let oracle = &g * pinv;
        assert!((&c - &oracle).norm() <= 1e-8 * oracle.norm(), "{}", (&c - &oracle).norm());
    }
}

#[test]
fn lsq_recovers_exact_map() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let truth = random(&mut rng, 8, 8);
    let f = random(&mut rng, 8, 40);
    let c = solve_lsq(&f, &(&truth * &f)).unwrap();
    assert!((c - truth).amax() < 1e-9);
}

#[test]
fn bijectivity_alone_drives_maps_to_inverses() {
    let k = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = Mat::identity(k, k) + random(&mut rng, k, k) * 0.3;
    let b = Mat::identity(k, k) + random(&mut rng, k, k) * 0.3;
    let pair = FunctionalMapPair::new(0.0, a, b);
    let data = DomainData {
        lambda_x: vec![0.0; k],
        lambda_y: vec![0.0; k],
        m_x: vec![],
        m_y: vec![],
    };
    let cfg = OptimizerConfig {
        max_iters: 20_000,
        rel_tolerance: 0.0,
        ..OptimizerConfig::default()
    };
    let w = LossWeights::new([1.0, 0.0, 0.0, 0.0]);
    let out = refine(&[pair], &w, &[data], &cfg).unwrap();
    let e1 = loss_bijectivity(&out.pairs[0]);
    assert!(e1 < 1e-6, "E1 = {e1}");
    assert!(out.trace.windows(2).all(|t| t[1].total < t[0].total));
}

#[test]
fn losses_match_entrywise_sums() {
    let k = 6;
    let (pair, data) = random_problem(21, k, 2);
    let (a, b) = (&pair.c_xy, &pair.c_yx);
    let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    let prod = |x: &Mat, y: &Mat, i: usize, j: usize| (0..k).map(|l| x[(i, l)] * y[(l, j)]).sum::<f64>();
    let (mut e1, mut e2, mut e3, mut e4) = (0.0, 0.0, 0.0, 0.0);
    let (at, bt) = (a.transpose(), b.transpose());
    for i in 0..k {
        for j in 0..k {
            e1 += (prod(a, b, i, j) - delta(i, j)).powi(2) + (prod(b, a, i, j) - delta(i, j)).powi(2);
            e2 += (prod(&at, a, i, j) - delta(i, j)).powi(2) + (prod(&bt, b, i, j) - delta(i, j)).powi(2);
            e3 += (a[(i, j)] * data.lambda_x[j] - data.lambda_y[i] * a[(i, j)]).powi(2)
                + (b[(i, j)] * data.lambda_y[j] - data.lambda_x[i] * b[(i, j)]).powi(2);
            for (mf, mg) in data.m_x.iter().zip(&data.m_y) {
                e4 += (prod(a, mf, i, j) - prod(mg, a, i, j)).powi(2) + (prod(b, mg, i, j) - prod(mf, b, i, j)).powi(2);
            }
        }
    }
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * y.abs().max(1.0);
    assert!(close(loss_bijectivity(&pair), e1));
    assert!(close(loss_orthogonality(&pair), e2));
    assert!(close(loss_lbo_commutativity(&pair, &data.lambda_x, &data.lambda_y), e3));
    assert!(close(loss_descriptor_commutativity(&pair, &data.m_x, &data.m_y), e4));
}

#[test]
fn identity_maps_between_equal_domains_cost_nothing() {
    let k = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m = random_symmetric(&mut rng, k);
    let pair = FunctionalMapPair::new(0.0, Mat::identity(k, k), Mat::identity(k, k));
    let data = DomainData {
        lambda_x: vec![0.0, 1.0, 2.0, 3.0],
        lambda_y: vec![0.0, 1.0, 2.0, 3.0],
        m_x: vec![m.clone()],
        m_y: vec![m],
    };
    assert_eq!(loss_terms(&pair, &data).weighted(&LossWeights::default()), 0.0);
    // doubling both maps: (4 − 1)² per diagonal entry, twice per term
    let doubled = FunctionalMapPair::new(0.0, Mat::identity(k, k) * 2.0, Mat::identity(k, k) * 2.0);
    assert_eq!(loss_bijectivity(&doubled), 2.0 * 9.0 * k as f64);
    assert_eq!(loss_orthogonality(&doubled), 2.0 * 9.0 * k as f64);
}

#[test]
fn total_loss_is_additive_and_linear_in_weights() {
    let (p1, d1) = random_problem(1, 5, 2);
    let (p2, d2) = random_problem(2, 5, 2);
    let w = LossWeights::new([1.5, 0.5, 2.0, 0.25]);
    let (both, terms) = total_loss(&[p1.clone(), p2.clone()], &w, &[d1.clone(), d2.clone()]).unwrap();
    let (one, _) = total_loss(std::slice::from_ref(&p1), &w, std::slice::from_ref(&d1)).unwrap();
    let (two, _) = total_loss(&[p2], &w, &[d2]).unwrap();
    assert!((both - one - two).abs() <= 1e-12 * both);
    assert_eq!(terms.len(), 2);
    let w3 = LossWeights::new([4.5, 1.5, 6.0, 0.75]);
    let (tripled, _) = total_loss(&[p1], &w3, &[d1]).unwrap();
    assert!((tripled - 3.0 * one).abs() <= 1e-12 * tripled);
    assert!(total_loss(&[], &w, &[random_problem(3, 2, 1).1]).is_err());
}

#[test]
fn refinement_never_increases_loss() {
    let (pair, data) = random_problem(9, 8, 3);
    let cfg = OptimizerConfig {
        max_iters: 200,
        ..OptimizerConfig::default()
    };
    let out = refine(&[pair], &LossWeights::default(), std::slice::from_ref(&data), &cfg).unwrap();
    assert!(out.trace.len() > 1);
    assert!(out.trace.windows(2).all(|t| t[1].total <= t[0].total));
    let last = out.trace.last().unwrap();
    let (e, _) = total_loss(&out.pairs, &LossWeights::default(), &[data]).unwrap();
    assert_eq!(e, last.total);
    assert_eq!(out.pairs[0].terms.e1, last.terms.e1);
}

#[test]
fn multiplication_operators_are_symmetric_and_unit_for_constants() {
    let mesh = icosphere(3);
    let cfg = PipelineConfig::default();
    let set = compute_bases(&mesh, &[0.0, 0.6], &cfg, None).unwrap();
    for basis in &set.bases {
        let n = basis.n();
        let ones = mult_operator(basis, &vec![1.0; n]).unwrap();
        assert!((&ones - Mat::identity(basis.k(), basis.k())).amax() < 1e-8);
        let f: Vec<f64> = mesh.vertices().iter().map(|p| p.x * p.y + p.z).collect();
        let m = mult_operator(basis, &f).unwrap();
        assert_eq!(m, m.transpose());
        assert!(mult_operator(basis, &f[1..]).is_err());
    }
}

#[test]
fn map_files_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let c = random(&mut rng, 7, 7);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.bin");
    write_fmap(&path, &c, 0.8, Direction::YToX).unwrap();
    let (back, alpha, direction) = read_fmap(&path).unwrap();
    assert_eq!(back, c);
    assert_eq!(alpha, 0.8);
    assert_eq!(direction, Direction::YToX);
}
