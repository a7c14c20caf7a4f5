//! Quick invariant checks on small generated meshes, for a smoke test of a
//! build. Each check reports instead of panicking.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::PipelineConfig;
use crate::curvature::{curvature_field, CurvatureConfig};
use crate::error::Result;
use crate::eval::GeodesicOracle;
use crate::fmap::{loss_gradient, loss_terms, solve_lsq, DomainData, FunctionalMapPair, LossWeights};
use crate::mesh::generate::{blob, icosphere};
use crate::mesh::TriMesh;
use crate::pipeline::match_shapes;
use crate::spectral::{build_basis, EigenOptions};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((pass, detail)) => Check { name, pass, detail },
        Err(e) => Check {
            name,
            pass: false,
            detail: format!("error: {e}"),
        },
    }
}

fn eigenvalues(mesh: &TriMesh, alpha: f64, k: usize) -> Result<Vec<f64>> {
    let curv = curvature_field(mesh, &CurvatureConfig::default())?;
    Ok(build_basis(mesh, &curv, alpha, k, &EigenOptions::default())?.eigenvalues)
}

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

/// Runs every check; takes a few seconds.
pub fn run() -> Vec<Check> {
    vec![
        check("sphere spectrum", || {
            let vals = eigenvalues(&icosphere(3), 0.0, 9)?;
            let worst = (1..9)
                .map(|i| {
                    let l = if i < 4 { 2.0 } else { 6.0 };
                    (vals[i] - l).abs() / l
                })
                .fold(0.0, f64::max);
            Ok((worst < 0.05, format!("max rel error {worst:.4} against l(l+1)")))
        }),
        check("scale law", || {
            let m = blob(2);
            let big = m.scaled(2.0);
            let mut worst: f64 = 0.0;
            for alpha in [0.0, 0.6, 1.0] {
                let (a, b) = (eigenvalues(&m, alpha, 10)?, eigenvalues(&big, alpha, 10)?);
                let f = 2f64.powf(2.0 * alpha - 2.0);
                for i in 1..10 {
                    worst = worst.max((b[i] - f * a[i]).abs() / (f * a[i]));
                }
            }
            Ok((worst < 1e-4, format!("max rel deviation {worst:.1e}")))
        }),
        check("loss gradients", || {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let k = 6;
            let pair = FunctionalMapPair::new(0.0, random(&mut rng, k, k), random(&mut rng, k, k));
            let sym = |rng: &mut ChaCha8Rng| {
                let m = random(rng, k, k);
                (&m + m.transpose()) * 0.5
            };
            let data = DomainData {
                lambda_x: (0..k).map(|i| i as f64 * 0.2).collect(),
                lambda_y: (0..k).map(|i| i as f64 * 0.25).collect(),
                m_x: vec![sym(&mut rng)],
                m_y: vec![sym(&mut rng)],
            };
            let w = LossWeights::new([1.0, 1.0, 1.0, 1.0]);
            let (ga, _) = loss_gradient(&pair, &data, &w);
            let h = 1e-5;
            let mut worst: f64 = 0.0;
            for idx in 0..k * k {
                let at = |d: f64| {
                    let mut p = pair.clone();
                    p.c_xy[idx] += d;
                    loss_terms(&p, &data).weighted(&w)
                };
                let fd = (at(h) - at(-h)) / (2.0 * h);
                worst = worst.max((fd - ga[idx]).abs() / ga.amax());
            }
            Ok((worst < 1e-6, format!("max deviation from central differences {worst:.1e}")))
        }),
        check("least squares", || {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let truth = random(&mut rng, 8, 8);
            let f = random(&mut rng, 8, 24);
            let c = solve_lsq(&f, &(&truth * &f))?;
            let err = (c - truth).amax();
            Ok((err < 1e-9, format!("recovery error {err:.1e}")))
        }),
        check("self match", || {
            let m = blob(2);
            let cfg = PipelineConfig {
                k: 12,
                ..PipelineConfig::default()
            };
            let r = match_shapes(&m, &m, &cfg, None)?;
            let hits = r.correspondence.mapping.iter().enumerate().filter(|(i, j)| i == *j).count();
            Ok((hits == m.num_vertices(), format!("{hits}/{} fixed points", m.num_vertices())))
        }),
        check("geodesics", || {
            let m = icosphere(4);
            let o = GeodesicOracle::new(&m)?;
            let p0 = *m.vertex(0);
            let far = (0..m.num_vertices())
                .min_by(|&a, &b| m.vertex(a).dot(&p0).total_cmp(&m.vertex(b).dot(&p0)))
                .unwrap_or(0);
            let d = o.distance(0, far)?;
            let expected = std::f64::consts::PI / (4.0 * std::f64::consts::PI).sqrt();
            let rel = d / expected - 1.0;
            Ok(((0.0..0.08).contains(&rel), format!("antipodal distance {:+.2}% off great circle", 100.0 * rel)))
        }),
    ]
}
