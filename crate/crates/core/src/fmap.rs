//! Functional maps between spectral domains: least-squares initialization and
//! joint refinement of both directions under the structural penalties
//!
//! - E1 bijectivity `‖C_xy C_yx − I‖² + ‖C_yx C_xy − I‖²`
//! - E2 orthogonality `‖C_xyᵀ C_xy − I‖² + ‖C_yxᵀ C_yx − I‖²`
//! - E3 Laplacian commutativity `‖C_xy Λ_x − Λ_y C_xy‖² + ‖C_yx Λ_y − Λ_x C_yx‖²`
//! - E4 descriptor commutativity `Σ_i ‖C_xy M_fi − M_gi C_xy‖² + ‖C_yx M_gi − M_fi C_yx‖²`
//!
//! all squared Frobenius norms, weighted and summed over the domains.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::spectral::SpectralBasis;

type Mat = DMatrix<f64>;

/// `C` minimizing `‖C F − G‖_F` (`F`, `G` are `k × d`), from the normal
/// equations `C (F Fᵀ + μ I) = G Fᵀ` with `μ = 1e-8 ‖F Fᵀ‖_F`.
///
/// Two steps of iterated damping remove the bias of `μ` on well-posed systems,
/// so full-rank inputs get the pseudo-inverse solution.
pub fn solve_lsq(f: &Mat, g: &Mat) -> Result<Mat> {
    if f.nrows() != g.nrows() || f.ncols() != g.ncols() {
        return Err(Error::DimensionMismatch {
            expected: f.len(),
            got: g.len(),
        });
    }
    let (k, d) = f.shape();
    if d < k {
        log::warn!("{d} descriptors for a {k}-dimensional basis; the map is underdetermined");
    }
    if f.iter().chain(g.iter()).any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    let a = f * f.transpose();
    let mu = 1e-8 * a.norm();
    if !(mu > 0.0) {
        return Err(Error::SingularSystem);
    }
    let mut damped = a.clone();
    for i in 0..k {
        damped[(i, i)] += mu;
    }
    let chol = damped.cholesky().ok_or(Error::SingularSystem)?;
    // transposed system: (F Fᵀ + μ I) Cᵀ = F Gᵀ
    let rhs = f * g.transpose();
    let mut ct = chol.solve(&rhs);
    for _ in 0..2 {
        let residual = &rhs - &a * &ct;
        ct += chol.solve(&residual);
    }
    if ct.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(ct.transpose())
}

/// `M_f`, the operator of pointwise multiplication by `f` in the basis:
/// the symmetric part of `Φᵀ B Diag(f) Φ`.
pub fn mult_operator(basis: &SpectralBasis, f: &[f64]) -> Result<Mat> {
    let phi_t_b = basis
        .mass
        .matrix
        .mul_dense(&basis.eigenfunctions)
        .transpose();
    mult_operator_with(&phi_t_b, &basis.eigenfunctions, f)
}

/// As [`mult_operator`] with `ΦᵀB` precomputed.
pub fn mult_operator_with(phi_t_b: &Mat, phi: &Mat, f: &[f64]) -> Result<Mat> {
    if f.len() != phi.nrows() {
        return Err(Error::DimensionMismatch {
            expected: phi.nrows(),
            got: f.len(),
        });
    }
    let mut scaled = phi.clone();
    for (mut row, &v) in scaled.row_iter_mut().zip(f) {
        row *= v;
    }
    let m = phi_t_b * scaled;
    Ok((&m + m.transpose()) * 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub bijectivity: f64,
    pub orthogonality: f64,
    pub laplacian: f64,
    pub descriptor: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            bijectivity: 1e3,
            orthogonality: 1e3,
            laplacian: 1.0,
            descriptor: 1e5,
        }
    }
}

impl LossWeights {
    pub fn new(w: [f64; 4]) -> Self {
        Self {
            bijectivity: w[0],
            orthogonality: w[1],
            laplacian: w[2],
            descriptor: w[3],
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.bijectivity, self.orthogonality, self.laplacian, self.descriptor]
    }

    pub fn check(&self) -> Result<()> {
        let w = self.as_array();
        if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || w.iter().all(|v| *v == 0.0) {
            return Err(Error::Config(format!(
                "loss weights must be finite, nonnegative and not all zero: {w:?}"
            )));
        }
        Ok(())
    }
}

/// Unweighted loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossTerms {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub e4: f64,
}

impl LossTerms {
    pub fn weighted(&self, w: &LossWeights) -> f64 {
        w.bijectivity * self.e1
            + w.orthogonality * self.e2
            + w.laplacian * self.e3
            + w.descriptor * self.e4
    }

    fn add(&self, o: &LossTerms) -> LossTerms {
        LossTerms {
            e1: self.e1 + o.e1,
            e2: self.e2 + o.e2,
            e3: self.e3 + o.e3,
            e4: self.e4 + o.e4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalMapPair {
    pub alpha: f64,
    /// Coefficients on X to coefficients on Y.
    pub c_xy: Mat,
    /// Coefficients on Y to coefficients on X.
    pub c_yx: Mat,
    /// Terms at the last evaluation.
    pub terms: LossTerms,
}

impl FunctionalMapPair {
    pub fn new(alpha: f64, c_xy: Mat, c_yx: Mat) -> Self {
        Self {
            alpha,
            c_xy,
            c_yx,
            terms: LossTerms::default(),
        }
    }

    pub fn k(&self) -> usize {
        self.c_xy.nrows()
    }
}

/// Per-domain data the losses depend on.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainData {
    pub lambda_x: Vec<f64>,
    pub lambda_y: Vec<f64>,
    /// Multiplication operators of the descriptor channels on X and Y, aligned.
    pub m_x: Vec<Mat>,
    pub m_y: Vec<Mat>,
}

fn identity_defect(m: Mat) -> Mat {
    let k = m.nrows();
    m - Mat::identity(k, k)
}

pub fn loss_bijectivity(pair: &FunctionalMapPair) -> f64 {
    let (a, b) = (&pair.c_xy, &pair.c_yx);
    identity_defect(a * b).norm_squared() + identity_defect(b * a).norm_squared()
}

pub fn loss_orthogonality(pair: &FunctionalMapPair) -> f64 {
    let (a, b) = (&pair.c_xy, &pair.c_yx);
    identity_defect(a.transpose() * a).norm_squared()
        + identity_defect(b.transpose() * b).norm_squared()
}

/// `(C Λ_from − Λ_to C)_ij = c_ij (λ_from_j − λ_to_i)`.
fn commutator_diag(c: &Mat, from: &[f64], to: &[f64]) -> Mat {
    Mat::from_fn(c.nrows(), c.ncols(), |i, j| c[(i, j)] * (from[j] - to[i]))
}

pub fn loss_lbo_commutativity(pair: &FunctionalMapPair, lambda_x: &[f64], lambda_y: &[f64]) -> f64 {
    commutator_diag(&pair.c_xy, lambda_x, lambda_y).norm_squared()
        + commutator_diag(&pair.c_yx, lambda_y, lambda_x).norm_squared()
}

pub fn loss_descriptor_commutativity(pair: &FunctionalMapPair, m_x: &[Mat], m_y: &[Mat]) -> f64 {
    let (a, b) = (&pair.c_xy, &pair.c_yx);
    m_x.iter()
        .zip(m_y)
        .map(|(mf, mg)| (a * mf - mg * a).norm_squared() + (b * mg - mf * b).norm_squared())
        .sum()
}

/// Unweighted terms of one domain.
pub fn loss_terms(pair: &FunctionalMapPair, data: &DomainData) -> LossTerms {
    LossTerms {
        e1: loss_bijectivity(pair),
        e2: loss_orthogonality(pair),
        e3: loss_lbo_commutativity(pair, &data.lambda_x, &data.lambda_y),
        e4: loss_descriptor_commutativity(pair, &data.m_x, &data.m_y),
    }
}

/// Weighted gradients `(∂E/∂C_xy, ∂E/∂C_yx)` of one domain.
pub fn loss_gradient(pair: &FunctionalMapPair, data: &DomainData, w: &LossWeights) -> (Mat, Mat) {
    let (a, b) = (&pair.c_xy, &pair.c_yx);
    let k = a.nrows();
    let mut ga = Mat::zeros(k, k);
    let mut gb = Mat::zeros(k, k);

    if w.bijectivity != 0.0 {
        let ab = identity_defect(a * b);
        let ba = identity_defect(b * a);
        ga += (&ab * b.transpose() + b.transpose() * &ba) * (2.0 * w.bijectivity);
        gb += (a.transpose() * &ab + &ba * a.transpose()) * (2.0 * w.bijectivity);
    }
    if w.orthogonality != 0.0 {
        ga += a * identity_defect(a.transpose() * a) * (4.0 * w.orthogonality);
        gb += b * identity_defect(b.transpose() * b) * (4.0 * w.orthogonality);
    }
    if w.laplacian != 0.0 {
        let (lx, ly) = (&data.lambda_x, &data.lambda_y);
        ga += Mat::from_fn(k, k, |i, j| a[(i, j)] * (lx[j] - ly[i]).powi(2)) * (2.0 * w.laplacian);
        gb += Mat::from_fn(k, k, |i, j| b[(i, j)] * (ly[j] - lx[i]).powi(2)) * (2.0 * w.laplacian);
    }
    if w.descriptor != 0.0 {
        for (mf, mg) in data.m_x.iter().zip(&data.m_y) {
            let ra = a * mf - mg * a;
            let rb = b * mg - mf * b;
            ga += (&ra * mf.transpose() - mg.transpose() * &ra) * (2.0 * w.descriptor);
            gb += (&rb * mg.transpose() - mf.transpose() * &rb) * (2.0 * w.descriptor);
        }
    }
    (ga, gb)
}

/// `E = Σ_domains Σ_i ω_i E_i` and the per-domain unweighted terms.
pub fn total_loss(
    pairs: &[FunctionalMapPair],
    weights: &LossWeights,
    data: &[DomainData],
) -> Result<(f64, Vec<LossTerms>)> {
    if pairs.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: pairs.len(),
            got: data.len(),
        });
    }
    let terms: Vec<LossTerms> = pairs
        .par_iter()
        .zip(data)
        .map(|(p, d)| loss_terms(p, d))
        .collect();
    let total = terms.iter().map(|t| t.weighted(weights)).sum();
    Ok((total, terms))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// Stop once an accepted step lowers `E` by less than this fraction.
    pub rel_tolerance: f64,
    pub max_halvings: usize,
    /// First trial step, as a fraction of `‖C‖ / ‖∇E‖`.
    pub initial_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            rel_tolerance: 1e-7,
            max_halvings: 30,
            initial_step: 0.1,
        }
    }
}

impl OptimizerConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.rel_tolerance >= 0.0) || !(self.initial_step > 0.0) {
            return Err(Error::Config(
                "optimizer tolerance must be >= 0 and initial step > 0".into(),
            ));
        }
        Ok(())
    }
}

/// One row of the loss trace. Terms are summed over domains, unweighted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub total: f64,
    pub terms: LossTerms,
}

#[derive(Debug, Clone)]
pub struct Refinement {
    pub pairs: Vec<FunctionalMapPair>,
    pub trace: Vec<TraceRow>,
    /// Accepted descent steps.
    pub accepted: usize,
}

fn trace_row(iteration: usize, total: f64, terms: &[LossTerms]) -> TraceRow {
    TraceRow {
        iteration,
        total,
        terms: terms.iter().fold(LossTerms::default(), |acc, t| acc.add(t)),
    }
}

/// Gradient descent on all maps jointly with a halving line search. A step is
/// accepted only if it lowers `E`, so `E` never increases.
pub fn refine(
    pairs: &[FunctionalMapPair],
    weights: &LossWeights,
    data: &[DomainData],
    cfg: &OptimizerConfig,
) -> Result<Refinement> {
    weights.check()?;
    cfg.check()?;
    let mut current: Vec<FunctionalMapPair> = pairs.to_vec();
    let (mut energy, mut terms) = total_loss(&current, weights, data)?;
    let mut trace = vec![trace_row(0, energy, &terms)];
    let mut accepted = 0;
    let mut step: Option<f64> = None;

    for iteration in 1..=cfg.max_iters {
        if energy == 0.0 {
            break;
        }
        let grads: Vec<(Mat, Mat)> = current
            .par_iter()
            .zip(data)
            .map(|(p, d)| loss_gradient(p, d, weights))
            .collect();
        let gnorm2: f64 = grads
            .iter()
            .map(|(a, b)| a.norm_squared() + b.norm_squared())
            .sum();
        if !gnorm2.is_finite() {
            return Err(Error::NonFiniteGradient(iteration));
        }
        if gnorm2 == 0.0 {
            break;
        }
        let mut eta = step.unwrap_or_else(|| {
            let cnorm2: f64 = current
                .iter()
                .map(|p| p.c_xy.norm_squared() + p.c_yx.norm_squared())
                .sum();
            cfg.initial_step * cnorm2.sqrt().max(1.0) / gnorm2.sqrt()
        });

        let mut next = None;
        for _ in 0..=cfg.max_halvings {
            let trial: Vec<FunctionalMapPair> = current
                .iter()
                .zip(&grads)
                .map(|(p, (ga, gb))| FunctionalMapPair {
                    c_xy: &p.c_xy - ga * eta,
                    c_yx: &p.c_yx - gb * eta,
                    ..p.clone()
                })
                .collect();
            let (e, t) = total_loss(&trial, weights, data)?;
            if e < energy {
                next = Some((trial, e, t));
                break;
            }
            eta *= 0.5;
        }
        let Some((trial, e, t)) = next else {
            break;
        };
        let decrease = (energy - e) / energy;
        current = trial;
        energy = e;
        terms = t;
        accepted += 1;
        trace.push(trace_row(iteration, energy, &terms));
        step = Some(eta * 2.0);
        if decrease < cfg.rel_tolerance {
            break;
        }
    }
    for (p, t) in current.iter_mut().zip(&terms) {
        p.terms = *t;
    }
    Ok(Refinement {
        pairs: current,
        trace,
        accepted,
    })
}

/// CSV with header `iteration,E,E1,E2,E3,E4`.
pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut s = String::from("iteration,E,E1,E2,E3,E4\n");
    for r in trace {
        let _ = writeln!(
            s,
            "{},{:e},{:e},{:e},{:e},{:e}",
            r.iteration, r.total, r.terms.e1, r.terms.e2, r.terms.e3, r.terms.e4
        );
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    XToY,
    YToX,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::XToY => "xy",
            Direction::YToX => "yx",
        }
    }
}

const MAGIC: &[u8; 8] = b"SISPFMAP";
const FORMAT_VERSION: u32 = 1;

/// Layout: magic, version, `u64 k`, `f64 alpha`, direction name, then the
/// `k × k` matrix row-major.
pub fn write_fmap(path: &Path, c: &Mat, alpha: f64, direction: Direction) -> Result<()> {
    let mut w = Writer::new(MAGIC, FORMAT_VERSION);
    w.u64(c.nrows() as u64);
    w.f64(alpha);
    w.str(direction.name());
    for row in c.row_iter() {
        row.iter().for_each(|v| w.f64(*v));
    }
    w.finish(path)
}

pub fn read_fmap(path: &Path) -> Result<(Mat, f64, Direction)> {
    let mut r = Reader::open(path, MAGIC, FORMAT_VERSION)?;
    let k = r.count(1 << 16)?;
    let alpha = r.f64()?;
    let direction = match r.str()?.as_str() {
        "xy" => Direction::XToY,
        "yx" => Direction::YToX,
        other => return Err(r.err(&format!("unknown direction {other:?}"))),
    };
    let raw = r.f64s(k * k)?;
    r.expect_end()?;
    Ok((Mat::from_row_slice(k, k, &raw), alpha, direction))
}
