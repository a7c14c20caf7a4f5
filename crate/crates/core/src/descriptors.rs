//! Intrinsic per-vertex descriptors: heat and wave kernel signatures computed
//! from a spectral basis, plus their projections onto each spectral domain.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::spectral::SpectralBasis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DescriptorKind {
    Hks,
    #[default]
    Wks,
}

impl DescriptorKind {
    pub fn name(self) -> &'static str {
        match self {
            DescriptorKind::Hks => "hks",
            DescriptorKind::Wks => "wks",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "hks" => Some(DescriptorKind::Hks),
            "wks" => Some(DescriptorKind::Wks),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    /// `n × d`, one channel per column.
    pub values: DMatrix<f64>,
    pub kind: DescriptorKind,
    /// Diffusion times (HKS) or log-energies (WKS), one per channel.
    pub samples: Vec<f64>,
    /// WKS band width; zero for HKS.
    pub sigma: f64,
    /// `(alpha, k × d coefficients)` per spectral domain.
    pub projections: Vec<(f64, DMatrix<f64>)>,
}

impl DescriptorSet {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn projection(&self, alpha: f64) -> Option<&DMatrix<f64>> {
        self.projections
            .iter()
            .find(|(a, _)| *a == alpha)
            .map(|(_, p)| p)
    }

    /// Every `step`-th channel (0, step, 2·step, ...), projections included.
    pub fn subsampled(&self, step: usize) -> DescriptorSet {
        let step = step.max(1);
        let cols: Vec<usize> = (0..self.d()).step_by(step).collect();
        DescriptorSet {
            values: self.values.select_columns(&cols),
            kind: self.kind,
            samples: cols.iter().map(|&c| self.samples[c]).collect(),
            sigma: self.sigma,
            projections: self
                .projections
                .iter()
                .map(|(a, p)| (*a, p.select_columns(&cols)))
                .collect(),
        }
    }

    /// Shifts and scales each channel to zero mean and unit variance over the
    /// vertices. Constant channels become zero. Clears projections.
    pub fn normalized(&self) -> DescriptorSet {
        let mut values = self.values.clone();
        let n = values.nrows() as f64;
        for mut col in values.column_iter_mut() {
            let mean = col.sum() / n;
            col.add_scalar_mut(-mean);
            let sd = (col.norm_squared() / n).sqrt();
            if sd > 1e-12 * mean.abs().max(f64::MIN_POSITIVE) && sd > 0.0 {
                col /= sd;
            } else {
                col.fill(0.0);
            }
        }
        DescriptorSet {
            values,
            projections: Vec::new(),
            ..self.clone()
        }
    }
}

/// Log-spaced diffusion times over `[4 ln 10 / λ_{k-1}, 4 ln 10 / λ_1]`.
pub fn default_hks_times(eigenvalues: &[f64], count: usize) -> Result<Vec<f64>> {
    let k = eigenvalues.len();
    if k < 2 {
        return Err(Error::InvalidParameter("heat kernel needs k >= 2".into()));
    }
    let (l1, lk) = (eigenvalues[1], eigenvalues[k - 1]);
    if !(l1 > 0.0) || !(lk > l1) {
        return Err(Error::DegenerateSpectrum { low: l1, high: lk });
    }
    let c = 4.0 * std::f64::consts::LN_10;
    let (lo, hi) = ((c / lk).ln(), (c / l1).ln());
    Ok(linspace(lo, hi, count).into_iter().map(f64::exp).collect())
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// `HKS(x, t) = Σ_i exp(-λ_i t) φ_i(x)²`.
pub fn hks(basis: &SpectralBasis, times: &[f64]) -> Result<DescriptorSet> {
    if times.is_empty() {
        return Err(Error::EmptyTimes);
    }
    if basis.k() < 2 {
        return Err(Error::InvalidParameter("heat kernel needs k >= 2".into()));
    }
    if let Some(t) = times.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
        return Err(Error::InvalidParameter(format!("diffusion time {t} is not positive")));
    }
    let weights = DMatrix::from_fn(basis.k(), times.len(), |i, c| {
        (-basis.eigenvalues[i].max(0.0) * times[c]).exp()
    });
    Ok(DescriptorSet {
        values: squared(&basis.eigenfunctions) * weights,
        kind: DescriptorKind::Hks,
        samples: times.to_vec(),
        sigma: 0.0,
        projections: Vec::new(),
    })
}

fn squared(phi: &DMatrix<f64>) -> DMatrix<f64> {
    phi.map(|v| v * v)
}

/// WKS energies and band width for a spectrum: energies uniform in
/// `[ln λ_1, ln λ_{k-1}]`, width `variance_scale · Δe` with `Δe` the spacing.
pub fn default_wks_energies(eigenvalues: &[f64], num_energies: usize, variance_scale: f64) -> Result<(Vec<f64>, f64)> {
    let k = eigenvalues.len();
    if k < 3 {
        return Err(Error::InvalidParameter("wave kernel needs k >= 3".into()));
    }
    if num_energies == 0 {
        return Err(Error::EmptyTimes);
    }
    if !(variance_scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "variance scale {variance_scale} is not positive"
        )));
    }
    let (l1, lk) = (eigenvalues[1], eigenvalues[k - 1]);
    if !(l1 > 0.0) || !(lk > l1 * (1.0 + 1e-9)) {
        return Err(Error::DegenerateSpectrum { low: l1, high: lk });
    }
    let (lo, hi) = (l1.ln(), lk.ln());
    let delta = (hi - lo) / num_energies as f64;
    Ok((linspace(lo, hi, num_energies), variance_scale * delta))
}

/// Wave kernel signature with the default energies of the basis' own spectrum.
pub fn wks(basis: &SpectralBasis, num_energies: usize, variance_scale: f64) -> Result<DescriptorSet> {
    let (energies, sigma) = default_wks_energies(&basis.eigenvalues, num_energies, variance_scale)?;
    wks_at(basis, &energies, sigma)
}

/// `WKS(x, e) = Σ_{i≥1} w_i(e) φ_i(x)²` with Gaussian band weights
/// `exp(-(e - ln λ_i)² / 2σ²)` normalized to sum to one over `i`. The constant
/// eigenfunction is excluded.
pub fn wks_at(basis: &SpectralBasis, energies: &[f64], sigma: f64) -> Result<DescriptorSet> {
    let k = basis.k();
    if energies.is_empty() {
        return Err(Error::EmptyTimes);
    }
    if k < 3 || !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("wave kernel needs k >= 3 and sigma > 0 (k = {k}, sigma = {sigma})")));
    }
    let l1 = basis.eigenvalues[1];
    if !(l1 > 0.0) {
        return Err(Error::DegenerateSpectrum { low: l1, high: basis.eigenvalues[k - 1] });
    }
    let logs: Vec<f64> = basis.eigenvalues.iter().map(|l| l.max(l1).ln()).collect();

    let mut weights = DMatrix::zeros(k, energies.len());
    for (c, e) in energies.iter().enumerate() {
        // shift by the nearest band so distant energies do not underflow
        let nearest = logs[1..].iter().map(|l| (e - l).powi(2)).fold(f64::INFINITY, f64::min);
        let col: Vec<f64> = (0..k)
            .map(|i| {
                if i == 0 {
                    0.0
                } else {
                    (-((e - logs[i]).powi(2) - nearest) / (2.0 * sigma * sigma)).exp()
                }
            })
            .collect();
        let total: f64 = col.iter().sum();
        for (i, w) in col.iter().enumerate() {
            weights[(i, c)] = w / total;
        }
    }
    Ok(DescriptorSet {
        values: squared(&basis.eigenfunctions) * weights,
        kind: DescriptorKind::Wks,
        samples: energies.to_vec(),
        sigma,
        projections: Vec::new(),
    })
}

/// Replaces the projections with `Φᵀ B F` for every basis.
pub fn project_all(desc: &DescriptorSet, bases: &[&SpectralBasis]) -> Result<DescriptorSet> {
    let mut projections = Vec::with_capacity(bases.len());
    for b in bases {
        if b.n() != desc.n() {
            return Err(Error::MeshMismatch(format!(
                "descriptors have {} rows, basis α={} has {}",
                desc.n(),
                b.alpha,
                b.n()
            )));
        }
        projections.push((b.alpha, b.project(&desc.values)?));
    }
    Ok(DescriptorSet {
        projections,
        ..desc.clone()
    })
}

const MAGIC: &[u8; 8] = b"SISPDESC";
const FORMAT_VERSION: u32 = 1;

/// Layout: magic, version, `u64 n`, `u64 d`, kind name, `u64` sample count,
/// samples, `f64 sigma`, then the `n × d` values row-major.
pub fn write_descriptors(path: &Path, desc: &DescriptorSet) -> Result<()> {
    let mut w = Writer::new(MAGIC, FORMAT_VERSION);
    w.u64(desc.n() as u64);
    w.u64(desc.d() as u64);
    w.str(desc.kind.name());
    w.u64(desc.samples.len() as u64);
    w.f64s(&desc.samples);
    w.f64(desc.sigma);
    for row in desc.values.row_iter() {
        row.iter().for_each(|v| w.f64(*v));
    }
    w.finish(path)
}

pub fn read_descriptors(path: &Path) -> Result<DescriptorSet> {
    let mut r = Reader::open(path, MAGIC, FORMAT_VERSION)?;
    let limit = r.remaining() as u64;
    let n = r.count(limit)?;
    let d = r.count(limit)?;
    let kind_name = r.str()?;
    let kind = DescriptorKind::parse(&kind_name)
        .ok_or_else(|| r.err(&format!("unknown descriptor kind {kind_name:?}")))?;
    let ns = r.count(limit)?;
    let samples = r.f64s(ns)?;
    let sigma = r.f64()?;
    let raw = r.f64s(n.checked_mul(d).ok_or_else(|| r.err("overflow"))?)?;
    r.expect_end()?;
    Ok(DescriptorSet {
        values: DMatrix::from_row_slice(n, d, &raw),
        kind,
        samples,
        sigma,
        projections: Vec::new(),
    })
}
