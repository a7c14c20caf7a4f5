//! Pointwise correspondences from functional maps and their fusion across
//! spectral domains.
//!
//! Within a domain, target vertex `i` is compared with every source vertex `j`
//! through `‖C φ_j − ψ_i‖₂`, where `φ_j`, `ψ_i` are rows of the source and target
//! bases. Distances are normalized per domain with statistics over all
//! `n_target × n_source` candidates, `d* = (d − min)/(max − min) − mean`, which
//! makes domains comparable; the fused match is the argmin over domains.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Raw-distance statistics over every candidate pair of one domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl DomainStats {
    /// `(d − min)/(max − min) − mean_normalized`; zero when the domain is flat.
    pub fn normalize(&self, d: f64) -> f64 {
        let range = self.max - self.min;
        if !(range > 0.0) {
            return 0.0;
        }
        (d - self.min) / range - (self.mean - self.min) / range
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainMatch {
    /// Source vertex per target vertex.
    pub mapping: Vec<usize>,
    /// Raw distance of the chosen source vertex.
    pub distances: Vec<f64>,
    pub stats: DomainStats,
}

impl DomainMatch {
    pub fn normalized(&self) -> Vec<f64> {
        normalize_distances(&self.distances, &self.stats)
    }
}

pub fn normalize_distances(distances: &[f64], stats: &DomainStats) -> Vec<f64> {
    distances.iter().map(|&d| stats.normalize(d)).collect()
}

/// Statistics of a plain list of distances.
pub fn stats_of(distances: &[f64]) -> DomainStats {
    let min = distances.iter().copied().fold(f64::INFINITY, f64::min);
    let max = distances.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = distances.iter().sum::<f64>() / distances.len() as f64;
    DomainStats { min, max, mean }
}

#[inline]
fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Row-major copy of the `n × k` rows of `m`.
fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Nearest source vertex for every target vertex under the map `c`
/// (source coefficients to target coefficients).
///
/// The first pass gathers the global statistics, the second picks for each
/// target vertex the source vertex of lowest normalized distance, lowest index
/// on ties.
pub fn pointwise_from_map(c: &DMatrix<f64>, phi: &DMatrix<f64>, psi: &DMatrix<f64>) -> Result<DomainMatch> {
    let k = c.nrows();
    if c.ncols() != k || phi.ncols() != k || psi.ncols() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: if phi.ncols() != k { phi.ncols() } else { psi.ncols().max(c.ncols()) },
        });
    }
    if phi.nrows() == 0 || psi.nrows() == 0 {
        return Err(Error::InvalidParameter("empty basis".into()));
    }
    let source = rows(&(phi * c.transpose()));
    let target = rows(psi);

    let per_row: Vec<(f64, f64, f64)> = target
        .par_iter()
        .map(|t| {
            let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
            for s in &source {
                let d = distance(s, t);
                lo = lo.min(d);
                hi = hi.max(d);
                sum += d;
            }
            (lo, hi, sum)
        })
        .collect();
    let total = (source.len() * target.len()) as f64;
    let stats = DomainStats {
        min: per_row.iter().map(|r| r.0).fold(f64::INFINITY, f64::min),
        max: per_row.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max),
        mean: per_row.iter().map(|r| r.2).sum::<f64>() / total,
    };

    let (mapping, distances): (Vec<usize>, Vec<f64>) = target
        .par_iter()
        .map(|t| {
            let (mut best, mut best_n, mut best_d) = (0, f64::INFINITY, f64::INFINITY);
            for (j, s) in source.iter().enumerate() {
                let d = distance(s, t);
                let n = stats.normalize(d);
                if n < best_n {
                    (best, best_n, best_d) = (j, n, d);
                }
            }
            (best, best_d)
        })
        .unzip();
    Ok(DomainMatch {
        mapping,
        distances,
        stats,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence {
    /// Source vertex per target vertex.
    pub mapping: Vec<usize>,
    /// Index of the domain that won each target vertex.
    pub domain: Vec<usize>,
    /// Normalized distance of the winning match.
    pub score: Vec<f64>,
}

impl Correspondence {
    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    /// Lines `target source domain normalized_distance`.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(32 * self.len());
        for i in 0..self.len() {
            let _ = writeln!(s, "{} {} {} {}", i, self.mapping[i], self.domain[i], self.score[i]);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Correspondence {
            mapping: Vec::new(),
            domain: Vec::new(),
            score: Vec::new(),
        };
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: &str| Error::Parse {
                line: ln + 1,
                message: m.to_string(),
            };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(bad("expected `target source domain distance`"));
            }
            let t: usize = f[0].parse().map_err(|_| bad("bad target index"))?;
            if t != c.len() {
                return Err(bad(&format!("target index {t} out of order")));
            }
            c.mapping.push(f[1].parse().map_err(|_| bad("bad source index"))?);
            c.domain.push(f[2].parse().map_err(|_| bad("bad domain index"))?);
            c.score.push(f[3].parse().map_err(|_| bad("bad distance"))?);
        }
        Ok(c)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// Per target vertex, the domain whose normalized winning distance is lowest
/// (lowest domain index on ties).
pub fn fuse(domains: &[DomainMatch]) -> Result<Correspondence> {
    let first = domains.first().ok_or(Error::EmptyDomainList)?;
    let n = first.mapping.len();
    if let Some(d) = domains.iter().find(|d| d.mapping.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: d.mapping.len(),
        });
    }
    let normalized: Vec<Vec<f64>> = domains.iter().map(|d| d.normalized()).collect();
    let mut out = Correspondence {
        mapping: Vec::with_capacity(n),
        domain: Vec::with_capacity(n),
        score: Vec::with_capacity(n),
    };
    for i in 0..n {
        let mut best = 0;
        for s in 1..domains.len() {
            if normalized[s][i] < normalized[best][i] {
                best = s;
            }
        }
        out.mapping.push(domains[best].mapping[i]);
        out.domain.push(best);
        out.score.push(normalized[best][i]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_examples() {
        let d = [0.0, 5.0, 10.0];
        assert_eq!(normalize_distances(&d, &stats_of(&d)), vec![-0.5, 0.0, 0.5]);
        let flat = [3.0; 4];
        assert!(normalize_distances(&flat, &stats_of(&flat)).iter().all(|v| *v == 0.0));
        let moved: Vec<f64> = d.iter().map(|v| 2.5 * v + 7.0).collect();
        let a = normalize_distances(&moved, &stats_of(&moved));
        for (x, y) in a.iter().zip([-0.5, 0.0, 0.5]) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_map_on_same_basis() {
        let phi = DMatrix::from_fn(20, 4, |i, j| ((i * 5 + j * 11) as f64 * 0.37).sin());
        let c = DMatrix::identity(4, 4);
        let m = pointwise_from_map(&c, &phi, &phi).unwrap();
        assert_eq!(m.mapping, (0..20).collect::<Vec<_>>());
        assert!(m.distances.iter().all(|d| *d == 0.0));
    }

    #[test]
    fn two_identical_domains_pick_first() {
        let phi = DMatrix::from_fn(15, 3, |i, j| ((i * 3 + j * 7) as f64 * 0.51).cos());
        let c = DMatrix::from_fn(3, 3, |i, j| if i == j { 0.9 } else { 0.1 });
        let m = pointwise_from_map(&c, &phi, &phi).unwrap();
        let one = fuse(std::slice::from_ref(&m)).unwrap();
        assert_eq!(one.mapping, m.mapping);
        let two = fuse(&[m.clone(), m.clone()]).unwrap();
        assert_eq!(two.mapping, m.mapping);
        assert!(two.domain.iter().all(|d| *d == 0));
        assert!(matches!(fuse(&[]), Err(Error::EmptyDomainList)));
    }

    #[test]
    fn text_round_trip() {
        let c = Correspondence {
            mapping: vec![2, 0, 1],
            domain: vec![0, 2, 1],
            score: vec![-0.25, 0.1 + 0.2, 1e-300],
        };
        let back = Correspondence::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert!(Correspondence::parse("1 0 0 0.0\n").is_err());
    }
}
