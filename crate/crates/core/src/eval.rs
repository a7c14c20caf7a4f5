//! Correspondence error measured as geodesic distance on the source mesh,
//! normalized by the square root of its area, and the cumulative error curve.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{edge_graph_distances, TriMesh};

/// Upper end of the plotted error range.
pub const CURVE_MAX: f64 = 0.1;
pub const CURVE_SAMPLES: usize = 100;

/// Edge-graph geodesics normalized by `sqrt(total area)`.
#[derive(Debug, Clone, Copy)]
pub struct GeodesicOracle<'a> {
    mesh: &'a TriMesh,
    scale: f64,
}

impl<'a> GeodesicOracle<'a> {
    pub fn new(mesh: &'a TriMesh) -> Result<Self> {
        let area = mesh.total_area();
        if !(area > 0.0) {
            return Err(Error::InvalidMesh("zero total area".into()));
        }
        Ok(Self {
            mesh,
            scale: area.sqrt(),
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        self.mesh
    }

    /// `sqrt(total area)`.
    pub fn normalization(&self) -> f64 {
        self.scale
    }

    pub fn distances_from(&self, source: usize) -> Result<Vec<f64>> {
        let n = self.mesh.num_vertices();
        if source >= n {
            return Err(Error::SeedOutOfRange { seed: source, n });
        }
        let mut d = edge_graph_distances(self.mesh, source);
        let unreachable = d.iter().filter(|v| v.is_infinite()).count();
        if unreachable > 0 {
            return Err(Error::DisconnectedMesh {
                source_vertex: source,
                unreachable,
            });
        }
        d.iter_mut().for_each(|v| *v /= self.scale);
        Ok(d)
    }

    pub fn distance(&self, a: usize, b: usize) -> Result<f64> {
        Ok(self.distances_from(a)?[b])
    }
}

/// Single-source normalized geodesic distances.
pub fn geodesic_distances(mesh: &TriMesh, source: usize) -> Result<Vec<f64>> {
    GeodesicOracle::new(mesh)?.distances_from(source)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve {
    /// Ascending normalized geodesic errors.
    pub thresholds: Vec<f64>,
    /// Percentage of correspondences with error at most the threshold.
    pub fractions: Vec<f64>,
    pub mean_error: f64,
}

impl ErrorCurve {
    /// Curve at `CURVE_SAMPLES` uniform thresholds over `[0, CURVE_MAX]`.
    pub fn from_errors(errors: &[f64]) -> Self {
        let thresholds: Vec<f64> = (0..CURVE_SAMPLES)
            .map(|i| CURVE_MAX * i as f64 / (CURVE_SAMPLES - 1) as f64)
            .collect();
        Self::at_thresholds(errors, thresholds)
    }

    pub fn at_thresholds(errors: &[f64], thresholds: Vec<f64>) -> Self {
        let mut sorted = errors.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len().max(1) as f64;
        let fractions = thresholds
            .iter()
            .map(|t| 100.0 * sorted.partition_point(|e| e <= t) as f64 / n)
            .collect();
        let mean_error = if errors.is_empty() {
            0.0
        } else {
            errors.iter().sum::<f64>() / errors.len() as f64
        };
        Self {
            thresholds,
            fractions,
            mean_error,
        }
    }

    /// Header `threshold,fraction`, then one row per threshold.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,fraction\n");
        for (t, f) in self.thresholds.iter().zip(&self.fractions) {
            let _ = writeln!(s, "{},{}", fixed_min(*t, 3), fixed_min(*f, 1));
        }
        s
    }
}

/// Shortest round-trip decimal form, padded to at least `min_decimals`.
fn fixed_min(v: f64, min_decimals: usize) -> String {
    let mut s = format!("{v}");
    let decimals = s.find('.').map(|p| s.len() - p - 1);
    match decimals {
        None => {
            s.push('.');
            s.extend(std::iter::repeat_n('0', min_decimals));
        }
        Some(d) if d < min_decimals => s.extend(std::iter::repeat_n('0', min_decimals - d)),
        _ => {}
    }
    s
}

/// `(thresholds, fractions)` from [`ErrorCurve::to_csv`] output.
pub fn parse_curve_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "threshold,fraction" => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "expected header `threshold,fraction`".into(),
            })
        }
    }
    let (mut t, mut f) = (Vec::new(), Vec::new());
    for (ln, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Parse {
            line: ln + 1,
            message: format!("bad row {line:?}"),
        };
        let (a, b) = line.split_once(',').ok_or_else(bad)?;
        t.push(a.trim().parse().map_err(|_| bad())?);
        f.push(b.trim().parse().map_err(|_| bad())?);
    }
    Ok((t, f))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// Normalized geodesic error per target vertex.
    pub errors: Vec<f64>,
    pub curve: ErrorCurve,
}

/// Error of `mapping` (source vertex per target vertex) against `ground_truth`,
/// measured on the oracle's (source) mesh.
pub fn geodesic_error(mapping: &[usize], ground_truth: &[usize], oracle: &GeodesicOracle) -> Result<ErrorReport> {
    if mapping.len() != ground_truth.len() {
        return Err(Error::GroundTruthMismatch {
            expected: mapping.len(),
            got: ground_truth.len(),
        });
    }
    let n = oracle.mesh().num_vertices();
    if let Some(&v) = mapping.iter().chain(ground_truth).find(|&&v| v >= n) {
        return Err(Error::InvalidParameter(format!(
            "source vertex {v} out of range for mesh with {n} vertices"
        )));
    }
    let mut by_source: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &g) in ground_truth.iter().enumerate() {
        by_source.entry(g).or_default().push(i);
    }
    let groups: Vec<(usize, Vec<usize>)> = by_source.into_iter().collect();
    let per_group: Vec<Vec<(usize, f64)>> = groups
        .par_iter()
        .map(|(g, targets)| {
            if targets.iter().all(|&i| mapping[i] == *g) {
                return Ok(targets.iter().map(|&i| (i, 0.0)).collect());
            }
            let d = oracle.distances_from(*g)?;
            Ok(targets.iter().map(|&i| (i, d[mapping[i]])).collect())
        })
        .collect::<Result<_>>()?;
    let mut errors = vec![0.0; mapping.len()];
    for (i, e) in per_group.into_iter().flatten() {
        errors[i] = e;
    }
    let curve = ErrorCurve::from_errors(&errors);
    Ok(ErrorReport { errors, curve })
}

/// Ground truth as one source index per line (`#` comments allowed).
pub fn parse_ground_truth(text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(line.parse().map_err(|_| Error::Parse {
            line: ln + 1,
            message: format!("expected a vertex index, found {line:?}"),
        })?);
    }
    Ok(out)
}

pub fn ground_truth_text(gt: &[usize]) -> String {
    let mut s = String::with_capacity(8 * gt.len());
    for g in gt {
        let _ = writeln!(s, "{g}");
    }
    s
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Standalone SVG with one line per curve: geodesic error on the horizontal
/// axis, percentage of correspondences on the vertical.
pub fn curves_svg(curves: &[(&str, &ErrorCurve)]) -> String {
    let (w, h) = (640.0, 480.0);
    let (left, right, top, bottom) = (70.0, 20.0, 20.0, 60.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let xmax = curves
        .iter()
        .filter_map(|(_, c)| c.thresholds.last().copied())
        .fold(CURVE_MAX, f64::max);
    let x = |t: f64| left + pw * t / xmax;
    let y = |f: f64| top + ph * (1.0 - f / 100.0);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    for i in 0..=5 {
        let fx = xmax * i as f64 / 5.0;
        let fy = 20.0 * i as f64;
        let _ = writeln!(
            s,
            r##"<line x1="{0:.2}" y1="{1}" x2="{0:.2}" y2="{2}" stroke="#ddd"/><text x="{0:.2}" y="{3}" text-anchor="middle">{4}</text>"##,
            x(fx),
            top,
            top + ph,
            top + ph + 18.0,
            fixed_min((fx * 1e6).round() / 1e6, 2)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{0}" y1="{1:.2}" x2="{2}" y2="{1:.2}" stroke="#ddd"/><text x="{3}" y="{4:.2}" text-anchor="end">{5}</text>"##,
            left,
            y(fy),
            left + pw,
            left - 6.0,
            y(fy) + 4.0,
            fy
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{}" text-anchor="middle">Geodesic Error</text>"#,
        left + pw / 2.0,
        h - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18,{:.2}) rotate(-90)" text-anchor="middle">% Correspondence</text>"#,
        top + ph / 2.0
    );
    for (idx, (label, c)) in curves.iter().enumerate() {
        let color = COLORS[idx % COLORS.len()];
        let pts: Vec<String> = c
            .thresholds
            .iter()
            .zip(&c.fractions)
            .map(|(t, f)| format!("{:.2},{:.2}", x(*t), y(*f)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = top + ph - 15.0 - 18.0 * (curves.len() - 1 - idx) as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}" stroke="{color}" stroke-width="2"/><text x="{3:.2}" y="{4:.2}">{5} ({6:.4})</text>"#,
            left + pw * 0.45,
            ly,
            left + pw * 0.45 + 24.0,
            left + pw * 0.45 + 30.0,
            ly + 4.0,
            escape(label),
            c.mean_error
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `<stem>.csv` and `<stem>.svg`.
pub fn emit_curve(curve: &ErrorCurve, stem: &Path, label: &str) -> Result<()> {
    let csv = stem.with_extension("csv");
    std::fs::write(&csv, curve.to_csv()).map_err(|e| Error::io(&csv, e))?;
    let svg = stem.with_extension("svg");
    std::fs::write(&svg, curves_svg(&[(label, curve)])).map_err(|e| Error::io(&svg, e))
}
