//! End-to-end operations behind the command-line tool: basis preprocessing
//! with caching, matching, evaluation and the local-scaling benchmark input.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::curvature::{curvature_field, CurvatureField};
use crate::descriptors::{default_hks_times, default_wks_energies, hks, project_all, wks_at, DescriptorKind, DescriptorSet};
use crate::error::{Error, Result};
use crate::eval::{curves_svg, geodesic_error, ground_truth_text, parse_ground_truth, ErrorCurve, GeodesicOracle};
use crate::fmap::{mult_operator_with, refine, solve_lsq, trace_csv, write_fmap, Direction, DomainData, FunctionalMapPair, Refinement};
use crate::fusion::{fuse, pointwise_from_map, Correspondence, DomainMatch};
use crate::mesh::{edge_graph_distances, load_mesh, local_scale_deform_with_plateau, write_off, TriMesh};
use crate::spectral::cache::{basis_key, cache_file_name, load_if_fresh, write_basis};
use crate::spectral::{assemble_mass, assemble_stiffness, eigensolve, SpectralBasis};

/// Loads a mesh and rejects invalid ones.
pub fn load_valid_mesh(path: &Path) -> Result<TriMesh> {
    let mesh = load_mesh(path, None)?;
    mesh.validate().into_result()?;
    mesh.triangle_areas()?;
    Ok(mesh)
}

/// Curvature is only needed when some `α > 0`; at `α = 0` the field's values
/// are ignored by the mass matrix.
fn unit_field(mesh: &TriMesh) -> CurvatureField {
    CurvatureField {
        vertex_k: vec![1.0; mesh.num_vertices()],
        vertex_clipped: vec![1.0; mesh.num_vertices()],
        triangle: vec![1.0; mesh.num_faces()],
        lo: 1.0,
        hi: 1.0,
        lo_pct: 0.0,
        hi_pct: 100.0,
        fallback: vec![false; mesh.num_vertices()],
    }
}

/// Where each basis came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisSource {
    Computed,
    Cached,
}

#[derive(Debug, Clone)]
pub struct BasisSet {
    /// One per requested α, same order.
    pub bases: Vec<SpectralBasis>,
    pub sources: Vec<BasisSource>,
    /// Cache file per basis, when caching.
    pub files: Vec<Option<PathBuf>>,
}

impl BasisSet {
    pub fn computed(&self) -> usize {
        self.sources.iter().filter(|s| **s == BasisSource::Computed).count()
    }

    pub fn cached(&self) -> usize {
        self.sources.len() - self.computed()
    }
}

/// Bases of one mesh for the given exponents, read from or written to `cache_dir`.
pub fn compute_bases(mesh: &TriMesh, alphas: &[f64], cfg: &PipelineConfig, cache_dir: Option<&Path>) -> Result<BasisSet> {
    let solver = toml::to_string(&cfg.eigen).unwrap_or_default() + &format!("seed={}", cfg.seed);
    let keys: Vec<[u8; 32]> = alphas
        .iter()
        .map(|&a| basis_key(mesh, &cfg.curvature, a, cfg.k, &solver))
        .collect();
    let files: Vec<Option<PathBuf>> = keys
        .iter()
        .map(|k| cache_dir.map(|d| d.join(cache_file_name(k))))
        .collect();
    let cached: Vec<Option<SpectralBasis>> = files
        .iter()
        .zip(&keys)
        .map(|(f, k)| f.as_deref().and_then(|f| load_if_fresh(f, k)))
        .collect();

    let needs_curvature = alphas
        .iter()
        .zip(&cached)
        .any(|(a, c)| *a > 0.0 && c.is_none());
    let curvature = if needs_curvature {
        Some(curvature_field(mesh, &cfg.curvature)?)
    } else {
        None
    };
    let unit = unit_field(mesh);
    let stiffness = if cached.iter().any(Option::is_none) {
        Some(assemble_stiffness(mesh, false)?)
    } else {
        None
    };
    let opts = cfg.eigen.options(cfg.seed);

    let results: Vec<(SpectralBasis, BasisSource)> = alphas
        .par_iter()
        .zip(cached)
        .map(|(&alpha, hit)| {
            if let Some(b) = hit {
                return Ok((b, BasisSource::Cached));
            }
            let field = if alpha > 0.0 { curvature.as_ref().unwrap() } else { &unit };
            let mass = assemble_mass(mesh, field, alpha)?;
            let basis = eigensolve(stiffness.as_ref().unwrap(), &mass, cfg.k, &opts)?;
            Ok((basis, BasisSource::Computed))
        })
        .collect::<Result<_>>()?;

    let mut set = BasisSet {
        bases: Vec::with_capacity(alphas.len()),
        sources: Vec::with_capacity(alphas.len()),
        files,
    };
    for (i, (basis, source)) in results.into_iter().enumerate() {
        if source == BasisSource::Computed {
            if let Some(path) = &set.files[i] {
                write_basis(path, &basis, &keys[i])?;
            }
        }
        set.bases.push(basis);
        set.sources.push(source);
    }
    Ok(set)
}

/// Preprocesses one mesh: one cached basis per configured α.
pub fn cmd_spectra(mesh_path: &Path, cfg: &PipelineConfig, cache_dir: &Path) -> Result<BasisSet> {
    cfg.validate()?;
    let mesh = load_valid_mesh(mesh_path)?;
    compute_bases(&mesh, &cfg.alphas, cfg, Some(cache_dir))
}

/// Descriptors of both shapes with shared parameters derived from the source
/// spectrum.
fn descriptor_pair(bx: &SpectralBasis, by: &SpectralBasis, cfg: &PipelineConfig) -> Result<(DescriptorSet, DescriptorSet)> {
    let d = &cfg.descriptors;
    let (mut dx, mut dy) = match d.kind {
        DescriptorKind::Hks => {
            let times = default_hks_times(&bx.eigenvalues, d.count)?;
            (hks(bx, &times)?, hks(by, &times)?)
        }
        DescriptorKind::Wks => {
            let (energies, sigma) = default_wks_energies(&bx.eigenvalues, d.count, d.variance_scale)?;
            (wks_at(bx, &energies, sigma)?, wks_at(by, &energies, sigma)?)
        }
    };
    if d.normalize {
        dx = dx.normalized();
        dy = dy.normalized();
    }
    Ok((dx, dy))
}

fn mult_operators(basis: &SpectralBasis, desc: &DescriptorSet) -> Result<Vec<DMatrix<f64>>> {
    let phi = &basis.eigenfunctions;
    let phi_t_b = basis.mass.matrix.mul_dense(phi).transpose();
    desc.values
        .column_iter()
        .map(|c| mult_operator_with(&phi_t_b, phi, c.as_slice()))
        .collect()
}

#[derive(Debug, Clone)]
pub struct MatchResult {
    pub alphas: Vec<f64>,
    /// Target vertex to source vertex.
    pub correspondence: Correspondence,
    pub initial: Vec<FunctionalMapPair>,
    pub refinement: Refinement,
    pub domains: Vec<DomainMatch>,
}

fn bases_with_euclid(
    source: &TriMesh,
    target: &TriMesh,
    cfg: &PipelineConfig,
    cache_dir: Option<&Path>,
) -> Result<(BasisSet, BasisSet, usize)> {
    cfg.validate()?;
    let mut alphas = cfg.alphas.clone();
    let euclid = match alphas.iter().position(|a| *a == 0.0) {
        Some(p) => p,
        None => {
            alphas.push(0.0);
            alphas.len() - 1
        }
    };
    let (sx, sy) = rayon::join(
        || compute_bases(source, &alphas, cfg, cache_dir),
        || compute_bases(target, &alphas, cfg, cache_dir),
    );
    let (sx, sy) = (sx?, sy?);
    log::info!(
        "bases: {} computed, {} cached",
        sx.computed() + sy.computed(),
        sx.cached() + sy.cached()
    );
    Ok((sx, sy, euclid))
}

/// Matches `target` to `source`: descriptors, per-domain least squares, joint
/// refinement, per-domain nearest neighbours and fusion.
pub fn match_shapes(source: &TriMesh, target: &TriMesh, cfg: &PipelineConfig, cache_dir: Option<&Path>) -> Result<MatchResult> {
    let (sx, sy, euclid) = bases_with_euclid(source, target, cfg, cache_dir)?;
    let (dx, dy) = descriptor_pair(&sx.bases[euclid], &sy.bases[euclid], cfg)?;
    match_bases(&sx.bases, &sy.bases, &dx, &dy, cfg)
}

/// Like [`match_shapes`], with the per-vertex descriptors supplied by the
/// caller instead of computed from the Euclidean spectra.
pub fn match_shapes_with_descriptors(
    source: &TriMesh,
    target: &TriMesh,
    dx: &DescriptorSet,
    dy: &DescriptorSet,
    cfg: &PipelineConfig,
    cache_dir: Option<&Path>,
) -> Result<MatchResult> {
    if dx.n() != source.num_vertices() || dy.n() != target.num_vertices() {
        return Err(Error::MeshMismatch("descriptor rows differ from vertex count".into()));
    }
    if dx.d() != dy.d() {
        return Err(Error::MeshMismatch(format!("{} vs {} descriptor channels", dx.d(), dy.d())));
    }
    let (sx, sy, _) = bases_with_euclid(source, target, cfg, cache_dir)?;
    match_bases(&sx.bases, &sy.bases, dx, dy, cfg)
}

/// Where the target's descriptors come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DescriptorMode {
    /// Each shape gets descriptors from its own Euclidean spectrum.
    #[default]
    PerShape,
    /// The target reuses the source's descriptor rows vertex by vertex. Only
    /// meaningful for index-aligned pairs such as the output of
    /// [`cmd_deform`]; it stands in for perfectly deformation-invariant
    /// descriptors so that only the spectral bases differ between runs.
    FromSource,
}

/// [`match_shapes`] with a choice of descriptor source.
pub fn match_shapes_with_mode(
    source: &TriMesh,
    target: &TriMesh,
    mode: DescriptorMode,
    cfg: &PipelineConfig,
    cache_dir: Option<&Path>,
) -> Result<MatchResult> {
    if mode == DescriptorMode::PerShape {
        return match_shapes(source, target, cfg, cache_dir);
    }
    if source.num_vertices() != target.num_vertices() {
        return Err(Error::MeshMismatch(format!(
            "descriptor transfer needs equal vertex counts ({} vs {})",
            source.num_vertices(),
            target.num_vertices()
        )));
    }
    let (sx, sy, euclid) = bases_with_euclid(source, target, cfg, cache_dir)?;
    let (dx, _) = descriptor_pair(&sx.bases[euclid], &sx.bases[euclid], cfg)?;
    match_bases(&sx.bases, &sy.bases, &dx, &dx, cfg)
}

fn match_bases(bx: &[SpectralBasis], by: &[SpectralBasis], dx: &DescriptorSet, dy: &DescriptorSet, cfg: &PipelineConfig) -> Result<MatchResult> {
    let nd = cfg.alphas.len();
    let (bx, by) = (&bx[..nd], &by[..nd]);
    let px = project_all(dx, &bx.iter().collect::<Vec<_>>())?;
    let py = project_all(dy, &by.iter().collect::<Vec<_>>())?;
    let (ex, ey) = (dx.subsampled(cfg.descriptors.e4_step), dy.subsampled(cfg.descriptors.e4_step));

    let prepared: Vec<(FunctionalMapPair, DomainData)> = (0..nd)
        .into_par_iter()
        .map(|s| {
            let (fx, fy) = (&px.projections[s].1, &py.projections[s].1);
            let pair = FunctionalMapPair::new(cfg.alphas[s], solve_lsq(fx, fy)?, solve_lsq(fy, fx)?);
            let k = cfg.k;
            let scale = 0.5 * (bx[s].eigenvalues[k - 1] + by[s].eigenvalues[k - 1]);
            let data = DomainData {
                lambda_x: bx[s].eigenvalues.iter().map(|l| l / scale).collect(),
                lambda_y: by[s].eigenvalues.iter().map(|l| l / scale).collect(),
                m_x: mult_operators(&bx[s], &ex)?,
                m_y: mult_operators(&by[s], &ey)?,
            };
            Ok((pair, data))
        })
        .collect::<Result<_>>()?;
    let (initial, data): (Vec<_>, Vec<_>) = prepared.into_iter().unzip();

    let refinement = refine(&initial, &cfg.weights, &data, &cfg.optimizer)?;
    log::info!(
        "refinement: {} steps, loss {:e} -> {:e}",
        refinement.accepted,
        refinement.trace.first().map_or(0.0, |r| r.total),
        refinement.trace.last().map_or(0.0, |r| r.total)
    );

    let domains: Vec<DomainMatch> = (0..nd)
        .into_par_iter()
        .map(|s| pointwise_from_map(&refinement.pairs[s].c_xy, &bx[s].eigenfunctions, &by[s].eigenfunctions))
        .collect::<Result<_>>()?;
    let correspondence = fuse(&domains)?;
    Ok(MatchResult {
        alphas: cfg.alphas.clone(),
        correspondence,
        initial,
        refinement,
        domains,
    })
}

#[derive(Debug, Clone)]
pub struct MatchReport {
    pub correspondence: PathBuf,
    pub maps: Vec<PathBuf>,
    pub trace: PathBuf,
    pub result: MatchResult,
}

fn alpha_tag(alpha: f64) -> String {
    format!("{alpha}").replace('.', "p")
}

/// Runs [`match_shapes`] on mesh files and writes the correspondence, the
/// refined maps and the loss trace into `out_dir`.
pub fn cmd_match(
    source: &Path,
    target: &Path,
    mode: DescriptorMode,
    cfg: &PipelineConfig,
    out_dir: &Path,
    cache_dir: Option<&Path>,
) -> Result<MatchReport> {
    cfg.validate()?;
    let x = load_valid_mesh(source)?;
    let y = load_valid_mesh(target)?;
    let result = match_shapes_with_mode(&x, &y, mode, cfg, cache_dir)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let corr = out_dir.join("correspondence.txt");
    result.correspondence.write(&corr)?;
    let mut maps = Vec::new();
    for (s, pair) in result.refinement.pairs.iter().enumerate() {
        for (c, dir) in [(&pair.c_xy, Direction::XToY), (&pair.c_yx, Direction::YToX)] {
            let p = out_dir.join(format!("fmap_{s}_a{}_{}.bin", alpha_tag(pair.alpha), dir.name()));
            write_fmap(&p, c, pair.alpha, dir)?;
            maps.push(p);
        }
    }
    let trace = out_dir.join("loss_trace.csv");
    std::fs::write(&trace, trace_csv(&result.refinement.trace)).map_err(|e| Error::io(&trace, e))?;
    Ok(MatchReport {
        correspondence: corr,
        maps,
        trace,
        result,
    })
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    /// `(label, curve)` per evaluated correspondence.
    pub curves: Vec<(String, ErrorCurve)>,
    pub csv_files: Vec<PathBuf>,
    pub plot: PathBuf,
}

/// Geodesic error curves of one or more correspondence files against a
/// ground truth, one CSV each and a single overlaid plot.
pub fn cmd_eval(corr_files: &[(String, PathBuf)], ground_truth: &Path, source_mesh: &Path, out_dir: &Path) -> Result<EvalReport> {
    if corr_files.is_empty() {
        return Err(Error::InvalidParameter("no correspondence files".into()));
    }
    let gt_text = std::fs::read_to_string(ground_truth).map_err(|e| Error::io(ground_truth, e))?;
    let gt = parse_ground_truth(&gt_text)?;
    let mesh = load_valid_mesh(source_mesh)?;
    let oracle = GeodesicOracle::new(&mesh)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut curves = Vec::new();
    let mut csv_files = Vec::new();
    for (label, path) in corr_files {
        let corr = Correspondence::read(path)?;
        let report = geodesic_error(&corr.mapping, &gt, &oracle)?;
        let csv = out_dir.join(format!("{label}.csv"));
        std::fs::write(&csv, report.curve.to_csv()).map_err(|e| Error::io(&csv, e))?;
        csv_files.push(csv);
        curves.push((label.clone(), report.curve));
    }
    let plot = out_dir.join("curves.svg");
    let refs: Vec<(&str, &ErrorCurve)> = curves.iter().map(|(l, c)| (l.as_str(), c)).collect();
    std::fs::write(&plot, curves_svg(&refs)).map_err(|e| Error::io(&plot, e))?;
    Ok(EvalReport {
        curves,
        csv_files,
        plot,
    })
}

/// Largest edge-graph distance found by a double sweep from vertex 0.
pub fn approximate_diameter(mesh: &TriMesh) -> f64 {
    let far = |src: usize| {
        edge_graph_distances(mesh, src)
            .into_iter()
            .enumerate()
            .filter(|(_, d)| d.is_finite())
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((src, 0.0))
    };
    let (a, _) = far(0);
    far(a).1
}

#[derive(Debug, Clone)]
pub struct DeformReport {
    pub mesh: PathBuf,
    pub ground_truth: PathBuf,
    pub radius: f64,
}

/// Writes the locally scaled mesh (OFF) and the identity ground truth.
/// Without a radius, a quarter of the approximate geodesic diameter is used.
pub fn cmd_deform(
    mesh_path: &Path,
    seed: usize,
    radius: Option<f64>,
    factor: f64,
    plateau: f64,
    out_mesh: &Path,
    out_gt: &Path,
) -> Result<DeformReport> {
    let mesh = load_valid_mesh(mesh_path)?;
    let radius = radius.unwrap_or_else(|| 0.25 * approximate_diameter(&mesh));
    let deformed = local_scale_deform_with_plateau(&mesh, seed, radius, factor, plateau)?;
    deformed.validate().into_result()?;
    for dir in [out_mesh, out_gt].iter().filter_map(|p| p.parent()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_off(&deformed, out_mesh)?;
    let gt: Vec<usize> = (0..mesh.num_vertices()).collect();
    std::fs::write(out_gt, ground_truth_text(&gt)).map_err(|e| Error::io(out_gt, e))?;
    Ok(DeformReport {
        mesh: out_mesh.to_path_buf(),
        ground_truth: out_gt.to_path_buf(),
        radius,
    })
}

/// Short human-readable summary of a match.
pub fn match_summary(result: &MatchResult) -> String {
    let mut s = String::new();
    let trace = &result.refinement.trace;
    let _ = writeln!(
        s,
        "loss {:e} -> {:e} in {} steps",
        trace.first().map_or(0.0, |r| r.total),
        trace.last().map_or(0.0, |r| r.total),
        result.refinement.accepted
    );
    for (i, a) in result.alphas.iter().enumerate() {
        let wins = result.correspondence.domain.iter().filter(|d| **d == i).count();
        let t = result.refinement.pairs[i].terms;
        let _ = writeln!(
            s,
            "alpha {a}: E1 {:.3e} E2 {:.3e} E3 {:.3e} E4 {:.3e}, chosen for {wins} vertices",
            t.e1, t.e2, t.e3, t.e4
        );
    }
    s
}
