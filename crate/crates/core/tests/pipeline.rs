use sispec_core::config::{PipelineConfig, NON_ISOMETRIC_ALPHAS};
use sispec_core::fmap::{read_fmap, Direction};
use sispec_core::fusion::Correspondence;
use sispec_core::mesh::generate::{blob, icosphere};
use sispec_core::mesh::{load_mesh, write_off};
use sispec_core::pipeline::{
    cmd_deform, cmd_eval, cmd_match, cmd_spectra, compute_bases, match_shapes, match_shapes_with_mode, BasisSource,
    DescriptorMode,
};
use sispec_core::Error;

fn small_config() -> PipelineConfig {
    PipelineConfig {
        k: 12,
        alphas: NON_ISOMETRIC_ALPHAS.to_vec(),
        ..PipelineConfig::default()
    }
}

#[test]
fn bases_are_cached_by_content() {
    let dir = tempfile::tempdir().unwrap();
    let mesh_path = dir.path().join("m.off");
    write_off(&blob(2), &mesh_path).unwrap();
    let cache = dir.path().join("cache");
    let cfg = small_config();

    let first = cmd_spectra(&mesh_path, &cfg, &cache).unwrap();
    assert_eq!(first.computed(), 3);
    assert!(first.files.iter().all(|f| f.as_ref().unwrap().exists()));
    let second = cmd_spectra(&mesh_path, &cfg, &cache).unwrap();
    assert_eq!(second.sources, vec![BasisSource::Cached; 3]);
    assert_eq!(first.bases, second.bases);

    // any input change misses the cache
    let mut other = cfg.clone();
    other.curvature.hi_pct = 80.0;
    let third = cmd_spectra(&mesh_path, &other, &cache).unwrap();
    assert_eq!(third.computed(), 3);
    let mut fewer = cfg.clone();
    fewer.k = 10;
    assert_eq!(cmd_spectra(&mesh_path, &fewer, &cache).unwrap().computed(), 3);

    // a corrupt cache file is recomputed, not trusted
    let victim = first.files[0].clone().unwrap();
    std::fs::write(&victim, b"garbage").unwrap();
    let again = cmd_spectra(&mesh_path, &cfg, &cache).unwrap();
    assert_eq!(again.sources[0], BasisSource::Computed);
    assert_eq!(again.bases[0], first.bases[0]);
}

#[test]
fn runs_are_deterministic() {
    let x = blob(2);
    let y = x.permuted(&(0..x.num_vertices()).rev().collect::<Vec<_>>()).unwrap();
    let cfg = small_config();
    let a = match_shapes(&x, &y, &cfg, None).unwrap();
    let b = match_shapes(&x, &y, &cfg, None).unwrap();
    assert_eq!(a.correspondence, b.correspondence);
    assert_eq!(a.refinement.trace, b.refinement.trace);
}

#[test]
fn self_match_is_exact() {
    let x = blob(3);
    let mut cfg = PipelineConfig::default();
    cfg.k = 20;
    let r = match_shapes(&x, &x, &cfg, None).unwrap();
    let n = x.num_vertices();
    let exact = (0..n).filter(|&i| r.correspondence.mapping[i] == i).count();
    assert_eq!(exact, n);
    assert_eq!(r.domains.len(), 3);
}

#[test]
fn descriptor_transfer_needs_aligned_meshes() {
    let cfg = small_config();
    let err = match_shapes_with_mode(&icosphere(1), &icosphere(2), DescriptorMode::FromSource, &cfg, None).unwrap_err();
    assert!(matches!(err, Error::MeshMismatch(_)));
}

#[test]
fn commands_write_their_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src.off");
    write_off(&blob(2), &src).unwrap();

    let unchanged = dir.path().join("same.off");
    let gt = dir.path().join("gt.txt");
    cmd_deform(&src, 0, Some(0.5), 1.0, 0.5, &unchanged, &gt).unwrap();
    assert_eq!(load_mesh(&unchanged, None).unwrap(), load_mesh(&src, None).unwrap());

    let tgt = dir.path().join("tgt.off");
    let report = cmd_deform(&src, 5, None, 1.5, 0.5, &tgt, &gt).unwrap();
    assert!(report.radius > 0.0);

    let out = dir.path().join("match");
    let cfg = small_config();
    let m = cmd_match(&src, &tgt, DescriptorMode::FromSource, &cfg, &out, None).unwrap();
    let corr = Correspondence::read(&m.correspondence).unwrap();
    assert_eq!(corr.len(), 162);
    assert_eq!(m.maps.len(), 6);
    let (c, alpha, dir_tag) = read_fmap(&m.maps[1]).unwrap();
    assert_eq!((c.nrows(), alpha, dir_tag), (12, 0.5, Direction::YToX));
    let trace = std::fs::read_to_string(&m.trace).unwrap();
    assert!(trace.starts_with("iteration,E,E1,E2,E3,E4\n"));

    let eval_dir = dir.path().join("eval");
    let e = cmd_eval(&[("multi".into(), m.correspondence.clone())], &gt, &src, &eval_dir).unwrap();
    assert!(e.plot.exists());
    assert!(e.csv_files[0].exists());
    assert!(e.curves[0].1.mean_error < 0.1);

    let bad_gt = dir.path().join("bad.txt");
    std::fs::write(&bad_gt, "0\n1\n").unwrap();
    let err = cmd_eval(&[("multi".into(), m.correspondence)], &bad_gt, &src, &eval_dir).unwrap_err();
    assert!(matches!(err, Error::GroundTruthMismatch { .. }));
}

#[test]
fn euclidean_basis_is_added_for_descriptors_only() {
    let x = blob(2);
    let cfg = small_config();
    let r = match_shapes(&x, &x, &cfg, None).unwrap();
    assert_eq!(r.alphas, NON_ISOMETRIC_ALPHAS.to_vec());
    assert_eq!(r.refinement.pairs.len(), 3);
    let set = compute_bases(&x, &[0.0], &cfg, None).unwrap();
    assert_eq!(set.bases[0].alpha, 0.0);
}
