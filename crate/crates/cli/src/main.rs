use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use sispec_core::config::{PipelineConfig, DEFAULT_CONFIG_TOML};
use sispec_core::eval::CURVE_MAX;
use sispec_core::pipeline::{
    cmd_deform, cmd_eval, cmd_match, cmd_spectra, compute_bases, load_valid_mesh, match_summary, BasisSet,
    DescriptorMode,
};
use sispec_core::{selftest, Error, ErrorClass};

const DEFAULT_CACHE_DIR: &str = ".sispec-cache";

/// Multispectral scale-invariant functional maps for non-rigid shape
/// correspondence.
#[derive(Parser, Debug)]
#[command(name = "sispec", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML config file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Spectral domains, e.g. 0.5,0.6,0.8.
    #[arg(long, global = true, value_delimiter = ',', num_args = 1.., value_name = "A,..")]
    alphas: Option<Vec<f64>>,
    /// Eigenpairs per domain.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Eigensolver seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "DIR", default_value = "sispec-out")]
    out_dir: PathBuf,
    /// Basis cache [default: config value, else .sispec-cache].
    #[arg(long, global = true, value_name = "DIR")]
    cache_dir: Option<PathBuf>,
    /// Compute every basis afresh and store nothing.
    #[arg(long, global = true, conflicts_with = "cache_dir")]
    no_cache: bool,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only warnings and errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute and cache the spectral bases of one or more meshes.
    Spectra {
        #[arg(required = true)]
        meshes: Vec<PathBuf>,
    },
    /// Match a source mesh to one or more targets.
    Match {
        source: PathBuf,
        #[arg(required = true)]
        targets: Vec<PathBuf>,
        /// Give the target the source's descriptors (targets must share the
        /// source's vertex order, as deform outputs do).
        #[arg(long)]
        transfer_descriptors: bool,
    },
    /// Geodesic error curves of correspondence files against a ground truth.
    Eval {
        /// Ground-truth correspondence, one target index per source vertex.
        #[arg(long)]
        gt: PathBuf,
        /// Source mesh, on which geodesic errors are measured.
        #[arg(long)]
        source: PathBuf,
        /// Correspondence files, optionally labelled as LABEL=PATH.
        #[arg(required = true)]
        correspondences: Vec<String>,
    },
    /// Locally scale a mesh around a vertex; writes the mesh and an identity
    /// ground truth into the output directory.
    Deform {
        mesh: PathBuf,
        /// Center vertex.
        #[arg(long, default_value_t = 0)]
        vertex: usize,
        /// Geodesic radius [default: a quarter of the approximate diameter].
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, default_value_t = 1.5)]
        factor: f64,
        /// Fraction of the radius scaled fully before the falloff starts.
        #[arg(long, default_value_t = sispec_core::mesh::DEFAULT_PLATEAU)]
        plateau: f64,
    },
    /// Run quick invariant checks on generated meshes.
    Selftest,
    /// Print the documented default configuration.
    Config,
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Validation => 1,
        ErrorClass::Numerical => 2,
        ErrorClass::Io => 3,
    }
}

fn build_config(g: &Global) -> Result<PipelineConfig, Error> {
    let mut cfg = match &g.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(a) = &g.alphas {
        cfg.alphas = a.clone();
    }
    if let Some(k) = g.k {
        cfg.k = k;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cache_dir(g: &Global, cfg: &PipelineConfig) -> Option<PathBuf> {
    if g.no_cache {
        return None;
    }
    g.cache_dir
        .clone()
        .or_else(|| cfg.cache_dir.clone())
        .or_else(|| Some(PathBuf::from(DEFAULT_CACHE_DIR)))
}

fn stem(p: &Path) -> String {
    p.file_stem().map_or_else(|| "target".into(), |s| s.to_string_lossy().into_owned())
}

fn print_spectra(path: &Path, set: &BasisSet) {
    println!("{}: {} computed, {} cached", path.display(), set.computed(), set.cached());
    for b in &set.bases {
        let head: Vec<String> = b.eigenvalues.iter().take(6).map(|v| format!("{v:.4}")).collect();
        println!("  alpha {}: {} ...", b.alpha, head.join(" "));
    }
}

/// Exit code of a failed self-test; failures there are numerical.
const SELFTEST_FAILED: u8 = 2;

fn run(cli: Cli) -> Result<u8, Error> {
    let g = &cli.global;
    match cli.command {
        Command::Spectra { meshes } => {
            let cfg = build_config(g)?;
            let cache = cache_dir(g, &cfg);
            let sets = meshes
                .par_iter()
                .map(|m| match &cache {
                    Some(dir) => cmd_spectra(m, &cfg, dir),
                    None => compute_bases(&load_valid_mesh(m)?, &cfg.alphas, &cfg, None),
                })
                .collect::<Vec<_>>();
            for (m, set) in meshes.iter().zip(sets) {
                print_spectra(m, &set?);
            }
        }
        Command::Match {
            source,
            targets,
            transfer_descriptors,
        } => {
            let cfg = build_config(g)?;
            let cache = cache_dir(g, &cfg);
            log::info!(
                "descriptors: {} from the Euclidean basis stand in for learned extrinsic ones",
                cfg.descriptors.kind.name()
            );
            let mode = if transfer_descriptors {
                DescriptorMode::FromSource
            } else {
                DescriptorMode::PerShape
            };
            let out_dirs: Vec<PathBuf> = if targets.len() == 1 {
                vec![g.out_dir.clone()]
            } else {
                targets.iter().enumerate().map(|(i, t)| g.out_dir.join(format!("{i}_{}", stem(t)))).collect()
            };
            let reports = targets
                .par_iter()
                .zip(&out_dirs)
                .map(|(t, out)| cmd_match(&source, t, mode, &cfg, out, cache.as_deref()))
                .collect::<Vec<_>>();
            for ((t, out), report) in targets.iter().zip(&out_dirs).zip(reports) {
                let report = report?;
                println!("{} -> {}", source.display(), t.display());
                print!("{}", match_summary(&report.result));
                println!("wrote {}", out.display());
            }
        }
        Command::Eval {
            gt,
            source,
            correspondences,
        } => {
            let files: Vec<(String, PathBuf)> = correspondences
                .iter()
                .map(|c| match c.split_once('=') {
                    Some((label, path)) if !label.is_empty() => (label.to_string(), PathBuf::from(path)),
                    _ => (stem(Path::new(c)), PathBuf::from(c)),
                })
                .collect();
            let report = cmd_eval(&files, &gt, &source, &g.out_dir)?;
            for ((label, curve), csv) in report.curves.iter().zip(&report.csv_files) {
                println!(
                    "{label}: mean geodesic error {:.5}, {:.1}% within {CURVE_MAX} ({})",
                    curve.mean_error,
                    curve.fractions.last().copied().unwrap_or(0.0),
                    csv.display()
                );
            }
            println!("plot: {}", report.plot.display());
        }
        Command::Deform {
            mesh,
            vertex,
            radius,
            factor,
            plateau,
        } => {
            let out_mesh = g.out_dir.join(format!("{}_deformed.off", stem(&mesh)));
            let out_gt = g.out_dir.join(format!("{}_gt.txt", stem(&mesh)));
            let r = cmd_deform(&mesh, vertex, radius, factor, plateau, &out_mesh, &out_gt)?;
            println!("radius {:.5}", r.radius);
            println!("mesh: {}", r.mesh.display());
            println!("ground truth: {}", r.ground_truth.display());
        }
        Command::Selftest => {
            let checks = selftest::run();
            let failed = checks.iter().filter(|c| !c.pass).count();
            for c in &checks {
                println!("{} {}: {}", if c.pass { "ok  " } else { "FAIL" }, c.name, c.detail);
            }
            if failed > 0 {
                eprintln!("error: {failed} of {} checks failed", checks.len());
                return Ok(SELFTEST_FAILED);
            }
        }
        Command::Config => print!("{DEFAULT_CONFIG_TOML}"),
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match (cli.global.quiet, cli.global.verbose) {
        (true, _) => "warn",
        (_, 0) => "info",
        (_, 1) => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
