//! Binary container for a [`SpectralBasis`].
//!
//! Layout (little-endian): magic `SISPBASE`, `u32` version, `u64 n`, `u64 k`,
//! `f64 alpha`, 32-byte key, `k` eigenvalues, `Φ` column-major (`n·k`
//! values), `u64 nnz`, then `nnz` triplets `(u64 row, u64 col, f64 value)` of `B`.

use std::path::Path;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use super::{MassMatrix, SpectralBasis};
use crate::binio::{Reader, Writer};
use crate::curvature::CurvatureConfig;
use crate::error::Result;
use crate::linalg::CsrMatrix;
use crate::mesh::{off_string, TriMesh};

const MAGIC: &[u8; 8] = b"SISPBASE";
pub const FORMAT_VERSION: u32 = 1;

/// Content hash of everything a basis depends on. `solver` describes the
/// eigensolver settings.
pub fn basis_key(mesh: &TriMesh, curvature: &CurvatureConfig, alpha: f64, k: usize, solver: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"basis-v1");
    h.update(off_string(mesh).as_bytes());
    h.update(toml::to_string(curvature).unwrap_or_default().as_bytes());
    h.update(alpha.to_le_bytes());
    h.update((k as u64).to_le_bytes());
    h.update(solver.as_bytes());
    h.finalize().into()
}

/// File name of a cached basis: the hex key.
pub fn cache_file_name(key: &[u8; 32]) -> String {
    format!("{}.basis", hex::encode(key))
}

pub fn write_basis(path: &Path, basis: &SpectralBasis, key: &[u8; 32]) -> Result<()> {
    let mut w = Writer::new(MAGIC, FORMAT_VERSION);
    w.u64(basis.n() as u64);
    w.u64(basis.k() as u64);
    w.f64(basis.alpha);
    w.bytes(key);
    w.f64s(&basis.eigenvalues);
    w.f64s(basis.eigenfunctions.as_slice());
    let t = basis.mass.matrix.triplets();
    w.u64(t.len() as u64);
    for (i, j, v) in t {
        w.u64(i as u64);
        w.u64(j as u64);
        w.f64(v);
    }
    w.finish(path)
}

/// Reads a basis and its stored key.
pub fn read_basis(path: &Path) -> Result<(SpectralBasis, [u8; 32])> {
    let mut r = Reader::open(path, MAGIC, FORMAT_VERSION)?;
    let limit = r.remaining() as u64;
    let n = r.count(limit)?;
    let k = r.count(limit)?;
    let alpha = r.f64()?;
    let key: [u8; 32] = r.take(32)?.try_into().unwrap();
    let eigenvalues = r.f64s(k)?;
    let phi = r.f64s(n.checked_mul(k).ok_or_else(|| r.err("overflow"))?)?;
    let nnz = r.count(limit)?;
    let mut t = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        let i = r.count(n.saturating_sub(1) as u64)?;
        let j = r.count(n.saturating_sub(1) as u64)?;
        t.push((i, j, r.f64()?));
    }
    r.expect_end()?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(r.err("alpha outside [0, 1]"));
    }
    Ok((
        SpectralBasis {
            alpha,
            eigenvalues,
            eigenfunctions: DMatrix::from_vec(n, k, phi),
            mass: MassMatrix {
                matrix: CsrMatrix::from_triplets(n, t),
                alpha,
            },
        },
        key,
    ))
}

/// Returns the cached basis when the file exists and its key matches.
pub fn load_if_fresh(path: &Path, key: &[u8; 32]) -> Option<SpectralBasis> {
    match read_basis(path) {
        Ok((basis, stored)) if &stored == key => Some(basis),
        Ok(_) => {
            log::debug!("{}: stale cache key", path.display());
            None
        }
        Err(e) => {
            if path.exists() {
                log::warn!("ignoring unreadable cache: {e}");
            }
            None
        }
    }
}
