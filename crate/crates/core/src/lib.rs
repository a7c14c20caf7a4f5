//! Multispectral scale-invariant functional maps.
//!
//! For each triangle mesh, a family of Laplace–Beltrami bases is built under
//! metrics that interpolate between the Euclidean one (`alpha = 0`) and the
//! curvature-weighted, locally scale-invariant one (`alpha = 1`). Functional
//! maps are estimated in every such spectral domain, refined jointly under
//! structural penalties, and the resulting per-domain nearest-neighbour matches
//! are fused into one dense correspondence.

mod binio;
pub mod config;
pub mod curvature;
pub mod descriptors;
pub mod error;
pub mod eval;
pub mod fmap;
pub mod fusion;
pub mod linalg;
pub mod mesh;
pub mod pipeline;
pub mod selftest;
pub mod spectral;

pub use error::{Error, ErrorClass, Result};
