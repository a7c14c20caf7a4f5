use std::f64::consts::PI;

use super::{edge_graph_distances, TriMesh, Vec3};
use crate::error::{Error, Result};

/// Fraction of the radius over which [`local_scale_deform`] scales uniformly.
pub const DEFAULT_PLATEAU: f64 = 0.5;

/// Locally scales the patch within geodesic distance `radius` of `seed`,
/// with a uniformly scaled core of `DEFAULT_PLATEAU * radius`.
pub fn local_scale_deform(mesh: &TriMesh, seed: usize, radius: f64, factor: f64) -> Result<TriMesh> {
    local_scale_deform_with_plateau(mesh, seed, radius, factor, DEFAULT_PLATEAU)
}

/// Each vertex at distance `d < radius` moves to `v + w(d) (factor - 1) (v - c)`
/// where `c` is the centroid of the patch. `w = 1` up to `p = plateau * radius`,
/// then falls off as `(1 + cos(pi (d - p) / (radius - p))) / 2`. `w` is C¹ and
/// vanishes at the patch border, so the surface stays smooth and vertices
/// outside are untouched. `plateau = 0` gives a pure cosine bump.
/// Connectivity is unchanged: the ground-truth map to the input is the identity.
pub fn local_scale_deform_with_plateau(
    mesh: &TriMesh,
    seed: usize,
    radius: f64,
    factor: f64,
    plateau: f64,
) -> Result<TriMesh> {
    let n = mesh.num_vertices();
    if seed >= n {
        return Err(Error::SeedOutOfRange { seed, n });
    }
    if !(radius > 0.0) || !(factor > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "radius ({radius}) and factor ({factor}) must be positive"
        )));
    }
    if !(0.0..1.0).contains(&plateau) {
        return Err(Error::InvalidParameter(format!(
            "plateau fraction {plateau} outside [0, 1)"
        )));
    }
    if factor == 1.0 {
        return Ok(mesh.clone());
    }

    let dist = edge_graph_distances(mesh, seed);
    let inside: Vec<usize> = (0..n).filter(|&i| dist[i] < radius).collect();
    let centroid = inside
        .iter()
        .fold(Vec3::zeros(), |acc, &i| acc + mesh.vertex(i))
        / inside.len() as f64;

    let mut vertices = mesh.vertices().to_vec();
    for &i in &inside {
        let p = plateau * radius;
        let w = if dist[i] <= p {
            1.0
        } else {
            0.5 * (1.0 + (PI * (dist[i] - p) / (radius - p)).cos())
        };
        let v = vertices[i];
        vertices[i] = v + (v - centroid) * (w * (factor - 1.0));
    }
    mesh.with_vertices(vertices)
}
