//! Triangle meshes: connectivity, validation and basic geometry.
//!
//! A [`TriMesh`] is immutable once built. Construction checks only the
//! per-face invariants (indices in range, no repeated vertex); the edge-level
//! invariants are reported by [`TriMesh::validate`] so that broken input can be
//! diagnosed instead of rejected outright.

mod deform;
pub mod generate;
pub mod io;
mod paths;

use std::collections::VecDeque;
use std::fmt;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub use deform::{local_scale_deform, local_scale_deform_with_plateau, DEFAULT_PLATEAU};
pub use io::{load_mesh, off_string, read_mesh, write_off, MeshFormat};
pub use paths::edge_graph_distances;

pub type Vec3 = Vector3<f64>;

/// An undirected edge with the faces that contain it.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Endpoints, `v[0] < v[1]`.
    pub v: [usize; 2],
    /// `(face, vertex opposite the edge in that face)` for every incident face.
    pub faces: Vec<(usize, usize)>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.faces.len() == 1
    }
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    neighbors: Vec<Vec<usize>>,
    vertex_faces: Vec<Vec<usize>>,
}

impl PartialEq for TriMesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.faces == other.faces
    }
}

impl TriMesh {
    /// Builds a mesh and its derived adjacency.
    ///
    /// Fails with [`Error::InvalidMesh`] if a face references a missing vertex
    /// or repeats a vertex.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&v| v >= n) {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references vertex {bad}, mesh has {n} vertices"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} repeats a vertex: {f:?}"
                )));
            }
        }
        if let Some(v) = vertices.iter().find(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidMesh(format!("non-finite vertex {v:?}")));
        }

        // Sort (min, max, face, opposite) tuples so edge numbering is deterministic.
        let mut half: Vec<(usize, usize, usize, usize)> = Vec::with_capacity(faces.len() * 3);
        for (fi, f) in faces.iter().enumerate() {
            for c in 0..3 {
                let (a, b, o) = (f[c], f[(c + 1) % 3], f[(c + 2) % 3]);
                half.push((a.min(b), a.max(b), fi, o));
            }
        }
        half.sort_unstable();

        let mut edges: Vec<Edge> = Vec::new();
        for (a, b, fi, o) in half {
            match edges.last_mut() {
                Some(e) if e.v == [a, b] => e.faces.push((fi, o)),
                _ => edges.push(Edge {
                    v: [a, b],
                    faces: vec![(fi, o)],
                }),
            }
        }

        let mut neighbors = vec![Vec::new(); n];
        for e in &edges {
            neighbors[e.v[0]].push(e.v[1]);
            neighbors[e.v[1]].push(e.v[0]);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        let mut vertex_faces = vec![Vec::new(); n];
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                vertex_faces[v].push(fi);
            }
        }

        Ok(Self {
            vertices,
            faces,
            edges,
            neighbors,
            vertex_faces,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &Vec3 {
        &self.vertices[i]
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Sorted one-ring neighborhood N(i).
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn vertex_faces(&self, i: usize) -> &[usize] {
        &self.vertex_faces[i]
    }

    /// Same connectivity, new positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::DimensionMismatch {
                expected: self.vertices.len(),
                got: vertices.len(),
            });
        }
        Ok(Self {
            vertices,
            faces: self.faces.clone(),
            edges: self.edges.clone(),
            neighbors: self.neighbors.clone(),
            vertex_faces: self.vertex_faces.clone(),
        })
    }

    /// Uniformly scaled copy (about the origin).
    pub fn scaled(&self, s: f64) -> Self {
        let vertices = self.vertices.iter().map(|v| v * s).collect();
        self.with_vertices(vertices).expect("same vertex count")
    }

    /// Relabels vertices: vertex `i` of the result is vertex `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_vertices();
        if perm.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: perm.len(),
            });
        }
        let mut inverse = vec![usize::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            if old >= n || inverse[old] != usize::MAX {
                return Err(Error::InvalidParameter("not a permutation".into()));
            }
            inverse[old] = new;
        }
        let vertices = perm.iter().map(|&old| self.vertices[old]).collect();
        let faces = self
            .faces
            .iter()
            .map(|f| [inverse[f[0]], inverse[f[1]], inverse[f[2]]])
            .collect();
        Self::new(vertices, faces)
    }

    pub fn bounding_box_diagonal(&self) -> f64 {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        if self.vertices.is_empty() {
            0.0
        } else {
            (hi - lo).norm()
        }
    }

    /// Scale-relative degeneracy threshold: `1e-12 * diag^2`.
    pub fn area_epsilon(&self) -> f64 {
        let d = self.bounding_box_diagonal();
        1e-12 * d * d
    }

    pub fn face_positions(&self, f: usize) -> [&Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [&self.vertices[a], &self.vertices[b], &self.vertices[c]]
    }

    /// Unnormalized face normal (twice the area vector).
    pub fn face_cross(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.face_positions(f);
        (b - a).cross(&(c - a))
    }

    /// Per-face areas without the degeneracy check.
    pub fn raw_areas(&self) -> Vec<f64> {
        (0..self.num_faces())
            .map(|f| 0.5 * self.face_cross(f).norm())
            .collect()
    }

    /// Euclidean area |t| of every face.
    pub fn triangle_areas(&self) -> Result<Vec<f64>> {
        let eps = self.area_epsilon();
        let areas = self.raw_areas();
        if let Some((face, &area)) = areas.iter().enumerate().find(|(_, &a)| a <= eps) {
            return Err(Error::DegenerateFace {
                face,
                area,
                epsilon: eps,
            });
        }
        Ok(areas)
    }

    pub fn total_area(&self) -> f64 {
        self.raw_areas().iter().sum()
    }

    /// Interior angle of face `f` at its local corner `c`.
    pub fn corner_angle(&self, f: usize, c: usize) -> f64 {
        let face = self.faces[f];
        let p = &self.vertices[face[c]];
        let u = self.vertices[face[(c + 1) % 3]] - p;
        let w = self.vertices[face[(c + 2) % 3]] - p;
        u.cross(&w).norm().atan2(u.dot(&w))
    }

    /// Cotangent of the angle at `opposite` in face `f`.
    pub fn cot_at(&self, f: usize, opposite: usize) -> f64 {
        let face = self.faces[f];
        let c = face.iter().position(|&v| v == opposite).expect("vertex in face");
        let p = &self.vertices[face[c]];
        let u = self.vertices[face[(c + 1) % 3]] - p;
        let w = self.vertices[face[(c + 2) % 3]] - p;
        u.dot(&w) / u.cross(&w).norm()
    }

    /// Angles opposite to an edge, one per incident face (α_ij, β_ij).
    pub fn opposite_angles(&self, e: &Edge) -> Vec<f64> {
        e.faces
            .iter()
            .map(|&(f, o)| {
                let c = self.faces[f].iter().position(|&v| v == o).unwrap();
                self.corner_angle(f, c)
            })
            .collect()
    }

    pub fn edge_length(&self, a: usize, b: usize) -> f64 {
        (self.vertices[a] - self.vertices[b]).norm()
    }

    /// Area-weighted vertex normals (unit length where defined).
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let mut normals = vec![Vec3::zeros(); self.num_vertices()];
        for (f, face) in self.faces.iter().enumerate() {
            let n = self.face_cross(f);
            for &v in face {
                normals[v] += n;
            }
        }
        for n in &mut normals {
            let len = n.norm();
            if len > 0.0 {
                *n /= len;
            }
        }
        normals
    }

    /// Per-vertex flag: lies on at least one boundary edge.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut on = vec![false; self.num_vertices()];
        for e in self.edges.iter().filter(|e| e.is_boundary()) {
            on[e.v[0]] = true;
            on[e.v[1]] = true;
        }
        on
    }

    pub fn num_boundary_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.is_boundary()).count()
    }

    /// V - E + F.
    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_faces() as i64
    }

    /// Connected-component label per vertex and the number of components.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let n = self.num_vertices();
        let mut label = vec![usize::MAX; n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            queue.push_back(start);
            while let Some(v) = queue.pop_front() {
                for &w in &self.neighbors[v] {
                    if label[w] == usize::MAX {
                        label[w] = count;
                        queue.push_back(w);
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }

    /// Vertices within `rings` edge hops of `v`, excluding `v`, in BFS order.
    pub fn k_ring(&self, v: usize, rings: usize) -> Vec<usize> {
        let mut seen = vec![v];
        let mut frontier = vec![v];
        let mut out = Vec::new();
        for _ in 0..rings {
            let mut next = Vec::new();
            for &u in &frontier {
                for &w in &self.neighbors[u] {
                    if !seen.contains(&w) {
                        seen.push(w);
                        next.push(w);
                        out.push(w);
                    }
                }
            }
            frontier = next;
        }
        out
    }

    /// Checks every edge-level invariant and reports all violations.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport {
            num_vertices: self.num_vertices(),
            num_faces: self.num_faces(),
            num_boundary_edges: 0,
            non_manifold_edges: Vec::new(),
            degenerate_faces: Vec::new(),
            inconsistent_orientation: Vec::new(),
        };
        for e in &self.edges {
            match e.faces.len() {
                1 => report.num_boundary_edges += 1,
                2 => {
                    let dir = |f: usize| -> bool {
                        let face = self.faces[f];
                        (0..3).any(|c| face[c] == e.v[0] && face[(c + 1) % 3] == e.v[1])
                    };
                    if dir(e.faces[0].0) == dir(e.faces[1].0) {
                        report.inconsistent_orientation.push(e.v);
                    }
                }
                _ => report.non_manifold_edges.push(e.v),
            }
        }
        let eps = self.area_epsilon();
        report.degenerate_faces = self
            .raw_areas()
            .iter()
            .enumerate()
            .filter(|(_, &a)| a <= eps)
            .map(|(f, _)| f)
            .collect();
        report
    }
}

/// Result of [`TriMesh::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub num_vertices: usize,
    pub num_faces: usize,
    pub num_boundary_edges: usize,
    pub non_manifold_edges: Vec<[usize; 2]>,
    pub degenerate_faces: Vec<usize>,
    pub inconsistent_orientation: Vec<[usize; 2]>,
}

impl ValidationReport {
    pub fn num_violations(&self) -> usize {
        self.non_manifold_edges.len()
            + self.degenerate_faces.len()
            + self.inconsistent_orientation.len()
    }

    pub fn is_valid(&self) -> bool {
        self.num_violations() == 0
    }

    /// `Ok(())` for an accepted mesh, otherwise an [`Error::InvalidMesh`] summary.
    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidMesh(self.to_string()))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} vertices, {} faces, {} boundary edges; {} non-manifold edges, {} degenerate faces, {} orientation conflicts",
            self.num_vertices,
            self.num_faces,
            self.num_boundary_edges,
            self.non_manifold_edges.len(),
            self.degenerate_faces.len(),
            self.inconsistent_orientation.len()
        )
    }
}
