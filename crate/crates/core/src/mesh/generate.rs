//! Procedural test surfaces with known topology and geometry.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::{TriMesh, Vec3};

/// Unit icosphere: `10 * 4^subdivisions + 2` vertices, outward CCW faces.
pub fn icosphere(subdivisions: u32) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vec3::new(p[0], p[1], p[2]).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    TriMesh::new(vertices, faces).expect("icosphere is well formed")
}

/// Planar `nx × ny` vertex grid in z = 0 with a uniform diagonal direction.
pub fn grid(nx: usize, ny: usize, spacing: f64) -> TriMesh {
    let mut vertices = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            vertices.push(Vec3::new(i as f64 * spacing, j as f64 * spacing, 0.0));
        }
    }
    let id = |i: usize, j: usize| j * nx + i;
    let mut faces = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriMesh::new(vertices, faces).expect("grid is well formed")
}

/// Torus of genus one, `nu` samples around the main ring and `nv` around the tube.
pub fn torus(major: f64, minor: f64, nu: usize, nv: usize) -> TriMesh {
    let mut vertices = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = 2.0 * PI * i as f64 / nu as f64;
        for j in 0..nv {
            let v = 2.0 * PI * j as f64 / nv as f64;
            let r = major + minor * v.cos();
            vertices.push(Vec3::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let id = |i: usize, j: usize| (i % nu) * nv + (j % nv);
    let mut faces = Vec::new();
    for i in 0..nu {
        for j in 0..nv {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriMesh::new(vertices, faces).expect("torus is well formed")
}

/// Star-shaped, asymmetric closed surface: an icosphere whose radius is
/// modulated by a few smooth lobes of different widths and heights.
///
/// Used as a stand-in for articulated scans where the sphere's symmetry
/// would make intrinsic matching ill-posed.
pub fn blob(subdivisions: u32) -> TriMesh {
    let lobes: [([f64; 3], f64, f64); 5] = [
        ([0.0, 0.0, 1.0], 0.55, 0.35),
        ([0.9, 0.3, -0.2], 0.35, 0.25),
        ([-0.5, 0.8, 0.1], 0.25, 0.30),
        ([-0.3, -0.6, -0.7], 0.18, 0.45),
        ([0.2, -0.9, 0.4], -0.12, 0.30),
    ];
    let sphere = icosphere(subdivisions);
    let vertices = sphere
        .vertices()
        .iter()
        .map(|p| {
            let mut r = 1.0;
            for (dir, height, width) in &lobes {
                let d = Vec3::new(dir[0], dir[1], dir[2]).normalize();
                let angle = p.dot(&d).clamp(-1.0, 1.0).acos();
                r += height * (-(angle * angle) / (2.0 * width * width)).exp();
            }
            p * r
        })
        .collect();
    sphere.with_vertices(vertices).expect("same vertex count")
}

/// Convex, asymmetric closed surface: an icosphere pushed through a smooth
/// low-order radial profile and stretched along three distinct axes. Gaussian
/// curvature stays positive everywhere and no reflection symmetry survives.
pub fn pebble(subdivisions: u32) -> TriMesh {
    pebble_with(subdivisions, 1.0)
}

/// [`pebble`] with every deviation from the unit sphere scaled by `amplitude`;
/// 0 gives the icosphere itself.
pub fn pebble_with(subdivisions: u32, amplitude: f64) -> TriMesh {
    let d1 = Vec3::new(0.3, 0.5, 0.81).normalize();
    let d2 = Vec3::new(0.9, -0.2, 0.38).normalize();
    let d3 = Vec3::new(-0.4, 0.85, -0.35).normalize();
    let sphere = icosphere(subdivisions);
    let vertices = sphere
        .vertices()
        .iter()
        .map(|p| {
            let r = 1.0 + amplitude * (0.12 * p.dot(&d1) + 0.1 * p.dot(&d2).powi(2) + 0.04 * p.dot(&d3).powi(3));
            let q = p * r;
            Vec3::new((1.0 + 0.3 * amplitude) * q.x, q.y, (1.0 - 0.25 * amplitude) * q.z)
        })
        .collect();
    sphere.with_vertices(vertices).expect("same vertex count")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts_and_euler() {
        for s in 0..=4 {
            let m = icosphere(s);
            let f = 20 * 4usize.pow(s);
            assert_eq!(m.num_faces(), f);
            assert_eq!(m.num_vertices(), 10 * 4usize.pow(s) + 2);
            assert_eq!(m.euler_characteristic(), 2);
            assert!(m.validate().is_valid());
            assert_eq!(m.num_boundary_edges(), 0);
        }
        let m = icosphere(4);
        assert_eq!((m.num_vertices(), m.num_faces(), m.num_edges()), (2562, 5120, 7680));
    }

    #[test]
    fn pebble_is_convex() {
        let m = pebble(3);
        assert!(m.validate().is_valid());
        // every vertex angle sum stays below 2π, so all angle defects are positive
        for v in 0..m.num_vertices() {
            let sum: f64 = m
                .vertex_faces(v)
                .iter()
                .map(|&f| {
                    let c = m.faces()[f].iter().position(|&u| u == v).unwrap();
                    m.corner_angle(f, c)
                })
                .sum();
            assert!(sum < 2.0 * PI, "vertex {v}");
        }
    }

    #[test]
    fn icosphere_area_close_to_4pi() {
        let a = icosphere(4).total_area();
        assert!((a - 4.0 * PI).abs() / (4.0 * PI) < 0.01, "area {a}");
    }

    #[test]
    fn torus_has_genus_one() {
        let m = torus(2.0, 0.7, 24, 12);
        assert_eq!(m.euler_characteristic(), 0);
        assert!(m.validate().is_valid());
    }

    #[test]
    fn grid_and_blob_are_valid() {
        let g = grid(5, 4, 0.5);
        let r = g.validate();
        assert!(r.is_valid());
        assert_eq!(g.euler_characteristic(), 1);
        assert!(blob(3).validate().is_valid());
    }
}
