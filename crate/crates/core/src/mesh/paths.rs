use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::TriMesh;

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    vertex: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, ties by vertex index
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest paths on the edge graph with Euclidean edge
/// lengths. Unreachable vertices get `f64::INFINITY`.
pub fn edge_graph_distances(mesh: &TriMesh, source: usize) -> Vec<f64> {
    let n = mesh.num_vertices();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Entry {
        dist: 0.0,
        vertex: source,
    });
    while let Some(Entry { dist: d, vertex: u }) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &w in mesh.neighbors(u) {
            let nd = d + mesh.edge_length(u, w);
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Entry { dist: nd, vertex: w });
            }
        }
    }
    dist
}
