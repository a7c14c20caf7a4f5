//! Envelope (skyline) Cholesky factorization under a reverse Cuthill–McKee
//! ordering. Fill is confined to the profile of the reordered matrix, which
//! stays narrow for surface meshes.

use std::collections::VecDeque;

use super::CsrMatrix;
use crate::error::{Error, Result};

/// Reverse Cuthill–McKee ordering of the symmetric pattern of `a`.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
        .collect();
    let degree: Vec<usize> = adj.iter().map(|r| r.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    // BFS levels from `root` restricted to unvisited vertices.
    let levels = |root: usize, visited: &[bool]| -> Vec<Vec<usize>> {
        let mut seen = visited.to_vec();
        seen[root] = true;
        let mut out = vec![vec![root]];
        loop {
            let mut next = Vec::new();
            for &u in out.last().unwrap() {
                for &w in &adj[u] {
                    if !seen[w] {
                        seen[w] = true;
                        next.push(w);
                    }
                }
            }
            if next.is_empty() {
                break out;
            }
            out.push(next);
        }
    };

    while order.len() < n {
        let start = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
            .unwrap();
        // pseudo-peripheral root (George–Liu)
        let mut root = start;
        let mut ls = levels(root, &visited);
        loop {
            let candidate = *ls
                .last()
                .unwrap()
                .iter()
                .min_by_key(|&&i| (degree[i], i))
                .unwrap();
            let cand_ls = levels(candidate, &visited);
            if cand_ls.len() > ls.len() {
                root = candidate;
                ls = cand_ls;
            } else {
                break;
            }
        }

        let mut queue = VecDeque::from([root]);
        visited[root] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nbrs: Vec<usize> = adj[u].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| (degree[w], w));
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// `P A Pᵀ = L Lᵀ` with `L` stored row-wise over its envelope.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    /// Factors a symmetric positive definite matrix. Only the lower triangle
    /// (in the permuted order) is read.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for (j, _) in a.row(old) {
                first[new] = first[new].min(inv[j]);
            }
        }
        let mut offset = vec![0usize; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; offset[n]];
        for (new, &old) in perm.iter().enumerate() {
            for (j, v) in a.row(old) {
                let c = inv[j];
                if c <= new {
                    data[offset[new] + c - first[new]] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let start = fi.max(fj);
                let (head, tail) = data.split_at_mut(offset[i]);
                let row_i = &mut tail[..i - fi + 1];
                let row_j = &head[offset[j]..offset[j + 1]];
                let mut s = row_i[j - fi];
                for p in start..j {
                    s -= row_i[p - fi] * row_j[p - fj];
                }
                row_i[j - fi] = s / row_j[j - fj];
            }
            let row_i = &mut data[offset[i]..offset[i + 1]];
            let last = i - fi;
            let d = row_i[last] - row_i[..last].iter().map(|x| x * x).sum::<f64>();
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    pivot: perm[i],
                    value: d,
                });
            }
            row_i[last] = d.sqrt();
        }
        Ok(Self {
            perm,
            first,
            offset,
            data,
        })
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    /// Stored entries of the factor.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            let s: f64 = row[..i - fi].iter().zip(&y[fi..i]).map(|(l, v)| l * v).sum();
            y[i] = (y[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            y[i] /= row[i - fi];
            let xi = y[i];
            for (p, l) in row[..i - fi].iter().enumerate() {
                y[fi + p] -= l * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}
