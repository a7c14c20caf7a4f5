use nalgebra::DMatrix;

/// Compressed sparse row matrix (square).
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an `n × n` matrix, summing duplicate entries. Columns within a
    /// row are sorted.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col = Vec::with_capacity(triplets.len());
        let mut val: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "triplet ({r}, {c}) outside {n}x{n}");
            if last == Some((r, c)) {
                *val.last_mut().unwrap() += v;
            } else {
                col.push(c);
                val.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            col,
            val,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    /// `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col[r.clone()].iter().copied().zip(self.val[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col[r.clone()].binary_search(&j) {
            Ok(p) => self.val[r.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.val[p] * x[self.col[p]];
            }
            *yi = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `A X` for a dense `n × m` block.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, x.ncols());
        for c in 0..x.ncols() {
            let y = self.mul_vec(x.column(c).as_slice());
            out.column_mut(c).copy_from_slice(&y);
        }
        out
    }

    /// `xᵀ A y`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.mul_vec(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &CsrMatrix, s: f64) -> CsrMatrix {
        assert_eq!(self.n, other.n);
        let mut t = self.triplets();
        t.extend(other.triplets().into_iter().map(|(i, j, v)| (i, j, s * v)));
        CsrMatrix::from_triplets(self.n, t)
    }

    pub fn scaled(&self, s: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.val.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            t.extend(self.row(i).map(|(j, v)| (i, j, v)));
        }
        t
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[(i, j)] = v;
            }
        }
        d
    }
}
