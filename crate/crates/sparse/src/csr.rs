//! Compressed sparse row storage.

use std::io::{self, Write};
use std::ops::{Add, Mul};

use crate::error::{LinalgError, Result};

/// Square sparse matrix in compressed row form.
///
/// Column indices are strictly increasing within each row. Explicit zeros
/// are allowed and are kept as structural entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from raw CSR arrays, validating the structure.
    pub fn from_raw(
        n: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != n + 1 {
            return Err(LinalgError::InvalidStructure(format!(
                "row_ptr has length {}, expected {}",
                row_ptr.len(),
                n + 1
            )));
        }
        if col_idx.len() != values.len() || row_ptr[n] != col_idx.len() || row_ptr[0] != 0 {
            return Err(LinalgError::InvalidStructure(
                "row_ptr, col_idx and values disagree on nnz".into(),
            ));
        }
        for i in 0..n {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(LinalgError::InvalidStructure(format!(
                    "row_ptr decreases at row {i}"
                )));
            }
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if cols.iter().any(|&c| c >= n) {
                return Err(LinalgError::InvalidStructure(format!(
                    "column index out of range in row {i}"
                )));
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(LinalgError::InvalidStructure(format!(
                    "column indices not strictly increasing in row {i}"
                )));
            }
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Assembles from (row, col, value) triplets. Duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; n + 1];
        for &(r, c, _) in triplets {
            if r >= n || c >= n {
                return Err(LinalgError::InvalidStructure(format!(
                    "triplet ({r}, {c}) outside {n}x{n}"
                )));
            }
            counts[r + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let slot = next[r];
            cols[slot] = c;
            vals[slot] = v;
            next[r] += 1;
        }

        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for i in 0..n {
            scratch.clear();
            scratch.extend(
                cols[counts[i]..counts[i + 1]]
                    .iter()
                    .copied()
                    .zip(vals[counts[i]..counts[i + 1]].iter().copied()),
            );
            scratch.sort_by_key(|&(c, _)| c);
            for &(c, v) in &scratch {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Dense row-major input; zeros are dropped.
    pub fn from_dense(n: usize, dense: &[f64]) -> Result<Self> {
        if dense.len() != n * n {
            return Err(LinalgError::DimensionMismatch {
                expected: n * n,
                found: dense.len(),
            });
        }
        let mut trip = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = dense[i * n + j];
                if v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n, &trip)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    /// Entry lookup; structural zeros and absent entries both read as 0.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    /// `y = A x` for any scalar type that can be scaled by a real.
    pub fn mul_vec_into<T>(&self, x: &[T], y: &mut [T])
    where
        T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
    {
        assert_eq!(x.len(), self.n, "matvec: x has wrong length");
        assert_eq!(y.len(), self.n, "matvec: y has wrong length");
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = T::default();
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc = acc + x[self.col_idx[p]] * self.values[p];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut counts = vec![0usize; n + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = self.col_idx[p];
                let slot = next[c];
                col_idx[slot] = i;
                values[slot] = self.values[p];
                next[c] += 1;
            }
        }
        Self {
            n,
            row_ptr: counts,
            col_idx,
            values,
        }
    }

    /// Exact entrywise symmetry on the union of both sparsity patterns.
    pub fn is_symmetric(&self) -> bool {
        let t = self.transpose();
        for i in 0..self.n {
            let (ca, va) = self.row(i);
            let (cb, vb) = t.row(i);
            let (mut a, mut b) = (0, 0);
            while a < ca.len() || b < cb.len() {
                let (x, y) = match (ca.get(a), cb.get(b)) {
                    (Some(&ja), Some(&jb)) if ja == jb => {
                        a += 1;
                        b += 1;
                        (va[a - 1], vb[b - 1])
                    }
                    (Some(&ja), Some(&jb)) if ja < jb => {
                        a += 1;
                        (va[a - 1], 0.0)
                    }
                    (Some(_), None) => {
                        a += 1;
                        (va[a - 1], 0.0)
                    }
                    _ => {
                        b += 1;
                        (0.0, vb[b - 1])
                    }
                };
                if x != y {
                    return false;
                }
            }
        }
        true
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Position of the diagonal entry in each row, if stored.
    pub fn diagonal_positions(&self) -> Vec<Option<usize>> {
        (0..self.n)
            .map(|i| {
                let (cols, _) = self.row(i);
                cols.binary_search(&i).ok().map(|p| self.row_ptr[i] + p)
            })
            .collect()
    }

    /// `alpha * I + beta * A`. The diagonal is added to the pattern if absent.
    pub fn shifted(&self, alpha: f64, beta: f64) -> Self {
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        let mut col_idx = Vec::with_capacity(self.nnz() + self.n);
        let mut values = Vec::with_capacity(self.nnz() + self.n);
        row_ptr.push(0);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut placed = false;
            for (&c, &v) in cols.iter().zip(vals) {
                if !placed && c > i {
                    col_idx.push(i);
                    values.push(alpha);
                    placed = true;
                }
                if c == i {
                    col_idx.push(i);
                    values.push(alpha + beta * v);
                    placed = true;
                } else {
                    col_idx.push(c);
                    values.push(beta * v);
                }
            }
            if !placed {
                col_idx.push(i);
                values.push(alpha);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n: self.n,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Symmetrized adjacency (pattern of `A + A^T` without the diagonal).
    pub fn symmetric_graph(&self) -> Graph {
        let t = self.transpose();
        let mut adj_ptr = Vec::with_capacity(self.n + 1);
        let mut adj = Vec::with_capacity(2 * self.nnz());
        adj_ptr.push(0);
        for i in 0..self.n {
            let (a, _) = self.row(i);
            let (b, _) = t.row(i);
            let (mut x, mut y) = (0, 0);
            while x < a.len() || y < b.len() {
                let next = match (a.get(x), b.get(y)) {
                    (Some(&ca), Some(&cb)) if ca == cb => {
                        x += 1;
                        y += 1;
                        ca
                    }
                    (Some(&ca), Some(&cb)) if ca < cb => {
                        x += 1;
                        ca
                    }
                    (Some(&ca), None) => {
                        x += 1;
                        ca
                    }
                    (_, Some(&cb)) => {
                        y += 1;
                        cb
                    }
                    (None, None) => unreachable!(),
                };
                if next != i {
                    adj.push(next);
                }
            }
            adj_ptr.push(adj.len());
        }
        Graph { adj_ptr, adj }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                d[i * self.n + c] = v;
            }
        }
        d
    }

    /// Matrix Market coordinate dump (1-based indices, general real).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n, self.n, self.nnz())?;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                writeln!(w, "{} {} {:.17e}", i + 1, c + 1, v)?;
            }
        }
        Ok(())
    }
}

/// Undirected adjacency lists without self loops.
#[derive(Debug, Clone)]
pub struct Graph {
    adj_ptr: Vec<usize>,
    adj: Vec<usize>,
}

impl Graph {
    pub fn len(&self) -> usize {
        self.adj_ptr.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[self.adj_ptr[v]..self.adj_ptr[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj_ptr[v + 1] - self.adj_ptr[v]
    }
}
