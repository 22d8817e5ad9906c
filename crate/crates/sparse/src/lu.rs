//! Sparse LU with threshold partial pivoting.
//!
//! [`SparseLu`] factors through the supernodal code in `multifrontal` and
//! keeps a left-looking (Gilbert-Peierls) factorization as fallback.
//! In the left-looking code columns are eliminated in a fill-reducing order. For each column the
//! nonzero pattern of `L \ a_j` is found by a depth-first search over the
//! columns of `L` computed so far, so the work is proportional to the
//! floating-point operations performed. Within a column the diagonal entry
//! is kept as pivot whenever its magnitude is at least `pivot_threshold`
//! times the largest candidate.

use std::sync::Arc;

use crate::csr::CsrMatrix;
use crate::error::{LinalgError, Result};
use crate::multifrontal::{FrontFailure, LuSymbolic, SupernodalLu};
use crate::ordering::{is_permutation, ColumnOrdering};

#[derive(Debug, Clone, PartialEq)]
pub struct LuOptions {
    pub ordering: ColumnOrdering,
    pub pivot_threshold: f64,
}

impl Default for LuOptions {
    fn default() -> Self {
        Self {
            ordering: ColumnOrdering::NestedDissection,
            pivot_threshold: 0.1,
        }
    }
}

/// Column-compressed triangular factor.
#[derive(Debug, Clone)]
struct Csc {
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Left-looking factorization `P A Q = L U`.
///
/// `L` is unit lower triangular with its unit diagonal stored first in
/// each column; `U` stores its diagonal last in each column.
#[derive(Debug, Clone)]
pub struct LeftLookingLu {
    n: usize,
    l: Csc,
    u: Csc,
    /// `row_perm[i]` is the pivot step at which original row i was chosen.
    row_perm: Vec<usize>,
    /// `col_order[k]` is the original column eliminated at step k.
    col_order: Vec<usize>,
}

impl LeftLookingLu {
    pub fn factor(a: &CsrMatrix, opts: &LuOptions) -> Result<Self> {
        Self::factor_ordered(a, opts.ordering.compute(a), opts.pivot_threshold)
    }

    pub fn factor_ordered(a: &CsrMatrix, col_order: Vec<usize>, threshold: f64) -> Result<Self> {
        let n = a.dim();
        if !is_permutation(&col_order, n) {
            return Err(LinalgError::InvalidStructure(
                "column ordering is not a permutation".into(),
            ));
        }
        let tol = threshold.clamp(0.0, 1.0);
        // Column access to A.
        let at = a.transpose();
        let (a_ptr, a_idx, a_val) = (at.row_ptr(), at.col_idx(), at.values());

        let est = 4 * a.nnz() + n;
        let mut l = Csc {
            col_ptr: Vec::with_capacity(n + 1),
            row_idx: Vec::with_capacity(est),
            values: Vec::with_capacity(est),
        };
        let mut u = Csc {
            col_ptr: Vec::with_capacity(n + 1),
            row_idx: Vec::with_capacity(est),
            values: Vec::with_capacity(est),
        };
        const UNSET: usize = usize::MAX;
        let mut pinv = vec![UNSET; n];
        let mut x = vec![0.0; n];
        let mut mark = vec![0usize; n];
        let mut stamp = 0usize;
        // Topological order of the reach, filled from the back.
        let mut reach = vec![0usize; n];
        let mut stack: Vec<(usize, usize)> = Vec::with_capacity(n);

        for k in 0..n {
            l.col_ptr.push(l.row_idx.len());
            u.col_ptr.push(u.row_idx.len());
            let col = col_order[k];
            stamp += 1;

            // Symbolic: reach of A(:, col) in the graph of L.
            let mut top = n;
            for p in a_ptr[col]..a_ptr[col + 1] {
                let start = a_idx[p];
                if mark[start] == stamp {
                    continue;
                }
                mark[start] = stamp;
                stack.push((start, 0));
                while let Some(&(j, next)) = stack.last() {
                    let jcol = pinv[j];
                    let mut child = None;
                    if jcol != UNSET {
                        // Skip the unit diagonal stored first.
                        let lo = l.col_ptr[jcol] + 1;
                        let hi = l.col_ptr[jcol + 1];
                        let mut q = lo + next;
                        while q < hi {
                            let i = l.row_idx[q];
                            q += 1;
                            if mark[i] != stamp {
                                child = Some(i);
                                break;
                            }
                        }
                        stack.last_mut().unwrap().1 = q - lo;
                    }
                    match child {
                        Some(i) => {
                            mark[i] = stamp;
                            stack.push((i, 0));
                        }
                        None => {
                            stack.pop();
                            top -= 1;
                            reach[top] = j;
                        }
                    }
                }
            }

            // Numeric: x = L \ A(:, col).
            for &i in &reach[top..n] {
                x[i] = 0.0;
            }
            for p in a_ptr[col]..a_ptr[col + 1] {
                x[a_idx[p]] = a_val[p];
            }
            for &j in &reach[top..n] {
                let jcol = pinv[j];
                if jcol == UNSET {
                    continue;
                }
                let xj = x[j];
                if xj == 0.0 {
                    continue;
                }
                let lo = l.col_ptr[jcol] + 1;
                let hi = l.col_ptr[jcol + 1];
                for p in lo..hi {
                    x[l.row_idx[p]] -= l.values[p] * xj;
                }
            }

            // Pivot search among rows not yet pivotal.
            let mut ipiv = UNSET;
            let mut amax = -1.0f64;
            for &i in &reach[top..n] {
                if pinv[i] == UNSET {
                    let v = x[i].abs();
                    if v > amax {
                        amax = v;
                        ipiv = i;
                    }
                } else {
                    u.row_idx.push(pinv[i]);
                    u.values.push(x[i]);
                }
            }
            if ipiv == UNSET || amax <= 0.0 || !amax.is_finite() {
                return Err(LinalgError::SingularPivot { column: col });
            }
            if pinv[col] == UNSET && mark[col] == stamp && x[col].abs() >= tol * amax {
                ipiv = col;
            }
            let pivot = x[ipiv];
            u.row_idx.push(k);
            u.values.push(pivot);
            pinv[ipiv] = k;
            l.row_idx.push(ipiv);
            l.values.push(1.0);
            for &i in &reach[top..n] {
                if pinv[i] == UNSET {
                    l.row_idx.push(i);
                    l.values.push(x[i] / pivot);
                }
                x[i] = 0.0;
            }
        }
        l.col_ptr.push(l.row_idx.len());
        u.col_ptr.push(u.row_idx.len());
        // Renumber L's rows into pivot order.
        for r in l.row_idx.iter_mut() {
            *r = pinv[*r];
        }
        Ok(Self {
            n,
            l,
            u,
            row_perm: pinv,
            col_order,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries in `L` and `U`, counting both unit and pivot diagonals.
    pub fn factor_nnz(&self) -> usize {
        self.l.row_idx.len() + self.u.row_idx.len()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        check_len(self.n, b.len())?;
        let mut y = vec![0.0; self.n];
        for (i, &bi) in b.iter().enumerate() {
            y[self.row_perm[i]] = bi;
        }
        // L y = y, unit diagonal first in each column.
        for j in 0..self.n {
            let yj = y[j];
            if yj != 0.0 {
                for p in self.l.col_ptr[j] + 1..self.l.col_ptr[j + 1] {
                    y[self.l.row_idx[p]] -= self.l.values[p] * yj;
                }
            }
        }
        // U y = y, diagonal last in each column.
        for j in (0..self.n).rev() {
            let last = self.u.col_ptr[j + 1] - 1;
            y[j] /= self.u.values[last];
            let yj = y[j];
            if yj != 0.0 {
                for p in self.u.col_ptr[j]..last {
                    y[self.u.row_idx[p]] -= self.u.values[p] * yj;
                }
            }
        }
        for (k, &c) in self.col_order.iter().enumerate() {
            b[c] = y[k];
        }
        Ok(())
    }
}

fn check_len(n: usize, found: usize) -> Result<()> {
    if found != n {
        return Err(LinalgError::DimensionMismatch { expected: n, found });
    }
    Ok(())
}

#[derive(Debug, Clone)]
enum Factors {
    Supernodal(SupernodalLu),
    LeftLooking(LeftLookingLu),
}

/// Sparse LU factorization, immutable once built and safe to share across
/// threads.
///
/// The supernodal multifrontal path is tried first. If some front has no
/// acceptable pivot among its fully summed rows, the matrix is refactored
/// left-looking in the same column order, where any remaining row can
/// serve as pivot.
#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    factors: Factors,
}

impl SparseLu {
    /// Pattern analysis that can be reused with [`SparseLu::factor_with`].
    pub fn analyze(a: &CsrMatrix, opts: &LuOptions) -> Result<Arc<LuSymbolic>> {
        LuSymbolic::analyze(a, &opts.ordering).map(Arc::new)
    }

    pub fn factor(a: &CsrMatrix, opts: &LuOptions) -> Result<Self> {
        let sym = Self::analyze(a, opts)?;
        Self::factor_with(a, &sym, opts.pivot_threshold)
    }

    /// Numeric factorization against an existing analysis of the same pattern.
    pub fn factor_with(a: &CsrMatrix, sym: &Arc<LuSymbolic>, pivot_threshold: f64) -> Result<Self> {
        let tol = pivot_threshold.clamp(0.0, 1.0);
        let factors = match SupernodalLu::factor(a, sym, tol) {
            Ok(f) => Factors::Supernodal(f),
            Err(FrontFailure::NeedsDelay(_)) => {
                Factors::LeftLooking(LeftLookingLu::factor_ordered(a, sym.order().to_vec(), tol)?)
            }
            Err(FrontFailure::Error(e)) => return Err(e),
        };
        Ok(Self {
            n: a.dim(),
            factors,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// True when the supernodal path produced this factorization.
    pub fn is_supernodal(&self) -> bool {
        matches!(self.factors, Factors::Supernodal(_))
    }

    /// Stored entries of both factors, explicit zeros included.
    pub fn factor_nnz(&self) -> usize {
        match &self.factors {
            Factors::Supernodal(f) => f.factor_nnz(),
            Factors::LeftLooking(f) => f.factor_nnz(),
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        check_len(self.n, b.len())?;
        match &self.factors {
            Factors::Supernodal(f) => {
                f.solve_in_place(b);
                Ok(())
            }
            Factors::LeftLooking(f) => f.solve_in_place(b),
        }
    }
}
