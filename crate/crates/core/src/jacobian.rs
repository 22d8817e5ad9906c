//! Real-split Jacobians and the implicit-stage matrices built from them.

use mb4nls_sparse::CsrMatrix;

use crate::lattice::{GridModel, State};

/// Jacobian of `f` at `u0` in `(p; q)` form:
///
/// ```text
/// [ 0   A ]         [ diag(-2pq)       diag(-p^2-3q^2) ]
/// [ -A  0 ] + gamma [ diag(3p^2+q^2)   diag(2pq)       ]
/// ```
///
/// with `A = K + V`. Diagonal entries are stored even when zero so the
/// pattern never depends on `u0`.
pub fn assemble_jacobian(model: &GridModel, u0: &State) -> CsrMatrix {
    let n = model.dim();
    assert_eq!(u0.len(), n, "state has wrong length");
    let a = model.linear_part();
    let g = model.gamma();
    let nnz_a = a.nnz();
    let mut row_ptr = Vec::with_capacity(2 * n + 1);
    let mut col_idx = Vec::with_capacity(2 * nnz_a + 2 * n);
    let mut values = Vec::with_capacity(2 * nnz_a + 2 * n);
    row_ptr.push(0);
    let u = u0.as_slice();
    for k in 0..n {
        let (p, q) = (u[k].re, u[k].im);
        let (cols, vals) = a.row(k);
        col_idx.push(k);
        values.push(-2.0 * g * p * q);
        for (&j, &v) in cols.iter().zip(vals) {
            col_idx.push(n + j);
            values.push(if j == k { v - g * (p * p + 3.0 * q * q) } else { v });
        }
        row_ptr.push(col_idx.len());
    }
    for k in 0..n {
        let (p, q) = (u[k].re, u[k].im);
        let (cols, vals) = a.row(k);
        for (&j, &v) in cols.iter().zip(vals) {
            col_idx.push(j);
            values.push(if j == k { -v + g * (3.0 * p * p + q * q) } else { -v });
        }
        col_idx.push(n + k);
        values.push(2.0 * g * p * q);
        row_ptr.push(col_idx.len());
    }
    CsrMatrix::from_raw(2 * n, row_ptr, col_idx, values).expect("jacobian structure is valid")
}

/// `I - c J`.
pub fn identity_minus(j: &CsrMatrix, c: f64) -> CsrMatrix {
    j.shifted(1.0, -c)
}

/// `I - C (x) J` for a 2x2 coefficient matrix `C`. Unknown `s * dim(J) + r`
/// is entry r of stage s.
pub fn coupled_matrix(j: &CsrMatrix, c: [[f64; 2]; 2]) -> CsrMatrix {
    let m = j.dim();
    let nnz = j.nnz();
    let mut row_ptr = Vec::with_capacity(2 * m + 1);
    let mut col_idx = Vec::with_capacity(4 * nnz + 2 * m);
    let mut values = Vec::with_capacity(4 * nnz + 2 * m);
    row_ptr.push(0);
    for (s, cs) in c.iter().enumerate() {
        for r in 0..m {
            let (cols, vals) = j.row(r);
            for (t, &cst) in cs.iter().enumerate() {
                let mut has_diag = false;
                for (&col, &v) in cols.iter().zip(vals) {
                    let mut x = -cst * v;
                    if s == t && col == r {
                        x += 1.0;
                        has_diag = true;
                    }
                    col_idx.push(t * m + col);
                    values.push(x);
                }
                assert!(s != t || has_diag, "jacobian row {r} lacks its diagonal");
            }
            row_ptr.push(col_idx.len());
        }
    }
    CsrMatrix::from_raw(2 * m, row_ptr, col_idx, values).expect("coupled structure is valid")
}
