//! Restarted GMRES right-preconditioned with ILU(0).

use crate::csr::CsrMatrix;
use crate::error::{LinalgError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GmresOptions {
    pub restart: usize,
    pub max_iters: usize,
    /// Relative residual target `||b - A x|| <= tol ||b||`.
    pub tol: f64,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            restart: 50,
            max_iters: 2000,
            tol: 1e-12,
        }
    }
}

/// Incomplete LU with the sparsity pattern of `A`.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        // Every row needs a stored diagonal.
        let a = a.shifted(0.0, 1.0);
        let diag: Vec<usize> = a
            .diagonal_positions()
            .into_iter()
            .map(|p| p.expect("shifted matrix stores its diagonal"))
            .collect();
        let mut lu = a;
        let row_ptr = lu.row_ptr().to_vec();
        let col_idx = lu.col_idx().to_vec();
        let vals = lu.values_mut();
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            for p in row_ptr[i]..row_ptr[i + 1] {
                pos[col_idx[p]] = p;
            }
            for p in row_ptr[i]..diag[i] {
                let k = col_idx[p];
                let pivot = vals[diag[k]];
                if pivot == 0.0 {
                    return Err(LinalgError::SingularPivot { column: k });
                }
                vals[p] /= pivot;
                let lik = vals[p];
                for q in diag[k] + 1..row_ptr[k + 1] {
                    let target = pos[col_idx[q]];
                    if target != usize::MAX {
                        vals[target] -= lik * vals[q];
                    }
                }
            }
            if vals[diag[i]] == 0.0 {
                return Err(LinalgError::SingularPivot { column: i });
            }
            for p in row_ptr[i]..row_ptr[i + 1] {
                pos[col_idx[p]] = usize::MAX;
            }
        }
        Ok(Self { lu, diag })
    }

    pub fn apply(&self, x: &mut [f64]) {
        let n = self.lu.dim();
        let (rp, ci, v) = (self.lu.row_ptr(), self.lu.col_idx(), self.lu.values());
        for i in 0..n {
            let mut s = x[i];
            for p in rp[i]..self.diag[i] {
                s -= v[p] * x[ci[p]];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for p in self.diag[i] + 1..rp[i + 1] {
                s -= v[p] * x[ci[p]];
            }
            x[i] = s / v[self.diag[i]];
        }
    }
}

/// Iterative solver handle: the matrix plus its ILU(0) preconditioner.
#[derive(Debug, Clone)]
pub struct IluGmres {
    a: CsrMatrix,
    ilu: Ilu0,
    opts: GmresOptions,
}

impl IluGmres {
    pub fn new(a: &CsrMatrix, opts: GmresOptions) -> Result<Self> {
        Ok(Self {
            a: a.clone(),
            ilu: Ilu0::new(a)?,
            opts,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.a.dim();
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        let bnorm = norm(b);
        let mut x = vec![0.0; n];
        if bnorm == 0.0 {
            return Ok(x);
        }
        let m = self.opts.restart.max(1);
        let mut total = 0;
        let mut resid = bnorm;
        let mut v: Vec<Vec<f64>> = vec![vec![0.0; n]; m + 1];
        let mut z: Vec<Vec<f64>> = vec![vec![0.0; n]; m];
        let mut hmat = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        let mut w = vec![0.0; n];

        while total < self.opts.max_iters {
            // r = b - A x
            self.a.mul_vec_into(&x, &mut w);
            for i in 0..n {
                v[0][i] = b[i] - w[i];
            }
            let beta = norm(&v[0]);
            resid = beta;
            if beta <= self.opts.tol * bnorm {
                return Ok(x);
            }
            v[0].iter_mut().for_each(|e| *e /= beta);
            g.iter_mut().for_each(|e| *e = 0.0);
            g[0] = beta;
            let mut k_used = 0;
            for k in 0..m {
                z[k].copy_from_slice(&v[k]);
                self.ilu.apply(&mut z[k]);
                self.a.mul_vec_into(&z[k], &mut w);
                // Modified Gram-Schmidt.
                for j in 0..=k {
                    let h = dot(&w, &v[j]);
                    hmat[j][k] = h;
                    for i in 0..n {
                        w[i] -= h * v[j][i];
                    }
                }
                let hn = norm(&w);
                hmat[k + 1][k] = hn;
                if hn > 0.0 {
                    for i in 0..n {
                        v[k + 1][i] = w[i] / hn;
                    }
                }
                for j in 0..k {
                    let t = cs[j] * hmat[j][k] + sn[j] * hmat[j + 1][k];
                    hmat[j + 1][k] = -sn[j] * hmat[j][k] + cs[j] * hmat[j + 1][k];
                    hmat[j][k] = t;
                }
                let (a, bb) = (hmat[k][k], hmat[k + 1][k]);
                let r = a.hypot(bb);
                cs[k] = if r == 0.0 { 1.0 } else { a / r };
                sn[k] = if r == 0.0 { 0.0 } else { bb / r };
                hmat[k][k] = r;
                hmat[k + 1][k] = 0.0;
                g[k + 1] = -sn[k] * g[k];
                g[k] *= cs[k];
                total += 1;
                k_used = k + 1;
                resid = g[k + 1].abs();
                if resid <= self.opts.tol * bnorm || hn == 0.0 || total >= self.opts.max_iters {
                    break;
                }
            }
            // Back substitution for the Krylov coefficients.
            let mut y = vec![0.0; k_used];
            for i in (0..k_used).rev() {
                let mut s = g[i];
                for j in i + 1..k_used {
                    s -= hmat[i][j] * y[j];
                }
                y[i] = s / hmat[i][i];
            }
            for (j, yj) in y.iter().enumerate() {
                for i in 0..n {
                    x[i] += yj * z[j][i];
                }
            }
        }
        self.a.mul_vec_into(&x, &mut w);
        let true_resid = norm(&b.iter().zip(&w).map(|(p, q)| p - q).collect::<Vec<_>>());
        if true_resid <= self.opts.tol * bnorm {
            Ok(x)
        } else {
            Err(LinalgError::GmresNoConvergence {
                iterations: total,
                residual: resid.max(true_resid) / bnorm,
            })
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
