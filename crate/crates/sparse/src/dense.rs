//! Small dense matrices (dimension at most a handful) and a real 3x3 eigensolver.

use std::ops::{Index, IndexMut, Mul};

use crate::error::{LinalgError, Result};

/// Row-major dense matrix intended for tiny sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSmall {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseSmall {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self {
            rows: r,
            cols: c,
            data: rows.iter().flat_map(|row| row.iter().copied()).collect(),
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Columns `start..end` as a new matrix.
    pub fn columns(&self, start: usize, end: usize) -> Self {
        let mut m = Self::zeros(self.rows, end - start);
        for i in 0..self.rows {
            for j in start..end {
                m[(i, j - start)] = self[(i, j)];
            }
        }
        m
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Gauss-Jordan inverse with partial pivoting.
    pub fn inverse(&self) -> Result<Self> {
        if self.rows != self.cols {
            return Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[(i, k)].abs().total_cmp(&a[(j, k)].abs()))
                .unwrap();
            if a[(p, k)] == 0.0 {
                return Err(LinalgError::SingularPivot { column: k });
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(p * n + j, k * n + j);
                    inv.data.swap(p * n + j, k * n + j);
                }
            }
            let d = a[(k, k)];
            for j in 0..n {
                a[(k, j)] /= d;
                inv[(k, j)] /= d;
            }
            for i in 0..n {
                if i != k {
                    let f = a[(i, k)];
                    if f != 0.0 {
                        for j in 0..n {
                            a[(i, j)] -= f * a[(k, j)];
                            inv[(i, j)] -= f * inv[(k, j)];
                        }
                    }
                }
            }
        }
        Ok(inv)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

impl Index<(usize, usize)> for DenseSmall {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseSmall {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &DenseSmall {
    type Output = DenseSmall;
    fn mul(self, rhs: &DenseSmall) -> DenseSmall {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = DenseSmall::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

/// Real eigendecomposition `E = T diag(lambda) T^{-1}` of a 3x3 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigen3 {
    /// Ascending.
    pub values: [f64; 3],
    pub t: DenseSmall,
    pub t_inv: DenseSmall,
}

/// Relative separation required between eigenvalues.
const EIG_GAP: f64 = 1e-12;

/// Eigendecomposition of a 3x3 matrix with three distinct real eigenvalues.
///
/// Roots of the characteristic polynomial come from the trigonometric form
/// of the cubic and are polished by Newton steps; each eigenvector is the
/// largest cross product of two rows of `E - lambda I`, scaled to unit
/// infinity norm with a positive largest component.
pub fn eig3_real(e: &DenseSmall) -> Result<Eigen3> {
    if e.rows() != 3 || e.cols() != 3 {
        return Err(LinalgError::NotSquare {
            rows: e.rows(),
            cols: e.cols(),
        });
    }
    let m = |i: usize, j: usize| e[(i, j)];
    // det(lambda I - E) = lambda^3 + c2 lambda^2 + c1 lambda + c0
    let tr = m(0, 0) + m(1, 1) + m(2, 2);
    let minors = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0) + m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0)
        + m(1, 1) * m(2, 2)
        - m(1, 2) * m(2, 1);
    let det = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
        - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
        + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
    let (c2, c1, c0) = (-tr, minors, -det);

    // Depressed cubic x^3 + p x + q with lambda = x - c2/3.
    let shift = -c2 / 3.0;
    let p = c1 - c2 * c2 / 3.0;
    let q = 2.0 * c2 * c2 * c2 / 27.0 - c2 * c1 / 3.0 + c0;
    let scale = e.norm_inf().max(f64::MIN_POSITIVE);
    let disc = -(4.0 * p * p * p + 27.0 * q * q);
    if disc < -1e-10 * scale.powi(6) || p > 0.0 {
        return Err(LinalgError::ComplexEigenvalues);
    }
    let mut values = if p == 0.0 {
        [shift; 3]
    } else {
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * r)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        let tau = std::f64::consts::TAU;
        [
            shift + r * theta.cos(),
            shift + r * (theta - tau / 3.0).cos(),
            shift + r * (theta - 2.0 * tau / 3.0).cos(),
        ]
    };
    for lam in values.iter_mut() {
        for _ in 0..3 {
            let f = ((*lam + c2) * *lam + c1) * *lam + c0;
            let df = (3.0 * *lam + 2.0 * c2) * *lam + c1;
            if df == 0.0 {
                break;
            }
            let step = f / df;
            *lam -= step;
            if step.abs() <= 1e-17 * lam.abs().max(1.0) {
                break;
            }
        }
    }
    values.sort_by(f64::total_cmp);
    let gap = (values[1] - values[0]).min(values[2] - values[1]);
    if gap <= EIG_GAP * scale {
        return Err(LinalgError::RepeatedEigenvalues { gap });
    }

    let mut t = DenseSmall::zeros(3, 3);
    for (k, &lam) in values.iter().enumerate() {
        let mut s = e.clone();
        for i in 0..3 {
            s[(i, i)] -= lam;
        }
        let rows = [s.row(0), s.row(1), s.row(2)];
        let cross = |a: &[f64], b: &[f64]| {
            [
                a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0],
            ]
        };
        let v = [(0, 1), (0, 2), (1, 2)]
            .iter()
            .map(|&(a, b)| cross(rows[a], rows[b]))
            .max_by(|a, b| norm2(a).total_cmp(&norm2(b)))
            .unwrap();
        let big = v
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap();
        if big == 0.0 {
            return Err(LinalgError::RepeatedEigenvalues { gap });
        }
        for i in 0..3 {
            t[(i, k)] = v[i] / big;
        }
    }
    let t_inv = t
        .inverse()
        .map_err(|_| LinalgError::RepeatedEigenvalues { gap })?;
    // Nearly parallel eigenvectors: a defective or numerically repeated root.
    if t.norm_inf() * t_inv.norm_inf() > 1e6 {
        return Err(LinalgError::RepeatedEigenvalues { gap });
    }
    Ok(Eigen3 { values, t, t_inv })
}

fn norm2(v: &[f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum()
}
