//! Independent dense reference implementations shared by the oracle tests.
#![allow(dead_code)]

pub mod checks;
pub mod exact;

use mb4nls::lattice::{GridModel, State};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Periodic five-point `K` assembled entry by entry.
pub fn dense_kinetic(nx: usize, ny: usize, lx: f64, ly: f64) -> DMatrix<f64> {
    let (hx, hy) = (lx / nx as f64, ly / ny as f64);
    let n = nx * ny;
    let mut k = DMatrix::zeros(n, n);
    for j in 0..ny {
        for i in 0..nx {
            let r = j * nx + i;
            k[(r, r)] += 2.0 / (hx * hx) + 2.0 / (hy * hy);
            k[(r, j * nx + (i + 1) % nx)] -= 1.0 / (hx * hx);
            k[(r, j * nx + (i + nx - 1) % nx)] -= 1.0 / (hx * hx);
            k[(r, ((j + 1) % ny) * nx + i)] -= 1.0 / (hy * hy);
            k[(r, ((j + ny - 1) % ny) * nx + i)] -= 1.0 / (hy * hy);
        }
    }
    k
}

/// `K + diag(V)` of a model, rebuilt densely from its grid.
pub fn dense_linear(model: &GridModel) -> DMatrix<f64> {
    let g = model.grid();
    let mut a = dense_kinetic(g.nx, g.ny, g.lx, g.ly);
    for (i, v) in model.potential().iter().enumerate() {
        a[(i, i)] += v;
    }
    a
}

/// `-i A u + i gamma |u|^2 u`.
pub fn dense_f(a: &DMatrix<f64>, gamma: f64, u: &[Complex64]) -> Vec<Complex64> {
    let i = Complex64::i();
    (0..u.len())
        .map(|r| {
            let au: Complex64 = (0..u.len()).map(|c| a[(r, c)] * u[c]).sum();
            -i * au + i * gamma * u[r].norm_sqr() * u[r]
        })
        .collect()
}

/// Real-split Jacobian from the product rule, as a dense matrix.
pub fn dense_jacobian(a: &DMatrix<f64>, gamma: f64, u: &[Complex64]) -> DMatrix<f64> {
    let n = u.len();
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for r in 0..n {
        for c in 0..n {
            j[(r, n + c)] = a[(r, c)];
            j[(n + r, c)] = -a[(r, c)];
        }
        let (p, q) = (u[r].re, u[r].im);
        j[(r, r)] += -2.0 * gamma * p * q;
        j[(r, n + r)] += -gamma * (p * p + 3.0 * q * q);
        j[(n + r, r)] += gamma * (3.0 * p * p + q * q);
        j[(n + r, n + r)] += 2.0 * gamma * p * q;
    }
    j
}

/// Gauss-Legendre nodes and weights on `[0, 1]` from the eigenvalues of the
/// Jacobi matrix.
pub fn golub_welsch(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut t = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let b = kf / (4.0 * kf * kf - 1.0).sqrt();
        t[(k, k - 1)] = b;
        t[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(t);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (0.5 * (1.0 + eig.eigenvalues[i]), v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// `A(tau, zeta)` from the bracket definition with its own coefficient matrix.
pub fn a_bracket(alpha: f64, tau: f64, zeta: f64) -> f64 {
    let m = [
        [alpha + 4.0, -6.0 * alpha - 6.0, 6.0 * alpha],
        [-6.0 * alpha - 6.0, 36.0 * alpha + 12.0, -36.0 * alpha],
        [6.0 * alpha, -36.0 * alpha, 36.0 * alpha],
    ];
    let row = [tau, tau * tau / 2.0, tau * tau * tau / 3.0];
    let col = [1.0, zeta, zeta * zeta];
    (0..3)
        .map(|r| (0..3).map(|c| row[r] * m[r][c] * col[c]).sum::<f64>())
        .sum()
}

pub fn lagrange(nodes: &[f64], j: usize, x: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|&(m, _)| m != j)
        .map(|(_, &xm)| (x - xm) / (nodes[j] - xm))
        .product()
}

pub fn random_state(n: usize, seed: u64, scale: f64) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    State::new(
        (0..n)
            .map(|_| Complex64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)))
            .collect(),
    )
}

/// `u0 + small perturbation`, for stage guesses near a solution.
pub fn perturbed(u: &State, seed: u64, scale: f64) -> State {
    let d = random_state(u.len(), seed, scale);
    State::new(u.as_slice().iter().zip(d.as_slice()).map(|(a, b)| a + b).collect())
}

pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn max_norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}
