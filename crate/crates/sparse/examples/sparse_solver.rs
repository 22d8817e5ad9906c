//! Factor `I + 0.01 L` for the periodic 2D Laplacian `L` with the direct LU
//! and with ILU(0)-GMRES, then compare residuals and timings.
//!
//! cargo run --release -p mb4nls-sparse --example sparse_solver [n]

use std::time::Instant;

use mb4nls_sparse::{CsrMatrix, Factorization, GmresOptions, SolverKind};

fn shifted_laplacian(n: usize, shift: f64) -> CsrMatrix {
    let idx = |i: usize, j: usize| (j % n) * n + (i % n);
    let mut t = Vec::with_capacity(5 * n * n);
    for j in 0..n {
        for i in 0..n {
            let r = idx(i, j);
            t.push((r, r, 1.0 + 4.0 * shift));
            for c in [idx(i + 1, j), idx(i + n - 1, j), idx(i, j + 1), idx(i, j + n - 1)] {
                t.push((r, c, -shift));
            }
        }
    }
    CsrMatrix::from_triplets(n * n, &t).expect("valid triplets")
}

fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    a.mul_vec(x).iter().zip(b).map(|(ax, bi)| (ax - bi).abs()).fold(0.0, f64::max)
}

fn main() -> mb4nls_sparse::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(Ok(100), |s| s.parse()).expect("n");
    let a = shifted_laplacian(n, 100.0);
    let b: Vec<f64> = (0..a.dim()).map(|k| ((k * 7919) % 13) as f64 - 6.0).collect();
    for (name, kind) in [
        ("direct LU", SolverKind::default()),
        ("ILU(0)-GMRES", SolverKind::Iterative(GmresOptions::default())),
    ] {
        let t = Instant::now();
        let f = Factorization::new(&a, &kind)?;
        let setup = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let x = f.solve(&b)?;
        let solve = t.elapsed().as_secs_f64();
        println!(
            "{name:<13} n={} setup {setup:.4} s solve {solve:.4} s residual {:.2e}",
            a.dim(),
            residual(&a, &x, &b)
        );
    }
    Ok(())
}
