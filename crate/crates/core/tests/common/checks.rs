//! Oracle comparisons on a 4x4 grid, each returning its worst deviation.

use super::*;
use mb4nls::jacobian::assemble_jacobian;
use mb4nls::lattice::{rhs_split, GridModel, GridSpec, State};
use mb4nls::linear::StepContext;
use mb4nls::mb4::{eval_phi, newton_correction};
use mb4nls::scheme::{Mb4Scheme, DEFAULT_ALPHA1};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub fn grid4() -> GridSpec {
    GridSpec::new(4, 4, 2.0 * std::f64::consts::PI, 2.0 * std::f64::consts::PI).unwrap()
}

/// 4x4 model with one potential site.
pub fn model4(gamma: f64, v: f64) -> GridModel {
    let mut pot = vec![0.0; 16];
    pot[5] = v;
    GridModel::new(grid4(), pot, gamma).unwrap()
}

/// Stage residual by 64-point quadrature of `int_0^1 A(c_i, zeta) f(U(zeta))`
/// over the cubic interpolant of the stages.
pub fn phi_by_quadrature(m: &GridModel, s: &Mb4Scheme, z: &[State; 4], h: f64) -> Vec<Vec<Complex64>> {
    let a = dense_linear(m);
    let (x, w) = golub_welsch(64);
    let nodes = s.all_nodes();
    let n = m.dim();
    (0..3)
        .map(|i| {
            let ci = nodes[i + 1];
            let mut integral = vec![Complex64::new(0.0, 0.0); n];
            for (&xq, &wq) in x.iter().zip(&w) {
                let l: Vec<f64> = (0..4).map(|j| lagrange(&nodes, j, xq)).collect();
                let u: Vec<Complex64> = (0..n)
                    .map(|k| (0..4).map(|j| l[j] * z[j].as_slice()[k]).sum())
                    .collect();
                let fu = dense_f(&a, m.gamma(), &u);
                let weight = wq * a_bracket(s.alpha1(), ci, xq);
                for (acc, v) in integral.iter_mut().zip(&fu) {
                    *acc += weight * v;
                }
            }
            (0..n)
                .map(|k| z[i + 1].as_slice()[k] - z[0].as_slice()[k] - h * integral[k])
                .collect()
        })
        .collect()
}

/// Residual through the W tensor against quadrature, for stages near `u0`.
pub fn phi_quadrature_error(m: &GridModel, s: &Mb4Scheme, u0: &State, seed: u64, spread: f64, h: f64) -> f64 {
    let stages = [
        perturbed(u0, seed + 1, spread),
        perturbed(u0, seed + 2, spread),
        perturbed(u0, seed + 3, spread),
    ];
    let got = eval_phi(m, s, u0, &stages, h).unwrap();
    let [a, b, c] = stages;
    let want = phi_by_quadrature(m, s, &[u0.clone(), a, b, c], h);
    (0..3).map(|i| max_diff(got[i].as_slice(), &want[i])).fold(0.0, f64::max)
}

/// Newton correction from the three decoupled solves against a dense solve
/// of `(I - h E (x) J) r = -Phi`.
pub fn coupled_solve_error(gamma: f64, h: f64, seed: u64) -> f64 {
    let m = model4(gamma, -2.0);
    let s = Mb4Scheme::default();
    let u0 = random_state(16, seed, 1.0);
    let stages = [
        perturbed(&u0, seed + 1, 0.05),
        perturbed(&u0, seed + 2, 0.05),
        perturbed(&u0, seed + 3, 0.05),
    ];
    let ctx = StepContext::sequential(&m);
    let r = newton_correction(&m, &s, &u0, &stages, h, &ctx).unwrap();

    let n2 = 32;
    let j = dense_jacobian(&dense_linear(&m), gamma, u0.as_slice());
    let e = s.e_ext();
    let mut big = DMatrix::<f64>::identity(3 * n2, 3 * n2);
    for bi in 0..3 {
        for bj in 0..3 {
            let c = h * e[bi][bj + 1];
            for r0 in 0..n2 {
                for c0 in 0..n2 {
                    big[(bi * n2 + r0, bj * n2 + c0)] -= c * j[(r0, c0)];
                }
            }
        }
    }
    let phi = eval_phi(&m, &s, &u0, &stages, h).unwrap();
    let rhs: Vec<f64> = phi.iter().flat_map(|p| p.to_split()).map(|v| -v).collect();
    let x = big.lu().solve(&DVector::from_vec(rhs)).expect("dense system is regular");
    let mut worst = 0.0f64;
    for i in 0..3 {
        for k in 0..n2 {
            worst = worst.max((r[i][k] - x[i * n2 + k]).abs());
        }
    }
    worst
}

/// Worst relative mismatch of `J d` against central differences of the
/// right-hand side over five random directions.
pub fn jacobian_fd_error(gamma: f64, seed: u64) -> f64 {
    let m = model4(gamma, -1.0);
    let u = random_state(16, seed, 1.5).to_split();
    let j = assemble_jacobian(&m, &State::from_split(&u));
    let mut worst = 0.0f64;
    for trial in 0..5 {
        let d = random_state(16, seed * 10 + trial, 1e-4).to_split();
        let plus: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + b).collect();
        let minus: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a - b).collect();
        let (mut fp, mut fm) = (vec![0.0; 32], vec![0.0; 32]);
        rhs_split(&m, &plus, &mut fp);
        rhs_split(&m, &minus, &mut fm);
        let fd: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| 0.5 * (a - b)).collect();
        let jd = j.mul_vec(&d);
        let num: f64 = fd.iter().zip(&jd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = jd.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max(num / den);
    }
    worst
}

/// Spread of the E eigenvalues over several node choices.
pub fn node_independence_error() -> f64 {
    let base = Mb4Scheme::default().eigenvalues();
    let mut worst = 0.0f64;
    for c in [[0.2, 0.6, 1.0], [0.25, 0.5, 1.0], [0.1, 0.45, 1.0]] {
        let ev = Mb4Scheme::new(DEFAULT_ALPHA1, c).unwrap().eigenvalues();
        for (a, b) in ev.iter().zip(&base) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}
