//! Scheme constants against exact rational arithmetic.

mod common;

use common::exact::*;
use mb4nls::scheme::{lagrange_basis, Mb4Scheme, DEFAULT_ALPHA1};
use nalgebra::Matrix3;

#[test]
fn alpha_default_is_exact_rational() {
    assert_eq!(DEFAULT_ALPHA1, f(&q(-1425, 2)));
}

#[test]
fn e_matrix_matches_exact_integration() {
    let s = Mb4Scheme::default();
    let ex = default_exact();
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..4 {
            worst = worst.max((s.e_ext()[i][j] - f(&ex.e[i][j])).abs());
        }
    }
    assert!(worst <= 1e-14, "max |E - exact| = {worst:e}");
    // Known closed forms of two rows.
    assert_eq!(ex.e[2], [q(1, 8), q(3, 8), q(3, 8), q(1, 8)]);
    assert_eq!(ex.e[0], [q(-347, 90), q(127, 30), q(59, 15), q(-179, 45)]);
}

#[test]
fn w_tensor_matches_exact_integration() {
    let s = Mb4Scheme::default();
    let ex = default_exact();
    let got: Vec<f64> = s.w().iter().flatten().flatten().flatten().copied().collect();
    let mut worst = 0.0f64;
    for (g, e) in got.iter().zip(&ex.w) {
        let e = f(e);
        worst = worst.max((g - e).abs());
    }
    assert!(worst <= 1e-14, "max |W - exact| = {worst:e}");
}

#[test]
fn a_and_lagrange_point_values() {
    let s = Mb4Scheme::default();
    let alpha = q(-1425, 2);
    let half = q(1, 2);
    let exact_a = eval(&a_poly(&alpha, &half), &half);
    assert_eq!(exact_a, q(1, 2));
    assert!((s.eval_a(0.5, 0.5) - 0.5).abs() < 1e-13);
    assert!((s.eval_a(1.0, 0.0) - 1.0).abs() < 1e-13);

    let nodes = [q(0, 1), q(1, 3), q(2, 3), q(1, 1)];
    let l3 = eval(&lagrange_poly(&nodes, 3), &half);
    assert_eq!(l3, q(-1, 16));
    let nf = s.all_nodes();
    assert!((lagrange_basis(&nf, 3, 0.5) - f(&l3)).abs() < 1e-15);
}

fn roots_of(p: &[Q; 3]) -> Vec<f64> {
    let (p0, p1, p2) = (f(&p[0]), f(&p[1]), f(&p[2]));
    let companion = Matrix3::new(0.0, 0.0, -p0, 1.0, 0.0, -p1, 0.0, 1.0, -p2);
    let mut r: Vec<f64> = companion
        .complex_eigenvalues()
        .iter()
        .map(|z| {
            assert!(z.im.abs() < 1e-9, "complex root {z}");
            // Newton polish on the cubic.
            let mut x = z.re;
            for _ in 0..5 {
                let v = ((x + p2) * x + p1) * x + p0;
                let d = (3.0 * x + 2.0 * p2) * x + p1;
                x -= v / d;
            }
            x
        })
        .collect();
    r.sort_by(|a, b| a.partial_cmp(b).unwrap());
    r
}

#[test]
fn eigenvalues_match_characteristic_polynomial() {
    let ex = default_exact();
    let cp = char_poly(&ex.e);
    assert_eq!(cp, [q(19, 16), q(-55, 24), q(-1, 2)]);
    let roots = roots_of(&cp);
    let got = Mb4Scheme::default().eigenvalues();
    for (a, b) in roots.iter().zip(&got) {
        assert!((a - b).abs() < 1e-13, "{roots:?} vs {got:?}");
    }
}

#[test]
fn characteristic_polynomial_is_node_independent() {
    let alpha = q(-1425, 2);
    let base = char_poly(&default_exact().e);
    for c in [[q(1, 5), q(3, 5), q(1, 1)], [q(1, 4), q(1, 2), q(1, 1)]] {
        assert_eq!(char_poly(&exact(&alpha, c).e), base);
    }
}

#[test]
fn numerical_eigenvalues_are_node_independent() {
    let base = Mb4Scheme::default().eigenvalues();
    for c in [[0.2, 0.6, 1.0], [0.25, 0.5, 1.0], [0.1, 0.45, 1.0]] {
        let ev = Mb4Scheme::new(DEFAULT_ALPHA1, c).unwrap().eigenvalues();
        for (a, b) in ev.iter().zip(&base) {
            assert!((a - b).abs() <= 1e-10, "c={c:?}: {ev:?} vs {base:?}");
        }
    }
}

#[test]
fn transform_diagonalizes_e() {
    let s = Mb4Scheme::default();
    let e = s.e_matrix();
    let (t, ti) = (s.t(), s.t_inv());
    let d = &(ti * &e) * t;
    let lam = s.eigenvalues();
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { lam[i] } else { 0.0 };
            assert!((d[(i, j)] - want).abs() < 1e-12, "({i},{j}) {}", d[(i, j)]);
        }
    }
}

#[test]
fn small_alpha_gives_complex_eigenvalues_and_is_rejected() {
    // Characteristic polynomial at alpha = -100 has a complex pair.
    let cp = char_poly(&exact(&q(-100, 1), [q(1, 3), q(2, 3), q(1, 1)]).e);
    let (p0, p1, p2) = (f(&cp[0]), f(&cp[1]), f(&cp[2]));
    let companion = Matrix3::new(0.0, 0.0, -p0, 1.0, 0.0, -p1, 0.0, 1.0, -p2);
    assert!(companion.complex_eigenvalues().iter().any(|z| z.im.abs() > 1e-6));
    assert!(Mb4Scheme::new(-100.0, [1.0 / 3.0, 2.0 / 3.0, 1.0]).is_err());
}
