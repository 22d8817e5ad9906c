//! Exact rational arithmetic for the scheme constants.

use mb4nls::scheme::Mb4Scheme;
use num::{BigInt, BigRational, One, ToPrimitive, Zero};

pub type Q = BigRational;
pub type Poly = Vec<Q>;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = vec![Q::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn integrate01(p: &Poly) -> Q {
    p.iter()
        .enumerate()
        .map(|(k, c)| c / Q::from_integer(BigInt::from(k as i64 + 1)))
        .fold(Q::zero(), |a, b| a + b)
}

pub fn eval(p: &Poly, x: &Q) -> Q {
    p.iter().rev().fold(Q::zero(), |acc, c| acc * x + c)
}

/// `A(tau, .)` as a polynomial in zeta, straight from the bracket form.
pub fn a_poly(alpha: &Q, tau: &Q) -> Poly {
    let (six, twelve, thirtysix) = (q(6, 1), q(12, 1), q(36, 1));
    let m = [
        [alpha + q(4, 1), -(&six * alpha) - &six, &six * alpha],
        [-(&six * alpha) - &six, &thirtysix * alpha + &twelve, -(&thirtysix * alpha)],
        [&six * alpha, -(&thirtysix * alpha), &thirtysix * alpha],
    ];
    let row = [tau.clone(), tau * tau / q(2, 1), tau * tau * tau / q(3, 1)];
    (0..3)
        .map(|c| (0..3).map(|r| &row[r] * &m[r][c]).fold(Q::zero(), |a, b| a + b))
        .collect()
}

pub fn lagrange_poly(nodes: &[Q; 4], j: usize) -> Poly {
    let mut p: Poly = vec![Q::one()];
    for (m, xm) in nodes.iter().enumerate() {
        if m != j {
            let d = &nodes[j] - xm;
            p = mul(&p, &vec![-(xm / &d), Q::one() / &d]);
        }
    }
    p
}

pub struct Exact {
    pub e: [[Q; 4]; 3],
    pub w: Vec<Q>,
}

pub fn exact(alpha: &Q, c: [Q; 3]) -> Exact {
    let nodes = [Q::zero(), c[0].clone(), c[1].clone(), c[2].clone()];
    let l: Vec<Poly> = (0..4).map(|j| lagrange_poly(&nodes, j)).collect();
    let e = std::array::from_fn(|i| {
        let a = a_poly(alpha, &c[i]);
        std::array::from_fn(|j| integrate01(&mul(&a, &l[j])))
    });
    let mut w = Vec::with_capacity(192);
    for ci in &c {
        let a = a_poly(alpha, ci);
        for la in &l {
            let al = mul(&a, la);
            for lb in &l {
                let alb = mul(&al, lb);
                for lc in &l {
                    w.push(integrate01(&mul(&alb, lc)));
                }
            }
        }
    }
    Exact { e, w }
}

pub fn f(x: &Q) -> f64 {
    x.to_f64().unwrap()
}

pub fn default_exact() -> Exact {
    exact(&q(-1425, 2), [q(1, 3), q(2, 3), q(1, 1)])
}


/// Characteristic polynomial `x^3 + p2 x^2 + p1 x + p0` of the 3x3 part of E.
pub fn char_poly(e: &[[Q; 4]; 3]) -> [Q; 3] {
    let m = |i: usize, j: usize| e[i][j + 1].clone();
    let tr = m(0, 0) + m(1, 1) + m(2, 2);
    let minors = &m(0, 0) * &m(1, 1) - &m(0, 1) * &m(1, 0) + &m(0, 0) * &m(2, 2)
        - &m(0, 2) * &m(2, 0)
        + &m(1, 1) * &m(2, 2)
        - &m(1, 2) * &m(2, 1);
    let det = &m(0, 0) * (&m(1, 1) * &m(2, 2) - &m(1, 2) * &m(2, 1))
        - &m(0, 1) * (&m(1, 0) * &m(2, 2) - &m(1, 2) * &m(2, 0))
        + &m(0, 2) * (&m(1, 0) * &m(2, 1) - &m(1, 1) * &m(2, 0));
    [-det, minors, -tr]
}


/// Largest absolute deviation of the default scheme's `E` and `W` from
/// the exact values.
pub fn e_and_w_errors() -> (f64, f64) {
    let s = Mb4Scheme::default();
    let ex = default_exact();
    let mut e_err = 0.0f64;
    for i in 0..3 {
        for j in 0..4 {
            e_err = e_err.max((s.e_ext()[i][j] - f(&ex.e[i][j])).abs());
        }
    }
    let w_err = s
        .w()
        .iter()
        .flatten()
        .flatten()
        .flatten()
        .zip(&ex.w)
        .map(|(g, e)| (g - f(e)).abs())
        .fold(0.0, f64::max);
    (e_err, w_err)
}
