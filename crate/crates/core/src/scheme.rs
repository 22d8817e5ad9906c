//! Constants of the MB4 continuous-stage Runge-Kutta scheme.
//!
//! The coefficient polynomial is
//! `A(tau, zeta) = [tau, tau^2/2, tau^3/3] M [1, zeta, zeta^2]^T` with `M`
//! depending on `alpha1`. The stage interpolant uses cubic Lagrange bases
//! over the nodes `{0, c1, c2, c3}` with `c3 = 1`, so the step output is the
//! last stage.

use std::fmt::Write as _;

use mb4nls_sparse::{eig3_real, DenseSmall, Eigen3, LinalgError};

use crate::error::{Mb4Error, Result};
use crate::quadrature::gauss_legendre;

pub const DEFAULT_ALPHA1: f64 = -300.0 * 19.0 / 8.0;
/// `alpha1` must lie strictly below this bound for `E` to have real eigenvalues.
pub const ALPHA1_LIMIT: f64 = -300.0 * 0.7770503941;
pub const DEFAULT_NODES: [f64; 3] = [1.0 / 3.0, 2.0 / 3.0, 1.0];

/// Cubic-term weights `W[i][a][b][c]`.
pub type WTensor = [[[[f64; 4]; 4]; 4]; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct Mb4Scheme {
    alpha1: f64,
    nodes: [f64; 3],
    a_coeff: [[f64; 3]; 3],
    e_ext: [[f64; 4]; 3],
    eigen: Eigen3,
    w: WTensor,
}

impl Default for Mb4Scheme {
    fn default() -> Self {
        Self::new(DEFAULT_ALPHA1, DEFAULT_NODES).expect("default constants are valid")
    }
}

/// The matrix `M` of the coefficient polynomial.
pub fn coefficient_matrix(alpha1: f64) -> [[f64; 3]; 3] {
    let a = alpha1;
    [
        [a + 4.0, -6.0 * a - 6.0, 6.0 * a],
        [-6.0 * a - 6.0, 36.0 * a + 12.0, -36.0 * a],
        [6.0 * a, -36.0 * a, 36.0 * a],
    ]
}

/// `[tau, tau^2/2, tau^3/3] M [1, zeta, zeta^2]^T` evaluated term by term.
pub fn eval_bracket(a_coeff: &[[f64; 3]; 3], tau: f64, zeta: f64) -> f64 {
    let t = [tau, tau * tau / 2.0, tau * tau * tau / 3.0];
    let z = [1.0, zeta, zeta * zeta];
    let mut s = 0.0;
    for r in 0..3 {
        for c in 0..3 {
            s += t[r] * a_coeff[r][c] * z[c];
        }
    }
    s
}

/// `l_i(zeta)` for the cubic Lagrange basis over `nodes`.
pub fn lagrange_basis(nodes: &[f64; 4], i: usize, zeta: f64) -> f64 {
    let mut v = 1.0;
    for (j, &cj) in nodes.iter().enumerate() {
        if j != i {
            v *= (zeta - cj) / (nodes[i] - cj);
        }
    }
    v
}

impl Mb4Scheme {
    pub fn new(alpha1: f64, nodes: [f64; 3]) -> Result<Self> {
        if !(alpha1 < ALPHA1_LIMIT) {
            return Err(Mb4Error::InvalidScheme(format!(
                "alpha1 = {alpha1} must be below {ALPHA1_LIMIT}"
            )));
        }
        if nodes[2] != 1.0 {
            return Err(Mb4Error::InvalidScheme("the last node must be 1".into()));
        }
        if nodes.iter().any(|&c| !(c > 0.0 && c <= 1.0))
            || nodes[0] == nodes[1]
            || nodes[1] == nodes[2]
            || nodes[0] == nodes[2]
        {
            return Err(Mb4Error::InvalidScheme(format!(
                "nodes {nodes:?} must be distinct and in (0, 1]"
            )));
        }
        let a_coeff = coefficient_matrix(alpha1);
        let mut s = Self {
            alpha1,
            nodes,
            a_coeff,
            e_ext: [[0.0; 4]; 3],
            eigen: Eigen3 {
                values: [0.0; 3],
                t: DenseSmall::identity(3),
                t_inv: DenseSmall::identity(3),
            },
            w: [[[[0.0; 4]; 4]; 4]; 3],
        };
        s.e_ext = precompute_e(&s);
        s.w = precompute_w(&s);
        s.eigen = eig3_real(&s.e_matrix()).map_err(|e| match e {
            LinalgError::ComplexEigenvalues => Mb4Error::InvalidScheme(format!(
                "E has complex eigenvalues for alpha1 = {alpha1}"
            )),
            other => Mb4Error::Linalg(other),
        })?;
        Ok(s)
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    pub fn nodes(&self) -> [f64; 3] {
        self.nodes
    }

    /// `{0, c1, c2, c3}`.
    pub fn all_nodes(&self) -> [f64; 4] {
        [0.0, self.nodes[0], self.nodes[1], self.nodes[2]]
    }

    pub fn a_coeff(&self) -> &[[f64; 3]; 3] {
        &self.a_coeff
    }

    /// `A(tau, zeta)`.
    ///
    /// Uses the factored form
    /// `tau (4 - 6 zeta) + tau^2 (6 zeta - 3)
    ///  + alpha1 (6 zeta^2 - 6 zeta + 1) tau (1 - tau) (1 - 2 tau)`,
    /// identical to the bracket form but free of the cancellation between
    /// terms of size `|alpha1|`.
    pub fn eval_a(&self, tau: f64, zeta: f64) -> f64 {
        let base = tau * (4.0 - 6.0 * zeta) + tau * tau * (6.0 * zeta - 3.0);
        let p2 = 6.0 * zeta * (zeta - 1.0) + 1.0;
        base + self.alpha1 * p2 * (tau * (1.0 - tau) * (1.0 - 2.0 * tau))
    }

    /// `B(zeta) = A(1, zeta)`.
    pub fn eval_b(&self, zeta: f64) -> f64 {
        self.eval_a(1.0, zeta)
    }

    pub fn lagrange(&self, i: usize, zeta: f64) -> f64 {
        lagrange_basis(&self.all_nodes(), i, zeta)
    }

    /// Row i: `E_i0, E_i1, E_i2, E_i3`.
    pub fn e_ext(&self) -> &[[f64; 4]; 3] {
        &self.e_ext
    }

    /// The 3x3 stage coupling matrix `E_ij`, j = 1..3.
    pub fn e_matrix(&self) -> DenseSmall {
        let r: Vec<&[f64]> = self.e_ext.iter().map(|row| &row[1..]).collect();
        DenseSmall::from_rows(&r)
    }

    /// Eigenvalues of `E` in ascending order.
    pub fn eigenvalues(&self) -> [f64; 3] {
        self.eigen.values
    }

    pub fn t(&self) -> &DenseSmall {
        &self.eigen.t
    }

    pub fn t_inv(&self) -> &DenseSmall {
        &self.eigen.t_inv
    }

    pub fn w(&self) -> &WTensor {
        &self.w
    }

    /// Plain-text `key = values` dump, 17 significant digits.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let mut line = |key: &str, vals: &mut dyn Iterator<Item = f64>| {
            let v: Vec<String> = vals.map(|x| format!("{x:.16e}")).collect();
            let _ = writeln!(s, "{key} = {}", v.join(" "));
        };
        line("alpha1", &mut std::iter::once(self.alpha1));
        line("c", &mut self.nodes.iter().copied());
        line("a_coeff", &mut self.a_coeff.iter().flatten().copied());
        line("E", &mut self.e_ext.iter().flatten().copied());
        line("lambda", &mut self.eigen.values.iter().copied());
        line("T", &mut self.eigen.t.as_slice().iter().copied());
        line("T_inv", &mut self.eigen.t_inv.as_slice().iter().copied());
        line(
            "W",
            &mut self.w.iter().flatten().flatten().flatten().copied(),
        );
        s
    }
}

/// Values read back from [`Mb4Scheme::dump`].
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeDump {
    pub alpha1: f64,
    pub c: Vec<f64>,
    pub a_coeff: Vec<f64>,
    pub e: Vec<f64>,
    pub lambda: Vec<f64>,
    pub t: Vec<f64>,
    pub t_inv: Vec<f64>,
    pub w: Vec<f64>,
}

pub fn parse_dump(text: &str) -> Result<SchemeDump> {
    let mut map = std::collections::HashMap::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Mb4Error::Config(format!("malformed dump line `{line}`")))?;
        let vals = v
            .split_whitespace()
            .map(|x| {
                x.parse::<f64>()
                    .map_err(|e| Mb4Error::Config(format!("bad number `{x}`: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        map.insert(k.trim().to_string(), vals);
    }
    let mut take = |k: &str, len: usize| -> Result<Vec<f64>> {
        let v = map
            .remove(k)
            .ok_or_else(|| Mb4Error::Config(format!("dump lacks `{k}`")))?;
        if v.len() != len {
            return Err(Mb4Error::Config(format!(
                "`{k}` has {} values, expected {len}",
                v.len()
            )));
        }
        Ok(v)
    };
    Ok(SchemeDump {
        alpha1: take("alpha1", 1)?[0],
        c: take("c", 3)?,
        a_coeff: take("a_coeff", 9)?,
        e: take("E", 12)?,
        lambda: take("lambda", 3)?,
        t: take("T", 9)?,
        t_inv: take("T_inv", 9)?,
        w: take("W", 192)?,
    })
}

/// `E_ij = int_0^1 A(c_i, zeta) l_j(zeta) dzeta`, i = 1..3, j = 0..3.
/// The integrand has degree 5, so four Gauss nodes are exact.
pub fn precompute_e(scheme: &Mb4Scheme) -> [[f64; 4]; 3] {
    precompute_e_with(scheme, 4)
}

/// As [`precompute_e`] with an explicit number of quadrature nodes.
pub fn precompute_e_with(scheme: &Mb4Scheme, n_quad: usize) -> [[f64; 4]; 3] {
    let (x, w) = gauss_legendre(n_quad);
    let nodes = scheme.all_nodes();
    let mut e = [[0.0; 4]; 3];
    for (i, row) in e.iter_mut().enumerate() {
        let ci = scheme.nodes[i];
        for (j, v) in row.iter_mut().enumerate() {
            *v = x
                .iter()
                .zip(&w)
                .map(|(&z, &wz)| wz * scheme.eval_a(ci, z) * lagrange_basis(&nodes, j, z))
                .sum();
        }
    }
    e
}

/// `W_i[a][b][c] = int_0^1 A(c_i, zeta) l_a l_b l_c dzeta`; degree 11, six
/// Gauss nodes.
pub fn precompute_w(scheme: &Mb4Scheme) -> WTensor {
    let (x, wq) = gauss_legendre(6);
    let nodes = scheme.all_nodes();
    let mut w = [[[[0.0; 4]; 4]; 4]; 3];
    let basis: Vec<[f64; 4]> = x
        .iter()
        .map(|&z| std::array::from_fn(|j| lagrange_basis(&nodes, j, z)))
        .collect();
    for (i, wi) in w.iter_mut().enumerate() {
        let ci = scheme.nodes[i];
        let weights: Vec<f64> = x
            .iter()
            .zip(&wq)
            .map(|(&z, &wz)| wz * scheme.eval_a(ci, z))
            .collect();
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    wi[a][b][c] = weights
                        .iter()
                        .zip(&basis)
                        .map(|(wz, l)| wz * l[a] * (l[b] * l[c]))
                        .sum();
                }
            }
        }
    }
    w
}
