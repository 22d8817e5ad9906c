//! Comparison integrators (RK4, Gauss collocation, AVF) and a single
//! [`Integrator`] front end that dispatches to them or to MB4.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use mb4nls_sparse::{CsrMatrix, Factorization, SolverKind};
use num_complex::Complex64;

use crate::error::{Mb4Error, Result};
use crate::jacobian::{assemble_jacobian, coupled_matrix, identity_minus};
use crate::lattice::{rhs_split, GridModel, State};
use crate::linear::StepContext;
use crate::mb4::{check_state, max_abs, mb4_step_with, with_halving, NewtonConfig, StepDiagnostics};
use crate::quadrature::gauss_legendre;
use crate::scheme::Mb4Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodId {
    Rk4,
    Gauss2,
    Gauss4,
    Avf2,
    Avf4,
    Mb4,
}

impl MethodId {
    pub const ALL: [MethodId; 6] = [
        MethodId::Rk4,
        MethodId::Gauss2,
        MethodId::Gauss4,
        MethodId::Avf2,
        MethodId::Avf4,
        MethodId::Mb4,
    ];

    pub fn order(self) -> u32 {
        match self {
            MethodId::Gauss2 | MethodId::Avf2 => 2,
            _ => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MethodId::Rk4 => "RK4",
            MethodId::Gauss2 => "GAUSS2",
            MethodId::Gauss4 => "GAUSS4",
            MethodId::Avf2 => "AVF2",
            MethodId::Avf4 => "AVF4",
            MethodId::Mb4 => "MB4",
        }
    }

    pub fn is_implicit(self) -> bool {
        self != MethodId::Rk4
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodId {
    type Err = Mb4Error;
    fn from_str(s: &str) -> Result<Self> {
        MethodId::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Mb4Error::Config(format!("unknown method '{s}'")))
    }
}

// split-vector helpers

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// `out += scale * (-i A v)`.
fn add_linear(model: &GridModel, v: &[f64], scale: f64, out: &mut [f64], tmp: &mut [f64]) {
    let n = model.dim();
    let a = model.linear_part();
    let (vp, vq) = v.split_at(n);
    let (tp, tq) = tmp.split_at_mut(n);
    a.mul_vec_into(vq, tp);
    a.mul_vec_into(vp, tq);
    for k in 0..n {
        out[k] += scale * tp[k];
        out[n + k] -= scale * tq[k];
    }
}

/// `out += scale * i gamma sum_abc w[a][b][c] conj(y_a) y_b y_c`, with `w`
/// flattened row-major over `m = ys.len()` basis vectors.
fn add_cubic(model: &GridModel, ys: &[&[f64]], w: &[f64], scale: f64, out: &mut [f64]) {
    let g = model.gamma();
    if g == 0.0 {
        return;
    }
    let n = model.dim();
    let m = ys.len();
    debug_assert_eq!(w.len(), m * m * m);
    let mut zc = vec![Complex64::new(0.0, 0.0); m];
    for k in 0..n {
        for (z, y) in zc.iter_mut().zip(ys) {
            *z = Complex64::new(y[k], y[n + k]);
        }
        let mut s = Complex64::new(0.0, 0.0);
        for a in 0..m {
            let mut t = Complex64::new(0.0, 0.0);
            for b in 0..m {
                for c in 0..m {
                    t += w[(a * m + b) * m + c] * zc[b] * zc[c];
                }
            }
            s += zc[a].conj() * t;
        }
        out[k] -= scale * g * s.im;
        out[n + k] += scale * g * s.re;
    }
}

/// Iterates `x += r` with `r = -M^{-1} G(x)` until `|r|_inf <= epsilon`.
fn simplified_newton<G>(
    cfg: &NewtonConfig,
    m: &Factorization,
    x: &mut [f64],
    mut residual: G,
    diag: &mut StepDiagnostics,
) -> Result<()>
where
    G: FnMut(&[f64]) -> Vec<f64>,
{
    let mut last = f64::INFINITY;
    for it in 1..=cfg.max_iters {
        diag.newton_iters += 1;
        let mut g = residual(x);
        g.iter_mut().for_each(|v| *v = -*v);
        let t0 = Instant::now();
        let r = m.solve(&g)?;
        diag.solve_seconds += t0.elapsed().as_secs_f64();
        last = max_abs(&r);
        if !last.is_finite() {
            return Err(Mb4Error::NonConvergence {
                iterations: it,
                residual: last,
            });
        }
        axpy(x, 1.0, &r);
        if last <= cfg.epsilon {
            return Ok(());
        }
    }
    Err(Mb4Error::NonConvergence {
        iterations: cfg.max_iters,
        residual: last,
    })
}

fn timed_factor(ctx: &StepContext, a: &CsrMatrix, diag: &mut StepDiagnostics) -> Result<Factorization> {
    let t0 = Instant::now();
    let f = ctx.linear.factor(a);
    diag.factor_seconds += t0.elapsed().as_secs_f64();
    f
}

/// Classical explicit Runge-Kutta step.
pub fn rk4_step(model: &GridModel, u0: &State, h: f64) -> Result<State> {
    check_state(model, u0)?;
    let x = u0.to_split();
    let m = x.len();
    let mut k = vec![0.0; m];
    let mut acc = x.clone();
    let mut y = vec![0.0; m];
    for (c, w) in [(0.0, 1.0), (0.5, 2.0), (0.5, 2.0), (1.0, 1.0)] {
        for i in 0..m {
            y[i] = x[i] + c * h * k[i];
        }
        rhs_split(model, &y, &mut k);
        axpy(&mut acc, h * w / 6.0, &k);
    }
    Ok(State::from_split(&acc))
}

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Butcher matrix of the two-stage Gauss method.
pub fn gauss4_tableau() -> [[f64; 2]; 2] {
    [
        [0.25, 0.25 - SQRT3 / 6.0],
        [0.25 + SQRT3 / 6.0, 0.25],
    ]
}

fn gauss2_attempt(
    model: &GridModel,
    u0: &[f64],
    h: f64,
    cfg: &NewtonConfig,
    ctx: &StepContext,
    diag: &mut StepDiagnostics,
) -> Result<Vec<f64>> {
    // Z = (h/2) f(u0 + Z), u1 = u0 + 2 Z
    let j = assemble_jacobian(model, &State::from_split(u0));
    let m = timed_factor(ctx, &identity_minus(&j, 0.5 * h), diag)?;
    let len = u0.len();
    let mut z = vec![0.0; len];
    let mut y = vec![0.0; len];
    let mut f = vec![0.0; len];
    simplified_newton(
        cfg,
        &m,
        &mut z,
        |z| {
            for i in 0..len {
                y[i] = u0[i] + z[i];
            }
            rhs_split(model, &y, &mut f);
            z.iter().zip(&f).map(|(zi, fi)| zi - 0.5 * h * fi).collect()
        },
        diag,
    )?;
    Ok(u0.iter().zip(&z).map(|(a, b)| a + 2.0 * b).collect())
}

fn gauss4_attempt(
    model: &GridModel,
    u0: &[f64],
    h: f64,
    cfg: &NewtonConfig,
    ctx: &StepContext,
    diag: &mut StepDiagnostics,
) -> Result<Vec<f64>> {
    let a = gauss4_tableau();
    let ha = a.map(|r| r.map(|v| h * v));
    let j = assemble_jacobian(model, &State::from_split(u0));
    let m = timed_factor(ctx, &coupled_matrix(&j, ha), diag)?;
    let len = u0.len();
    let mut z = vec![0.0; 2 * len];
    let mut y = vec![0.0; len];
    let mut f = [vec![0.0; len], vec![0.0; len]];
    simplified_newton(
        cfg,
        &m,
        &mut z,
        |z| {
            for s in 0..2 {
                for i in 0..len {
                    y[i] = u0[i] + z[s * len + i];
                }
                rhs_split(model, &y, &mut f[s]);
            }
            let mut g = z.to_vec();
            for s in 0..2 {
                let gs = &mut g[s * len..(s + 1) * len];
                axpy(gs, -ha[s][0], &f[0]);
                axpy(gs, -ha[s][1], &f[1]);
            }
            g
        },
        diag,
    )?;
    // b A^{-1} = (-sqrt3, sqrt3)
    let (z1, z2) = z.split_at(len);
    Ok((0..len).map(|i| u0[i] + SQRT3 * (z2[i] - z1[i])).collect())
}

/// Implicit midpoint (`stages = 1`) or two-stage Gauss (`stages = 2`).
pub fn gauss_step_with(
    model: &GridModel,
    u0: &State,
    h: f64,
    stages: usize,
    cfg: &NewtonConfig,
    ctx: &StepContext,
) -> Result<(State, StepDiagnostics)> {
    check_state(model, u0)?;
    cfg.validate()?;
    let attempt = match stages {
        1 => gauss2_attempt,
        2 => gauss4_attempt,
        s => return Err(Mb4Error::Config(format!("Gauss stages must be 1 or 2, got {s}"))),
    };
    with_halving(cfg, u0, h, |u, h, diag| {
        attempt(model, &u.to_split(), h, cfg, ctx, diag).map(|v| State::from_split(&v))
    })
}

pub fn gauss_step(
    model: &GridModel,
    u0: &State,
    h: f64,
    stages: usize,
    cfg: &NewtonConfig,
) -> Result<State> {
    gauss_step_with(model, u0, h, stages, cfg, &StepContext::sequential(model)).map(|r| r.0)
}

/// `int_0^1 m_a m_b m_c` for `m_0 = 1 - xi`, `m_1 = xi`.
pub fn avf2_weights() -> [[[f64; 2]; 2]; 2] {
    let (x, w) = gauss_legendre(2);
    let mut out = [[[0.0; 2]; 2]; 2];
    for (&xi, &wi) in x.iter().zip(&w) {
        let m = [1.0 - xi, xi];
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    out[a][b][c] += wi * m[a] * m[b] * m[c];
                }
            }
        }
    }
    out
}

fn avf2_attempt(
    model: &GridModel,
    u0: &[f64],
    h: f64,
    cfg: &NewtonConfig,
    ctx: &StepContext,
    diag: &mut StepDiagnostics,
) -> Result<Vec<f64>> {
    let w: Vec<f64> = avf2_weights().iter().flatten().flatten().copied().collect();
    let j = assemble_jacobian(model, &State::from_split(u0));
    let m = timed_factor(ctx, &identity_minus(&j, 0.5 * h), diag)?;
    let len = u0.len();
    let mut z = vec![0.0; len];
    let mut mid = vec![0.0; len];
    let mut u1 = vec![0.0; len];
    let mut tmp = vec![0.0; len];
    simplified_newton(
        cfg,
        &m,
        &mut z,
        |z| {
            for i in 0..len {
                mid[i] = u0[i] + 0.5 * z[i];
                u1[i] = u0[i] + z[i];
            }
            let mut g = z.to_vec();
            add_linear(model, &mid, -h, &mut g, &mut tmp);
            add_cubic(model, &[u0, &u1], &w, -h, &mut g);
            g
        },
        diag,
    )?;
    Ok(u0.iter().zip(&z).map(|(a, b)| a + b).collect())
}

/// Averaged vector field step with the exact average of the cubic term.
pub fn avf2_step_with(
    model: &GridModel,
    u0: &State,
    h: f64,
    cfg: &NewtonConfig,
    ctx: &StepContext,
) -> Result<(State, StepDiagnostics)> {
    check_state(model, u0)?;
    cfg.validate()?;
    with_halving(cfg, u0, h, |u, h, diag| {
        avf2_attempt(model, &u.to_split(), h, cfg, ctx, diag).map(|v| State::from_split(&v))
    })
}

pub fn avf2_step(model: &GridModel, u0: &State, h: f64, cfg: &NewtonConfig) -> Result<State> {
    avf2_step_with(model, u0, h, cfg, &StepContext::sequential(model)).map(|r| r.0)
}

/// Coefficients of the two-stage AVF collocation method in the scaled
/// unknowns `Z_j = h D_j`, where `sigma = u0 + L_1 Z_1 + L_2 Z_2` and
/// `L_j(xi) = int_0^xi l_j` for the Lagrange basis `l_j` on the Gauss nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Avf4Coefficients {
    /// `m[i][a] = (1/b_i) int l_i m_a` with `m = (1, L_1, L_2)`.
    pub m: [[f64; 3]; 2],
    /// `cubic[i][a][b][c] = (1/b_i) int l_i m_a m_b m_c`.
    pub cubic: [[[[f64; 3]; 3]; 3]; 2],
    /// `L_j(1)`, the output weights.
    pub b: [f64; 2],
}

impl Avf4Coefficients {
    pub fn new() -> Self {
        let c = [0.5 - SQRT3 / 6.0, 0.5 + SQRT3 / 6.0];
        let ell = |i: usize, x: f64| (x - c[1 - i]) / (c[i] - c[1 - i]);
        let big_l = |i: usize, x: f64| (0.5 * x * x - c[1 - i] * x) / (c[i] - c[1 - i]);
        let basis = |x: f64| [1.0, big_l(0, x), big_l(1, x)];
        let (xs, ws) = gauss_legendre(4);
        let b = [big_l(0, 1.0), big_l(1, 1.0)];
        let mut m = [[0.0; 3]; 2];
        let mut cubic = [[[[0.0; 3]; 3]; 3]; 2];
        for (&x, &w) in xs.iter().zip(&ws) {
            let mv = basis(x);
            for i in 0..2 {
                let wl = w * ell(i, x) / b[i];
                for a in 0..3 {
                    m[i][a] += wl * mv[a];
                    for bb in 0..3 {
                        for cc in 0..3 {
                            cubic[i][a][bb][cc] += wl * mv[a] * (mv[bb] * mv[cc]);
                        }
                    }
                }
            }
        }
        Self { m, cubic, b }
    }
}

impl Default for Avf4Coefficients {
    fn default() -> Self {
        Self::new()
    }
}

fn avf4_attempt(
    model: &GridModel,
    co: &Avf4Coefficients,
    u0: &[f64],
    h: f64,
    cfg: &NewtonConfig,
    ctx: &StepContext,
    diag: &mut StepDiagnostics,
) -> Result<Vec<f64>> {
    let ch = [
        [h * co.m[0][1], h * co.m[0][2]],
        [h * co.m[1][1], h * co.m[1][2]],
    ];
    let w: [Vec<f64>; 2] =
        std::array::from_fn(|i| co.cubic[i].iter().flatten().flatten().copied().collect());
    let j = assemble_jacobian(model, &State::from_split(u0));
    let m = timed_factor(ctx, &coupled_matrix(&j, ch), diag)?;
    let len = u0.len();
    let mut z = vec![0.0; 2 * len];
    let mut v = vec![0.0; len];
    let mut tmp = vec![0.0; len];
    simplified_newton(
        cfg,
        &m,
        &mut z,
        |z| {
            let (z1, z2) = z.split_at(len);
            let mut g = z.to_vec();
            for i in 0..2 {
                for k in 0..len {
                    v[k] = co.m[i][0] * u0[k] + co.m[i][1] * z1[k] + co.m[i][2] * z2[k];
                }
                let gi = &mut g[i * len..(i + 1) * len];
                add_linear(model, &v, -h, gi, &mut tmp);
                add_cubic(model, &[u0, z1, z2], &w[i], -h, gi);
            }
            g
        },
        diag,
    )?;
    let (z1, z2) = z.split_at(len);
    Ok((0..len)
        .map(|k| u0[k] + co.b[0] * z1[k] + co.b[1] * z2[k])
        .collect())
}

/// Two-stage energy-preserving collocation step.
pub fn avf4_step_with(
    model: &GridModel,
    u0: &State,
    h: f64,
    cfg: &NewtonConfig,
    ctx: &StepContext,
) -> Result<(State, StepDiagnostics)> {
    check_state(model, u0)?;
    cfg.validate()?;
    let co = Avf4Coefficients::new();
    with_halving(cfg, u0, h, |u, h, diag| {
        avf4_attempt(model, &co, &u.to_split(), h, cfg, ctx, diag).map(|v| State::from_split(&v))
    })
}

pub fn avf4_step(model: &GridModel, u0: &State, h: f64, cfg: &NewtonConfig) -> Result<State> {
    avf4_step_with(model, u0, h, cfg, &StepContext::sequential(model)).map(|r| r.0)
}

/// Steps one model with one method, reusing the solver's symbolic analysis
/// and the worker pool across steps.
#[derive(Debug)]
pub struct Integrator<'m> {
    model: &'m GridModel,
    method: MethodId,
    scheme: Mb4Scheme,
    newton: NewtonConfig,
    ctx: StepContext,
}

impl<'m> Integrator<'m> {
    pub fn new(
        model: &'m GridModel,
        method: MethodId,
        newton: NewtonConfig,
        solver: SolverKind,
        workers: usize,
    ) -> Result<Self> {
        newton.validate()?;
        let ctx = StepContext::new(model, solver, workers)?;
        let it = Self {
            model,
            method,
            scheme: Mb4Scheme::default(),
            newton,
            ctx,
        };
        it.prepare()?;
        Ok(it)
    }

    /// Replaces the default MB4 coefficients.
    pub fn with_scheme(mut self, scheme: Mb4Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    fn prepare(&self) -> Result<()> {
        let j = assemble_jacobian(self.model, &State::zeros(self.model.dim()));
        match self.method {
            MethodId::Rk4 => Ok(()),
            MethodId::Gauss2 | MethodId::Avf2 | MethodId::Mb4 => {
                self.ctx.linear.prepare(&identity_minus(&j, 1.0))
            }
            MethodId::Gauss4 | MethodId::Avf4 => {
                self.ctx.linear.prepare(&coupled_matrix(&j, [[1.0, 1.0], [1.0, 1.0]]))
            }
        }
    }

    pub fn method(&self) -> MethodId {
        self.method
    }

    pub fn workers(&self) -> usize {
        self.ctx.pool.workers()
    }

    pub fn step(&self, u0: &State, h: f64) -> Result<(State, StepDiagnostics)> {
        let (m, cfg, ctx) = (self.model, &self.newton, &self.ctx);
        match self.method {
            MethodId::Rk4 => {
                let t0 = Instant::now();
                let u1 = rk4_step(m, u0, h)?;
                let diag = StepDiagnostics {
                    substeps: 1,
                    total_seconds: t0.elapsed().as_secs_f64(),
                    ..StepDiagnostics::default()
                };
                Ok((u1, diag))
            }
            MethodId::Gauss2 => gauss_step_with(m, u0, h, 1, cfg, ctx),
            MethodId::Gauss4 => gauss_step_with(m, u0, h, 2, cfg, ctx),
            MethodId::Avf2 => avf2_step_with(m, u0, h, cfg, ctx),
            MethodId::Avf4 => avf4_step_with(m, u0, h, cfg, ctx),
            MethodId::Mb4 => mb4_step_with(m, &self.scheme, u0, h, cfg, ctx),
        }
    }
}
