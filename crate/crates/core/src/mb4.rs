//! The MB4 step: stage residual, simplified Newton on the diagonalized stage
//! matrix, and step-size halving when Newton fails.

use std::time::Instant;

use mb4nls_sparse::{CsrMatrix, DenseSmall, Factorization};
use num_complex::Complex64;

use crate::error::{Mb4Error, Result};
use crate::jacobian::{assemble_jacobian, identity_minus};
use crate::lattice::{GridModel, State};
use crate::linear::{LinearSolver, StepContext, WorkerPool};
use crate::scheme::{lagrange_basis, Mb4Scheme, WTensor};

/// Stopping rule and failure handling for the simplified Newton iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Stop once the sup-norm of the correction is at most this.
    pub epsilon: f64,
    pub max_iters: usize,
    /// How many times a failed step may be retried with half the step size.
    pub max_halvings: u32,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-13,
            max_iters: 50,
            max_halvings: 4,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Mb4Error::Config(format!(
                "newton epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iters == 0 {
            return Err(Mb4Error::Config("newton max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-step bookkeeping. Times are wall-clock seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepDiagnostics {
    /// Newton iterations over all attempts, failed ones included.
    pub newton_iters: usize,
    /// Halvings needed for the accepted result.
    pub halvings: u32,
    /// Sub-steps making up the accepted result.
    pub substeps: usize,
    pub factor_seconds: f64,
    pub solve_seconds: f64,
    pub total_seconds: f64,
}

impl StepDiagnostics {
    /// Share of the step spent factoring and solving.
    pub fn linear_fraction(&self) -> f64 {
        if self.total_seconds > 0.0 {
            (self.factor_seconds + self.solve_seconds) / self.total_seconds
        } else {
            0.0
        }
    }
}

/// `u0` and the three stage values, with the interpolating polynomial
/// through `(0, u0), (c1, U1), (c2, U2), (c3, U3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageVector {
    nodes: [f64; 4],
    values: [State; 4],
}

impl StageVector {
    pub fn new(scheme: &Mb4Scheme, u0: State, stages: [State; 3]) -> Self {
        let [a, b, c] = stages;
        Self {
            nodes: scheme.all_nodes(),
            values: [u0, a, b, c],
        }
    }

    pub fn u0(&self) -> &State {
        &self.values[0]
    }

    /// Stage `i` in `0..3`.
    pub fn stage(&self, i: usize) -> &State {
        &self.values[i + 1]
    }

    /// The last stage, which is the step result.
    pub fn endpoint(&self) -> &State {
        &self.values[3]
    }

    /// Interpolant at `zeta` in units of the step.
    pub fn eval(&self, zeta: f64) -> State {
        let n = self.values[0].len();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (j, v) in self.values.iter().enumerate() {
            let l = lagrange_basis(&self.nodes, j, zeta);
            for (o, z) in out.iter_mut().zip(v.as_slice()) {
                *o += l * z;
            }
        }
        State::new(out)
    }
}

const PAIRS: [(usize, usize); 10] = [
    (0, 0),
    (0, 1),
    (0, 2),
    (0, 3),
    (1, 1),
    (1, 2),
    (1, 3),
    (2, 2),
    (2, 3),
    (3, 3),
];

/// `W` folded over the symmetric last two indices.
fn pair_weights(w: &WTensor) -> [[[f64; 10]; 4]; 3] {
    let mut out = [[[0.0; 10]; 4]; 3];
    for i in 0..3 {
        for a in 0..4 {
            for (p, &(b, c)) in PAIRS.iter().enumerate() {
                out[i][a][p] = if b == c {
                    w[i][a][b][b]
                } else {
                    w[i][a][b][c] + w[i][a][c][b]
                };
            }
        }
    }
    out
}

/// `W` re-expressed on the basis `(1, l_1, l_2, l_3)`: index 0 sums over all
/// four original indices.
fn increment_weights(w: &WTensor) -> WTensor {
    let span = |a: usize| if a == 0 { 0..4 } else { a..a + 1 };
    let mut out = *w;
    for (i, wi) in w.iter().enumerate() {
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    let mut acc = 0.0;
                    for x in span(a) {
                        for y in span(b) {
                            for z in span(c) {
                                acc += wi[x][y][z];
                            }
                        }
                    }
                    out[i][a][b][c] = acc;
                }
            }
        }
    }
    out
}

/// Stage residual on split vectors; `z[0]` is `u0`, `z[1..]` the stages.
///
/// Evaluated in increment form: with `d_j = U_j - u0`, the terms that depend
/// on `u0` alone are formed once and the iteration-dependent part only
/// touches the increments, so its rounding error scales with `|h f|`
/// rather than `|A u|`.
fn phi_split(model: &GridModel, scheme: &Mb4Scheme, z: [&[f64]; 4], h: f64) -> [Vec<f64>; 3] {
    let n = model.dim();
    let a = model.linear_part();
    let g = model.gamma();
    let e = scheme.e_ext();
    let wp = pair_weights(&increment_weights(scheme.w()));
    let d: [Vec<f64>; 3] = std::array::from_fn(|j| {
        z[j + 1].iter().zip(z[0]).map(|(x, y)| x - y).collect()
    });

    // u0-only part: row sum of E times A u0, and sum of W times |u0|^2 u0.
    let mut a0 = vec![0.0; 2 * n];
    {
        let (zp, zq) = z[0].split_at(n);
        let (ap, aq) = a0.split_at_mut(n);
        a.mul_vec_into(zq, ap);
        a.mul_vec_into(zp, aq);
    }
    let mut out: [Vec<f64>; 3] = std::array::from_fn(|i| {
        let rs: f64 = e[i].iter().sum();
        let w0 = wp[i][0][0];
        let mut o = vec![0.0; 2 * n];
        for k in 0..n {
            let (p, q) = (z[0][k], z[0][n + k]);
            let m = p * p + q * q;
            let cp = h * (rs * a0[k] - g * w0 * m * q);
            let cq = h * (g * w0 * m * p - rs * a0[n + k]);
            o[k] = d[i][k] - cp;
            o[n + k] = d[i][n + k] - cq;
        }
        o
    });

    let mut v = vec![0.0; 2 * n];
    let mut av = vec![0.0; 2 * n];
    for (i, o) in out.iter_mut().enumerate() {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = e[i][1] * d[0][k] + e[i][2] * d[1][k] + e[i][3] * d[2][k];
        }
        let (vp, vq) = v.split_at(n);
        let (ap, aq) = av.split_at_mut(n);
        a.mul_vec_into(vq, ap);
        a.mul_vec_into(vp, aq);
        for k in 0..n {
            o[k] -= h * ap[k];
            o[n + k] += h * aq[k];
        }
    }
    if g != 0.0 {
        for k in 0..n {
            let zc: [Complex64; 4] = std::array::from_fn(|s| {
                if s == 0 {
                    Complex64::new(z[0][k], z[0][n + k])
                } else {
                    Complex64::new(d[s - 1][k], d[s - 1][n + k])
                }
            });
            let pr: [Complex64; 10] = std::array::from_fn(|p| zc[PAIRS[p].0] * zc[PAIRS[p].1]);
            for (i, o) in out.iter_mut().enumerate() {
                let mut s = Complex64::new(0.0, 0.0);
                for (aa, za) in zc.iter().enumerate() {
                    let mut t = Complex64::new(0.0, 0.0);
                    // The pure u0 term is already in the constant part.
                    let skip = usize::from(aa == 0);
                    for (wv, pv) in wp[i][aa].iter().zip(&pr).skip(skip) {
                        t += wv * pv;
                    }
                    s += za.conj() * t;
                }
                // i gamma s
                o[k] += h * g * s.im;
                o[n + k] -= h * g * s.re;
            }
        }
    }
    out
}

/// `Phi_i(U) = U_i - u0 - h [ -i A (sum_j E_ij U_j) + i gamma sum W_i conj(U_a) U_b U_c ]`
/// with the sums running over `u0` and the three stages.
pub fn eval_phi(
    model: &GridModel,
    scheme: &Mb4Scheme,
    u0: &State,
    stages: &[State; 3],
    h: f64,
) -> Result<[State; 3]> {
    for s in std::iter::once(u0).chain(stages.iter()) {
        if s.len() != model.dim() {
            return Err(Mb4Error::DimensionMismatch {
                expected: model.dim(),
                found: s.len(),
            });
        }
    }
    let z: Vec<Vec<f64>> = std::iter::once(u0).chain(stages.iter()).map(State::to_split).collect();
    let out = phi_split(model, scheme, [&z[0], &z[1], &z[2], &z[3]], h);
    Ok(out.map(|v| State::from_split(&v)))
}

/// The three factored matrices `I - h lambda_i J`.
#[derive(Debug)]
pub struct StageSystem {
    factors: [Factorization; 3],
}

impl StageSystem {
    pub fn new(
        j: &CsrMatrix,
        h: f64,
        scheme: &Mb4Scheme,
        linear: &LinearSolver,
        pool: &WorkerPool,
    ) -> Result<Self> {
        let lambda = scheme.eigenvalues();
        let [a, b, c] = pool.run3(|i| linear.factor(&identity_minus(j, h * lambda[i])));
        Ok(Self {
            factors: [a?, b?, c?],
        })
    }

    /// Jacobian at `u0` and the three factorizations for step size `h`.
    pub fn for_step(
        model: &GridModel,
        scheme: &Mb4Scheme,
        u0: &State,
        h: f64,
        ctx: &StepContext,
    ) -> Result<Self> {
        check_state(model, u0)?;
        let j = assemble_jacobian(model, u0);
        Self::new(&j, h, scheme, &ctx.linear, &ctx.pool)
    }

    pub fn solve(&self, i: usize, rhs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.factors[i].solve(rhs)?)
    }
}

/// `out_i = sign * sum_j m_ij x_j`.
fn combine(m: &DenseSmall, x: &[Vec<f64>; 3], sign: f64) -> [Vec<f64>; 3] {
    std::array::from_fn(|i| {
        let (c0, c1, c2) = (sign * m[(i, 0)], sign * m[(i, 1)], sign * m[(i, 2)]);
        x[0].iter()
            .zip(&x[1])
            .zip(&x[2])
            .map(|((a, b), c)| c0 * a + c1 * b + c2 * c)
            .collect()
    })
}

/// Sup-norm, or infinity if anything is not finite.
pub(crate) fn max_abs(x: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for &v in x {
        if !v.is_finite() {
            return f64::INFINITY;
        }
        m = m.max(v.abs());
    }
    m
}

/// One simplified-Newton correction in split form: transforms `-Phi` by
/// `T^{-1}`, solves the three decoupled systems, and transforms back.
fn correction_split(
    scheme: &Mb4Scheme,
    sys: &StageSystem,
    phi: &[Vec<f64>; 3],
    pool: &WorkerPool,
    solve_seconds: &mut f64,
) -> Result<[Vec<f64>; 3]> {
    let rhs = combine(scheme.t_inv(), phi, -1.0);
    let t0 = Instant::now();
    let [a, b, c] = pool.run3(|i| sys.solve(i, &rhs[i]));
    *solve_seconds += t0.elapsed().as_secs_f64();
    Ok(combine(scheme.t(), &[a?, b?, c?], 1.0))
}

/// The correction `r` solving `(I - h E (x) J) r = -Phi(U)`, computed through
/// the eigendecomposition of `E`. Returned per stage as split vectors.
pub fn newton_correction(
    model: &GridModel,
    scheme: &Mb4Scheme,
    u0: &State,
    stages: &[State; 3],
    h: f64,
    ctx: &StepContext,
) -> Result<[Vec<f64>; 3]> {
    let phi = eval_phi(model, scheme, u0, stages, h)?.map(|s| s.to_split());
    let sys = StageSystem::for_step(model, scheme, u0, h, ctx)?;
    correction_split(scheme, &sys, &phi, &ctx.pool, &mut 0.0)
}

/// Simplified Newton from `U = (u0, u0, u0)` with the Jacobian frozen at `u0`.
#[allow(clippy::too_many_arguments)]
fn newton_split(
    model: &GridModel,
    scheme: &Mb4Scheme,
    sys: &StageSystem,
    u0: &[f64],
    h: f64,
    cfg: &NewtonConfig,
    pool: &WorkerPool,
    diag: &mut StepDiagnostics,
) -> Result<[Vec<f64>; 3]> {
    let mut u: [Vec<f64>; 3] = std::array::from_fn(|_| u0.to_vec());
    let mut last = f64::INFINITY;
    for it in 1..=cfg.max_iters {
        diag.newton_iters += 1;
        let phi = phi_split(model, scheme, [u0, &u[0], &u[1], &u[2]], h);
        let r = correction_split(scheme, sys, &phi, pool, &mut diag.solve_seconds)?;
        last = r.iter().map(|v| max_abs(v)).fold(0.0, f64::max);
        if !last.is_finite() {
            return Err(Mb4Error::NonConvergence {
                iterations: it,
                residual: last,
            });
        }
        for (ui, ri) in u.iter_mut().zip(&r) {
            for (a, b) in ui.iter_mut().zip(ri) {
                *a += b;
            }
        }
        if last <= cfg.epsilon {
            return Ok(u);
        }
    }
    Err(Mb4Error::NonConvergence {
        iterations: cfg.max_iters,
        residual: last,
    })
}

/// Solves the stage equations of one step of size `h` from `u0` with the
/// factored stage matrices `sys`, without halving. Also returns the
/// iteration count.
pub fn newton_solve(
    model: &GridModel,
    scheme: &Mb4Scheme,
    sys: &StageSystem,
    u0: &State,
    h: f64,
    cfg: &NewtonConfig,
    pool: &WorkerPool,
) -> Result<(StageVector, usize)> {
    check_state(model, u0)?;
    cfg.validate()?;
    let mut diag = StepDiagnostics::default();
    let z = newton_split(model, scheme, sys, &u0.to_split(), h, cfg, pool, &mut diag)?;
    let stages = z.map(|v| State::from_split(&v));
    Ok((StageVector::new(scheme, u0.clone(), stages), diag.newton_iters))
}

pub(crate) fn check_state(model: &GridModel, u: &State) -> Result<()> {
    if u.len() != model.dim() {
        return Err(Mb4Error::DimensionMismatch {
            expected: model.dim(),
            found: u.len(),
        });
    }
    Ok(())
}

/// Runs `attempt(u0, h)`; on Newton failure retries with `2^k` sub-steps of
/// size `h / 2^k` for `k = 1..=max_halvings`. Other errors end the step.
pub(crate) fn with_halving<F>(
    cfg: &NewtonConfig,
    u0: &State,
    h: f64,
    mut attempt: F,
) -> Result<(State, StepDiagnostics)>
where
    F: FnMut(&State, f64, &mut StepDiagnostics) -> Result<State>,
{
    let start = Instant::now();
    let mut diag = StepDiagnostics::default();
    let mut err = match attempt(u0, h, &mut diag) {
        Ok(u1) => {
            diag.substeps = 1;
            diag.total_seconds = start.elapsed().as_secs_f64();
            return Ok((u1, diag));
        }
        Err(e) if e.is_non_convergence() => e,
        Err(e) => return Err(e),
    };
    for k in 1..=cfg.max_halvings {
        let m = 1usize << k;
        let sub = h / m as f64;
        let mut u = u0.clone();
        let mut failed = None;
        for _ in 0..m {
            match attempt(&u, sub, &mut diag) {
                Ok(next) => u = next,
                Err(e) if e.is_non_convergence() => {
                    failed = Some(e);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        match failed {
            None => {
                diag.halvings = k;
                diag.substeps = m;
                diag.total_seconds = start.elapsed().as_secs_f64();
                return Ok((u, diag));
            }
            Some(e) => err = e,
        }
    }
    Err(err)
}

/// One MB4 step with halving, using `ctx` for factorizations.
pub fn mb4_step_with(
    model: &GridModel,
    scheme: &Mb4Scheme,
    u0: &State,
    h: f64,
    cfg: &NewtonConfig,
    ctx: &StepContext,
) -> Result<(State, StepDiagnostics)> {
    check_state(model, u0)?;
    cfg.validate()?;
    with_halving(cfg, u0, h, |u, h, diag| {
        let t0 = Instant::now();
        let sys = StageSystem::for_step(model, scheme, u, h, ctx)?;
        diag.factor_seconds += t0.elapsed().as_secs_f64();
        let z = newton_split(model, scheme, &sys, &u.to_split(), h, cfg, &ctx.pool, diag)?;
        Ok(State::from_split(&z[2]))
    })
}

/// One MB4 step with a sequential direct solver.
pub fn mb4_step(
    model: &GridModel,
    scheme: &Mb4Scheme,
    u0: &State,
    h: f64,
    cfg: &NewtonConfig,
) -> Result<(State, StepDiagnostics)> {
    mb4_step_with(model, scheme, u0, h, cfg, &StepContext::sequential(model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{initial_condition, GridSpec};

    fn model() -> GridModel {
        let g = GridSpec::new(4, 4, 2.0, 2.0).unwrap();
        GridModel::new(g, vec![0.3; 16], 1.5).unwrap()
    }

    #[test]
    fn residual_vanishes_for_constant_stages_at_zero_step() {
        let m = model();
        let s = Mb4Scheme::default();
        let u = initial_condition(m.grid());
        let phi = eval_phi(&m, &s, &u, &[u.clone(), u.clone(), u.clone()], 0.0).unwrap();
        for p in &phi {
            assert_eq!(p.norm_inf(), 0.0);
        }
    }

    #[test]
    fn zero_step_returns_start() {
        let m = model();
        let u = initial_condition(m.grid());
        let (u1, d) = mb4_step(&m, &Mb4Scheme::default(), &u, 0.0, &NewtonConfig::default()).unwrap();
        assert_eq!(u1, u);
        assert_eq!(d.newton_iters, 1);
    }

    #[test]
    fn converged_stages_have_small_residual() {
        let m = model();
        let s = Mb4Scheme::default();
        let u = initial_condition(m.grid());
        let ctx = StepContext::sequential(&m);
        let sys = StageSystem::for_step(&m, &s, &u, 0.01, &ctx).unwrap();
        let (sv, iters) =
            newton_solve(&m, &s, &sys, &u, 0.01, &NewtonConfig::default(), &ctx.pool).unwrap();
        assert!(iters > 1 && iters < 50);
        let stages = [sv.stage(0).clone(), sv.stage(1).clone(), sv.stage(2).clone()];
        let phi = eval_phi(&m, &s, &u, &stages, 0.01).unwrap();
        for p in &phi {
            assert!(p.norm_inf() < 1e-12, "{}", p.norm_inf());
        }
        // Interpolant passes through its data.
        let c = s.nodes();
        for i in 0..3 {
            let d = sv.eval(c[i]);
            for (a, b) in d.as_slice().iter().zip(sv.stage(i).as_slice()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn one_iteration_budget_exhausts_halvings() {
        let m = model();
        let u = initial_condition(m.grid());
        let cfg = NewtonConfig {
            max_iters: 1,
            ..NewtonConfig::default()
        };
        let e = mb4_step(&m, &Mb4Scheme::default(), &u, 0.05, &cfg).unwrap_err();
        assert!(matches!(e, Mb4Error::NonConvergence { iterations: 1, .. }));
    }

    #[test]
    fn max_abs_flags_nan() {
        assert_eq!(max_abs(&[1.0, f64::NAN, 2.0]), f64::INFINITY);
        assert_eq!(max_abs(&[-3.0, 2.0]), 3.0);
    }
}
