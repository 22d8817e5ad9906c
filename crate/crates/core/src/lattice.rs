//! The periodic 2D lattice model `i du/dt = K u - gamma |u|^2 u + V u`.
//!
//! Grid point `(i, j)` (0-based, `i` along x) has linear index `j * nx + i`.
//! Real-split vectors hold all real parts first, then all imaginary parts.

use mb4nls_sparse::CsrMatrix;
use num_complex::Complex64;

use crate::error::{Mb4Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        let g = Self { nx, ny, lx, ly };
        g.validate()?;
        Ok(g)
    }

    /// `n x n` grid on `[0, 2 pi]^2`.
    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n, std::f64::consts::TAU, std::f64::consts::TAU)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Mb4Error::InvalidGrid(format!(
                "need nx, ny >= 2, got {}x{}",
                self.nx, self.ny
            )));
        }
        if !(self.lx > 0.0 && self.ly > 0.0 && self.lx.is_finite() && self.ly.is_finite()) {
            return Err(Mb4Error::InvalidGrid(format!(
                "domain lengths must be positive, got {} x {}",
                self.lx, self.ly
            )));
        }
        Ok(())
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Coordinates of grid point `(i, j)`.
    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.hx(), j as f64 * self.hy())
    }
}

/// `K = -(I (x) D_nx / hx^2 + D_ny / hy^2 (x) I)` with periodic second
/// differences `D`. On a 2-point axis both neighbours coincide and their
/// entries add up.
pub fn build_kinetic(grid: &GridSpec) -> Result<CsrMatrix> {
    grid.validate()?;
    let (nx, ny) = (grid.nx, grid.ny);
    let cx = 1.0 / (grid.hx() * grid.hx());
    let cy = 1.0 / (grid.hy() * grid.hy());
    let mut t = Vec::with_capacity(5 * grid.len());
    for j in 0..ny {
        for i in 0..nx {
            let k = grid.index(i, j);
            t.push((k, k, 2.0 * cx + 2.0 * cy));
            t.push((k, grid.index((i + 1) % nx, j), -cx));
            t.push((k, grid.index((i + nx - 1) % nx, j), -cx));
            t.push((k, grid.index(i, (j + 1) % ny), -cy));
            t.push((k, grid.index(i, (j + ny - 1) % ny), -cy));
        }
    }
    Ok(CsrMatrix::from_triplets(grid.len(), &t)?)
}

/// `v0` at grid point `(0, 0)`, zero elsewhere.
pub fn build_delta_potential(grid: &GridSpec, v0: f64) -> Vec<f64> {
    let mut v = vec![0.0; grid.len()];
    if let Some(first) = v.first_mut() {
        *first = v0;
    }
    v
}

/// The discretized problem. Immutable after construction.
#[derive(Debug, Clone)]
pub struct GridModel {
    grid: GridSpec,
    kinetic: CsrMatrix,
    potential: Vec<f64>,
    gamma: f64,
    /// `K + diag(V)` with every diagonal entry stored.
    linear: CsrMatrix,
}

impl GridModel {
    /// Five-point kinetic matrix on `grid`.
    pub fn new(grid: GridSpec, potential: Vec<f64>, gamma: f64) -> Result<Self> {
        let k = build_kinetic(&grid)?;
        Self::with_kinetic(grid, k, potential, gamma)
    }

    /// Any real symmetric kinetic matrix of matching size is accepted.
    pub fn with_kinetic(
        grid: GridSpec,
        kinetic: CsrMatrix,
        potential: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        grid.validate()?;
        let n = grid.len();
        if kinetic.dim() != n {
            return Err(Mb4Error::DimensionMismatch {
                expected: n,
                found: kinetic.dim(),
            });
        }
        if potential.len() != n {
            return Err(Mb4Error::DimensionMismatch {
                expected: n,
                found: potential.len(),
            });
        }
        if !kinetic.is_symmetric() {
            return Err(Mb4Error::NonSymmetricKinetic);
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Mb4Error::Config(format!("gamma must be >= 0, got {gamma}")));
        }
        let mut linear = kinetic.shifted(0.0, 1.0);
        let diag = linear.diagonal_positions();
        let vals = linear.values_mut();
        for (k, p) in diag.into_iter().enumerate() {
            vals[p.expect("shifted keeps the diagonal")] += potential[k];
        }
        Ok(Self {
            grid,
            kinetic,
            potential,
            gamma,
            linear,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn kinetic(&self) -> &CsrMatrix {
        &self.kinetic
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `A = K + V`, the matrix of the linear part.
    pub fn linear_part(&self) -> &CsrMatrix {
        &self.linear
    }

    /// Number of grid points N.
    pub fn dim(&self) -> usize {
        self.grid.len()
    }
}

/// Complex amplitudes over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    amplitudes: Vec<Complex64>,
}

impl State {
    pub fn new(amplitudes: Vec<Complex64>) -> Self {
        Self { amplitudes }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![Complex64::new(0.0, 0.0); n])
    }

    /// Builds a state from `(p; q)`, length 2N.
    pub fn from_split(split: &[f64]) -> Self {
        let n = split.len() / 2;
        let (p, q) = split.split_at(n);
        Self::new(p.iter().zip(q).map(|(&a, &b)| Complex64::new(a, b)).collect())
    }

    /// `(p; q)` with `p = Re u`, `q = Im u`.
    pub fn to_split(&self) -> Vec<f64> {
        let mut out = vec![0.0; 2 * self.len()];
        self.write_split(&mut out);
        out
    }

    pub fn write_split(&self, out: &mut [f64]) {
        let n = self.len();
        let (p, q) = out.split_at_mut(n);
        for (k, z) in self.amplitudes.iter().enumerate() {
            p[k] = z.re;
            q[k] = z.im;
        }
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.amplitudes
    }

    /// `|u_k|^2` per grid point.
    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.amplitudes.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest componentwise modulus.
    pub fn norm_inf(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

fn check_len(model: &GridModel, n: usize) -> Result<()> {
    if n != model.dim() {
        return Err(Mb4Error::DimensionMismatch {
            expected: model.dim(),
            found: n,
        });
    }
    Ok(())
}

/// `f(u) = -i K u + i gamma |u|^2 u - i V u`.
pub fn rhs(model: &GridModel, u: &State) -> Result<State> {
    check_len(model, u.len())?;
    let mut out = vec![Complex64::new(0.0, 0.0); u.len()];
    model.linear.mul_vec_into(u.as_slice(), &mut out);
    let i = Complex64::i();
    for (o, z) in out.iter_mut().zip(u.as_slice()) {
        *o = -i * *o + i * model.gamma * z.norm_sqr() * z;
    }
    Ok(State::new(out))
}

/// `f` on real-split vectors: `f_p = A q - gamma |u|^2 q`, `f_q = -A p + gamma |u|^2 p`.
pub fn rhs_split(model: &GridModel, x: &[f64], out: &mut [f64]) {
    let n = model.dim();
    let (p, q) = x.split_at(n);
    let (fp, fq) = out.split_at_mut(n);
    model.linear.mul_vec_into(q, fp);
    model.linear.mul_vec_into(p, fq);
    let g = model.gamma;
    for k in 0..n {
        let rho = p[k] * p[k] + q[k] * q[k];
        fp[k] -= g * rho * q[k];
        fq[k] = -fq[k] + g * rho * p[k];
    }
}

/// How the participation ratio is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Participation {
    /// `sum |u|^4 / (sum |u|^2)^2`, equal to `1/N` for uniform density.
    #[default]
    Normalized,
    /// Plain `sum |u|^4`.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    pub u_kinetic: f64,
    pub u_nonlinear: f64,
    pub u_external: f64,
    pub total_energy: f64,
    pub probability: f64,
    pub participation: f64,
}

pub fn observables(model: &GridModel, u: &State) -> Result<Observables> {
    observables_with(model, u, Participation::Normalized)
}

pub fn observables_with(model: &GridModel, u: &State, mode: Participation) -> Result<Observables> {
    check_len(model, u.len())?;
    let mut ku = vec![Complex64::new(0.0, 0.0); u.len()];
    model.kinetic.mul_vec_into(u.as_slice(), &mut ku);
    let uk: Complex64 = u.as_slice().iter().zip(&ku).map(|(a, b)| a.conj() * b).sum();
    let mut prob = 0.0;
    let mut quartic = 0.0;
    let mut ext = 0.0;
    for (z, v) in u.as_slice().iter().zip(&model.potential) {
        let rho = z.norm_sqr();
        prob += rho;
        quartic += rho * rho;
        ext += v * rho;
    }
    // K is real symmetric, so the imaginary part is rounding only.
    debug_assert!(
        !uk.im.is_finite() || uk.im.abs() <= 1e-12 * uk.re.abs().max(model.kinetic.norm_inf() * prob),
        "imaginary kinetic energy {:e}",
        uk.im
    );
    let u_nonlinear = -0.5 * model.gamma * quartic;
    let participation = match mode {
        Participation::Normalized if prob > 0.0 => quartic / (prob * prob),
        Participation::Normalized => 0.0,
        Participation::Raw => quartic,
    };
    Ok(Observables {
        u_kinetic: uk.re,
        u_nonlinear,
        u_external: ext,
        total_energy: uk.re + u_nonlinear + ext,
        probability: prob,
        participation,
    })
}

/// `u(x, y) = 1 + 2 cos x + 2 cos y` at the grid points.
pub fn initial_condition(grid: &GridSpec) -> State {
    let mut u = Vec::with_capacity(grid.len());
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (x, y) = grid.point(i, j);
            u.push(Complex64::new(1.0 + 2.0 * x.cos() + 2.0 * y.cos(), 0.0));
        }
    }
    State::new(u)
}

/// Uniform density with unit total probability.
pub fn uniform_state(grid: &GridSpec) -> State {
    let a = 1.0 / (grid.len() as f64).sqrt();
    State::new(vec![Complex64::new(a, 0.0); grid.len()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_degenerate_sizes() {
        assert!(GridSpec::square(1).is_err());
        assert!(GridSpec::new(3, 3, 0.0, 1.0).is_err());
        let g = GridSpec::new(4, 3, 2.0, 3.0).unwrap();
        assert_eq!((g.hx(), g.hy(), g.len(), g.index(1, 2)), (0.5, 1.0, 12, 9));
    }

    #[test]
    fn kinetic_3x3_diagonal_and_row_sums() {
        let g = GridSpec::square(3).unwrap();
        let k = build_kinetic(&g).unwrap();
        let h = std::f64::consts::TAU / 3.0;
        for i in 0..9 {
            assert!((k.get(i, i) - 4.0 / (h * h)).abs() < 1e-14);
            let (cols, vals) = k.row(i);
            assert_eq!(cols.len(), 5);
            let s: f64 = vals.iter().sum();
            assert!(s.abs() <= 1e-12 / (h * h));
        }
    }

    #[test]
    fn kinetic_2x2_wraparound_doubles() {
        let g = GridSpec::new(2, 2, 2.0, 4.0).unwrap();
        let k = build_kinetic(&g).unwrap();
        let (cx, cy) = (1.0, 0.25);
        let (cols, vals) = k.row(0);
        assert_eq!(cols, &[0, 1, 2]);
        assert_eq!(vals, &[2.0 * cx + 2.0 * cy, -2.0 * cx, -2.0 * cy]);
    }

    #[test]
    fn delta_potential() {
        let g = GridSpec::square(100).unwrap();
        let v = build_delta_potential(&g, -50.0);
        assert_eq!(v.iter().filter(|&&x| x != 0.0).count(), 1);
        assert_eq!(v[0], -50.0);
        assert!(build_delta_potential(&g, 0.0).iter().all(|&x| x == 0.0));
        let g2 = GridSpec::square(2).unwrap();
        assert_eq!(build_delta_potential(&g2, 1.0), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn rhs_trivial_cases() {
        let g = GridSpec::square(4).unwrap();
        let m = GridModel::new(g, vec![0.0; 16], 0.0).unwrap();
        let c = State::new(vec![Complex64::new(0.7, -0.2); 16]);
        let f = rhs(&m, &c).unwrap();
        assert!(f.norm_inf() < 1e-13);

        let zero_k = CsrMatrix::from_triplets(16, &[]).unwrap();
        let m = GridModel::with_kinetic(g, zero_k, vec![0.0; 16], 1.0).unwrap();
        let mut u = State::zeros(16);
        u.as_mut_slice()[5] = Complex64::new(1.0, 1.0);
        let f = rhs(&m, &u).unwrap();
        assert_eq!(f.as_slice()[5], Complex64::new(-2.0, 2.0));
    }

    #[test]
    fn split_round_trip_is_exact() {
        let u = State::new(vec![Complex64::new(0.1, 1e-300), Complex64::new(-3.5, 2.0 / 3.0)]);
        assert_eq!(State::from_split(&u.to_split()), u);
    }

    #[test]
    fn non_symmetric_kinetic_rejected() {
        let g = GridSpec::square(2).unwrap();
        let k = CsrMatrix::from_triplets(4, &[(0, 1, 1.0)]).unwrap();
        assert!(matches!(
            GridModel::with_kinetic(g, k, vec![0.0; 4], 0.0),
            Err(Mb4Error::NonSymmetricKinetic)
        ));
    }

    #[test]
    fn observables_of_zero_and_uniform_states() {
        let g = GridSpec::square(100).unwrap();
        let m = GridModel::new(g, vec![0.0; g.len()], 0.05).unwrap();
        let o = observables(&m, &State::zeros(g.len())).unwrap();
        assert_eq!(
            (o.u_kinetic, o.u_nonlinear, o.u_external, o.total_energy, o.probability, o.participation),
            (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        );
        let o = observables(&m, &uniform_state(&g)).unwrap();
        assert!((o.participation - 1e-4).abs() < 1e-4 * 1e-12, "{}", o.participation);
        assert!((o.probability - 1.0).abs() < 1e-12);
    }

    #[test]
    fn initial_condition_values() {
        let g = GridSpec::square(4).unwrap();
        let u = initial_condition(&g);
        assert_eq!(u.as_slice()[0], Complex64::new(5.0, 0.0));
        // (pi, pi) is grid point (2, 2).
        assert!((u.as_slice()[g.index(2, 2)].re + 3.0).abs() < 1e-14);
    }
}
