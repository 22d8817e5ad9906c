//! Stage residual, stage solve, Jacobian and right-hand side against dense
//! reference computations.

mod common;

use common::checks::*;
use common::*;
use mb4nls::jacobian::assemble_jacobian;
use mb4nls::lattice::{initial_condition, rhs, rhs_split, GridModel, State};
use mb4nls::linear::StepContext;
use mb4nls::mb4::{newton_solve, NewtonConfig, StageSystem};
use mb4nls::scheme::Mb4Scheme;

fn model(gamma: f64, v: f64) -> GridModel {
    model4(gamma, v)
}

#[test]
fn quadrature_nodes_are_independent_and_accurate() {
    let (x, w) = golub_welsch(64);
    let (x2, w2) = mb4nls::quadrature::gauss_legendre(64);
    for i in 0..64 {
        assert!((x[i] - x2[i]).abs() < 1e-14);
        assert!((w[i] - w2[i]).abs() < 1e-14);
    }
}

#[test]
fn phi_matches_quadrature_without_nonlinearity() {
    let m = model(0.0, 0.0);
    let u0 = initial_condition(m.grid());
    let d = phi_quadrature_error(&m, &Mb4Scheme::default(), &u0, 0, 0.3, 0.05);
    assert!(d <= 1e-12, "{d:e}");
}

#[test]
fn phi_matches_quadrature_with_nonlinearity_and_potential() {
    for (gamma, v, seed) in [(0.1, 0.0, 10), (0.1, -5.0, 20), (1.3, 2.0, 30)] {
        let m = model(gamma, v);
        let u0 = random_state(16, seed, 1.5);
        let d = phi_quadrature_error(&m, &Mb4Scheme::default(), &u0, seed, 0.2, 0.02);
        assert!(d <= 1e-12, "gamma={gamma}: {d:e}");
    }
}

#[test]
fn phi_is_node_choice_consistent() {
    // Other nodes give another scheme, but the residual must still match its
    // own quadrature.
    let m = model(0.1, 0.0);
    let s = Mb4Scheme::new(-712.5, [0.2, 0.6, 1.0]).unwrap();
    let u0 = initial_condition(m.grid());
    assert!(phi_quadrature_error(&m, &s, &u0, 6, 0.1, 0.03) <= 1e-12);
}

#[test]
fn converged_linear_stages_satisfy_quadrature_residual() {
    let m = model(0.0, 1.0);
    let s = Mb4Scheme::default();
    let u0 = initial_condition(m.grid());
    let ctx = StepContext::sequential(&m);
    let h = 0.05;
    let sys = StageSystem::for_step(&m, &s, &u0, h, &ctx).unwrap();
    let (sv, iters) = newton_solve(&m, &s, &sys, &u0, h, &NewtonConfig::default(), &ctx.pool).unwrap();
    assert!(iters <= 3, "linear problem took {iters} iterations");
    let z = [u0, sv.stage(0).clone(), sv.stage(1).clone(), sv.stage(2).clone()];
    let res = phi_by_quadrature(&m, &s, &z, h);
    for r in &res {
        assert!(max_norm(r) <= 1e-11, "{:e}", max_norm(r));
    }
}

#[test]
fn eigendecomposed_solve_matches_dense_coupled_system() {
    for (gamma, h, seed) in [(0.1, 0.01, 40), (0.8, 0.05, 50)] {
        let worst = coupled_solve_error(gamma, h, seed);
        assert!(worst <= 1e-11, "gamma={gamma}: {worst:e}");
    }
}

#[test]
fn sparse_jacobian_matches_dense_formula() {
    let m = model(0.7, 3.0);
    let u = random_state(16, 5, 2.0);
    let j = assemble_jacobian(&m, &u);
    let want = dense_jacobian(&dense_linear(&m), 0.7, u.as_slice());
    for r in 0..32 {
        for c in 0..32 {
            assert!((j.get(r, c) - want[(r, c)]).abs() <= 1e-14 * want[(r, c)].abs().max(1.0));
        }
    }
}

#[test]
fn jacobian_matches_central_differences() {
    for (gamma, seed) in [(0.1, 60), (1.0, 61), (5.0, 62)] {
        let rel = jacobian_fd_error(gamma, seed);
        assert!(rel <= 1e-6, "gamma={gamma}: relative {rel:e}");
    }
}

#[test]
fn rhs_matches_dense_evaluation() {
    let m = model(0.4, -3.0);
    let u = random_state(16, 70, 1.0);
    let got = rhs(&m, &u).unwrap();
    let want = dense_f(&dense_linear(&m), 0.4, u.as_slice());
    assert!(max_diff(got.as_slice(), &want) <= 1e-13);

    let mut split_out = vec![0.0; 32];
    rhs_split(&m, &u.to_split(), &mut split_out);
    assert!(max_diff(State::from_split(&split_out).as_slice(), &want) <= 1e-13);
}

#[test]
fn flow_is_tangent_to_energy_and_probability_levels() {
    use mb4nls::lattice::observables;
    let m = model(0.9, -4.0);
    let u = random_state(16, 80, 1.0);
    let f = rhs(&m, &u).unwrap();
    let eps = 1e-5;
    let shift = |s: f64| {
        State::new(u.as_slice().iter().zip(f.as_slice()).map(|(a, b)| a + s * b).collect())
    };
    let (op, om) = (observables(&m, &shift(eps)).unwrap(), observables(&m, &shift(-eps)).unwrap());
    let o = observables(&m, &u).unwrap();
    let dh = (op.total_energy - om.total_energy) / (2.0 * eps);
    let dp = (op.probability - om.probability) / (2.0 * eps);
    let fnorm = max_norm(f.as_slice());
    assert!(dh.abs() <= 1e-6 * fnorm * o.total_energy.abs().max(1.0), "dH/dt = {dh:e}");
    assert!(dp.abs() <= 1e-6 * fnorm * o.probability, "dP/dt = {dp:e}");
}

#[test]
fn energy_gradient_matches_rhs() {
    // f = (1/2) S grad H on the split vector, so dH/dp = -2 f_q and
    // dH/dq = 2 f_p.
    use mb4nls::lattice::observables;
    let m = model(0.6, -2.0);
    let x = random_state(16, 90, 1.2).to_split();
    let mut f = vec![0.0; 32];
    rhs_split(&m, &x, &mut f);
    let energy = |v: &[f64]| observables(&m, &State::from_split(v)).unwrap().total_energy;
    let step = 1e-5;
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..32 {
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp[k] += step;
        xm[k] -= step;
        let fd = (energy(&xp) - energy(&xm)) / (2.0 * step);
        let analytic = if k < 16 { -2.0 * f[16 + k] } else { 2.0 * f[k - 16] };
        num += (fd - analytic).powi(2);
        den += analytic * analytic;
    }
    assert!((num / den).sqrt() <= 1e-6, "relative {:e}", (num / den).sqrt());
}
