mod common;

use common::{problem, random_terms, rel, tiny_beam, tiny_lshape};
use nalgebra::DVector;
use stochcouple::arr::block_operators;
use stochcouple::config::{Config, Preconditioner};
use stochcouple::feti::{
    dense_saddle_solve, solve_saddle, BlockOperators, InterfacePreconditioner, InterfaceProjector,
};
use stochcouple::pc::eval_multivariate;
use stochcouple::Error;

fn ops_for<'a>(
    p: &'a stochcouple::problems::CoupledProblem,
    r: usize,
    seed: u64,
) -> BlockOperators<'a> {
    let (sp, sol) = random_terms(p, r, seed);
    block_operators(p, &sp, &sol, 1e-12).unwrap()
}

#[test]
fn floating_blocks_annihilate_rigid_modes() {
    for cfg in [tiny_beam(), Config::profile("beam-desk").unwrap()] {
        let p = problem(&cfg);
        let ops = ops_for(&p, 3, 1);
        let k2 = ops.dense_k(1);
        let r2 = ops.rigid_expand(&DVector::from_fn(3 * 3, |k, _| 1.0 + k as f64));
        let kr = &k2 * &r2;
        assert!(kr.norm() <= 1e-10 * k2.norm() * r2.norm(), "{}", kr.norm());
    }
}

#[test]
fn projector_identities() {
    let p = problem(&Config::profile("beam-desk").unwrap());
    let ops = ops_for(&p, 3, 2);
    let proj = InterfaceProjector::new(&ops.rigid_interface).unwrap();
    let ri = &ops.rigid_interface;
    let n = ri.nrows();
    for s in 0..5 {
        let x = DVector::from_fn(n, |k, _| ((k * 7 + s * 13) as f64).sin());
        let px = proj.apply(&x);
        let ppx = proj.apply(&px);
        assert!((&ppx - &px).norm() <= 1e-12 * x.norm());
        assert!((ri.transpose() * &px).norm() <= 1e-12 * x.norm() * ri.norm());
        let y = DVector::from_fn(n, |k, _| ((k * 3 + s) as f64).cos());
        let sym = px.dot(&y) - x.dot(&proj.apply(&y));
        assert!(sym.abs() <= 1e-12 * x.norm() * y.norm());
    }
    let e = DVector::from_fn(ri.ncols(), |k, _| k as f64 - 2.0);
    let lam0 = proj.particular(&e);
    assert!((ri.transpose() * &lam0 - &e).norm() <= 1e-12 * e.norm());
}

#[test]
fn pcpg_reaches_default_tolerance() {
    for (cfg, r) in [(tiny_lshape(), 3), (tiny_beam(), 2), (Config::profile("beam-desk").unwrap(), 3)] {
        let p = problem(&cfg);
        let ops = ops_for(&p, r, 3);
        let sol = solve_saddle(&ops, Preconditioner::Scaled, 1e-8, None).unwrap();
        assert!(sol.pcpg.converged);
        assert!(*sol.pcpg.trace.last().unwrap() < 1e-8);
    }
}

#[test]
fn multipliers_match_dense_saddle_solve() {
    for (cfg, r) in [(tiny_lshape(), 3), (tiny_beam(), 2), (Config::profile("beam-desk").unwrap(), 3)] {
        let p = problem(&cfg);
        assert!(p.n_interface() <= 12);
        let ops = ops_for(&p, r, 3);
        let sol = solve_saddle(&ops, Preconditioner::Scaled, 1e-12, None).unwrap();
        let (u1, u2, lam) = dense_saddle_solve(&ops, 1.0).unwrap();
        assert!(rel(sol.lambda.as_slice(), lam.as_slice()) < 1e-8, "{}", cfg.name);
        assert!(rel(sol.u1.as_slice(), u1.as_slice()) < 1e-8);
        assert!(rel(sol.u2.as_slice(), u2.as_slice()) < 1e-8);
    }
}

#[test]
fn recovered_solution_satisfies_block_system() {
    let p = problem(&Config::profile("beam-desk").unwrap());
    let ops = ops_for(&p, 3, 4);
    let sol = solve_saddle(&ops, Preconditioner::Scaled, 1e-10, None).unwrap();
    let (k1, k2) = (ops.dense_k(0), ops.dense_k(1));
    let (c1, c2) = (ops.dense_c(0), ops.dense_c(1));
    let r1 = &k1 * &sol.u1 - &c1 * &sol.lambda - &ops.f_hat[0];
    let r2 = &k2 * &sol.u2 + &c2 * &sol.lambda - &ops.f_hat[1];
    let rc = c2.transpose() * &sol.u2 - c1.transpose() * &sol.u1;
    let scale = ops.f_hat[0].norm() + ops.f_hat[1].norm();
    let total = (r1.norm_squared() + r2.norm_squared() + rc.norm_squared()).sqrt();
    assert!(total < 1e-8 * scale, "{total:e}");
}

#[test]
fn coupling_sign_flip_negates_multiplier_only() {
    let p = problem(&tiny_beam());
    let ops = ops_for(&p, 2, 5);
    let (a1, a2, la) = dense_saddle_solve(&ops, 1.0).unwrap();
    let (b1, b2, lb) = dense_saddle_solve(&ops, -1.0).unwrap();
    assert!(rel(a1.as_slice(), b1.as_slice()) < 1e-10);
    assert!(rel(a2.as_slice(), b2.as_slice()) < 1e-10);
    assert!((&la + &lb).norm() < 1e-10 * la.norm());
}

#[test]
fn scaled_preconditioner_is_symmetric_positive() {
    let p = problem(&Config::profile("beam-desk").unwrap());
    let ops = ops_for(&p, 3, 6);
    let InterfacePreconditioner::Scaled(m) = InterfacePreconditioner::build(&ops, Preconditioner::Scaled).unwrap()
    else {
        panic!("expected the scaled preconditioner");
    };
    assert!((&m - m.transpose()).norm() <= 1e-12 * m.norm());
    let eig = m.clone().symmetric_eigen();
    assert!(eig.eigenvalues.min() > 0.0);
}

#[test]
fn identity_preconditioner_reaches_same_multipliers() {
    let p = problem(&Config::profile("beam-desk").unwrap());
    let ops = ops_for(&p, 2, 7);
    let a = solve_saddle(&ops, Preconditioner::Scaled, 1e-10, None).unwrap();
    let b = solve_saddle(&ops, Preconditioner::Identity, 1e-10, None).unwrap();
    assert!(rel(a.lambda.as_slice(), b.lambda.as_slice()) < 1e-7);
    assert!(a.pcpg.iterations <= b.pcpg.iterations);
}

#[test]
fn factor_weights_match_quadrature() {
    let p = problem(&tiny_lshape());
    let (sp, sol) = random_terms(&p, 2, 8);
    let ops = block_operators(&p, &sp, &sol, 1e-12).unwrap();
    let mom = &ops.moments;
    for i in 0..2 {
        let sub = &p.sub[i];
        let fam = sub.family();
        let (x, w) = fam.gauss_rule(8);
        let phi = sol.phi(i);
        let other = sol.phi(1 - i);
        for j in 0..sub.n_modes() {
            for l in 0..2 {
                for lp in 0..2 {
                    let mut e = 0.0;
                    for (a, wa) in x.iter().zip(&w) {
                        for (b, wb) in x.iter().zip(&w) {
                            let psi_k = eval_multivariate(fam, &sub.field.index_set, &[*a, *b]).unwrap();
                            let psi_t = eval_multivariate(fam, &sp[i].trial, &[*a, *b]).unwrap();
                            let f = |v: &[f64]| v.iter().zip(&psi_t).map(|(c, q)| c * q).sum::<f64>();
                            e += wa * wb * psi_k[j] * f(&phi[l]) * f(&phi[lp]);
                        }
                    }
                    let g: f64 = other[l].iter().zip(&other[lp]).map(|(a, b)| a * b).sum();
                    let expect = e * g;
                    assert!((mom.weight(i, j, l, lp) - expect).abs() < 1e-12 * (1.0 + expect.abs()));
                }
            }
        }
    }
}

#[test]
fn strict_pseudoinverse_rejects_incompatible_load() {
    let p = problem(&tiny_beam());
    let ops = ops_for(&p, 2, 9);
    let n = ops.k[1].n * 2;
    let b = ops.rigid_expand(&DVector::from_element(6, 1.0));
    match ops.apply_k2_pseudoinverse(&b, 1e-10) {
        Err(Error::Incompatible { .. }) => {}
        other => panic!("expected incompatibility, got {other:?}"),
    }
    let compatible = ops.rigid_project(&DVector::from_fn(n, |k, _| (k as f64).sin()));
    let x = ops.apply_k2_pseudoinverse(&compatible, 1e-10).unwrap();
    let back = ops.apply_k(1, &x);
    assert!((back - &compatible).norm() < 1e-9 * compatible.norm());
}

#[test]
fn first_subdomain_inverse_is_consistent() {
    let p = problem(&tiny_lshape());
    let ops = ops_for(&p, 3, 10);
    let n = ops.k[0].n * 3;
    let b = DVector::from_fn(n, |k, _| 1.0 + (k as f64 * 0.37).cos());
    let x = ops.apply_k1_inverse(&b).unwrap();
    assert!((ops.apply_k(0, &x) - &b).norm() < 1e-10 * b.norm());
    let dense = ops.dense_k(0).lu().solve(&b).unwrap();
    assert!(rel(x.as_slice(), dense.as_slice()) < 1e-9);
}
