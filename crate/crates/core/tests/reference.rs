mod common;

use common::{problem, rel, tiny_beam, tiny_lshape};
use stochcouple::config::Config;
use stochcouple::pc::eval_multivariate_mixed;
use stochcouple::problems::as_monolithic;
use stochcouple::reference::{monte_carlo_reference, solve_coupled_sg, solve_monolithic_sg, solve_sample};
use stochcouple::sparse::CsrMatrix;
use stochcouple::Error;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn deterministic_sg_has_only_a_mean_block() {
    for cfg in [tiny_lshape(), tiny_beam()] {
        let p = problem(&cfg.with_sigma(0.0));
        let mono = as_monolithic(&p).unwrap();
        let sg = solve_monolithic_sg(&p, 2).unwrap();
        let scale = norm(sg.mean());
        for c in &sg.coeffs[1..] {
            assert!(norm(c) <= 1e-12 * scale);
        }
        let direct = solve_sample(&p, &mono, &vec![0.0; mono.families.len()]).unwrap();
        assert!(rel(sg.mean(), &direct) < 1e-9);
    }
}

#[test]
fn sg_residual_is_orthogonal_to_the_basis() {
    let p = problem(&tiny_lshape());
    let mono = as_monolithic(&p).unwrap();
    let sg = solve_monolithic_sg(&p, 2).unwrap();
    let d = mono.families.len();
    let rules: Vec<_> = mono.families.iter().map(|f| f.gauss_rule(5)).collect();
    let n = mono.n_dofs;
    let np = sg.index_set.len();
    let mut proj = vec![vec![0.0; n]; np];
    let modes: Vec<&CsrMatrix> = mono.modes.iter().collect();
    let total = 5usize.pow(d as u32);
    for q in 0..total {
        let (mut xi, mut w) = (vec![0.0; d], 1.0);
        let mut k = q;
        for (dim, (x, wt)) in rules.iter().enumerate() {
            xi[dim] = x[k % 5];
            w *= wt[k % 5];
            k /= 5;
        }
        let psi_k = eval_multivariate_mixed(&mono.families, &mono.mode_indices, &xi).unwrap();
        let kq = CsrMatrix::combine(&modes, &psi_k);
        let u = sg.sample(&xi).unwrap();
        let mut r = vec![0.0; n];
        kq.matvec_into(&u, &mut r);
        let psi = eval_multivariate_mixed(&sg.families, &sg.index_set, &xi).unwrap();
        for a in 0..np {
            for (pi, (ri, fi)) in proj[a].iter_mut().zip(r.iter().zip(mono.load.iter())) {
                *pi += w * psi[a] * (ri - if a == 0 { *fi } else { 0.0 });
            }
        }
    }
    let f = norm(mono.load.as_slice());
    for block in &proj {
        assert!(norm(block) < 1e-8 * f, "{:e}", norm(block) / f);
    }
}

#[test]
fn coupled_sg_matches_monolithic_restriction() {
    for cfg in [tiny_lshape(), tiny_beam()] {
        let p = problem(&cfg);
        let mono = as_monolithic(&p).unwrap();
        let sg = solve_monolithic_sg(&p, 2).unwrap();
        let coupled = solve_coupled_sg(&p, 2).unwrap();
        assert_eq!(coupled.index_set, sg.index_set);
        for (a, c) in sg.coeffs.iter().enumerate() {
            let [r1, r2] = mono.restrict(c);
            let scale = norm(sg.mean());
            let d1 = rel(&coupled.u1[a], r1.as_slice()) * norm(r1.as_slice());
            let d2 = rel(&coupled.u2[a], r2.as_slice()) * norm(r2.as_slice());
            assert!(d1 < 1e-8 * scale && d2 < 1e-8 * scale, "{} block {a}", cfg.name);
        }
    }
}

#[test]
fn deterministic_multipliers_balance_interface_reactions() {
    let p = problem(&tiny_beam().with_sigma(0.0));
    let coupled = solve_coupled_sg(&p, 1).unwrap();
    let lam = &coupled.lambda[0];
    let reaction = |i: usize, u: &[f64]| -> Vec<f64> {
        let sub = &p.sub[i];
        let mut r = vec![0.0; sub.n_dofs()];
        sub.modes[0].matvec_into(u, &mut r);
        sub.interface.iter().map(|&k| sub.load[k] - r[k]).collect()
    };
    let r1 = reaction(0, &coupled.u1[0]);
    let r2 = reaction(1, &coupled.u2[0]);
    let scale = norm(lam);
    assert!(scale > 0.0);
    for k in 0..lam.len() {
        assert!((r1[k] + lam[k]).abs() < 1e-9 * scale);
        assert!((r2[k] - lam[k]).abs() < 1e-9 * scale);
    }
    let [i1, i2] = [0, 1].map(|i| p.sub[i].restrict_interface(if i == 0 { &coupled.u1[0] } else { &coupled.u2[0] }));
    assert!((&i1 - &i2).norm() < 1e-10 * i1.norm());
}

#[test]
fn zero_load_gives_zero_solution() {
    let mut cfg = tiny_lshape();
    cfg.bc.load1.body = vec![0.0];
    let p = problem(&cfg);
    let sg = solve_monolithic_sg(&p, 2).unwrap();
    assert!(sg.coeffs.iter().all(|c| c.iter().all(|x| *x == 0.0)));
    let mc = monte_carlo_reference(&p, 10, 1).unwrap();
    assert!(mc.mean().iter().all(|x| *x == 0.0));
}

#[test]
fn deterministic_monte_carlo_has_no_spread() {
    let p = problem(&tiny_beam().with_sigma(0.0));
    let mono = as_monolithic(&p).unwrap();
    let mc = monte_carlo_reference(&p, 50, 2).unwrap();
    let direct = solve_sample(&p, &mono, &vec![0.0; mono.families.len()]).unwrap();
    assert!(rel(&mc.mean(), &direct) < 1e-12);
    let scale = norm(&direct).powi(2);
    assert!(mc.variance().iter().all(|v| *v <= 1e-20 * scale));
    let (se_mean, se_std) = mc.std_errors();
    assert!(se_mean.iter().chain(&se_std).all(|s| *s <= 1e-9 * norm(&direct)));
}

#[test]
fn monte_carlo_is_reproducible_and_seeded() {
    let p = problem(&tiny_lshape());
    let a = monte_carlo_reference(&p, 130, 5).unwrap();
    let b = monte_carlo_reference(&p, 130, 5).unwrap();
    assert_eq!(a, b);
    let c = monte_carlo_reference(&p, 130, 6).unwrap();
    assert_ne!(a.mean(), c.mean());
    assert_eq!(a.probe.len(), 130);
}

#[test]
fn independent_monte_carlo_runs_agree_within_errors() {
    let p = problem(&tiny_lshape());
    let a = monte_carlo_reference(&p, 2000, 11).unwrap();
    let b = monte_carlo_reference(&p, 2000, 12).unwrap();
    let (sa, _) = a.std_errors();
    let (sb, _) = b.std_errors();
    let diff: Vec<f64> = a.mean().iter().zip(b.mean()).map(|(x, y)| x - y).collect();
    let se = (norm(&sa).powi(2) + norm(&sb).powi(2)).sqrt();
    assert!(norm(&diff) < 4.0 * se, "{} vs {}", norm(&diff), se);
}

#[test]
fn monte_carlo_agrees_with_sg() {
    let p = problem(&Config::profile("lshape-desk").unwrap());
    let sg = solve_monolithic_sg(&p, 3).unwrap();
    let mc = monte_carlo_reference(&p, 4000, 3).unwrap();
    let diff: Vec<f64> = mc.mean().iter().zip(sg.mean()).map(|(x, y)| x - y).collect();
    assert!(norm(&diff) < 0.01 * norm(sg.mean()));
    let s_sg: Vec<f64> = sg.variance().iter().map(|v| v.sqrt()).collect();
    let s_mc: Vec<f64> = mc.variance().iter().map(|v| v.sqrt()).collect();
    assert!(rel(&s_mc, &s_sg) < 0.05, "{}", rel(&s_mc, &s_sg));
}

#[test]
fn oversized_galerkin_systems_are_refused() {
    let p = problem(&Config::profile("beam-desk").unwrap());
    match solve_monolithic_sg(&p, 12) {
        Err(Error::SizeGuard { what, size, limit }) => {
            assert!(what.contains("M·P"));
            assert!(size > limit);
        }
        other => panic!("expected a size guard, got {:?}", other.map(|s| s.iterations)),
    }
    assert!(matches!(solve_coupled_sg(&p, 3), Err(Error::SizeGuard { .. })));
}
