mod common;

use common::{problem, random_terms, rel, tiny_beam, tiny_lshape};
use proptest::prelude::*;
use stochcouple::arr::{
    arr_run, deterministic_update, energy, normalize_factors, residual_norm, spaces, stochastic_update,
    SeparatedSolution,
};
use stochcouple::config::{Config, SolverConfig};
use stochcouple::stats::sample_separated;
use stochcouple::Error;

fn quick_solver() -> SolverConfig {
    SolverConfig {
        residual_samples: 500,
        rank_max: 4,
        ..SolverConfig::default()
    }
}

#[test]
fn deterministic_problems_converge_at_rank_one() {
    for cfg in [tiny_lshape(), tiny_beam()] {
        let cfg = cfg.with_sigma(0.0);
        let p = problem(&cfg);
        let out = arr_run(&p, &quick_solver()).unwrap();
        assert!(out.converged, "{}", cfg.name);
        assert_eq!(out.solution.rank, 1);
        assert!(out.trace.ranks[0].residual.value <= 1e-9);
    }
}

#[test]
fn sweeps_never_increase_energy() {
    let p = problem(&Config::profile("lshape-desk").unwrap());
    let out = arr_run(&p, &quick_solver()).unwrap();
    for s in &out.trace.sweeps {
        let tol = 1e-10 * s.pi_start.abs().max(1.0);
        assert!(s.pi_deterministic <= s.pi_start + tol);
        assert!(s.pi_phi1 <= s.pi_deterministic + tol);
        assert!(s.pi_phi2 <= s.pi_phi1 + tol);
        assert!((s.pi_end - s.pi_phi2).abs() <= tol);
    }
}

#[test]
fn deterministic_update_is_idempotent() {
    let p = problem(&tiny_beam());
    let (sp, mut sol) = random_terms(&p, 2, 3);
    let solver = SolverConfig {
        eps_pcpg: 1e-12,
        ..SolverConfig::default()
    };
    let a = deterministic_update(&p, &sp, &sol, &solver).unwrap();
    sol.u1 = a.u1.clone();
    sol.u2 = a.u2.clone();
    sol.lambda = a.lambda.clone();
    let b = deterministic_update(&p, &sp, &sol, &solver).unwrap();
    assert!(rel(&b.u1.concat(), &a.u1.concat()) < 1e-9);
    assert!(rel(&b.u2.concat(), &a.u2.concat()) < 1e-9);
    assert!(rel(&b.lambda.concat(), &a.lambda.concat()) < 1e-9);
}

fn after_one_update(cfg: &Config) -> (stochcouple::problems::CoupledProblem, SeparatedSolution) {
    let p = problem(cfg);
    let (sp, mut sol) = random_terms(&p, 2, 4);
    let det = deterministic_update(&p, &sp, &sol, &SolverConfig::default()).unwrap();
    sol.u1 = det.u1;
    sol.u2 = det.u2;
    sol.lambda = det.lambda;
    (p, sol)
}

#[test]
fn normalization_preserves_the_represented_function() {
    let (p, mut sol) = after_one_update(&tiny_lshape());
    let sp = spaces(&p).unwrap();
    for v in sol.phi1.iter_mut().chain(sol.phi2.iter_mut()) {
        v.iter_mut().for_each(|x| *x *= 3.0);
    }
    let e0 = energy(&p, &sp, &sol).unwrap();
    let xi = [0.3, -1.1, 0.7, 0.2];
    let before = sample_separated(&sol, &xi).unwrap();
    normalize_factors(&mut sol).unwrap();
    let after = sample_separated(&sol, &xi).unwrap();
    assert!(rel(&after, &before) < 1e-13);
    assert!((energy(&p, &sp, &sol).unwrap() - e0).abs() < 1e-12 * e0.abs());
    for l in 0..sol.rank {
        let n: f64 = sol.phi1[l].iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-14);
    }
}

#[test]
fn zero_load_flags_degenerate_factors() {
    let mut cfg = tiny_lshape();
    cfg.bc.load1.body = vec![0.0];
    let (p, sol) = after_one_update(&cfg);
    let sp = spaces(&p).unwrap();
    assert!(matches!(stochastic_update(&p, &sp, &sol, 0), Err(Error::DegenerateFactor(_))));
    let mut zero = sol.clone();
    zero.phi2[0].iter_mut().for_each(|x| *x = 0.0);
    assert!(matches!(normalize_factors(&mut zero), Err(Error::DegenerateFactor(_))));
}

#[test]
fn residual_does_not_grow_with_rank() {
    let p = problem(&Config::profile("lshape-desk").unwrap());
    let solver = SolverConfig {
        residual_samples: 4000,
        rank_max: 6,
        ..SolverConfig::default()
    };
    let out = arr_run(&p, &solver).unwrap();
    let ranks = &out.trace.ranks;
    assert_eq!(ranks.len(), 6);
    for w in ranks.windows(2) {
        let (a, b) = (&w[0].residual, &w[1].residual);
        let se = (a.std_error[0].powi(2) + a.std_error[1].powi(2)).sqrt()
            + (b.std_error[0].powi(2) + b.std_error[1].powi(2)).sqrt();
        assert!(b.value <= a.value + 2.0 * se, "rank {}: {} > {}", w[1].rank, b.value, a.value);
    }
    assert!(ranks.last().unwrap().residual.value < ranks[0].residual.value);
}

#[test]
fn residual_estimate_is_seeded() {
    let (p, sol) = after_one_update(&tiny_beam());
    let sp = spaces(&p).unwrap();
    let a = residual_norm(&p, &sp, &sol, 300, 9).unwrap();
    let b = residual_norm(&p, &sp, &sol, 300, 9).unwrap();
    assert_eq!(a, b);
    assert!(a.value > 0.0 && a.std_error.iter().all(|s| *s > 0.0));
}

#[test]
fn solution_round_trips_through_flat_json() {
    let (_, sol) = after_one_update(&tiny_beam());
    let text = serde_json::to_string(&sol).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v["u1"].as_array().unwrap()[0].is_number());
    let back: SeparatedSolution = serde_json::from_str(&text).unwrap();
    assert_eq!(back, sol);
    let mut bad = v.clone();
    bad["u1"].as_array_mut().unwrap().pop();
    assert!(serde_json::from_value::<SeparatedSolution>(bad).is_err());
}

#[test]
fn trace_csv_layout() {
    let p = problem(&tiny_lshape());
    let out = arr_run(&p, &SolverConfig { rank_max: 2, residual_samples: 200, ..SolverConfig::default() }).unwrap();
    let csv = out.trace.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "sweep,r,pi,eps_res,pcpg_iters");
    assert_eq!(lines.count(), out.trace.sweeps.len());
    let filled = csv.lines().skip(1).filter(|l| !l.split(',').nth(3).unwrap().is_empty()).count();
    assert_eq!(filled, out.trace.ranks.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn energy_is_invariant_under_factor_rescaling(s1 in 0.2f64..5.0, s2 in 0.2f64..5.0, seed in 0u64..1000) {
        let p = problem(&tiny_lshape());
        let (sp, mut sol) = random_terms(&p, 2, seed);
        let det = deterministic_update(&p, &sp, &sol, &SolverConfig::default()).unwrap();
        sol.u1 = det.u1;
        sol.u2 = det.u2;
        sol.lambda = det.lambda;
        let e0 = energy(&p, &sp, &sol).unwrap();
        let mut scaled = sol.clone();
        scaled.phi1[0].iter_mut().for_each(|x| *x *= s1);
        scaled.phi2[0].iter_mut().for_each(|x| *x *= s2);
        for v in scaled.u1[0].iter_mut().chain(scaled.u2[0].iter_mut()).chain(scaled.lambda[0].iter_mut()) {
            *v /= s1 * s2;
        }
        let e1 = energy(&p, &sp, &scaled).unwrap();
        prop_assert!((e1 - e0).abs() <= 1e-11 * e0.abs());
    }
}
