mod common;

use common::{problem, random_terms, rel, tiny_beam, tiny_lshape};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use stochcouple::arr::{normalize_factors, SeparatedSolution};
use stochcouple::config::Config;
use stochcouple::stats::{
    error_metrics, error_metrics_net, l1_distance, pdf_estimate, pdf_l1_gap, sample_separated, self_monte_carlo,
    separated_mean, separated_moments, separated_variance, MomentReport,
};
use stochcouple::Error;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Random solution with nonzero deterministic factors.
fn filled(cfg: &Config, r: usize, seed: u64) -> SeparatedSolution {
    let p = problem(cfg);
    let (_, mut sol) = random_terms(&p, r, seed);
    let mut k = seed as f64;
    for v in sol.u1.iter_mut().chain(sol.u2.iter_mut()).chain(sol.lambda.iter_mut()) {
        for x in v.iter_mut() {
            k += 1.0;
            *x = (k * 0.731).sin();
        }
    }
    sol
}

/// Mean and variance by tensor Gauss quadrature over the germ.
fn quadrature_moments(sol: &SeparatedSolution, nodes: usize) -> (Vec<f64>, Vec<f64>) {
    let mut families = vec![sol.families[0]; sol.dims[0]];
    families.extend(vec![sol.families[1]; sol.dims[1]]);
    let rules: Vec<_> = families.iter().map(|f| f.gauss_rule(nodes)).collect();
    let d = families.len();
    let len = separated_mean(sol).len();
    let (mut m1, mut m2) = (vec![0.0; len], vec![0.0; len]);
    for q in 0..nodes.pow(d as u32) {
        let (mut xi, mut w, mut k) = (vec![0.0; d], 1.0, q);
        for (dim, (x, wt)) in rules.iter().enumerate() {
            xi[dim] = x[k % nodes];
            w *= wt[k % nodes];
            k /= nodes;
        }
        let u = sample_separated(sol, &xi).unwrap();
        for (j, v) in u.iter().enumerate() {
            m1[j] += w * v;
            m2[j] += w * v * v;
        }
    }
    let var = m2.iter().zip(&m1).map(|(s, m)| s - m * m).collect();
    (m1, var)
}

#[test]
fn closed_form_moments_match_quadrature() {
    for cfg in [tiny_lshape(), tiny_beam()] {
        let sol = filled(&cfg, 3, 1);
        let (m, v) = quadrature_moments(&sol, 4);
        assert!(rel(&separated_mean(&sol), &m) < 1e-12);
        assert!(rel(&separated_variance(&sol), &v) < 1e-10);
    }
}

#[test]
fn closed_form_moments_match_self_monte_carlo() {
    let sol = filled(&tiny_beam(), 3, 2);
    let exact = separated_moments(&sol, "closed form", "beam-tiny");
    let mc = self_monte_carlo(&sol, 20_000, 4).unwrap();
    let (se_m, se_s) = mc.std_errors.as_ref().unwrap();
    let dm: Vec<f64> = exact.mean.iter().zip(&mc.mean).map(|(a, b)| a - b).collect();
    let ds: Vec<f64> = exact.std.iter().zip(&mc.std).map(|(a, b)| a - b).collect();
    assert!(norm(&dm) <= 3.0 * norm(se_m), "{} vs {}", norm(&dm), norm(se_m));
    assert!(norm(&ds) <= 3.0 * norm(se_s), "{} vs {}", norm(&ds), norm(se_s));
    assert_eq!(mc, self_monte_carlo(&sol, 20_000, 4).unwrap());
}

#[test]
fn moments_survive_renormalization() {
    let mut sol = filled(&tiny_lshape(), 2, 3);
    for v in &mut sol.phi2 {
        v.iter_mut().for_each(|x| *x *= 7.0);
    }
    let before = separated_moments(&sol, "a", "b");
    normalize_factors(&mut sol).unwrap();
    let after = separated_moments(&sol, "a", "b");
    assert!(rel(&after.mean, &before.mean) < 1e-13);
    assert!(rel(&after.std, &before.std) < 1e-12);
}

#[test]
fn kernel_density_of_a_standard_normal() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let x: Vec<f64> = (0..20_000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let pdf = pdf_estimate(&x, 401).unwrap();
    assert!(!pdf.degenerate);
    let exact: Vec<f64> = pdf.grid.iter().map(|g| (-0.5 * g * g).exp() / (2.0 * std::f64::consts::PI).sqrt()).collect();
    let zeros = vec![0.0; exact.len()];
    assert!((l1_distance(&pdf.grid, &pdf.density, &zeros) - 1.0).abs() < 1e-3);
    assert!(l1_distance(&pdf.grid, &pdf.density, &exact) < 0.05);
    let mid = pdf.grid.iter().enumerate().min_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).unwrap().0;
    assert!((pdf.density[mid] - exact[mid]).abs() < 0.02 * exact[mid]);
    assert_eq!(pdf_l1_gap(&x, &x, 401).unwrap(), 0.0);
    assert!(pdf.to_csv().starts_with("x,density\n"));
}

#[test]
fn constant_samples_are_a_spike() {
    let x = vec![2.5; 1500];
    let pdf = pdf_estimate(&x, 101).unwrap();
    assert!(pdf.degenerate);
    assert_eq!(pdf.location, 2.5);
    assert!(pdf.density.is_empty());
    assert!(matches!(pdf_estimate(&x[..999], 101), Err(Error::InvalidInput(_))));
}

fn report(mean: Vec<f64>, std: Vec<f64>, se: Option<(Vec<f64>, Vec<f64>)>) -> MomentReport {
    MomentReport {
        label: "r".into(),
        instance: "i".into(),
        layout: [mean.len(), 0],
        mean,
        std,
        std_errors: se,
    }
}

#[test]
fn error_metrics_of_reference_against_itself_vanish() {
    let a = report(vec![1.0, -2.0, 0.5], vec![0.1, 0.2, 0.0], None);
    let e = error_metrics(&a, &a).unwrap();
    assert_eq!(e.eps_mean, 0.0);
    assert_eq!(e.eps_std, Some(0.0));
    let flat = report(vec![1.0, 2.0, 3.0], vec![0.0; 3], None);
    assert_eq!(error_metrics(&flat, &flat).unwrap().eps_std, None);
    let other = report(vec![1.0, 2.0], vec![0.0; 2], None);
    assert!(matches!(error_metrics(&other, &flat), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn net_error_removes_sampling_noise() {
    let reference = report(vec![3.0, 4.0], vec![1.0, 0.0], Some((vec![0.03, 0.04], vec![0.01, 0.0])));
    let approx = report(vec![3.06, 4.08], vec![1.5, 0.0], None);
    let raw = error_metrics(&approx, &reference).unwrap();
    let net = error_metrics_net(&approx, &reference, 3.0).unwrap();
    assert!((raw.eps_mean - 0.02).abs() < 1e-12);
    assert_eq!(net.eps_mean, 0.0);
    assert!((net.eps_std.unwrap() - 0.47).abs() < 1e-12);
    let plain = report(vec![3.0, 4.0], vec![1.0, 0.0], None);
    assert_eq!(error_metrics_net(&approx, &plain, 3.0).unwrap(), error_metrics(&approx, &plain).unwrap());
}

#[test]
fn moment_csv_lists_both_subdomains() {
    let sol = filled(&tiny_lshape(), 1, 5);
    let rep = separated_moments(&sol, "arr", "lshape-tiny");
    let csv = rep.to_csv();
    assert_eq!(csv.lines().count(), 1 + rep.mean.len());
    assert_eq!(rep.layout[0] + rep.layout[1], rep.mean.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn variance_is_nonnegative_and_scale_covariant(seed in 0u64..500, r in 1usize..4, s in -4.0f64..4.0) {
        let sol = filled(&tiny_lshape(), r, seed);
        let v = separated_variance(&sol);
        prop_assert!(v.iter().all(|x| *x >= 0.0));
        let mut scaled = sol.clone();
        for u in scaled.u1.iter_mut().chain(scaled.u2.iter_mut()) {
            u.iter_mut().for_each(|x| *x *= s);
        }
        let vs = separated_variance(&scaled);
        for (a, b) in vs.iter().zip(&v) {
            prop_assert!((a - s * s * b).abs() <= 1e-10 * (1.0 + b));
        }
        let m = separated_mean(&scaled);
        for (a, b) in m.iter().zip(separated_mean(&sol)) {
            prop_assert!((a - s * b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }
}
