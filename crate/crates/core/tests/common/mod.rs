#![allow(dead_code)]

use stochcouple::arr::{random_factor, spaces, SeparatedSolution, StochasticSpace};
use stochcouple::config::Config;
use stochcouple::problems::{build_problem, CoupledProblem};

/// L-shape with `h = 1/2`: two interface dofs.
pub fn tiny_lshape() -> Config {
    let mut c = Config::profile("lshape-desk").unwrap();
    c.mesh.h1 = 0.5;
    c.mesh.h2 = 0.5;
    c.name = "lshape-tiny".into();
    c
}

/// Beam with `h = 1/2`, interface at `x = 2.5`: six interface dofs and a
/// floating right part.
pub fn tiny_beam() -> Config {
    let mut c = Config::profile("beam-desk").unwrap();
    c.mesh.h1 = 0.5;
    c.mesh.h2 = 0.5;
    c.geometry.rect1.x1 = 2.5;
    c.geometry.rect2.x0 = 2.5;
    c.name = "beam-tiny".into();
    c
}

pub fn problem(cfg: &Config) -> CoupledProblem {
    build_problem(cfg).unwrap()
}

/// Rank-`r` solution with seeded random stochastic factors and zero
/// deterministic factors.
pub fn random_terms(problem: &CoupledProblem, r: usize, seed: u64) -> ([StochasticSpace; 2], SeparatedSolution) {
    let sp = spaces(problem).unwrap();
    let mut sol = SeparatedSolution::empty(problem);
    for l in 0..r as u64 {
        sol.push_term(
            problem,
            random_factor(sp[0].len(), seed, 2 * l),
            random_factor(sp[1].len(), seed, 2 * l + 1),
        );
    }
    (sp, sol)
}

pub fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let n: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    d / n.max(f64::MIN_POSITIVE)
}
