//! Alternating Rayleigh–Ritz construction of the separated representation
//!
//! ```text
//! (u₁, u₂, λ)(ξ₁, ξ₂) ≈ Σ_l (u₁ˡ, u₂ˡ, λˡ) φ₁ˡ(ξ₁) φ₂ˡ(ξ₂)
//! ```
//!
//! Each sweep updates the deterministic factors through the block FETI
//! solver, then `φ₁` and `φ₂` by Galerkin projection. Ranks are added one at
//! a time until the sampled residual drops below the target.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::feti::{solve_saddle, BlockOperators, FactorMoments, PcpgReport};
use crate::linalg::solve_dense_symmetric;
use crate::pc::{eval_multivariate, Family, GalerkinTensor, MultiIndexSet, TripleTensor};
use crate::problems::CoupledProblem;
use crate::rng::{draw_germ, stream, PURPOSE_INIT, PURPOSE_RESIDUAL};
use crate::{Error, Result};

/// Trial space of one sub-domain's stochastic factors with the Galerkin
/// matrices `G_j[a, b] = E[ψ_j ψ_a ψ_b]` of its coefficient modes.
#[derive(Debug, Clone)]
pub struct StochasticSpace {
    pub family: Family,
    pub trial: MultiIndexSet,
    pub galerkin: GalerkinTensor,
}

impl StochasticSpace {
    pub fn new(problem: &CoupledProblem, i: usize) -> Result<Self> {
        let sub = &problem.sub[i];
        let p = if i == 0 { problem.config.pc.p1 } else { problem.config.pc.p2 };
        let trial = MultiIndexSet::new(sub.dim(), p)?;
        let q = sub.field.index_set.max_component().max(1);
        let tensor = TripleTensor::new(sub.family(), q, p, p);
        let tensors = vec![&tensor; sub.dim()];
        let galerkin = GalerkinTensor::new(&sub.field.index_set, &trial, &tensors)?;
        Ok(Self {
            family: sub.family(),
            trial,
            galerkin,
        })
    }

    pub fn len(&self) -> usize {
        self.trial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trial.is_empty()
    }
}

pub fn spaces(problem: &CoupledProblem) -> Result<[StochasticSpace; 2]> {
    Ok([StochasticSpace::new(problem, 0)?, StochasticSpace::new(problem, 1)?])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "FlatSolution", try_from = "FlatSolution")]
pub struct SeparatedSolution {
    pub rank: usize,
    pub dims: [usize; 2],
    pub orders: [usize; 2],
    pub families: [Family; 2],
    pub u1: Vec<Vec<f64>>,
    pub u2: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
    pub phi1: Vec<Vec<f64>>,
    pub phi2: Vec<Vec<f64>>,
}

impl SeparatedSolution {
    pub fn empty(problem: &CoupledProblem) -> Self {
        let (d1, d2) = problem.dims();
        let (p1, p2) = problem.orders();
        Self {
            rank: 0,
            dims: [d1, d2],
            orders: [p1, p2],
            families: [problem.sub[0].family(), problem.sub[1].family()],
            u1: Vec::new(),
            u2: Vec::new(),
            lambda: Vec::new(),
            phi1: Vec::new(),
            phi2: Vec::new(),
        }
    }

    pub fn u(&self, i: usize) -> &[Vec<f64>] {
        if i == 0 {
            &self.u1
        } else {
            &self.u2
        }
    }

    pub fn phi(&self, i: usize) -> &[Vec<f64>] {
        if i == 0 {
            &self.phi1
        } else {
            &self.phi2
        }
    }

    /// Appends a term with zero deterministic factors and the given
    /// stochastic factors.
    pub fn push_term(&mut self, problem: &CoupledProblem, phi1: Vec<f64>, phi2: Vec<f64>) {
        self.u1.push(vec![0.0; problem.sub[0].n_dofs()]);
        self.u2.push(vec![0.0; problem.sub[1].n_dofs()]);
        self.lambda.push(vec![0.0; problem.n_interface()]);
        self.phi1.push(phi1);
        self.phi2.push(phi2);
        self.rank += 1;
    }

    pub fn check_layout(&self, problem: &CoupledProblem) -> Result<()> {
        let expect = [problem.sub[0].n_dofs(), problem.sub[1].n_dofs(), problem.n_interface()];
        for (set, n) in [&self.u1, &self.u2, &self.lambda].into_iter().zip(expect) {
            if set.len() != self.rank {
                return Err(Error::DimensionMismatch {
                    expected: self.rank,
                    got: set.len(),
                });
            }
            if let Some(v) = set.iter().find(|v| v.len() != n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
        }
        if self.phi1.len() != self.rank || self.phi2.len() != self.rank {
            return Err(Error::DimensionMismatch {
                expected: self.rank,
                got: self.phi1.len().min(self.phi2.len()),
            });
        }
        Ok(())
    }
}

/// Serialized form: metadata and one flat array per factor kind, term-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatSolution {
    pub rank: usize,
    pub dims: [usize; 2],
    pub orders: [usize; 2],
    pub families: [Family; 2],
    pub n_dofs: [usize; 2],
    pub n_interface: usize,
    pub basis_len: [usize; 2],
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub lambda: Vec<f64>,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
}

impl From<SeparatedSolution> for FlatSolution {
    fn from(s: SeparatedSolution) -> Self {
        let len = |v: &[Vec<f64>]| v.first().map_or(0, Vec::len);
        Self {
            rank: s.rank,
            dims: s.dims,
            orders: s.orders,
            families: s.families,
            n_dofs: [len(&s.u1), len(&s.u2)],
            n_interface: len(&s.lambda),
            basis_len: [len(&s.phi1), len(&s.phi2)],
            u1: s.u1.concat(),
            u2: s.u2.concat(),
            lambda: s.lambda.concat(),
            phi1: s.phi1.concat(),
            phi2: s.phi2.concat(),
        }
    }
}

impl TryFrom<FlatSolution> for SeparatedSolution {
    type Error = Error;

    fn try_from(f: FlatSolution) -> Result<Self> {
        let split = |v: Vec<f64>, n: usize| -> Result<Vec<Vec<f64>>> {
            if v.len() != n * f.rank {
                return Err(Error::DimensionMismatch {
                    expected: n * f.rank,
                    got: v.len(),
                });
            }
            Ok(if n == 0 { vec![Vec::new(); f.rank] } else { v.chunks(n).map(<[f64]>::to_vec).collect() })
        };
        Ok(Self {
            rank: f.rank,
            dims: f.dims,
            orders: f.orders,
            families: f.families,
            u1: split(f.u1, f.n_dofs[0])?,
            u2: split(f.u2, f.n_dofs[1])?,
            lambda: split(f.lambda, f.n_interface)?,
            phi1: split(f.phi1, f.basis_len[0])?,
            phi2: split(f.phi2, f.basis_len[1])?,
        })
    }
}

pub fn flatten(blocks: &[Vec<f64>]) -> DVector<f64> {
    DVector::from_iterator(blocks.iter().map(|b| b.len()).sum(), blocks.iter().flatten().copied())
}

pub fn unflatten(x: &DVector<f64>, rank: usize) -> Vec<Vec<f64>> {
    if rank == 0 {
        return Vec::new();
    }
    let n = x.len() / rank;
    (0..rank).map(|l| x.as_slice()[l * n..(l + 1) * n].to_vec()).collect()
}

/// `S[j][(l, l')] = uˡᵀ K_j uˡ'` for every stiffness mode of one sub-domain.
fn stiffness_products(problem: &CoupledProblem, i: usize, u: &[Vec<f64>]) -> Vec<DMatrix<f64>> {
    let sub = &problem.sub[i];
    let r = u.len();
    sub.modes
        .par_iter()
        .map(|k| {
            let ku: Vec<Vec<f64>> = u
                .iter()
                .map(|v| {
                    let mut out = vec![0.0; v.len()];
                    k.matvec_into(v, &mut out);
                    out
                })
                .collect();
            let mut s = DMatrix::zeros(r, r);
            for a in 0..r {
                for b in a..r {
                    let v: f64 = u[a].iter().zip(&ku[b]).map(|(x, y)| x * y).sum();
                    s[(a, b)] = v;
                    s[(b, a)] = v;
                }
            }
            s
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Energy `π = Σᵢ E[½uᵢᵀKᵢuᵢ − uᵢᵀfᵢ] + E[λᵀ(C₂ᵀu₂ − C₁ᵀu₁)]` with the
/// deterministic factors `u1, u2, lambda` and stochastic factors `phi1, phi2`.
pub fn energy_with(
    problem: &CoupledProblem,
    spaces: &[StochasticSpace; 2],
    u1: &[Vec<f64>],
    u2: &[Vec<f64>],
    lambda: &[Vec<f64>],
    phi1: &[Vec<f64>],
    phi2: &[Vec<f64>],
) -> Result<f64> {
    let r = phi1.len();
    if r == 0 {
        return Ok(0.0);
    }
    let mom = FactorMoments::new([&spaces[0].galerkin, &spaces[1].galerkin], phi1, phi2)?;
    let mut pi = 0.0;
    for (i, u) in [u1, u2].into_iter().enumerate() {
        let s = stiffness_products(problem, i, u);
        for (j, sj) in s.iter().enumerate() {
            for l in 0..r {
                for lp in 0..r {
                    pi += 0.5 * sj[(l, lp)] * mom.weight(i, j, l, lp);
                }
            }
        }
        let f = problem.sub[i].load.as_slice();
        for l in 0..r {
            pi -= dot(&u[l], f) * mom.mean[l];
        }
    }
    let (s1, s2) = (&problem.sub[0], &problem.sub[1]);
    for l in 0..r {
        for lp in 0..r {
            let g = mom.gram[(l, lp)];
            if g == 0.0 {
                continue;
            }
            let jump2 = s2.restrict_interface(&u2[lp]);
            let jump1 = s1.restrict_interface(&u1[lp]);
            pi += g * dot(&lambda[l], (jump2 - jump1).as_slice());
        }
    }
    Ok(pi)
}

pub fn energy(problem: &CoupledProblem, spaces: &[StochasticSpace; 2], sol: &SeparatedSolution) -> Result<f64> {
    energy_with(problem, spaces, &sol.u1, &sol.u2, &sol.lambda, &sol.phi1, &sol.phi2)
}

/// Galerkin update of the stochastic factors of sub-domain `i` with all
/// other factors frozen. Solves the dense `r·Pᵢ` system.
pub fn stochastic_update(
    problem: &CoupledProblem,
    spaces: &[StochasticSpace; 2],
    sol: &SeparatedSolution,
    i: usize,
) -> Result<Vec<Vec<f64>>> {
    let r = sol.rank;
    let other = 1 - i;
    let space = &spaces[i];
    let p = space.len();
    let phi_o = sol.phi(other);
    let s_own = stiffness_products(problem, i, sol.u(i));
    let s_other = stiffness_products(problem, other, sol.u(other));
    let gram_o = DMatrix::from_fn(r, r, |a, b| dot(&phi_o[a], &phi_o[b]));
    let g_other = &spaces[other].galerkin;
    // Σ_j S_other[j](l,l') E_other[ψ_j φˡ φˡ']
    let mut other_energy = DMatrix::<f64>::zeros(r, r);
    for (j, sj) in s_other.iter().enumerate() {
        for a in 0..r {
            for b in a..r {
                if sj[(a, b)] == 0.0 {
                    continue;
                }
                let v = sj[(a, b)] * g_other.bilinear(j, &phi_o[a], &phi_o[b]);
                other_energy[(a, b)] += v;
                if a != b {
                    other_energy[(b, a)] += v;
                }
            }
        }
    }
    let mut a_mat = DMatrix::<f64>::zeros(r * p, r * p);
    for (j, sj) in s_own.iter().enumerate() {
        let gj = &space.galerkin.mats[j];
        for l in 0..r {
            for lp in 0..r {
                let c = sj[(l, lp)] * gram_o[(l, lp)];
                if c == 0.0 {
                    continue;
                }
                for &(a, b, v) in gj {
                    a_mat[(l * p + a, lp * p + b)] += c * v;
                }
            }
        }
    }
    for l in 0..r {
        for lp in 0..r {
            let c = other_energy[(l, lp)];
            for a in 0..p {
                a_mat[(l * p + a, lp * p + a)] += c;
            }
        }
    }
    let mut b = DVector::zeros(r * p);
    let (f1, f2) = (problem.sub[0].load.as_slice(), problem.sub[1].load.as_slice());
    for l in 0..r {
        b[l * p] = (dot(&sol.u1[l], f1) + dot(&sol.u2[l], f2)) * phi_o[l][0];
    }
    if b.norm() == 0.0 {
        return Err(Error::DegenerateFactor(format!(
            "right-hand side of the stochastic update for sub-domain {} vanishes; reinitialize the factors",
            i + 1
        )));
    }
    let a_mat = (&a_mat + a_mat.transpose()) * 0.5;
    let x = solve_dense_symmetric(a_mat, &b, "stochastic update system").map_err(|_| {
        Error::DegenerateFactor(format!(
            "stochastic update system for sub-domain {} is singular; reinitialize the factors",
            i + 1
        ))
    })?;
    Ok(unflatten(&x, r))
}

#[derive(Debug, Clone)]
pub struct DeterministicUpdate {
    pub u1: Vec<Vec<f64>>,
    pub u2: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
    pub alpha: DVector<f64>,
    pub pcpg: PcpgReport,
}

pub fn block_operators<'a>(
    problem: &'a CoupledProblem,
    spaces: &[StochasticSpace; 2],
    sol: &SeparatedSolution,
    inner_tol: f64,
) -> Result<BlockOperators<'a>> {
    let mom = FactorMoments::new([&spaces[0].galerkin, &spaces[1].galerkin], &sol.phi1, &sol.phi2)?;
    BlockOperators::new(problem, mom, inner_tol)
}

/// Solves the block saddle system for all deterministic factors.
pub fn deterministic_update(
    problem: &CoupledProblem,
    spaces: &[StochasticSpace; 2],
    sol: &SeparatedSolution,
    solver: &SolverConfig,
) -> Result<DeterministicUpdate> {
    let ops = block_operators(problem, spaces, sol, solver.inner_tol)?;
    let out = solve_saddle(&ops, solver.preconditioner, solver.eps_pcpg, solver.pcpg_max_iter)?;
    Ok(DeterministicUpdate {
        u1: unflatten(&out.u1, sol.rank),
        u2: unflatten(&out.u2, sol.rank),
        lambda: unflatten(&out.lambda, sol.rank),
        alpha: out.alpha,
        pcpg: out.pcpg,
    })
}

/// Minimizer of `π(·, λ_old)` for the current stochastic factors. The rigid
/// component of the floating sub-domain is kept from `sol`.
pub fn frozen_multiplier_update(
    problem: &CoupledProblem,
    spaces: &[StochasticSpace; 2],
    sol: &SeparatedSolution,
    inner_tol: f64,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let ops = block_operators(problem, spaces, sol, inner_tol)?;
    let lambda = flatten(&sol.lambda);
    let u1 = ops.apply_k1_inverse(&(&ops.f_hat[0] + ops.apply_c(0, &lambda)))?;
    let mut u2 = ops.apply_k2_moore_penrose(&(&ops.f_hat[1] - ops.apply_c(1, &lambda)))?;
    if problem.sub[1].floating() {
        let old = flatten(&sol.u2);
        u2 += ops.rigid_expand(&ops.rigid_coefficients(&old));
    }
    Ok((unflatten(&u1, sol.rank), unflatten(&u2, sol.rank)))
}

/// Scales every `φᵢˡ` to unit second moment, absorbing the scales into the
/// deterministic factors of the same term.
pub fn normalize_factors(sol: &mut SeparatedSolution) -> Result<()> {
    for l in 0..sol.rank {
        let n1 = dot(&sol.phi1[l], &sol.phi1[l]).sqrt();
        let n2 = dot(&sol.phi2[l], &sol.phi2[l]).sqrt();
        if !(n1 > 0.0 && n2 > 0.0) || !(n1 * n2).is_finite() {
            return Err(Error::DegenerateFactor(format!("stochastic factor of term {l} has zero norm")));
        }
        sol.phi1[l].iter_mut().for_each(|v| *v /= n1);
        sol.phi2[l].iter_mut().for_each(|v| *v /= n2);
        let s = n1 * n2;
        for v in sol.u1[l].iter_mut().chain(sol.u2[l].iter_mut()).chain(sol.lambda[l].iter_mut()) {
            *v *= s;
        }
    }
    Ok(())
}

/// `E[‖C₁ᵀu₁ʳ − C₂ᵀu₂ʳ‖²]`.
pub fn interface_violation(problem: &CoupledProblem, sol: &SeparatedSolution) -> f64 {
    let (s1, s2) = (&problem.sub[0], &problem.sub[1]);
    let jumps: Vec<DVector<f64>> = (0..sol.rank)
        .map(|l| s1.restrict_interface(&sol.u1[l]) - s2.restrict_interface(&sol.u2[l]))
        .collect();
    let mut v = 0.0;
    for a in 0..sol.rank {
        for b in 0..sol.rank {
            let g = dot(&sol.phi1[a], &sol.phi1[b]) * dot(&sol.phi2[a], &sol.phi2[b]);
            v += g * jumps[a].dot(&jumps[b]);
        }
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualEstimate {
    /// `max_i` of the per-sub-domain relative residuals.
    pub value: f64,
    pub per_subdomain: [f64; 2],
    pub std_error: [f64; 2],
    pub samples: usize,
}

/// Relative residual `‖fᵢ ± Cᵢλʳ − Kᵢuᵢʳ‖ / ‖fᵢ ± Cᵢλʳ‖` in the mean-square
/// sense, estimated from `n` seeded samples with the truncated PC operator.
pub fn residual_norm(
    problem: &CoupledProblem,
    spaces: &[StochasticSpace; 2],
    sol: &SeparatedSolution,
    n: usize,
    seed: u64,
) -> Result<ResidualEstimate> {
    if n == 0 {
        return Err(Error::InvalidInput("residual estimate needs at least one sample".into()));
    }
    let r = sol.rank;
    let (d1, _) = problem.dims();
    let families = problem.families();
    // K_j uˡ for every mode and term
    let ku: [Vec<Vec<Vec<f64>>>; 2] = [0, 1].map(|i| {
        let sub = &problem.sub[i];
        sub.modes
            .par_iter()
            .map(|k| {
                sol.u(i)
                    .iter()
                    .map(|v| {
                        let mut out = vec![0.0; v.len()];
                        k.matvec_into(v, &mut out);
                        out
                    })
                    .collect()
            })
            .collect()
    });
    let per_sample: Vec<[(f64, f64); 2]> = (0..n as u64)
        .into_par_iter()
        .map(|s| -> Result<[(f64, f64); 2]> {
            let mut rng = stream(seed, PURPOSE_RESIDUAL, s);
            let xi = draw_germ(&families, &mut rng);
            let xis = [&xi[..d1], &xi[d1..]];
            let mut phi_vals = [vec![0.0; r], vec![0.0; r]];
            for i in 0..2 {
                let psi = eval_multivariate(spaces[i].family, &spaces[i].trial, xis[i])?;
                for l in 0..r {
                    phi_vals[i][l] = dot(&sol.phi(i)[l], &psi);
                }
            }
            let coef: Vec<f64> = (0..r).map(|l| phi_vals[0][l] * phi_vals[1][l]).collect();
            let mut out = [(0.0, 0.0); 2];
            for i in 0..2 {
                let sub = &problem.sub[i];
                let psi_k = eval_multivariate(sub.family(), &sub.field.index_set, xis[i])?;
                let sign = if i == 0 { 1.0 } else { -1.0 };
                let mut rhs = sub.load.as_slice().to_vec();
                let mut lam = vec![0.0; problem.n_interface()];
                for l in 0..r {
                    for (a, b) in lam.iter_mut().zip(&sol.lambda[l]) {
                        *a += coef[l] * b;
                    }
                }
                sub.scatter_interface(&lam, sign, &mut rhs);
                let mut res = rhs.clone();
                for (j, kj) in ku[i].iter().enumerate() {
                    if psi_k[j] == 0.0 {
                        continue;
                    }
                    for l in 0..r {
                        let c = psi_k[j] * coef[l];
                        if c == 0.0 {
                            continue;
                        }
                        for (x, y) in res.iter_mut().zip(&kj[l]) {
                            *x -= c * y;
                        }
                    }
                }
                out[i] = (dot(&res, &res), dot(&rhs, &rhs));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let nf = n as f64;
    let mut per = [0.0; 2];
    let mut se = [0.0; 2];
    for i in 0..2 {
        let (mut sx, mut sy) = (0.0, 0.0);
        for s in &per_sample {
            sx += s[i].0;
            sy += s[i].1;
        }
        let (mx, my) = (sx / nf, sy / nf);
        if my == 0.0 {
            return Err(Error::InvalidInput(format!(
                "sub-domain {} has a vanishing load and interface force; relative residual undefined",
                i + 1
            )));
        }
        let ratio = mx / my;
        let mut var = 0.0;
        for s in &per_sample {
            let t = s[i].0 - ratio * s[i].1;
            var += t * t;
        }
        let var = var / (nf - 1.0).max(1.0) / nf / (my * my);
        per[i] = ratio.max(0.0).sqrt();
        se[i] = if per[i] > 0.0 { var.sqrt() / (2.0 * per[i]) } else { 0.0 };
    }
    Ok(ResidualEstimate {
        value: per[0].max(per[1]),
        per_subdomain: per,
        std_error: se,
        samples: n,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRecord {
    pub rank: usize,
    pub sweep: usize,
    pub pi_start: f64,
    /// `π(u_frozen, λ_old)` with `u_frozen` minimizing at fixed multipliers.
    pub pi_u_update: f64,
    /// `π(u_old, λ_new)`.
    pub pi_lambda_update: f64,
    pub pi_deterministic: f64,
    pub pi_phi1: f64,
    pub pi_phi2: f64,
    pub pi_end: f64,
    pub pcpg_iterations: usize,
    pub interface_violation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankRecord {
    pub rank: usize,
    pub sweeps: usize,
    pub pi: f64,
    pub residual: ResidualEstimate,
    pub pcpg_iterations: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ArrTrace {
    pub sweeps: Vec<SweepRecord>,
    pub ranks: Vec<RankRecord>,
    pub pcpg_traces: Vec<Vec<f64>>,
}

impl ArrTrace {
    /// `sweep,r,pi,eps_res,pcpg_iters`; `eps_res` is filled on the last
    /// sweep of each rank.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("sweep,r,pi,eps_res,pcpg_iters\n");
        for (k, rec) in self.sweeps.iter().enumerate() {
            let last = self.sweeps.get(k + 1).is_none_or(|n| n.rank != rec.rank);
            let eps = if last {
                self.ranks
                    .iter()
                    .find(|r| r.rank == rec.rank)
                    .map(|r| format!("{:e}", r.residual.value))
                    .unwrap_or_default()
            } else {
                String::new()
            };
            s.push_str(&format!(
                "{},{},{:e},{},{}\n",
                k + 1,
                rec.rank,
                rec.pi_end,
                eps,
                rec.pcpg_iterations
            ));
        }
        s
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArrOutcome {
    pub solution: SeparatedSolution,
    pub trace: ArrTrace,
    pub converged: bool,
}

/// Seeded standard-normal PC coefficient vector of unit norm.
pub fn random_factor(len: usize, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = stream(seed, PURPOSE_INIT, index);
    let mut v: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
    let n = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

/// One alternating sweep. Returns the record; `sol` is updated in place.
pub fn sweep(
    problem: &CoupledProblem,
    spaces: &[StochasticSpace; 2],
    sol: &mut SeparatedSolution,
    solver: &SolverConfig,
    index: usize,
) -> Result<(SweepRecord, PcpgReport)> {
    let pi_start = energy(problem, spaces, sol)?;
    let (uf1, uf2) = frozen_multiplier_update(problem, spaces, sol, solver.inner_tol)?;
    let pi_u_update = energy_with(problem, spaces, &uf1, &uf2, &sol.lambda, &sol.phi1, &sol.phi2)?;
    let det = deterministic_update(problem, spaces, sol, solver)?;
    let pi_lambda_update = energy_with(problem, spaces, &sol.u1, &sol.u2, &det.lambda, &sol.phi1, &sol.phi2)?;
    sol.u1 = det.u1;
    sol.u2 = det.u2;
    sol.lambda = det.lambda;
    let pi_deterministic = energy(problem, spaces, sol)?;
    sol.phi1 = stochastic_update(problem, spaces, sol, 0)?;
    let pi_phi1 = energy(problem, spaces, sol)?;
    sol.phi2 = stochastic_update(problem, spaces, sol, 1)?;
    let pi_phi2 = energy(problem, spaces, sol)?;
    normalize_factors(sol)?;
    let pi_end = energy(problem, spaces, sol)?;
    let rec = SweepRecord {
        rank: sol.rank,
        sweep: index,
        pi_start,
        pi_u_update,
        pi_lambda_update,
        pi_deterministic,
        pi_phi1,
        pi_phi2,
        pi_end,
        pcpg_iterations: det.pcpg.iterations,
        interface_violation: interface_violation(problem, sol),
    };
    Ok((rec, det.pcpg))
}

/// Rank-adaptive alternating Rayleigh–Ritz.
pub fn arr_run(problem: &CoupledProblem, solver: &SolverConfig) -> Result<ArrOutcome> {
    let spaces = spaces(problem)?;
    let mut sol = SeparatedSolution::empty(problem);
    let mut trace = ArrTrace::default();
    let seed = solver.seed;
    loop {
        let r = sol.rank;
        sol.push_term(
            problem,
            random_factor(spaces[0].len(), seed, 2 * r as u64),
            random_factor(spaces[1].len(), seed, 2 * r as u64 + 1),
        );
        let mut prev = energy(problem, &spaces, &sol)?;
        let mut sweeps = 0;
        let mut pcpg_last = 0;
        for k in 0..solver.sweep_cap {
            let (rec, pcpg) = sweep(problem, &spaces, &mut sol, solver, k + 1)?;
            sweeps += 1;
            pcpg_last = rec.pcpg_iterations;
            let pi = rec.pi_end;
            log::debug!("rank {} sweep {} pi {:e} pcpg {}", sol.rank, k + 1, pi, rec.pcpg_iterations);
            trace.sweeps.push(rec);
            trace.pcpg_traces.push(pcpg.trace);
            let change = (pi - prev).abs();
            prev = pi;
            if change <= solver.tol_r * pi.abs() {
                break;
            }
        }
        let residual = residual_norm(problem, &spaces, &sol, solver.residual_samples, seed)?;
        log::info!("rank {} pi {:e} eps_res {:e}", sol.rank, prev, residual.value);
        trace.ranks.push(RankRecord {
            rank: sol.rank,
            sweeps,
            pi: prev,
            residual,
            pcpg_iterations: pcpg_last,
        });
        if residual.value <= solver.eps {
            return Ok(ArrOutcome {
                solution: sol,
                trace,
                converged: true,
            });
        }
        if sol.rank >= solver.rank_max {
            return Ok(ArrOutcome {
                solution: sol,
                trace,
                converged: false,
            });
        }
    }
}
