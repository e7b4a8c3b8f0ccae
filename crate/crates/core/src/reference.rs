//! Brute-force oracles: monolithic stochastic Galerkin in the combined germ,
//! the coupled saddle Galerkin system solved densely, and Monte-Carlo
//! per-sample deterministic solves.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{pcg, CgReport};
use crate::pc::{eval_multivariate_mixed, Family, GalerkinTensor, MultiIndexSet, TripleTensor};
use crate::problems::{as_monolithic, CoupledProblem, MonolithicProblem};
use crate::rng::{draw_germ, stream, PURPOSE_MC};
use crate::sparse::{BandCholesky, CsrMatrix};
use crate::{Error, Result};

pub const SG_SIZE_LIMIT: usize = 200_000;
pub const DENSE_SADDLE_LIMIT: usize = 8_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonolithicSgSolution {
    pub families: Vec<Family>,
    pub index_set: MultiIndexSet,
    /// One merged-dof vector per basis function; block 0 is the mean.
    pub coeffs: Vec<Vec<f64>>,
    pub iterations: usize,
    pub relative_residual: f64,
}

impl MonolithicSgSolution {
    pub fn mean(&self) -> &[f64] {
        &self.coeffs[0]
    }

    pub fn variance(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.coeffs[0].len()];
        for c in &self.coeffs[1..] {
            for (vi, ci) in v.iter_mut().zip(c) {
                *vi += ci * ci;
            }
        }
        v
    }

    pub fn sample(&self, xi: &[f64]) -> Result<Vec<f64>> {
        let psi = eval_multivariate_mixed(&self.families, &self.index_set, xi)?;
        let mut u = vec![0.0; self.coeffs[0].len()];
        for (c, p) in self.coeffs.iter().zip(&psi) {
            for (ui, ci) in u.iter_mut().zip(c) {
                *ui += p * ci;
            }
        }
        Ok(u)
    }
}

fn triple_tensors(families: &[Family], mode_cap: usize, p: usize) -> Vec<TripleTensor> {
    families.iter().map(|&f| TripleTensor::new(f, mode_cap, p, p)).collect()
}

fn galerkin(families: &[Family], modes: &MultiIndexSet, space: &MultiIndexSet) -> Result<GalerkinTensor> {
    let tensors = triple_tensors(families, modes.max_component().max(1), space.p);
    let refs: Vec<&TripleTensor> = tensors.iter().collect();
    GalerkinTensor::new(modes, space, &refs)
}

fn check_guard(what: &'static str, size: usize, limit: usize) -> Result<()> {
    if size > limit {
        return Err(Error::SizeGuard { what, size, limit });
    }
    Ok(())
}

/// `y_a = Σ_j Σ_b G_j(a, b) K_j u_b` over stacked PC blocks.
fn apply_galerkin(modes: &[CsrMatrix], gal: &GalerkinTensor, n: usize, x: &DVector<f64>) -> DVector<f64> {
    let p = gal.space_len;
    let xs = x.as_slice();
    let parts: Vec<Vec<f64>> = modes
        .par_iter()
        .zip(gal.mats.par_iter())
        .map(|(k, g)| {
            let mut y = vec![0.0; n * p];
            let mut used = vec![false; p];
            for &(_, b, _) in g {
                used[b] = true;
            }
            let mut kx = vec![0.0; n * p];
            for b in 0..p {
                if used[b] {
                    k.matvec_into(&xs[b * n..(b + 1) * n], &mut kx[b * n..(b + 1) * n]);
                }
            }
            for &(a, b, v) in g {
                let (ya, kb) = (&mut y[a * n..(a + 1) * n], &kx[b * n..(b + 1) * n]);
                for (yi, ki) in ya.iter_mut().zip(kb) {
                    *yi += v * ki;
                }
            }
            y
        })
        .collect();
    let mut y = DVector::zeros(n * p);
    for part in parts {
        for (yi, pi) in y.iter_mut().zip(part) {
            *yi += pi;
        }
    }
    y
}

/// Stochastic Galerkin solve of the single-domain problem in the total-degree
/// basis of order `p` over the combined germ.
pub fn solve_monolithic_sg(problem: &CoupledProblem, p: usize) -> Result<MonolithicSgSolution> {
    let mono = as_monolithic(problem)?;
    solve_monolithic_sg_with(&mono, p)
}

pub fn solve_monolithic_sg_with(mono: &MonolithicProblem, p: usize) -> Result<MonolithicSgSolution> {
    let d = mono.families.len();
    let space = MultiIndexSet::new(d, p)?;
    let n = mono.n_dofs;
    check_guard("M·P", n * space.len(), SG_SIZE_LIMIT)?;
    let gal = galerkin(&mono.families, &mono.mode_indices, &space)?;
    let np = space.len();
    let mut b = DVector::zeros(n * np);
    b.rows_mut(0, n).copy_from(&mono.load);
    let mean = BandCholesky::factor(&mono.modes[0])?;
    let (x, report): (DVector<f64>, CgReport) = if b.norm() == 0.0 {
        (b.clone(), CgReport { iterations: 0, relative_residual: 0.0 })
    } else {
        pcg(
            "monolithic stochastic Galerkin",
            |v| apply_galerkin(&mono.modes, &gal, n, v),
            |r| {
                let mut z = r.clone();
                for a in 0..np {
                    mean.solve_in_place(&mut z.as_mut_slice()[a * n..(a + 1) * n]);
                }
                z
            },
            &b,
            None,
            1e-10,
            20 * n * np + 100,
        )?
    };
    Ok(MonolithicSgSolution {
        families: mono.families.clone(),
        coeffs: (0..np).map(|a| x.as_slice()[a * n..(a + 1) * n].to_vec()).collect(),
        index_set: space,
        iterations: report.iterations,
        relative_residual: report.relative_residual,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoupledSgSolution {
    pub families: Vec<Family>,
    pub index_set: MultiIndexSet,
    pub u1: Vec<Vec<f64>>,
    pub u2: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
}

/// Operator modes of one sub-domain with indices embedded in the combined germ.
fn embedded_modes(problem: &CoupledProblem, i: usize) -> Result<MultiIndexSet> {
    let (d1, d2) = problem.dims();
    let set = &problem.sub[i].field.index_set;
    let list = set
        .iter()
        .map(|idx| {
            let mut v = Vec::with_capacity(d1 + d2);
            if i == 0 {
                v.extend_from_slice(idx);
                v.extend(std::iter::repeat_n(0, d2));
            } else {
                v.extend(std::iter::repeat_n(0, d1));
                v.extend_from_slice(idx);
            }
            v
        })
        .collect();
    MultiIndexSet::from_list(d1 + d2, list)
}

/// Saddle Galerkin system for `(u₁, u₂, λ)` in the combined basis of order
/// `p`, assembled and solved densely.
pub fn solve_coupled_sg(problem: &CoupledProblem, p: usize) -> Result<CoupledSgSolution> {
    let families = problem.families();
    let space = MultiIndexSet::new(families.len(), p)?;
    let np = space.len();
    let ns = [problem.sub[0].n_dofs(), problem.sub[1].n_dofs()];
    let m = problem.n_interface();
    check_guard("M·P", (ns[0] + ns[1]) * np, SG_SIZE_LIMIT)?;
    let total = (ns[0] + ns[1] + m) * np;
    check_guard("dense coupled Galerkin size", total, DENSE_SADDLE_LIMIT)?;
    let offset = [0, ns[0] * np, (ns[0] + ns[1]) * np];
    let mut a = DMatrix::<f64>::zeros(total, total);
    let mut rhs = DVector::zeros(total);
    for i in 0..2 {
        let sub = &problem.sub[i];
        let gal = galerkin(&families, &embedded_modes(problem, i)?, &space)?;
        let n = ns[i];
        for (k, g) in sub.modes.iter().zip(&gal.mats) {
            for &(pa, pb, v) in g {
                for r in 0..n {
                    for (c, kv) in k.row(r) {
                        a[(offset[i] + pa * n + r, offset[i] + pb * n + c)] += v * kv;
                    }
                }
            }
        }
        for r in 0..n {
            rhs[offset[i] + r] = sub.load[r];
        }
        let sign = if i == 0 { -1.0 } else { 1.0 };
        for pa in 0..np {
            for (col, &dof) in sub.interface.iter().enumerate() {
                let (ru, rl) = (offset[i] + pa * n + dof, offset[2] + pa * m + col);
                a[(ru, rl)] = sign;
                a[(rl, ru)] = sign;
            }
        }
    }
    let x = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("coupled stochastic Galerkin saddle system".into()))?;
    let split = |o: usize, n: usize| -> Vec<Vec<f64>> {
        (0..np).map(|a| x.as_slice()[o + a * n..o + (a + 1) * n].to_vec()).collect()
    };
    Ok(CoupledSgSolution {
        families,
        u1: split(offset[0], ns[0]),
        u2: split(offset[1], ns[1]),
        lambda: split(offset[2], m),
        index_set: space,
    })
}

/// Running moments of Monte-Carlo samples over the merged dofs. Power sums
/// are taken about the first sample to limit cancellation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McAccumulator {
    pub n: usize,
    pub seed: u64,
    pub shift: Vec<f64>,
    /// `Σ (x − shift)^k` for `k = 1..4`.
    pub sums: [Vec<f64>; 4],
    /// Components of every sample at the probe node; constrained ones are 0.
    pub probe: Vec<Vec<f64>>,
}

impl McAccumulator {
    fn new(seed: u64, shift: Vec<f64>) -> Self {
        let n = shift.len();
        Self {
            n: 0,
            seed,
            shift,
            sums: std::array::from_fn(|_| vec![0.0; n]),
            probe: Vec::new(),
        }
    }

    fn push(&mut self, x: &[f64], probe_dofs: &[Option<usize>]) {
        for (k, (&xi, &c)) in x.iter().zip(&self.shift).enumerate() {
            let y = xi - c;
            let y2 = y * y;
            self.sums[0][k] += y;
            self.sums[1][k] += y2;
            self.sums[2][k] += y2 * y;
            self.sums[3][k] += y2 * y2;
        }
        self.probe.push(probe_dofs.iter().map(|d| d.map_or(0.0, |k| x[k])).collect());
        self.n += 1;
    }

    fn merge(&mut self, other: Self) {
        for (a, b) in self.sums.iter_mut().zip(other.sums) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.probe.extend(other.probe);
        self.n += other.n;
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.sums[0].iter().zip(&self.shift).map(|(s, c)| c + s / n).collect()
    }

    /// Population variance.
    pub fn variance(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.sums[0]
            .iter()
            .zip(&self.sums[1])
            .map(|(s1, s2)| {
                let m = s1 / n;
                (s2 / n - m * m).max(0.0)
            })
            .collect()
    }

    /// Standard errors of the mean and of the standard deviation.
    pub fn std_errors(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n as f64;
        let mut se_mean = Vec::with_capacity(self.shift.len());
        let mut se_std = Vec::with_capacity(self.shift.len());
        for k in 0..self.shift.len() {
            let [m1, m2, m3, m4] = [0, 1, 2, 3].map(|p| self.sums[p][k] / n);
            let var = (m2 - m1 * m1).max(0.0);
            let c4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1.powi(4);
            se_mean.push((var / n).sqrt());
            let std = var.sqrt();
            let var_var = ((c4 - var * var) / n).max(0.0);
            se_std.push(if std > 0.0 { var_var.sqrt() / (2.0 * std) } else { 0.0 });
        }
        (se_mean, se_std)
    }
}

/// Deterministic monolithic solve for one germ sample `xi` with the
/// untruncated coefficient fields.
pub fn solve_sample(problem: &CoupledProblem, mono: &MonolithicProblem, xi: &[f64]) -> Result<Vec<f64>> {
    let (d1, _) = problem.dims();
    let c1 = problem.sub[0].field.sample_exact(&xi[..d1])?;
    let c2 = problem.sub[1].field.sample_exact(&xi[d1..])?;
    let k = mono.stiffness_for(problem, &c1, &c2);
    let chol = BandCholesky::factor(&k).map_err(|e| Error::Singular(format!("sample system at ξ = {xi:?}: {e}")))?;
    Ok(chol.solve(&mono.load).as_slice().to_vec())
}

const MC_CHUNK: usize = 64;

/// Merged dofs of the probe point.
pub fn probe_merged_dofs(problem: &CoupledProblem, mono: &MonolithicProblem) -> Result<Vec<Option<usize>>> {
    let (sub, dofs) = problem.probe_dofs()?;
    Ok(dofs.iter().map(|d| d.map(|k| mono.restriction[sub][k])).collect())
}

pub fn monte_carlo_reference(problem: &CoupledProblem, n: usize, seed: u64) -> Result<McAccumulator> {
    if n == 0 {
        return Err(Error::InvalidInput("Monte-Carlo reference needs at least one sample".into()));
    }
    let mono = as_monolithic(problem)?;
    let families = problem.families();
    let probe = probe_merged_dofs(problem, &mono)?;
    let draw = |s: usize| -> Result<Vec<f64>> {
        let xi = draw_germ(&families, &mut stream(seed, PURPOSE_MC, s as u64));
        solve_sample(problem, &mono, &xi)
    };
    let first = draw(0)?;
    let base = McAccumulator::new(seed, first.clone());
    let chunks: Vec<McAccumulator> = (0..n.div_ceil(MC_CHUNK))
        .into_par_iter()
        .map(|c| -> Result<McAccumulator> {
            let mut acc = McAccumulator::new(seed, base.shift.clone());
            for s in c * MC_CHUNK..((c + 1) * MC_CHUNK).min(n) {
                let x = if s == 0 { first.clone() } else { draw(s)? };
                acc.push(&x, &probe);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut acc = base;
    for c in chunks {
        acc.merge(c);
    }
    Ok(acc)
}
