//! Block FETI solver for the deterministic-factor saddle system
//!
//! ```text
//! K̂₁ û₁ − Ĉ₁ λ̂ = f̂₁
//! K̂₂ û₂ + Ĉ₂ λ̂ = f̂₂
//! −Ĉ₁ᵀ û₁ + Ĉ₂ᵀ û₂ = 0
//! ```
//!
//! Block vectors are stored flat, block `l` occupying `l·n .. (l+1)·n`.
//! `K̂ᵢ` is kept as `r²` weighted sums of the sparse stiffness modes and is
//! only ever applied; `K̂₂` may be singular with null space `R̂₂`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::Preconditioner;
use crate::linalg::{pcg, spd_inverse};
use crate::problems::{CoupledProblem, SubdomainProblem};
use crate::sparse::{BandCholesky, CsrMatrix};
use crate::{Error, Result};

/// Expectations of the stochastic factors that weight every block operator.
#[derive(Debug, Clone)]
pub struct FactorMoments {
    pub rank: usize,
    /// `E_i[φ_iˡ φ_iˡ']`
    pub gram_sub: [DMatrix<f64>; 2],
    /// `E[φ₁ˡφ₂ˡ φ₁ˡ'φ₂ˡ']`
    pub gram: DMatrix<f64>,
    /// `E[φ₁ˡ] E[φ₂ˡ]`
    pub mean: Vec<f64>,
    /// `coupling[i][j][(l, l')] = E_i[ψ_j φ_iˡ φ_iˡ']`
    pub coupling: [Vec<DMatrix<f64>>; 2],
}

impl FactorMoments {
    /// `galerkin[i].bilinear(j, a, b) = E_i[ψ_j a b]` for sub-domain `i`.
    pub fn new(
        galerkin: [&crate::pc::GalerkinTensor; 2],
        phi1: &[Vec<f64>],
        phi2: &[Vec<f64>],
    ) -> Result<Self> {
        let r = phi1.len();
        if phi2.len() != r || r == 0 {
            return Err(Error::DimensionMismatch {
                expected: r.max(1),
                got: phi2.len(),
            });
        }
        let phis = [phi1, phi2];
        let mut gram_sub = [DMatrix::zeros(r, r), DMatrix::zeros(r, r)];
        let mut coupling: [Vec<DMatrix<f64>>; 2] = [Vec::new(), Vec::new()];
        for i in 0..2 {
            let g = galerkin[i];
            for phi in phis[i] {
                if phi.len() != g.space_len {
                    return Err(Error::DimensionMismatch {
                        expected: g.space_len,
                        got: phi.len(),
                    });
                }
            }
            for a in 0..r {
                for b in 0..r {
                    gram_sub[i][(a, b)] = dot(&phis[i][a], &phis[i][b]);
                }
            }
            coupling[i] = (0..g.mats.len())
                .map(|j| {
                    let mut m = DMatrix::zeros(r, r);
                    for a in 0..r {
                        for b in a..r {
                            let v = g.bilinear(j, &phis[i][a], &phis[i][b]);
                            m[(a, b)] = v;
                            m[(b, a)] = v;
                        }
                    }
                    m
                })
                .collect();
        }
        let gram = gram_sub[0].component_mul(&gram_sub[1]);
        let mean = (0..r).map(|l| phi1[l][0] * phi2[l][0]).collect();
        Ok(Self {
            rank: r,
            gram_sub,
            gram,
            mean,
            coupling,
        })
    }

    /// `w_i(j, l, l')`: weight of stiffness mode `j` of sub-domain `i` in
    /// block `(l, l')`.
    pub fn weight(&self, i: usize, j: usize, l: usize, lp: usize) -> f64 {
        self.coupling[i][j][(l, lp)] * self.gram_sub[1 - i][(l, lp)]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `K̂ᵢ` of one sub-domain with its block-Jacobi factors.
#[derive(Debug, Clone)]
pub struct SubdomainBlocks {
    pub n: usize,
    pub rank: usize,
    /// Block `(l, l')` at `l·r + l'`.
    pub blocks: Vec<CsrMatrix>,
    diag: Vec<BandCholesky>,
}

impl SubdomainBlocks {
    fn new(sub: &SubdomainProblem, moments: &FactorMoments, i: usize) -> Result<Self> {
        let r = moments.rank;
        let mats: Vec<&CsrMatrix> = sub.modes.iter().collect();
        let mut blocks = Vec::with_capacity(r * r);
        for l in 0..r {
            for lp in 0..r {
                let w: Vec<f64> = (0..mats.len()).map(|j| moments.weight(i, j, l, lp)).collect();
                blocks.push(CsrMatrix::combine(&mats, &w));
            }
        }
        let rigid = &sub.rigid_modes;
        let mut diag = Vec::with_capacity(r);
        for l in 0..r {
            let b = &blocks[l * r + l];
            let f = if rigid.ncols() == 0 {
                BandCholesky::factor(b)
            } else {
                BandCholesky::factor(&shifted(b))
            };
            diag.push(f.map_err(|e| match e {
                Error::NotPositiveDefinite { pivot, value } => Error::Singular(format!(
                    "diagonal block {l} of sub-domain {} is not positive definite (pivot {pivot}, value {value:e})",
                    i + 1
                )),
                other => other,
            })?);
        }
        Ok(Self {
            n: sub.n_dofs(),
            rank: r,
            blocks,
            diag,
        })
    }

    pub fn block(&self, l: usize, lp: usize) -> &CsrMatrix {
        &self.blocks[l * self.rank + lp]
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let (n, r) = (self.n, self.rank);
        let mut y = DVector::zeros(n * r);
        for l in 0..r {
            let out = &mut y.as_mut_slice()[l * n..(l + 1) * n];
            for lp in 0..r {
                self.block(l, lp)
                    .matvec_add(1.0, &x.as_slice()[lp * n..(lp + 1) * n], out);
            }
        }
        y
    }

    fn block_jacobi(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut y = x.clone();
        for (l, f) in self.diag.iter().enumerate() {
            f.solve_in_place(&mut y.as_mut_slice()[l * n..(l + 1) * n]);
        }
        y
    }
}

/// `A + δI` with `δ` a tiny multiple of the diagonal scale, used to factor
/// singular floating blocks for preconditioning.
fn shifted(a: &CsrMatrix) -> CsrMatrix {
    let mut diag_max = 0.0f64;
    for i in 0..a.nrows {
        diag_max = diag_max.max(a.get(i, i).abs());
    }
    let delta = 1e-8 * diag_max.max(f64::MIN_POSITIVE);
    let mut values = a.values.clone();
    for i in 0..a.nrows {
        let (s, e) = (a.indptr[i], a.indptr[i + 1]);
        if let Ok(k) = a.indices[s..e].binary_search(&i) {
            values[s + k] += delta;
        }
    }
    a.with_values(values)
}

/// All block operators of the deterministic update for fixed factors.
#[derive(Debug, Clone)]
pub struct BlockOperators<'a> {
    pub problem: &'a CoupledProblem,
    pub moments: FactorMoments,
    pub k: [SubdomainBlocks; 2],
    pub f_hat: [DVector<f64>; 2],
    /// `R̂₂ᴵ = Ĉ₂ᵀ R̂₂`, dense (r·M_I × r·k).
    pub rigid_interface: DMatrix<f64>,
    pub inner_tol: f64,
}

impl<'a> BlockOperators<'a> {
    pub fn new(problem: &'a CoupledProblem, moments: FactorMoments, inner_tol: f64) -> Result<Self> {
        let r = moments.rank;
        let k = [
            SubdomainBlocks::new(&problem.sub[0], &moments, 0)?,
            SubdomainBlocks::new(&problem.sub[1], &moments, 1)?,
        ];
        let f_hat = [0, 1].map(|i| {
            let f = &problem.sub[i].load;
            let n = f.len();
            DVector::from_fn(r * n, |k, _| moments.mean[k / n] * f[k % n])
        });
        let mut ops = Self {
            problem,
            moments,
            k,
            f_hat,
            rigid_interface: DMatrix::zeros(0, 0),
            inner_tol,
        };
        let rm = problem.sub[1].rigid_modes.ncols();
        let mut ri = DMatrix::zeros(r * problem.n_interface(), r * rm);
        for a in 0..r {
            for c in 0..rm {
                let mut v = DVector::zeros(r * ops.k[1].n);
                v.rows_mut(a * ops.k[1].n, ops.k[1].n)
                    .copy_from(&problem.sub[1].rigid_modes.column(c));
                ri.set_column(a * rm + c, &ops.apply_ct(1, &v));
            }
        }
        ops.rigid_interface = ri;
        Ok(ops)
    }

    pub fn rank(&self) -> usize {
        self.moments.rank
    }

    pub fn n_interface(&self) -> usize {
        self.problem.n_interface()
    }

    /// `Ĉᵢ λ̂`: block `l` is `Σ_l' G(l,l') Cᵢ λ_l'`.
    pub fn apply_c(&self, i: usize, lambda: &DVector<f64>) -> DVector<f64> {
        let (r, m, n) = (self.rank(), self.n_interface(), self.k[i].n);
        let sub = &self.problem.sub[i];
        let mut out = DVector::zeros(r * n);
        for l in 0..r {
            let dst = &mut out.as_mut_slice()[l * n..(l + 1) * n];
            for lp in 0..r {
                let g = self.moments.gram[(l, lp)];
                sub.scatter_interface(&lambda.as_slice()[lp * m..(lp + 1) * m], g, dst);
            }
        }
        out
    }

    /// `Ĉᵢᵀ û`.
    pub fn apply_ct(&self, i: usize, u: &DVector<f64>) -> DVector<f64> {
        let (r, m, n) = (self.rank(), self.n_interface(), self.k[i].n);
        let sub = &self.problem.sub[i];
        let restricted: Vec<DVector<f64>> = (0..r)
            .map(|lp| sub.restrict_interface(&u.as_slice()[lp * n..(lp + 1) * n]))
            .collect();
        let mut out = DVector::zeros(r * m);
        for l in 0..r {
            let mut dst = out.rows_mut(l * m, m);
            for (lp, v) in restricted.iter().enumerate() {
                dst.axpy(self.moments.gram[(l, lp)], v, 1.0);
            }
        }
        out
    }

    pub fn apply_k(&self, i: usize, x: &DVector<f64>) -> DVector<f64> {
        self.k[i].apply(x)
    }

    /// `R̂₂ᵀ x` (coefficients on the block-diagonal null-space basis).
    pub fn rigid_coefficients(&self, x: &DVector<f64>) -> DVector<f64> {
        let rm = &self.problem.sub[1].rigid_modes;
        let (r, n, k) = (self.rank(), self.k[1].n, rm.ncols());
        let mut c = DVector::zeros(r * k);
        for l in 0..r {
            let block = x.rows(l * n, n);
            c.rows_mut(l * k, k).copy_from(&(rm.transpose() * block));
        }
        c
    }

    /// `R̂₂ α`.
    pub fn rigid_expand(&self, alpha: &DVector<f64>) -> DVector<f64> {
        let rm = &self.problem.sub[1].rigid_modes;
        let (r, n, k) = (self.rank(), self.k[1].n, rm.ncols());
        let mut x = DVector::zeros(r * n);
        for l in 0..r {
            x.rows_mut(l * n, n).copy_from(&(rm * alpha.rows(l * k, k)));
        }
        x
    }

    /// `(I − R̂₂R̂₂ᵀ) x`; the columns of `R̂₂` are orthonormal.
    pub fn rigid_project(&self, x: &DVector<f64>) -> DVector<f64> {
        if self.problem.sub[1].rigid_modes.ncols() == 0 {
            return x.clone();
        }
        x - self.rigid_expand(&self.rigid_coefficients(x))
    }

    /// `K̂₁⁻¹ b` by block-Jacobi preconditioned CG.
    pub fn apply_k1_inverse(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let max_iter = 20 * b.len().max(10);
        let (x, _) = pcg(
            "block K1 inverse",
            |v| self.k[0].apply(v),
            |r| self.k[0].block_jacobi(r),
            b,
            None,
            self.inner_tol,
            max_iter,
        )?;
        Ok(x)
    }

    /// Pseudo-inverse `K̂₂⁺ b` for a compatible right-hand side: the solution
    /// orthogonal to `R̂₂`. Fails when `‖R̂₂ᵀb‖ > tol·‖b‖`.
    pub fn apply_k2_pseudoinverse(&self, b: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
        if self.problem.sub[1].floating() {
            let violation = self.rigid_coefficients(b).norm();
            if violation > tol * b.norm() {
                return Err(Error::Incompatible {
                    violation,
                    tolerance: tol * b.norm(),
                });
            }
        }
        self.apply_k2_moore_penrose(b)
    }

    /// Moore–Penrose variant: removes the null-space component of `b` first.
    pub fn apply_k2_moore_penrose(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        if !self.problem.sub[1].floating() {
            let max_iter = 20 * b.len().max(10);
            let (x, _) = pcg(
                "block K2 inverse",
                |v| self.k[1].apply(v),
                |r| self.k[1].block_jacobi(r),
                b,
                None,
                self.inner_tol,
                max_iter,
            )?;
            return Ok(x);
        }
        let bp = self.rigid_project(b);
        let max_iter = 20 * b.len().max(10);
        let (x, _) = pcg(
            "block K2 pseudo-inverse",
            |v| self.k[1].apply(v),
            |r| self.rigid_project(&self.k[1].block_jacobi(&self.rigid_project(r))),
            &bp,
            None,
            self.inner_tol,
            max_iter,
        )?;
        Ok(self.rigid_project(&x))
    }

    /// `F̂_I λ = Ĉ₁ᵀK̂₁⁻¹Ĉ₁λ + Ĉ₂ᵀK̂₂⁺Ĉ₂λ`.
    pub fn apply_interface(&self, lambda: &DVector<f64>) -> Result<DVector<f64>> {
        let a = self.apply_ct(0, &self.apply_k1_inverse(&self.apply_c(0, lambda))?);
        let b = self.apply_ct(1, &self.apply_k2_moore_penrose(&self.apply_c(1, lambda))?);
        Ok(a + b)
    }

    /// `d̂ = Ĉ₂ᵀK̂₂⁺f̂₂ − Ĉ₁ᵀK̂₁⁻¹f̂₁`.
    pub fn interface_rhs(&self) -> Result<DVector<f64>> {
        let a = self.apply_ct(1, &self.apply_k2_moore_penrose(&self.f_hat[1])?);
        let b = self.apply_ct(0, &self.apply_k1_inverse(&self.f_hat[0])?);
        Ok(a - b)
    }

    /// `ê = R̂₂ᵀ f̂₂`.
    pub fn rigid_rhs(&self) -> DVector<f64> {
        self.rigid_coefficients(&self.f_hat[1])
    }

    /// Dense block-assembled `K̂ᵢ` (tiny instances only).
    pub fn dense_k(&self, i: usize) -> DMatrix<f64> {
        let (r, n) = (self.rank(), self.k[i].n);
        let mut m = DMatrix::zeros(r * n, r * n);
        for l in 0..r {
            for lp in 0..r {
                m.view_mut((l * n, lp * n), (n, n))
                    .copy_from(&self.k[i].block(l, lp).to_dense());
            }
        }
        m
    }

    /// Dense `Ĉᵢ` (r·nᵢ × r·M_I).
    pub fn dense_c(&self, i: usize) -> DMatrix<f64> {
        let c = self.problem.sub[i].extractor();
        self.moments.gram.kronecker(&c)
    }
}

/// Projector onto the complement of `range(R̂₂ᴵ)` plus the small inverse it
/// needs.
#[derive(Debug, Clone)]
pub struct InterfaceProjector {
    basis: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
}

impl InterfaceProjector {
    pub fn new(rigid_interface: &DMatrix<f64>) -> Result<Self> {
        let gram_inv = if rigid_interface.ncols() == 0 {
            DMatrix::zeros(0, 0)
        } else {
            spd_inverse(
                &(rigid_interface.transpose() * rigid_interface),
                "interface image of the rigid-body modes is rank deficient",
            )?
        };
        Ok(Self {
            basis: rigid_interface.clone(),
            gram_inv,
        })
    }

    pub fn is_identity(&self) -> bool {
        self.basis.ncols() == 0
    }

    /// `P̂ x = x − R(RᵀR)⁻¹Rᵀx`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        if self.is_identity() {
            return x.clone();
        }
        x - &self.basis * (&self.gram_inv * (self.basis.transpose() * x))
    }

    /// `R(RᵀR)⁻¹ e`.
    pub fn particular(&self, e: &DVector<f64>) -> DVector<f64> {
        if self.is_identity() {
            return DVector::zeros(self.basis.nrows());
        }
        &self.basis * (&self.gram_inv * e)
    }

    /// `(RᵀR)⁻¹Rᵀ x`.
    pub fn coefficients(&self, x: &DVector<f64>) -> DVector<f64> {
        if self.is_identity() {
            return DVector::zeros(0);
        }
        &self.gram_inv * (self.basis.transpose() * x)
    }
}

/// Interface preconditioner `F̄⁻¹ = S⁻¹ (Ĉ₁ᵀK̂₁Ĉ₁ + Ĉ₂ᵀK̂₂Ĉ₂) S⁻¹` with
/// `S = Ĉ₁ᵀĈ₁ + Ĉ₂ᵀĈ₂ = 2 G² ⊗ I`, stored densely (r·M_I square).
#[derive(Debug, Clone)]
pub enum InterfacePreconditioner {
    Identity,
    Scaled(DMatrix<f64>),
}

impl InterfacePreconditioner {
    pub fn build(ops: &BlockOperators, kind: Preconditioner) -> Result<Self> {
        if kind == Preconditioner::Identity {
            return Ok(Self::Identity);
        }
        let (r, m) = (ops.rank(), ops.n_interface());
        let mut interface_stiffness = DMatrix::zeros(r * m, r * m);
        for i in 0..2 {
            let iface = &ops.problem.sub[i].interface;
            for l in 0..r {
                for lp in 0..r {
                    let blk = ops.k[i].block(l, lp);
                    for (a, &ia) in iface.iter().enumerate() {
                        for (b, &ib) in iface.iter().enumerate() {
                            interface_stiffness[(l * m + a, lp * m + b)] += blk.get(ia, ib);
                        }
                    }
                }
            }
        }
        // Ĉᵢᵀ K̂ᵢ Ĉᵢ = (G⊗I) Kᴵ (G⊗I) and S⁻¹ = ½ G⁻² ⊗ I
        let g_inv = spd_inverse(&ops.moments.gram, "Gram matrix of the stochastic factors is singular")?;
        let scale = (g_inv * 0.5).kronecker(&DMatrix::<f64>::identity(m, m));
        Ok(Self::Scaled(&scale * interface_stiffness * &scale))
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::Identity => x.clone(),
            Self::Scaled(m) => m * x,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PcpgReport {
    pub iterations: usize,
    /// `‖w_k‖ / ‖d̂‖` per iteration, starting with the initial residual.
    pub trace: Vec<f64>,
    pub converged: bool,
}

/// Projected preconditioned conjugate gradients on the interface problem
/// `F̂λ − R̂₂ᴵα = d̂`, `R̂₂ᴵᵀλ = ê`.
pub fn pcpg_solve(
    ops: &BlockOperators,
    projector: &InterfaceProjector,
    precond: &InterfacePreconditioner,
    d_hat: &DVector<f64>,
    eps: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, PcpgReport)> {
    let e_hat = ops.rigid_rhs();
    let mut lambda = projector.particular(&e_hat);
    let dnorm = d_hat.norm();
    let mut report = PcpgReport::default();
    let mut w = projector.apply(&(d_hat - ops.apply_interface(&lambda)?));
    if dnorm == 0.0 {
        report.converged = w.norm() == 0.0;
        if report.converged {
            return Ok((lambda, report));
        }
    }
    let scale = if dnorm > 0.0 { dnorm } else { 1.0 };
    report.trace.push(w.norm() / scale);
    let mut p_prev: Option<DVector<f64>> = None;
    let mut yw_prev = 0.0;
    while w.norm() / scale >= eps {
        if report.iterations >= max_iter {
            return Err(Error::NotConverged {
                solver: "PCPG",
                iterations: report.iterations,
                residual: w.norm() / scale,
                trace: report.trace,
            });
        }
        let z = precond.apply(&projector.apply(&w));
        let y = projector.apply(&z);
        let yw = y.dot(&w);
        let p = match p_prev {
            None => y,
            Some(pp) => {
                let s = yw / yw_prev;
                y + pp * s
            }
        };
        let fp = ops.apply_interface(&p)?;
        let pfp = p.dot(&fp);
        if !(pfp > 0.0) || !(yw > 0.0) {
            return Err(Error::NotConverged {
                solver: "PCPG (breakdown)",
                iterations: report.iterations,
                residual: w.norm() / scale,
                trace: report.trace,
            });
        }
        let gamma = yw / pfp;
        lambda.axpy(gamma, &p, 1.0);
        w -= projector.apply(&fp) * gamma;
        report.iterations += 1;
        report.trace.push(w.norm() / scale);
        yw_prev = yw;
        p_prev = Some(p);
    }
    report.converged = true;
    Ok((lambda, report))
}

/// Deterministic factors recovered from the multipliers.
#[derive(Debug, Clone)]
pub struct SaddleSolution {
    pub u1: DVector<f64>,
    pub u2: DVector<f64>,
    pub lambda: DVector<f64>,
    pub alpha: DVector<f64>,
    pub pcpg: PcpgReport,
}

/// `û₁ = K̂₁⁻¹(f̂₁ + Ĉ₁λ̂)`, `û₂ = K̂₂⁺(f̂₂ − Ĉ₂λ̂) + R̂₂α̂`,
/// `α̂ = (R̂₂ᴵᵀR̂₂ᴵ)⁻¹R̂₂ᴵᵀ(F̂λ̂ − d̂)`.
pub fn recover_primal(
    ops: &BlockOperators,
    projector: &InterfaceProjector,
    lambda: &DVector<f64>,
    d_hat: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let u1 = ops.apply_k1_inverse(&(&ops.f_hat[0] + ops.apply_c(0, lambda)))?;
    let rhs2 = &ops.f_hat[1] - ops.apply_c(1, lambda);
    let mut u2 = ops.apply_k2_moore_penrose(&rhs2)?;
    let alpha = if projector.is_identity() {
        DVector::zeros(0)
    } else {
        let a = projector.coefficients(&(ops.apply_interface(lambda)? - d_hat));
        u2 += ops.rigid_expand(&a);
        a
    };
    Ok((u1, u2, alpha))
}

/// Full deterministic update: interface problem by PCPG, then recovery.
pub fn solve_saddle(
    ops: &BlockOperators,
    kind: Preconditioner,
    eps: f64,
    max_iter: Option<usize>,
) -> Result<SaddleSolution> {
    let projector = InterfaceProjector::new(&ops.rigid_interface)?;
    let precond = InterfacePreconditioner::build(ops, kind)?;
    let d_hat = ops.interface_rhs()?;
    let cap = max_iter.unwrap_or(10 * ops.rank() * ops.n_interface());
    let (lambda, pcpg) = pcpg_solve(ops, &projector, &precond, &d_hat, eps, cap)?;
    let (u1, u2, alpha) = recover_primal(ops, &projector, &lambda, &d_hat)?;
    Ok(SaddleSolution {
        u1,
        u2,
        lambda,
        alpha,
        pcpg,
    })
}

/// Dense LU solve of the block saddle system. `sign = +1` is the
/// `(−Ĉ₁, +Ĉ₂)` coupling used throughout; `sign = −1` flips both couplings
/// (and therefore the multiplier).
pub fn dense_saddle_solve(
    ops: &BlockOperators,
    sign: f64,
) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let (k1, k2) = (ops.dense_k(0), ops.dense_k(1));
    let (c1, c2) = (ops.dense_c(0) * (-sign), ops.dense_c(1) * sign);
    let (n1, n2, m) = (k1.nrows(), k2.nrows(), c1.ncols());
    let n = n1 + n2 + m;
    let mut a = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (n1, n1)).copy_from(&k1);
    a.view_mut((n1, n1), (n2, n2)).copy_from(&k2);
    a.view_mut((0, n1 + n2), (n1, m)).copy_from(&c1);
    a.view_mut((n1, n1 + n2), (n2, m)).copy_from(&c2);
    a.view_mut((n1 + n2, 0), (m, n1)).copy_from(&c1.transpose());
    a.view_mut((n1 + n2, n1), (m, n2)).copy_from(&c2.transpose());
    let mut b = DVector::zeros(n);
    b.rows_mut(0, n1).copy_from(&ops.f_hat[0]);
    b.rows_mut(n1, n2).copy_from(&ops.f_hat[1]);
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Singular("dense block saddle system".into()))?;
    Ok((
        x.rows(0, n1).into_owned(),
        x.rows(n1, n2).into_owned(),
        x.rows(n1 + n2, m).into_owned(),
    ))
}
