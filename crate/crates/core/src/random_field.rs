//! Karhunen–Loève discretization of Gaussian covariance kernels and the
//! polynomial chaos coefficient fields built from it.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::fem::{mass_matrix, Mesh};
use crate::pc::{eval_multivariate, Family, MultiIndexSet};
use crate::{Error, Result};

/// `C(x, y) = σ² exp(−|x − y|² / l²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernel {
    pub sigma: f64,
    pub corr_len: f64,
}

impl GaussianKernel {
    pub fn new(sigma: f64, corr_len: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !(corr_len > 0.0) {
            return Err(Error::InvalidInput(format!(
                "kernel needs sigma >= 0 and corr_len > 0 (got {sigma}, {corr_len})"
            )));
        }
        Ok(Self { sigma, corr_len })
    }

    pub fn eval(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        let r2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
        self.sigma * self.sigma * (-r2 / (self.corr_len * self.corr_len)).exp()
    }
}

/// Leading eigenpairs of the covariance operator on one mesh. Modes are
/// nodal vectors, orthonormal in the FE mass inner product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KLBasis {
    pub tau: Vec<f64>,
    pub modes: Vec<Vec<f64>>,
    /// Sum of all discrete eigenvalues, `tr(C M)`.
    #[serde(default)]
    pub total_variance: f64,
}

impl KLBasis {
    pub fn dim(&self) -> usize {
        self.tau.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.modes.first().map_or(0, |m| m.len())
    }

    /// `Σ_j τ_j g_j(x)²` at every node.
    pub fn pointwise_variance(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.n_nodes()];
        for (t, g) in self.tau.iter().zip(&self.modes) {
            for (vi, gi) in v.iter_mut().zip(g) {
                *vi += t * gi * gi;
            }
        }
        v
    }

    /// `Σ_j √τ_j g_j ξ_j` at every node.
    pub fn gaussian_sample(&self, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: xi.len(),
            });
        }
        let mut v = vec![0.0; self.n_nodes()];
        for ((t, g), x) in self.tau.iter().zip(&self.modes).zip(xi) {
            let s = t.sqrt() * x;
            for (vi, gi) in v.iter_mut().zip(g) {
                *vi += s * gi;
            }
        }
        Ok(v)
    }

    /// `{"tau": [...], "modes": [[...], ...]}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "tau": self.tau, "modes": self.modes })
    }
}

/// Solves `(M C M) g = τ M g` densely and keeps the `d` largest pairs.
pub fn discretize_kl(kernel: &GaussianKernel, mesh: &Mesh, d: usize) -> Result<KLBasis> {
    let n = mesh.n_nodes();
    if d > n {
        return Err(Error::InvalidInput(format!(
            "{d} KL modes requested on a mesh with {n} nodes"
        )));
    }
    let m = mass_matrix(mesh).to_dense();
    let l = m
        .cholesky()
        .ok_or_else(|| Error::Eigen("mass matrix is not positive definite".into()))?
        .l();
    let c = DMatrix::from_fn(n, n, |i, j| kernel.eval(mesh.coords[i], mesh.coords[j]));
    // with M = L Lᵀ the problem becomes Lᵀ C L y = τ y, g = L⁻ᵀ y
    let a = l.transpose() * &c * &l;
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(a, 1e-14, 10_000)
        .ok_or_else(|| Error::Eigen("symmetric eigensolver did not converge".into()))?;
    let total_variance = eig.eigenvalues.sum();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let lt = l.transpose();
    let mut tau = Vec::with_capacity(d);
    let mut modes = Vec::with_capacity(d);
    for &k in order.iter().take(d) {
        let t = eig.eigenvalues[k];
        if t < -1e-10 * scale {
            return Err(Error::Eigen(format!(
                "only {} nonnegative eigenvalues available, {d} requested",
                tau.len()
            )));
        }
        let y = eig.eigenvectors.column(k).into_owned();
        let g = lt
            .solve_upper_triangular(&y)
            .ok_or_else(|| Error::Eigen("triangular solve failed".into()))?;
        let imax = g.iamax();
        let sign = if g[imax] < 0.0 { -1.0 } else { 1.0 };
        tau.push(t.max(0.0));
        modes.push(g.iter().map(|v| sign * v).collect());
    }
    Ok(KLBasis {
        tau,
        modes,
        total_variance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldKind {
    /// `κ = shift + exp(mean_log + G)`.
    LognormalShifted { mean_log: f64, shift: f64 },
    /// `E = mean + Σ √τ_j g_j ξ_j`, `ξ_j ~ U(−1, 1)`.
    AffineUniform { mean: f64 },
}

/// Coefficient field as a PC expansion over one sub-domain's germ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomFieldPC {
    pub kind: FieldKind,
    pub family: Family,
    pub index_set: MultiIndexSet,
    /// `coeffs[i]` is the nodal coefficient field of multi-index `i`.
    pub coeffs: Vec<Vec<f64>>,
    pub kl: KLBasis,
}

/// `κ_i(x) = κ̄(x) Π_j (√τ_j g_j(x))^{i_j} / √(i_j!)` for `|i| ≤ order`,
/// `κ̄ = exp(Ḡ + Σ τ_j g_j² / 2)`.
pub fn lognormal_pc_coefficients(
    kl: &KLBasis,
    mean_log: f64,
    shift: f64,
    order: usize,
) -> Result<RandomFieldPC> {
    let set = MultiIndexSet::new(kl.dim(), order)?;
    let var = kl.pointwise_variance();
    let n = kl.n_nodes();
    let mean: Vec<f64> = var.iter().map(|v| (mean_log + 0.5 * v).exp()).collect();
    let sqrt_fact: Vec<f64> = (0..=order)
        .scan(1.0f64, |acc, k| {
            if k > 0 {
                *acc *= (k as f64).sqrt();
            }
            Some(*acc)
        })
        .collect();
    let coeffs = set
        .iter()
        .map(|idx| {
            (0..n)
                .map(|node| {
                    let mut v = mean[node];
                    for (j, &e) in idx.iter().enumerate() {
                        if e > 0 {
                            let a = kl.tau[j].sqrt() * kl.modes[j][node];
                            v *= a.powi(e as i32) / sqrt_fact[e as usize];
                        }
                    }
                    v
                })
                .collect()
        })
        .collect();
    Ok(RandomFieldPC {
        kind: FieldKind::LognormalShifted { mean_log, shift },
        family: Family::Hermite,
        index_set: set,
        coeffs,
        kl: kl.clone(),
    })
}

/// Order-one Legendre expansion of the affine field: mean on index 0 and
/// `√τ_j g_j / √3` on the unit index `e_j`.
pub fn affine_uniform_field(kl: &KLBasis, mean: f64) -> Result<RandomFieldPC> {
    let set = MultiIndexSet::new(kl.dim(), 1)?;
    let n = kl.n_nodes();
    let mut coeffs = vec![vec![mean; n]];
    for j in 0..kl.dim() {
        let s = kl.tau[j].sqrt() / 3f64.sqrt();
        coeffs.push(kl.modes[j].iter().map(|g| s * g).collect());
    }
    debug_assert_eq!(coeffs.len(), set.len());
    Ok(RandomFieldPC {
        kind: FieldKind::AffineUniform { mean },
        family: Family::Legendre,
        index_set: set,
        coeffs,
        kl: kl.clone(),
    })
}

impl RandomFieldPC {
    pub fn dim(&self) -> usize {
        self.index_set.d
    }

    pub fn n_modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.kl.n_nodes()
    }

    pub fn shift(&self) -> f64 {
        match self.kind {
            FieldKind::LognormalShifted { shift, .. } => shift,
            FieldKind::AffineUniform { .. } => 0.0,
        }
    }

    /// Nodal field of mode `j` as it enters the stiffness operator; the
    /// shift is carried by the mean mode.
    pub fn operator_mode(&self, j: usize) -> Vec<f64> {
        let s = if j == 0 { self.shift() } else { 0.0 };
        self.coeffs[j].iter().map(|c| c + s).collect()
    }

    /// PC reconstruction `shift + Σ_i κ_i ψ_i(ξ)`.
    pub fn sample(&self, xi: &[f64]) -> Result<Vec<f64>> {
        let psi = eval_multivariate(self.family, &self.index_set, xi)?;
        let mut v = vec![self.shift(); self.n_nodes()];
        for (c, p) in self.coeffs.iter().zip(&psi) {
            if *p == 0.0 {
                continue;
            }
            for (vi, ci) in v.iter_mut().zip(c) {
                *vi += p * ci;
            }
        }
        Ok(v)
    }

    /// Untruncated field at `ξ` (the lognormal is evaluated through the
    /// exponential, the affine field is exact already).
    pub fn sample_exact(&self, xi: &[f64]) -> Result<Vec<f64>> {
        let g = self.kl.gaussian_sample(xi)?;
        Ok(match self.kind {
            FieldKind::LognormalShifted { mean_log, shift } => {
                g.iter().map(|v| shift + (mean_log + v).exp()).collect()
            }
            FieldKind::AffineUniform { mean } => g.iter().map(|v| mean + v).collect(),
        })
    }

    /// Pointwise mean and variance of the untruncated field.
    pub fn exact_moments(&self) -> (Vec<f64>, Vec<f64>) {
        let var = self.kl.pointwise_variance();
        match self.kind {
            FieldKind::LognormalShifted { mean_log, shift } => var
                .iter()
                .map(|v| {
                    let m = (mean_log + 0.5 * v).exp();
                    (shift + m, m * m * (v.exp() - 1.0))
                })
                .unzip(),
            FieldKind::AffineUniform { mean } => {
                (vec![mean; var.len()], var.iter().map(|v| v / 3.0).collect())
            }
        }
    }

    /// Pointwise variance of the truncated PC reconstruction.
    pub fn pc_variance(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.n_nodes()];
        for c in self.coeffs.iter().skip(1) {
            for (vi, ci) in v.iter_mut().zip(c) {
                *vi += ci * ci;
            }
        }
        v
    }
}
