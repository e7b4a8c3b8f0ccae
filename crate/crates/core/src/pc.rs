//! Orthonormal polynomial chaos bases.
//!
//! Two families are supported: Hermite polynomials orthonormal under the
//! standard Gaussian measure, and Legendre polynomials orthonormal under the
//! uniform probability measure on `[-1, 1]`. Multivariate basis functions are
//! tensor products indexed by a [`MultiIndexSet`] of total degree `≤ p`, in
//! graded lexicographic order. Since the univariate bases are orthonormal,
//! every Gram matrix is the identity and all multivariate expectations of
//! triple products factor into univariate [`TripleTensor`] entries.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Orthonormal Hermite, ξ ~ N(0, 1).
    Hermite,
    /// Orthonormal Legendre, ξ ~ U(-1, 1).
    Legendre,
}

impl Family {
    /// Values `ψ_0(x), …, ψ_n(x)` by the three-term recurrence.
    pub fn eval_all(self, n: usize, x: f64, out: &mut Vec<f64>) {
        out.clear();
        out.push(1.0);
        if n == 0 {
            return;
        }
        match self {
            Family::Hermite => {
                out.push(x);
                for k in 1..n {
                    let kf = k as f64;
                    let next = (x * out[k] - kf.sqrt() * out[k - 1]) / (kf + 1.0).sqrt();
                    out.push(next);
                }
            }
            Family::Legendre => {
                // standard Legendre P_k, normalized at the end
                out.push(x);
                for k in 1..n {
                    let kf = k as f64;
                    let next = ((2.0 * kf + 1.0) * x * out[k] - kf * out[k - 1]) / (kf + 1.0);
                    out.push(next);
                }
                for (k, v) in out.iter_mut().enumerate() {
                    *v *= (2.0 * k as f64 + 1.0).sqrt();
                }
            }
        }
    }

    pub fn eval(self, n: usize, x: f64) -> f64 {
        let mut buf = Vec::with_capacity(n + 1);
        self.eval_all(n, x, &mut buf);
        buf[n]
    }

    /// Off-diagonal entry `b_k` of the Jacobi matrix for the orthonormal recurrence
    /// `x ψ_k = b_{k+1} ψ_{k+1} + b_k ψ_{k-1}`.
    fn jacobi_offdiag(self, k: usize) -> f64 {
        let kf = k as f64;
        match self {
            Family::Hermite => kf.sqrt(),
            Family::Legendre => kf / (4.0 * kf * kf - 1.0).sqrt(),
        }
    }

    /// Gauss quadrature with `n` nodes for the family's probability measure
    /// (Golub–Welsch). Weights sum to one.
    pub fn gauss_rule(self, n: usize) -> (Vec<f64>, Vec<f64>) {
        assert!(n > 0, "quadrature needs at least one node");
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let b = self.jacobi_offdiag(k);
            jac[(k, k - 1)] = b;
            jac[(k - 1, k)] = b;
        }
        let eig = SymmetricEigen::new(jac);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let norm: f64 = pairs.iter().map(|p| p.1).sum();
        pairs.into_iter().map(|(x, w)| (x, w / norm)).unzip()
    }

    pub fn sample<R: rand::Rng + ?Sized>(self, rng: &mut R) -> f64 {
        use rand_distr::{Distribution, StandardNormal, Uniform};
        match self {
            Family::Hermite => StandardNormal.sample(rng),
            Family::Legendre => Uniform::new_inclusive(-1.0, 1.0).unwrap().sample(rng),
        }
    }
}

/// Number of multi-indices in `d` dimensions with total degree `≤ p`,
/// i.e. `(p+d)! / (p! d!)`.
pub fn cardinality(d: usize, p: usize) -> Result<usize> {
    let mut acc: u128 = 1;
    for k in 1..=d.min(p) as u128 {
        let n = (p.max(d)) as u128 + k;
        acc = acc.checked_mul(n).ok_or(Error::SizeOverflow { d, p })? / k;
    }
    usize::try_from(acc).map_err(|_| Error::SizeOverflow { d, p })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiIndexSet {
    pub d: usize,
    pub p: usize,
    indices: Vec<Vec<u32>>,
    #[serde(skip)]
    lookup: HashMap<Vec<u32>, usize>,
}

impl MultiIndexSet {
    /// All multi-indices with `‖i‖₁ ≤ p`, graded lexicographic: increasing total
    /// degree, and within one degree, decreasing in the leading components.
    pub fn new(d: usize, p: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("index set dimension must be ≥ 1".into()));
        }
        let size = cardinality(d, p)?;
        let mut indices = Vec::with_capacity(size);
        let mut current = vec![0u32; d];
        for degree in 0..=p {
            compositions(degree as u32, 0, &mut current, &mut indices);
        }
        debug_assert_eq!(indices.len(), size);
        Ok(Self::from_indices(d, p, indices))
    }

    /// Arbitrary list of multi-indices, kept in the given order.
    pub fn from_list(d: usize, indices: Vec<Vec<u32>>) -> Result<Self> {
        if let Some(bad) = indices.iter().find(|i| i.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bad.len(),
            });
        }
        let p = indices
            .iter()
            .map(|i| i.iter().sum::<u32>() as usize)
            .max()
            .unwrap_or(0);
        Ok(Self::from_indices(d, p, indices))
    }

    fn from_indices(d: usize, p: usize, indices: Vec<Vec<u32>>) -> Self {
        let lookup = indices
            .iter()
            .enumerate()
            .map(|(k, i)| (i.clone(), k))
            .collect();
        Self { d, p, indices, lookup }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn get(&self, k: usize) -> &[u32] {
        &self.indices[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.indices.iter().map(|v| v.as_slice())
    }

    pub fn position(&self, index: &[u32]) -> Option<usize> {
        if self.lookup.is_empty() && !self.indices.is_empty() {
            return self.indices.iter().position(|i| i.as_slice() == index);
        }
        self.lookup.get(index).copied()
    }

    /// Restores the lookup table after deserialization.
    pub fn reindex(&mut self) {
        self.lookup = self
            .indices
            .iter()
            .enumerate()
            .map(|(k, i)| (i.clone(), k))
            .collect();
    }

    /// Largest single-component degree present.
    pub fn max_component(&self) -> usize {
        self.indices
            .iter()
            .flat_map(|i| i.iter())
            .copied()
            .max()
            .unwrap_or(0) as usize
    }
}

fn compositions(remaining: u32, pos: usize, current: &mut [u32], out: &mut Vec<Vec<u32>>) {
    let d = current.len();
    if pos == d - 1 {
        current[pos] = remaining;
        out.push(current.to_vec());
        return;
    }
    for v in (0..=remaining).rev() {
        current[pos] = v;
        compositions(remaining - v, pos + 1, current, out);
    }
    current[pos] = 0;
}

/// Evaluates every basis function of `set` at `point`, one family for all
/// dimensions.
pub fn eval_multivariate(family: Family, set: &MultiIndexSet, point: &[f64]) -> Result<Vec<f64>> {
    let families = vec![family; set.d];
    eval_multivariate_mixed(&families, set, point)
}

/// As [`eval_multivariate`] with one family per dimension.
pub fn eval_multivariate_mixed(
    families: &[Family],
    set: &MultiIndexSet,
    point: &[f64],
) -> Result<Vec<f64>> {
    if point.len() != set.d {
        return Err(Error::DimensionMismatch {
            expected: set.d,
            got: point.len(),
        });
    }
    if families.len() != set.d {
        return Err(Error::DimensionMismatch {
            expected: set.d,
            got: families.len(),
        });
    }
    let table = univariate_table(families, set.max_component(), point);
    Ok(set
        .iter()
        .map(|idx| {
            idx.iter()
                .enumerate()
                .map(|(k, &n)| table[k][n as usize])
                .product()
        })
        .collect())
}

fn univariate_table(families: &[Family], n: usize, point: &[f64]) -> Vec<Vec<f64>> {
    point
        .iter()
        .zip(families)
        .map(|(&x, fam)| {
            let mut buf = Vec::with_capacity(n + 1);
            fam.eval_all(n, x, &mut buf);
            buf
        })
        .collect()
}

/// `T[a][b][c] = E[ψ_a ψ_b ψ_c]` for `a ≤ A, b ≤ B, c ≤ C`.
#[derive(Debug, Clone)]
pub struct TripleTensor {
    pub family: Family,
    pub caps: (usize, usize, usize),
    data: Vec<f64>,
}

impl TripleTensor {
    pub fn new(family: Family, a_cap: usize, b_cap: usize, c_cap: usize) -> Self {
        let n = (a_cap + b_cap + c_cap + 1).div_ceil(2).max(1);
        let (nodes, weights) = family.gauss_rule(n);
        let maxdeg = a_cap.max(b_cap).max(c_cap);
        let vals: Vec<Vec<f64>> = nodes
            .iter()
            .map(|&x| {
                let mut buf = Vec::new();
                family.eval_all(maxdeg, x, &mut buf);
                buf
            })
            .collect();
        let (nb, nc) = (b_cap + 1, c_cap + 1);
        let mut data = vec![0.0; (a_cap + 1) * nb * nc];
        for a in 0..=a_cap {
            for b in 0..=b_cap {
                for c in 0..=c_cap {
                    // parity and triangle selection rules (both families are symmetric)
                    let selected =
                        (a + b + c) % 2 == 0 && a <= b + c && b <= a + c && c <= a + b;
                    if !selected {
                        continue;
                    }
                    let s: f64 = vals
                        .iter()
                        .zip(&weights)
                        .map(|(v, w)| w * v[a] * v[b] * v[c])
                        .sum();
                    data[(a * nb + b) * nc + c] = s;
                }
            }
        }
        Self {
            family,
            caps: (a_cap, b_cap, c_cap),
            data,
        }
    }

    /// Entry with bounds check against the caps.
    pub fn get(&self, a: usize, b: usize, c: usize) -> Result<f64> {
        let (ca, cb, cc) = self.caps;
        for (deg, cap) in [(a, ca), (b, cb), (c, cc)] {
            if deg > cap {
                return Err(Error::CapExceeded { degree: deg, cap });
            }
        }
        Ok(self.value(a, b, c))
    }

    #[inline]
    pub fn value(&self, a: usize, b: usize, c: usize) -> f64 {
        let (_, cb, cc) = self.caps;
        self.data[(a * (cb + 1) + b) * (cc + 1) + c]
    }
}

/// `E[ψ_a ψ_b ψ_c]` for multi-indices, as the product of univariate entries.
pub fn multivariate_triple_moment(
    a: &[u32],
    b: &[u32],
    c: &[u32],
    tensor: &TripleTensor,
) -> Result<f64> {
    if a.len() != b.len() || a.len() != c.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len().min(c.len()),
        });
    }
    let mut prod = 1.0;
    for k in 0..a.len() {
        prod *= tensor.get(a[k] as usize, b[k] as usize, c[k] as usize)?;
        if prod == 0.0 {
            break;
        }
    }
    Ok(prod)
}

/// Galerkin matrices `G_j[a, b] = E[ψ_j ψ_a ψ_b]` for every coefficient index `j`
/// of `modes`, with `a, b` ranging over the trial space `space`. Stored as
/// sparse triplets; `G_0` is the identity.
#[derive(Debug, Clone)]
pub struct GalerkinTensor {
    pub space_len: usize,
    pub mats: Vec<Vec<(usize, usize, f64)>>,
}

impl GalerkinTensor {
    /// `tensors[k]` is the triple tensor used for dimension `k`; its caps must
    /// cover (mode degree, trial degree, trial degree).
    pub fn new(
        modes: &MultiIndexSet,
        space: &MultiIndexSet,
        tensors: &[&TripleTensor],
    ) -> Result<Self> {
        if modes.d != space.d || tensors.len() != space.d {
            return Err(Error::DimensionMismatch {
                expected: space.d,
                got: modes.d.min(tensors.len()),
            });
        }
        for t in tensors {
            if modes.max_component() > t.caps.0 {
                return Err(Error::CapExceeded {
                    degree: modes.max_component(),
                    cap: t.caps.0,
                });
            }
            if space.max_component() > t.caps.1.min(t.caps.2) {
                return Err(Error::CapExceeded {
                    degree: space.max_component(),
                    cap: t.caps.1.min(t.caps.2),
                });
            }
        }
        let p = space.len();
        let mut mats = Vec::with_capacity(modes.len());
        for j in modes.iter() {
            let mut trip = Vec::new();
            for a in 0..p {
                let ia = space.get(a);
                for b in a..p {
                    let ib = space.get(b);
                    let mut v = 1.0;
                    for k in 0..space.d {
                        v *= tensors[k].value(j[k] as usize, ia[k] as usize, ib[k] as usize);
                        if v == 0.0 {
                            break;
                        }
                    }
                    if v != 0.0 {
                        trip.push((a, b, v));
                        if a != b {
                            trip.push((b, a, v));
                        }
                    }
                }
            }
            mats.push(trip);
        }
        Ok(Self { space_len: p, mats })
    }

    /// `E[ψ_j φ χ] = φᵀ G_j χ` for coefficient vectors `φ, χ`.
    pub fn bilinear(&self, j: usize, phi: &[f64], chi: &[f64]) -> f64 {
        self.mats[j]
            .iter()
            .map(|&(a, b, v)| v * phi[a] * chi[b])
            .sum()
    }
}

/// PC coefficients `E[u ψ_i]` by tensor Gauss quadrature with `nodes_per_dim`
/// nodes in every direction.
pub fn projection_coefficients<F>(
    family: Family,
    set: &MultiIndexSet,
    nodes_per_dim: usize,
    mut u: F,
) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let (x, w) = family.gauss_rule(nodes_per_dim);
    let d = set.d;
    let mut coeffs = vec![0.0; set.len()];
    let mut counter = vec![0usize; d];
    let mut point = vec![0.0; d];
    let families = vec![family; d];
    loop {
        let mut weight = 1.0;
        for k in 0..d {
            point[k] = x[counter[k]];
            weight *= w[counter[k]];
        }
        let value = u(&point);
        let psi = eval_multivariate_mixed(&families, set, &point).expect("dimension checked");
        for (c, p) in coeffs.iter_mut().zip(&psi) {
            *c += weight * value * p;
        }
        // odometer increment
        let mut k = 0;
        loop {
            counter[k] += 1;
            if counter[k] < nodes_per_dim {
                break;
            }
            counter[k] = 0;
            k += 1;
            if k == d {
                return coeffs;
            }
        }
    }
}

/// PC coefficients estimated from samples `(ξ, u(ξ))` drawn from the input
/// measure, as sample means of `u ψ_i`.
pub fn projection_coefficients_mc(
    family: Family,
    set: &MultiIndexSet,
    samples: &[(Vec<f64>, f64)],
) -> Result<Vec<f64>> {
    let mut coeffs = vec![0.0; set.len()];
    for (xi, value) in samples {
        let psi = eval_multivariate(family, set, xi)?;
        for (c, p) in coeffs.iter_mut().zip(&psi) {
            *c += value * p;
        }
    }
    let n = samples.len().max(1) as f64;
    coeffs.iter_mut().for_each(|c| *c /= n);
    Ok(coeffs)
}
