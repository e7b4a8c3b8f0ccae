//! Moments of separated and reference solutions, kernel density estimates
//! and relative error measures.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arr::SeparatedSolution;
use crate::pc::{eval_multivariate, MultiIndexSet};
use crate::problems::{probe_quantity, CoupledProblem, MonolithicProblem};
use crate::reference::{McAccumulator, MonolithicSgSolution};
use crate::rng::{draw_germ, stream, PURPOSE_SELF_MC};
use crate::{Error, Result};

/// Nodal mean and standard deviation over the concatenated sub-domain dofs
/// `[u₁; u₂]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub label: String,
    pub instance: String,
    pub layout: [usize; 2],
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Sampling standard errors of `mean` and `std` when estimated by MC.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_errors: Option<(Vec<f64>, Vec<f64>)>,
}

impl MomentReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("dof,subdomain,mean,std\n");
        for (k, (m, sd)) in self.mean.iter().zip(&self.std).enumerate() {
            let (sub, local) = if k < self.layout[0] { (1, k) } else { (2, k - self.layout[0]) };
            s.push_str(&format!("{local},{sub},{m:e},{sd:e}\n"));
        }
        s
    }
}

fn clip_variance(var: Vec<f64>, scale: f64) -> Vec<f64> {
    let mut clipped = 0;
    let out = var
        .into_iter()
        .map(|v| {
            if v < 0.0 {
                if v < -1e-12 * scale {
                    clipped += 1;
                }
                0.0
            } else {
                v
            }
        })
        .collect();
    if clipped > 0 {
        log::warn!("clipped {clipped} negative variance entries to zero");
    }
    out
}

/// `E[uᵢʳ] = Σ_l uᵢˡ E[φ₁ˡ] E[φ₂ˡ]`, concatenated over sub-domains.
pub fn separated_mean(sol: &SeparatedSolution) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..2 {
        let u = sol.u(i);
        let mut m = vec![0.0; u.first().map_or(0, Vec::len)];
        for l in 0..sol.rank {
            let c = sol.phi1[l][0] * sol.phi2[l][0];
            for (mi, ui) in m.iter_mut().zip(&u[l]) {
                *mi += c * ui;
            }
        }
        out.extend(m);
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `E[u∘u] − E[u]∘E[u]` with `E[u∘u] = Σ_{l,l'} (uˡ∘uˡ') E₁[φ₁ˡφ₁ˡ'] E₂[φ₂ˡφ₂ˡ']`.
pub fn separated_variance(sol: &SeparatedSolution) -> Vec<f64> {
    let mean = separated_mean(sol);
    let r = sol.rank;
    let mut second = Vec::with_capacity(mean.len());
    for i in 0..2 {
        let u = sol.u(i);
        let mut s = vec![0.0; u.first().map_or(0, Vec::len)];
        for a in 0..r {
            for b in 0..r {
                let g = dot(&sol.phi1[a], &sol.phi1[b]) * dot(&sol.phi2[a], &sol.phi2[b]);
                for (si, (x, y)) in s.iter_mut().zip(u[a].iter().zip(&u[b])) {
                    *si += g * x * y;
                }
            }
        }
        second.extend(s);
    }
    let scale = second.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    clip_variance(second.iter().zip(&mean).map(|(s, m)| s - m * m).collect(), scale)
}

pub fn separated_moments(sol: &SeparatedSolution, label: &str, instance: &str) -> MomentReport {
    MomentReport {
        label: label.into(),
        instance: instance.into(),
        layout: [sol.u1.first().map_or(0, Vec::len), sol.u2.first().map_or(0, Vec::len)],
        mean: separated_mean(sol),
        std: separated_variance(sol).into_iter().map(f64::sqrt).collect(),
        std_errors: None,
    }
}

/// Evaluates the stochastic factors at a germ `xi = (ξ₁, ξ₂)`.
pub struct SeparatedSampler<'a> {
    sol: &'a SeparatedSolution,
    sets: [MultiIndexSet; 2],
}

impl<'a> SeparatedSampler<'a> {
    pub fn new(sol: &'a SeparatedSolution) -> Result<Self> {
        Ok(Self {
            sets: [
                MultiIndexSet::new(sol.dims[0], sol.orders[0])?,
                MultiIndexSet::new(sol.dims[1], sol.orders[1])?,
            ],
            sol,
        })
    }

    /// `φ₁ˡ(ξ₁) φ₂ˡ(ξ₂)` for every term.
    pub fn weights(&self, xi: &[f64]) -> Result<Vec<f64>> {
        let d1 = self.sol.dims[0];
        if xi.len() != d1 + self.sol.dims[1] {
            return Err(Error::DimensionMismatch {
                expected: d1 + self.sol.dims[1],
                got: xi.len(),
            });
        }
        let psi1 = eval_multivariate(self.sol.families[0], &self.sets[0], &xi[..d1])?;
        let psi2 = eval_multivariate(self.sol.families[1], &self.sets[1], &xi[d1..])?;
        Ok((0..self.sol.rank)
            .map(|l| dot(&self.sol.phi1[l], &psi1) * dot(&self.sol.phi2[l], &psi2))
            .collect())
    }

    /// `Σ_l uᵢˡ φ₁ˡ(ξ₁) φ₂ˡ(ξ₂)`, concatenated over sub-domains.
    pub fn sample(&self, xi: &[f64]) -> Result<Vec<f64>> {
        let w = self.weights(xi)?;
        let mut out = Vec::new();
        for i in 0..2 {
            let u = self.sol.u(i);
            let mut v = vec![0.0; u.first().map_or(0, Vec::len)];
            for (l, c) in w.iter().enumerate() {
                for (vi, ui) in v.iter_mut().zip(&u[l]) {
                    *vi += c * ui;
                }
            }
            out.extend(v);
        }
        Ok(out)
    }
}

pub fn sample_separated(sol: &SeparatedSolution, xi: &[f64]) -> Result<Vec<f64>> {
    SeparatedSampler::new(sol)?.sample(xi)
}

fn germ_families(sol: &SeparatedSolution) -> Vec<crate::pc::Family> {
    let mut f = vec![sol.families[0]; sol.dims[0]];
    f.extend(vec![sol.families[1]; sol.dims[1]]);
    f
}

/// Mean and standard deviation of the separated representation from `n`
/// seeded samples, with standard errors.
pub fn self_monte_carlo(sol: &SeparatedSolution, n: usize, seed: u64) -> Result<MomentReport> {
    if n < 2 {
        return Err(Error::InvalidInput("self Monte-Carlo needs at least two samples".into()));
    }
    let sampler = SeparatedSampler::new(sol)?;
    let families = germ_families(sol);
    let shift = separated_mean(sol);
    let len = shift.len();
    const CHUNK: usize = 256;
    let chunks: Vec<[Vec<f64>; 4]> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| -> Result<[Vec<f64>; 4]> {
            let mut sums: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; len]);
            for s in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let xi = draw_germ(&families, &mut stream(seed, PURPOSE_SELF_MC, s as u64));
                let x = sampler.sample(&xi)?;
                for (k, (xk, ck)) in x.iter().zip(&shift).enumerate() {
                    let y = xk - ck;
                    let y2 = y * y;
                    sums[0][k] += y;
                    sums[1][k] += y2;
                    sums[2][k] += y2 * y;
                    sums[3][k] += y2 * y2;
                }
            }
            Ok(sums)
        })
        .collect::<Result<_>>()?;
    let mut sums: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; len]);
    for c in chunks {
        for (a, b) in sums.iter_mut().zip(c) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
    let acc = McAccumulator {
        n,
        seed,
        shift,
        sums,
        probe: Vec::new(),
    };
    let (se_mean, se_std) = acc.std_errors();
    Ok(MomentReport {
        label: "separated (sampled)".into(),
        instance: String::new(),
        layout: [sol.u1.first().map_or(0, Vec::len), sol.u2.first().map_or(0, Vec::len)],
        mean: acc.mean(),
        std: acc.variance().into_iter().map(f64::sqrt).collect(),
        std_errors: Some((se_mean, se_std)),
    })
}

fn restrict_concat(mono: &MonolithicProblem, v: &[f64]) -> Vec<f64> {
    let [a, b] = mono.restrict(v);
    a.iter().chain(b.iter()).copied().collect()
}

pub fn sg_moments(mono: &MonolithicProblem, sg: &MonolithicSgSolution, instance: &str) -> MomentReport {
    MomentReport {
        label: "monolithic stochastic Galerkin".into(),
        instance: instance.into(),
        layout: [mono.restriction[0].len(), mono.restriction[1].len()],
        mean: restrict_concat(mono, sg.mean()),
        std: restrict_concat(mono, &sg.variance()).into_iter().map(f64::sqrt).collect(),
        std_errors: None,
    }
}

pub fn mc_moments(mono: &MonolithicProblem, mc: &McAccumulator, instance: &str) -> MomentReport {
    let (se_mean, se_std) = mc.std_errors();
    MomentReport {
        label: "Monte Carlo".into(),
        instance: instance.into(),
        layout: [mono.restriction[0].len(), mono.restriction[1].len()],
        mean: restrict_concat(mono, &mc.mean()),
        std: restrict_concat(mono, &mc.variance()).into_iter().map(f64::sqrt).collect(),
        std_errors: Some((restrict_concat(mono, &se_mean), restrict_concat(mono, &se_std))),
    }
}

/// Probe-point samples of the separated representation.
pub fn separated_probe_samples(
    problem: &CoupledProblem,
    sol: &SeparatedSolution,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let (sub, dofs) = problem.probe_dofs()?;
    let sampler = SeparatedSampler::new(sol)?;
    let families = germ_families(sol);
    let quantity = problem.config.probe.quantity;
    let u = sol.u(sub);
    (0..n as u64)
        .into_par_iter()
        .map(|s| {
            let xi = draw_germ(&families, &mut stream(seed, PURPOSE_SELF_MC, s));
            let w = sampler.weights(&xi)?;
            let comp: Vec<f64> = dofs
                .iter()
                .map(|d| d.map_or(0.0, |k| (0..sol.rank).map(|l| w[l] * u[l][k]).sum()))
                .collect();
            Ok(probe_quantity(quantity, &comp))
        })
        .collect()
}

/// Probe samples stored by a Monte-Carlo accumulator.
pub fn mc_probe_samples(problem: &CoupledProblem, mc: &McAccumulator) -> Vec<f64> {
    let q = problem.config.probe.quantity;
    mc.probe.iter().map(|c| probe_quantity(q, c)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdfCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    /// All samples (numerically) equal; `density` is empty.
    pub degenerate: bool,
    pub location: f64,
}

impl PdfCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,density\n");
        for (x, p) in self.grid.iter().zip(&self.density) {
            s.push_str(&format!("{x:e},{p:e}\n"));
        }
        s
    }
}

pub const MIN_PDF_SAMPLES: usize = 1000;

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    (m, v.sqrt())
}

/// Silverman's rule `0.9 min(σ, IQR/1.34) n^{-1/5}`.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let (_, sd) = mean_std(samples);
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (s.len() - 1) as f64;
        let (i, f) = (pos.floor() as usize, pos.fract());
        s[i] + f * (s[(i + 1).min(s.len() - 1)] - s[i])
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * (samples.len() as f64).powf(-0.2)
}

/// Gaussian kernel density on a given grid.
pub fn pdf_on_grid(samples: &[f64], grid: &[f64]) -> Result<PdfCurve> {
    if samples.len() < MIN_PDF_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "density estimate needs at least {MIN_PDF_SAMPLES} samples (got {})",
            samples.len()
        )));
    }
    let (m, sd) = mean_std(samples);
    let h = silverman_bandwidth(samples);
    if !(sd > 1e-14 * m.abs().max(1e-300)) || !(h > 0.0) {
        return Ok(PdfCurve {
            grid: Vec::new(),
            density: Vec::new(),
            bandwidth: 0.0,
            degenerate: true,
            location: m,
        });
    }
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let density = grid
        .par_iter()
        .map(|&x| samples.iter().map(|s| (-0.5 * ((x - s) / h).powi(2)).exp()).sum::<f64>() * norm)
        .collect();
    Ok(PdfCurve {
        grid: grid.to_vec(),
        density,
        bandwidth: h,
        degenerate: false,
        location: m,
    })
}

pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![0.5 * (lo + hi)];
    }
    (0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect()
}

/// Density on `points` grid nodes spanning the samples padded by four
/// bandwidths.
pub fn pdf_estimate(samples: &[f64], points: usize) -> Result<PdfCurve> {
    pdf_on_grid(samples, &padded_grid(&[samples], points)?)
}

/// Uniform grid covering every sample set, padded by four bandwidths.
pub fn padded_grid(sets: &[&[f64]], points: usize) -> Result<Vec<f64>> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut pad = 0.0f64;
    for s in sets {
        if s.len() < MIN_PDF_SAMPLES {
            return Err(Error::InvalidInput(format!(
                "density estimate needs at least {MIN_PDF_SAMPLES} samples (got {})",
                s.len()
            )));
        }
        for &v in s.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        pad = pad.max(4.0 * silverman_bandwidth(s));
    }
    Ok(uniform_grid(lo - pad, hi + pad, points))
}

/// `∫ |a − b|` over a uniform grid (trapezoid rule).
pub fn l1_distance(grid: &[f64], a: &[f64], b: &[f64]) -> f64 {
    if grid.len() < 2 {
        return 0.0;
    }
    let f: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
    let dx = grid[1] - grid[0];
    dx * (f.iter().sum::<f64>() - 0.5 * (f[0] + f[f.len() - 1]))
}

/// L¹ distance between the kernel densities of two sample sets.
pub fn pdf_l1_gap(a: &[f64], b: &[f64], points: usize) -> Result<f64> {
    let grid = padded_grid(&[a, b], points)?;
    let (pa, pb) = (pdf_on_grid(a, &grid)?, pdf_on_grid(b, &grid)?);
    if pa.degenerate || pb.degenerate {
        return Err(Error::InvalidInput("L1 gap undefined for a degenerate density".into()));
    }
    Ok(l1_distance(&grid, &pa.density, &pb.density))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub eps_mean: f64,
    /// `None` when the reference standard deviation vanishes.
    pub eps_std: Option<f64>,
}

fn l2(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// Relative L₂ errors `‖μ − μ_ref‖/‖μ_ref‖` and `‖σ − σ_ref‖/‖σ_ref‖`.
pub fn error_metrics(approx: &MomentReport, reference: &MomentReport) -> Result<ErrorMetrics> {
    if approx.layout != reference.layout || approx.mean.len() != reference.mean.len() {
        return Err(Error::DimensionMismatch {
            expected: reference.mean.len(),
            got: approx.mean.len(),
        });
    }
    let m_ref = l2(reference.mean.iter().copied());
    if m_ref == 0.0 {
        return Err(Error::InvalidInput("reference mean has zero norm".into()));
    }
    let eps_mean = l2(approx.mean.iter().zip(&reference.mean).map(|(a, b)| a - b)) / m_ref;
    let s_ref = l2(reference.std.iter().copied());
    let eps_std = (s_ref > 0.0).then(|| l2(approx.std.iter().zip(&reference.std).map(|(a, b)| a - b)) / s_ref);
    Ok(ErrorMetrics { eps_mean, eps_std })
}

/// Relative L₂ gaps with the reference's sampling error removed:
/// `max(0, ‖Δ‖ − k‖se‖) / ‖ref‖`.
pub fn error_metrics_net(approx: &MomentReport, reference: &MomentReport, k: f64) -> Result<ErrorMetrics> {
    let raw = error_metrics(approx, reference)?;
    let Some((se_m, se_s)) = &reference.std_errors else {
        return Ok(raw);
    };
    let m_ref = l2(reference.mean.iter().copied());
    let s_ref = l2(reference.std.iter().copied());
    let net = |e: f64, norm: f64, se: &[f64]| (e * norm - k * l2(se.iter().copied())).max(0.0) / norm;
    Ok(ErrorMetrics {
        eps_mean: net(raw.eps_mean, m_ref, se_m),
        eps_std: raw.eps_std.map(|e| net(e, s_ref, se_s)),
    })
}
