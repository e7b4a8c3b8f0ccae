//! Run configuration: geometry, mesh, random-field and solver parameters.
//! Parsed from JSON with unknown keys rejected; the named profiles carry the
//! reference parameter sets.

use serde::{Deserialize, Serialize};

use crate::fem::{LoadSpec, Physics, Rect, Side};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub name: String,
    pub geometry: GeometryConfig,
    pub mesh: MeshConfig,
    pub physics: Physics,
    pub field: FieldConfig,
    pub pc: PcConfig,
    pub bc: BcConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    pub probe: ProbeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub rect1: Rect,
    pub rect2: Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub h1: f64,
    pub h2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldModel {
    LognormalShifted,
    AffineUniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub kind: FieldModel,
    pub d1: usize,
    pub d2: usize,
    pub sigma1: f64,
    pub sigma2: f64,
    pub lc1: f64,
    pub lc2: f64,
    /// Log-mean of the Gaussian field (lognormal) or mean modulus (affine).
    pub mean1: f64,
    pub mean2: f64,
    #[serde(default)]
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcConfig {
    pub p1: usize,
    pub p2: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcConfig {
    pub dirichlet1: Vec<Side>,
    pub dirichlet2: Vec<Side>,
    pub load1: LoadSpec,
    pub load2: LoadSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    /// Scaled interface-stiffness preconditioner.
    Scaled,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub seed: u64,
    /// Target for the residual criterion.
    pub eps: f64,
    /// Relative energy change ending the alternating sweeps.
    pub tol_r: f64,
    pub sweep_cap: usize,
    pub rank_max: usize,
    pub eps_pcpg: f64,
    /// Defaults to `10 · r · M_I`.
    pub pcpg_max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
    pub inner_tol: f64,
    pub residual_samples: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            eps: 1e-3,
            tol_r: 1e-6,
            sweep_cap: 50,
            rank_max: 20,
            eps_pcpg: 1e-8,
            pcpg_max_iter: None,
            preconditioner: Preconditioner::Scaled,
            inner_tol: 1e-12,
            residual_samples: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeQuantity {
    /// The scalar unknown (or first component).
    Value,
    /// Euclidean norm of the nodal displacement.
    Magnitude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub point: [f64; 2],
    pub quantity: ProbeQuantity,
}

pub const PROFILES: [&str; 4] = ["lshape", "lshape-desk", "beam", "beam-desk"];

impl Config {
    pub fn profile(name: &str) -> Result<Self> {
        let cfg = match name {
            "lshape" => lshape(0.05, 4, 6, 3),
            "lshape-desk" => {
                let mut c = lshape(0.25, 2, 2, 2);
                c.solver.rank_max = 10;
                c
            }
            "beam" => beam(0.1, 2.5, 9, 11, 3),
            "beam-desk" => {
                let mut c = beam(0.2, 2.4, 2, 2, 2);
                c.solver.rank_max = 10;
                c
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown profile `{other}` (available: {})",
                    PROFILES.join(", ")
                )))
            }
        };
        let mut cfg = cfg;
        cfg.name = name.to_string();
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.field.sigma1 = sigma;
        self.field.sigma2 = sigma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.mesh.h1 > 0.0) || self.mesh.h1 != self.mesh.h2 {
            return bad(format!(
                "mesh.h1 and mesh.h2 must be equal and positive for matching interfaces (got {}, {})",
                self.mesh.h1, self.mesh.h2
            ));
        }
        let f = &self.field;
        if f.d1 == 0 || f.d2 == 0 {
            return bad("field.d1 and field.d2 must be at least 1".into());
        }
        if !(f.sigma1 >= 0.0 && f.sigma2 >= 0.0) {
            return bad("field.sigma1/sigma2 must be nonnegative".into());
        }
        if !(f.lc1 > 0.0 && f.lc2 > 0.0) {
            return bad("field.lc1/lc2 must be positive".into());
        }
        if self.pc.p1 == 0 || self.pc.p2 == 0 {
            return bad("pc.p1 and pc.p2 must be at least 1".into());
        }
        match (f.kind, self.physics) {
            (FieldModel::AffineUniform, Physics::Elasticity { .. })
            | (FieldModel::LognormalShifted, Physics::Diffusion) => {}
            _ => {
                return bad(
                    "field.kind must be lognormal-shifted for diffusion and affine-uniform for elasticity"
                        .into(),
                )
            }
        }
        let s = &self.solver;
        if !(s.eps > 0.0 && s.tol_r > 0.0 && s.eps_pcpg > 0.0 && s.inner_tol > 0.0) {
            return bad("solver tolerances must be positive".into());
        }
        if s.rank_max == 0 || s.sweep_cap == 0 {
            return bad("solver.rank_max and solver.sweep_cap must be at least 1".into());
        }
        if s.residual_samples == 0 {
            return bad("solver.residual_samples must be at least 1".into());
        }
        Ok(())
    }
}

fn lshape(h: f64, d1: usize, d2: usize, p: usize) -> Config {
    Config {
        name: String::new(),
        geometry: GeometryConfig {
            rect1: Rect::new(0.0, 2.0, 0.0, 1.0),
            rect2: Rect::new(1.0, 2.0, 1.0, 3.0),
        },
        mesh: MeshConfig { h1: h, h2: h },
        physics: Physics::Diffusion,
        field: FieldConfig {
            kind: FieldModel::LognormalShifted,
            d1,
            d2,
            sigma1: 0.5,
            sigma2: 0.5,
            lc1: 2.0 / 3.0,
            lc2: 1.0 / 3.0,
            mean1: 1.0,
            mean2: 1.0,
            shift: 0.28,
        },
        pc: PcConfig { p1: p, p2: p },
        bc: BcConfig {
            dirichlet1: vec![Side::Right],
            dirichlet2: vec![Side::Right],
            load1: LoadSpec {
                body: vec![10.0],
                ..Default::default()
            },
            load2: LoadSpec::default(),
        },
        solver: SolverConfig::default(),
        probe: ProbeConfig {
            point: [1.0, 0.5],
            quantity: ProbeQuantity::Value,
        },
    }
}

fn beam(h: f64, split: f64, d1: usize, d2: usize, p: usize) -> Config {
    let traction = LoadSpec {
        traction: vec![0.0, -0.1],
        traction_sides: vec![Side::Top],
        ..Default::default()
    };
    Config {
        name: String::new(),
        geometry: GeometryConfig {
            rect1: Rect::new(0.0, split, 0.0, 1.0),
            rect2: Rect::new(split, 5.0, 0.0, 1.0),
        },
        mesh: MeshConfig { h1: h, h2: h },
        physics: Physics::Elasticity { nu: 0.3 },
        field: FieldConfig {
            kind: FieldModel::AffineUniform,
            d1,
            d2,
            sigma1: 35.0,
            sigma2: 35.0,
            lc1: 2.0 / 3.0,
            lc2: 1.0 / 3.0,
            mean1: 100.0,
            mean2: 100.0,
            shift: 0.0,
        },
        pc: PcConfig { p1: p, p2: p },
        bc: BcConfig {
            dirichlet1: vec![Side::Left],
            dirichlet2: vec![],
            load1: traction.clone(),
            load2: traction,
        },
        solver: SolverConfig::default(),
        probe: ProbeConfig {
            point: [5.0, 0.0],
            quantity: ProbeQuantity::Magnitude,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_round_trip() {
        for name in PROFILES {
            let c = Config::profile(name).unwrap();
            c.validate().unwrap();
            assert_eq!(Config::from_json(&c.to_json()).unwrap(), c);
        }
        assert!(Config::profile("nope").is_err());
    }

    #[test]
    fn unknown_key_is_named() {
        let mut v: serde_json::Value =
            serde_json::from_str(&Config::profile("lshape-desk").unwrap().to_json()).unwrap();
        v["solver"]["bogus_key"] = 1.into();
        let err = Config::from_json(&v.to_string()).unwrap_err().to_string();
        assert!(err.contains("bogus_key"), "{err}");
    }

    #[test]
    fn mismatched_mesh_sizes_rejected() {
        let mut c = Config::profile("beam").unwrap();
        c.mesh.h2 = 0.05;
        assert!(c.validate().is_err());
    }
}
