//! Partitioned uncertainty propagation for two-sub-domain linear PDEs.
//!
//! The coupled random solution is approximated by a low-rank separated
//! representation
//!
//! ```text
//! (u1, u2, λ)(ξ1, ξ2) ≈ Σ_l (u1ˡ, u2ˡ, λˡ) · φ1ˡ(ξ1) · φ2ˡ(ξ2)
//! ```
//!
//! built by alternating Rayleigh-Ritz sweeps ([`arr`]). The deterministic
//! factors are coupled across the interface with a block extension of the
//! FETI method ([`feti`]); the stochastic factors are solved by Galerkin
//! projection in the polynomial chaos bases of [`pc`], one sub-domain at a
//! time. Monolithic stochastic Galerkin and Monte-Carlo oracles live in
//! [`reference`], moments and error measures in [`stats`].

pub mod arr;
pub mod config;
pub mod error;
pub mod fem;
pub mod feti;
pub mod io;
pub mod linalg;
pub mod pc;
pub mod problems;
pub mod random_field;
pub mod reference;
pub mod rng;
pub mod sparse;
pub mod stats;

pub use error::{Error, Result};
