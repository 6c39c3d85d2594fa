//! A numerical laboratory for pilot-wave dynamics on lattices.
//!
//! The crate evolves wavefunctions with a norm-preserving implicit scheme,
//! extracts hydrodynamic variables (density, phase, quantum potential),
//! applies the log-density phase transformations that turn the deterministic
//! phase equations into drift-diffusion form, propagates deterministic and
//! stochastic particle ensembles, reconstructs phases by backward induction,
//! and measures every identity involved as an interior-masked residual field.
//!
//! Start with the runnable programs under `examples/`, one per capability,
//! or the `pilotwave` binary (`run` / `verify` / `export`).

pub mod error;
pub mod evolve;
pub mod hjb;
pub mod lattice;
pub mod madelung;
pub mod particles;
pub mod transforms;

pub mod cli;

pub use error::{Error, Result};
