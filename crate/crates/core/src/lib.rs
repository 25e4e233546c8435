//! Workbench for reversible cellular automata on finite tori.
//!
//! Modules, bottom up:
//!
//! * [`lattice`]: torus geometry, regions, configurations, light cones.
//! * [`engine`]: reversible rule families, exact evolution, structural verifiers.
//! * [`measure`]: uniform measure, cylinder sets, entropies, free energies,
//!   exact pushforwards and seeded Monte-Carlo estimates.
//! * [`universality`]: certificate searches for state preparation and map
//!   implementation, instability and persistence probes.
//! * [`thermo`]: hot/cold initial state, physical prior, physical complexity,
//!   Kraft sums, cycle costs, entropy influx and weak-mixing diagnostics.

pub mod engine;
mod ensemble;
pub mod error;
pub mod lattice;
pub mod measure;
pub mod thermo;
pub mod universality;

pub use error::{Error, Result};
