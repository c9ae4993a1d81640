//! Time-dependent Dyson maps for non-Hermitian bosonic Hamiltonians.
//!
//! Everything lives on a truncated Fock space: Hamiltonians, maps, metrics
//! and observables are dense complex matrices ([`OperatorMatrix`]). The crate
//! builds Dyson maps for the linear amplification model and the generalized
//! Swanson model, links neighbouring Hamiltonians into a chain
//! `... H̄, H, H′ ...`, and propagates states in every space so that the
//! claimed identities can be checked against brute-force matrix oracles.
//!
//! Units: ħ = 1, times and frequencies are dimensionless.

pub mod chain;
pub mod dyson;
pub mod error;
pub mod evolve;
pub mod fock;
pub mod grid;
pub mod models;

pub use error::{Error, Result};
pub use fock::{FockConfig, OperatorMatrix, Su11Params, C64};
pub use grid::{FdScheme, Grid, TimeOperator};
pub use models::{CoefficientTrack, LinearModel, SwansonModel};
pub use dyson::{DysonMapSolution, HermitianCoefficients, MapParams, Provenance};
pub use chain::{ChainNode, GaugeKind, GaugeLink};
pub use evolve::{Observable, StateVector, TrajectoryRecord};
