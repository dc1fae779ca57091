//! Time-fractional Keller–Segel–Navier–Stokes toolkit: special functions,
//! Caputo L1 time stepping, a lattice CTRW, grid solvers for the chemotaxis
//! pair and the fluid, mild-solution checks and a run harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ctrw;
pub mod fields;
pub mod fracops;
pub mod harness;
pub mod ks_macro;
pub mod linalg;
pub mod mild_verify;
pub mod ns_fluid;
pub mod quad;
pub mod specfun;

pub use ctrw::{BoundaryMode, ParticleEnsemble, Sensitivity, SlimeProfile, WaitingLaw};
pub use fields::{AdvectionScheme, Grid2D, ScalarBc, ScalarField, VectorField};
pub use fracops::FracHistory;
pub use harness::{HarnessError, MonitorRecord, SimConfig};
pub use ks_macro::{ChiModel, KsParams, KsSolver, KsState};
pub use mild_verify::{ExistenceParams, NeumannSpectrum};
pub use ns_fluid::{FluidParams, FluidState};
pub use specfun::EvalPolicy;
