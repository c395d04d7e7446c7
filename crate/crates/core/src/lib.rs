//! Random resistor networks on marked point processes: stripe conductivities,
//! the homogenized diffusion matrix via the corrector, and Mott random walks.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conductivity;
pub mod corrector;
pub mod environment;
pub mod error;
pub mod lab;
pub mod mott_walk;
pub mod network;
pub mod rng;
pub mod solver;
pub mod stats;

pub use conductivity::{conductivity_report, ConductivityReport, ConductivityRow};
pub use corrector::{diffusion_matrix, ensemble_d, solve_corrector, PeriodicEnvironment};
pub use environment::{sample_configuration, MarkLaw, MarkedConfiguration, MarkedPoint, ProcessKind, ProcessSpec, Window};
pub use error::{Error, Result};
pub use mott_walk::{estimate_diffusion, JumpTables, WalkState};
pub use network::{ConductanceKernel, KernelSpec};
pub use network::{build_stripe_network, NodeClass, StripeNetwork, Truncation, TruncationPolicy};
pub use solver::{solve_potential, PotentialField};
pub use stats::DiffusionEstimate;
pub use lab::{run_mott_scaling, run_theorem1_sweep, run_theorem2_check, ExperimentConfig, ReferenceProfile};
