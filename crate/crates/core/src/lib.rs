//! Stationary states of phase-field-crystal energies on truncated reciprocal
//! lattices.

pub mod aabpg;
pub mod baseline;
pub mod bregman;
pub mod config;
pub mod driver;
pub mod error;
pub mod hybrid;
pub mod lattice;
pub mod model;
pub mod newton;
pub mod numerics;
pub mod random;
pub mod report;
pub mod run;
pub mod seeds;
pub mod snapshot;
pub mod transform;

pub use error::{PfcError, Result};
pub use lattice::{build_lattice, project_mass_zero, FourierField, IndexGrid, LatticeSpec};
pub use transform::SpectralTransform;
pub use model::{
    interaction_diagonal, BulkPolynomial, EnergyBreakdown, Hessian, InteractionDiagonal, ModelSpec, Problem,
    Sampled,
};
pub use bregman::{bregman_divergence, prox, prox_p2, prox_p4, solve_radius_fixed_point, BregmanKernel};
pub use aabpg::{aabpg_run, AabpgConfig, BbVariant};
pub use baseline::{baseline_run, BaselineConfig, Scheme};
pub use driver::SwitchRule;
pub use hybrid::{acceleration_ratio, hybrid_run, FirstStage, HybridConfig};
pub use newton::{newton_pcg_run, NewtonConfig};
pub use report::{Phase, SolverReport, Termination, TraceRow};
pub use seeds::{SeedEntry, SeedList};
pub use config::{Initializer, RunConfig, SolverSpec};
pub use run::{bench, build_initial, check_gradients, prepare, run, RunOptions, RunSummary};
pub use snapshot::Snapshot;
