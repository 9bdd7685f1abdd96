//! Explicit positivity-preserving finite-difference solver for the mean-field
//! inertial Kuramoto equation with noise,
//!
//! `(D/m²)∂²_ωω ρ + (1/m)∂_ω[(ω - Ω - K_ρ)ρ] - ω∂_θ ρ - ∂_t ρ = 0`,
//!
//! together with the closed-form Kolmogorov kernel used to check it and a
//! finite-N Langevin simulator for statistical comparison.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod field;
pub mod io;
pub mod kernel;
pub mod langevin;
pub mod meanfield;
pub mod solver;

pub use config::{
    build_frequency_distribution, build_grid, validate_stability, DistributionSpec,
    FrequencyDistribution, GridRequest, GridSpec, ModelParams, StabilityReport,
};
pub use error::{KkfError, Result};
pub use field::{init_density, init_density_with, renormalize, DensityField, InitialSpec};
pub use meanfield::{kura_field, order_parameters, phi_discrete, OrderParameter, PhiTable};
pub use solver::{la_step, run_simulation, SeriesRecord, Simulation, StepReport};
