//! Numerical laboratory for boundary regularity of the operators
//! `L_λ = ∂²/∂x₁² + Δ_{x'}`-type family near thin cusp ("spine") domains.
//!
//! The crate provides spine geometry, the coefficient field of `L_λ`,
//! axially symmetric potentials with their PDE residuals, integral
//! regularity tests, barrier and witness verification, a Monte Carlo exit
//! probe and a declarative scenario catalog.

pub mod barriers;
pub mod diffusion;
pub mod error;
pub mod geometry;
pub mod limits;
pub mod operators;
pub mod potentials;
pub mod quadrature;
pub mod regularity;
pub mod scenarios;

pub use diffusion::{
    harmonic_measure, regularity_probe, simulate_exit, simulate_paths, ExitSample, MeasureEstimate,
    SimConfig,
};
pub use error::{Error, Result};
pub use geometry::{
    eval_profile, BoundaryClass, CuspDomain, Function1D, ProfileKind, SpineProfile,
};
pub use operators::{
    coefficient_matrix, diffusion_sqrt, eigen_spread, radial_residual, CoefficientMatrix,
    LambdaField,
};
pub use potentials::{PotentialSpec, Preset};
pub use quadrature::{Estimate, QuadConfig};
pub use regularity::{blowup_check, dini_test, ito_mckean_test, Verdict};
pub use scenarios::{list_scenarios, run_scenario, Scenario, ScenarioResult};
