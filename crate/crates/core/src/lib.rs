//! EIT lineshapes of Λ-type ensembles with inhomogeneously broadened optical
//! and spin transitions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod analysis;
pub mod config;
pub mod csvio;
pub mod error;
pub mod fit;
pub mod grid;
pub mod holeburn;
pub mod integrator;
pub mod params;
pub mod pipeline;
pub mod profile;
pub mod quadrature;
pub mod susceptibility;
pub mod transmission;

pub use config::{load_config, Mode, RunConfig};
pub use error::{Error, Result};
pub use grid::DetuningGrid;
pub use integrator::{
    integrate_susceptibility, QuadratureConfig, SusceptibilitySpectrum, TailMapping,
};
pub use params::{RateParams, Regime};
pub use profile::{BroadeningProfile, ProfileKind};
