//! Numerical lab for boundary spikes in a Keller-Segel system with saturated
//! logarithmic sensitivity `ln(v + c)`.
//!
//! The steady problem is reduced to a scalar root structure ([`scalar`]), a
//! radial ground state ([`ground_state`]), a fixed-normalizer Neumann problem
//! ([`least_energy`]) and a one-dimensional search for the normalizer
//! ([`nonlocal`]). The evolution problem is integrated by [`timestepper`], and
//! [`diagnostics`] reads spike structure off computed fields. [`config`],
//! [`presets`], [`output`] and [`harness`] turn runs into files on disk.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod ground_state;
pub mod harness;
pub mod least_energy;
pub mod linalg;
pub mod nonlocal;
pub mod output;
pub mod presets;
pub mod scalar;
pub mod timestepper;

pub use config::{parse_config, Mode, RunConfig};
pub use diagnostics::SpikeReport;
pub use error::{Error, Result};
pub use grid::{Domain, Field, Grid};
pub use ground_state::RadialProfile;
pub use harness::{run_config, run_preset, RunOutcome};
pub use least_energy::EnergyReport;
pub use nonlocal::NonlocalSolution;
pub use scalar::{DeltaAnalysis, ModelParams, Nonlinearity, Roots};
pub use timestepper::{InitialData, SchemeConfig, SimState};
