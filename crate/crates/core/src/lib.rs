//! Domain types, the interest-constrained fluid model and the burst-departure
//! predictor for unpopular BitTorrent swarms.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bitfield;
pub mod burst;
pub mod config;
mod error;
pub mod model;

#[cfg(any(test, feature = "oracle"))]
pub mod oracle;

pub use bitfield::Bitfield;
pub use burst::{burst_bounds, poisson_quantile, BurstBounds};
pub use config::{validate_config, ArrivalProcess, ConfigError, ConfigErrors, SwarmConfig};
pub use error::ModelError;
pub use model::{
    ab_scenario, allocate, download_rates, potential_rate, AbScenarioResult, AllocationInput,
    PieceCountVector, PotentialRate, RateMatrix,
};
