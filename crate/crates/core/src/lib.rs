pub mod error;
pub mod experiments;
pub mod quad;
pub mod covert_metrics;
pub mod fading;
pub mod montecarlo;
pub mod optimize;
pub mod scenario;
pub mod sinr_stats;
pub mod special_fn;

pub use error::{Error, Result};
