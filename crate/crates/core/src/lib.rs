//! Cropland segmentation from coarse land-cover priors.
//!
//! A coarse global land-cover map is resampled onto each high-resolution
//! image tile and collapsed to a binary cropland pre-label. Positive and
//! negative point prompts are sampled from the pre-label and fed in batches
//! to a promptable segmentation backend; predicted masks are scored against
//! ground truth.

pub mod backend;
pub mod error;
pub mod geo;
pub mod mask;
pub mod metrics;
pub mod pipeline;
pub mod prelabel;
pub mod prompts;
pub mod synthetic;

pub use error::{BackendError, Error, Result};
