//! Calibration evaluation for open-ended QA from semantically clustered
//! generation records.
//!
//! The toolkit ingests already-clustered, already-graded records and
//! computes the binned calibration error of three confidence sources:
//! the same-sample agreement score, its held-out variant, and verbalized
//! confidence. A closed-form theory layer (bias constants, regime
//! boundaries, bound calculators), an exact multinomial enumeration
//! oracle, and a seeded Monte Carlo engine verify the finite-sample
//! behavior of the two agreement estimators against their leading-order
//! predictions.

pub mod analysis;
pub mod calibration;
pub mod data_model;
pub mod error;
pub mod estimators;
pub mod exact_oracle;
pub mod fmt;
pub mod rng;
pub mod simulator;
pub mod theory;

pub use error::{Error, Result};
