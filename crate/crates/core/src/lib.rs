//! Extended-object tracking with active and passive radio range measurements.
//!
//! Filter-side modules are generic over [`Scalar`] (`f32` or `f64`). The
//! simulator, metrics and experiment runner work in `f64`.

// `!(x > 0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod likelihood;
pub mod metrics;
pub mod pda_reference;
pub mod scalar;
pub mod simulator;
pub mod spa_filter;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type KinematicStateF64 = dynamics::KinematicState<f64>;
pub type KinematicStateF32 = dynamics::KinematicState<f32>;
pub type AugmentedStateF64 = dynamics::AugmentedState<f64>;
pub type AugmentedStateF32 = dynamics::AugmentedState<f32>;
pub type MeasurementF64 = likelihood::Measurement<f64>;
pub type MeasurementF32 = likelihood::Measurement<f32>;
pub type MeasurementModelF64 = likelihood::MeasurementModel<f64>;
pub type MeasurementModelF32 = likelihood::MeasurementModel<f32>;
pub type FrameMeasurementsF64 = spa_filter::FrameMeasurements<f64>;
pub type FrameMeasurementsF32 = spa_filter::FrameMeasurements<f32>;
pub type ParticleSetF64 = spa_filter::ParticleSet<f64>;
pub type ParticleSetF32 = spa_filter::ParticleSet<f32>;
pub type EstimateF64 = spa_filter::Estimate<f64>;
pub type EstimateF32 = spa_filter::Estimate<f32>;
