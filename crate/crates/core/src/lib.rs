//! Feedback engine for line-tracking scissors.
//!
//! A cut-point pose is compared against an inked polyline, a two-sensor
//! mount straddling the line is simulated, and a severity stream drives a
//! feedback state machine that chooses the chameleon colour and spoken cues.
//! The geometry and sensing layers are generic over [`Scalar`] (`f32` or
//! `f64`); the aliases below fix the double-precision instantiation used by
//! everything downstream.

// `!(x >= lo)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod feedback;
pub mod geometry;
pub mod protocol;
pub mod scalar;
pub mod sensing;
pub mod service;
pub mod simulation;

pub use config::{EngineConfig, SeverityMode};
pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Point2F64 = geometry::Point2<f64>;
pub type LinePathF64 = geometry::LinePath<f64>;
pub type ScissorsPoseF64 = geometry::ScissorsPose<f64>;
pub type DeviationMeasureF64 = geometry::DeviationMeasure<f64>;
pub type SensorMountConfigF64 = sensing::SensorMountConfig<f64>;
pub type OracleThresholdsF64 = sensing::OracleThresholds<f64>;

pub type Point2F32 = geometry::Point2<f32>;
pub type LinePathF32 = geometry::LinePath<f32>;
pub type ScissorsPoseF32 = geometry::ScissorsPose<f32>;
