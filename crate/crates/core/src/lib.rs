//! Capacity, achievable rates and an end-to-end simulator for DNA storage
//! with concatenated coding.
//!
//! The analytic parts are generic over [`Real`] (`f32` or `f64`); the
//! simulators work in `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel_sim;
pub mod decoder_sim;
pub mod error;
pub mod multidraw;
pub mod params;
pub mod rates;
pub mod scalar;
pub mod seed;

pub use error::{Error, Result};
pub use multidraw::{multi_draw_capacity, CapacityTable, CrossoverProb};
pub use params::{ChannelParams, DrawVector, SchemeParams};
pub use rates::{RMaxResult, RateEstimate};
pub use scalar::Real;

pub type CrossoverProbF32 = CrossoverProb<f32>;
pub type CrossoverProbF64 = CrossoverProb<f64>;
pub type ChannelParamsF32 = ChannelParams<f32>;
pub type ChannelParamsF64 = ChannelParams<f64>;
pub type SchemeParamsF32 = SchemeParams<f32>;
pub type SchemeParamsF64 = SchemeParams<f64>;
pub type RateEstimateF32 = RateEstimate<f32>;
pub type RateEstimateF64 = RateEstimate<f64>;
