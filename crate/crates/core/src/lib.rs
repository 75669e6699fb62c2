//! Sharpness-aware surrogate training for leaky integrate-and-fire spiking
//! networks, together with the event-data pipeline, exact backpropagation
//! through time, smoothness diagnostics and an integer hardware simulator.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! below fix the scalar for the common cases.

// `!(x > 0)` guards are intentional: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bptt;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod eval;
pub mod event_data;
pub mod experiment;
pub mod hwsim;
pub mod io;
pub mod linalg;
pub mod optim;
pub mod rng;
pub mod scalar;
pub mod snn;

pub use error::{Result, SastError};
pub use scalar::Scalar;

/// Double-precision network parameters.
pub type Network = snn::NetworkParams<f64>;
/// Single-precision network parameters.
pub type Network32 = snn::NetworkParams<f32>;
pub type Frames = event_data::FrameTensor<f64>;
pub type Frames32 = event_data::FrameTensor<f32>;
pub type Dataset = event_data::LabeledDataset<f64>;
pub type Dataset32 = event_data::LabeledDataset<f32>;
pub type Grad = bptt::Gradient<f64>;
pub type Grad32 = bptt::Gradient<f32>;
pub type Trace = snn::ForwardTrace<f64>;
pub type Trace32 = snn::ForwardTrace<f32>;
