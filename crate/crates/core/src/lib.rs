//! Bit-accurate simulation of residue-number-system analog GEMM cores.
//!
//! The crate covers exact RNS arithmetic ([`rns`]), max-abs quantization
//! ([`quant`]), the RNS and fixed-point analog tile engines ([`analog`]),
//! redundant-RNS voting and retry analytics ([`rrns`]), converter energy
//! ([`energy`]) and a small tiled-inference harness with the experiment
//! drivers ([`harness`]).
//!
//! Real-valued code is generic over [`Real`] (`f32`/`f64`); the aliases
//! below pin the common choices.

pub mod analog;
pub mod energy;
mod error;
pub mod harness;
pub mod quant;
pub mod rng;
pub mod rns;
pub mod rrns;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type QuantizedVector32 = quant::QuantizedVector<f32>;
pub type QuantizedVector64 = quant::QuantizedVector<f64>;
pub type QuantizedMatrix32 = quant::QuantizedMatrix<f32>;
pub type QuantizedMatrix64 = quant::QuantizedMatrix<f64>;
pub type ConverterParams64 = energy::ConverterParams<f64>;
pub type ModelSpec32 = harness::ModelSpec<f32>;
pub type ModelSpec64 = harness::ModelSpec<f64>;
