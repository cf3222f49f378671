//! Tiled inference over the simulated cores and the experiment drivers.

pub mod experiments;
mod gemm;
mod model;
mod tensorfile;
pub mod toy;

pub use gemm::{float_gemm, tiled_gemm, tiled_gemm_with_stats, GemmStats};
pub use model::{argmax, run_network, Activation, Backend, ConvGeometry, Layer, LayerKind, ModelSpec};
pub use tensorfile::{Tensor, TensorFile};
