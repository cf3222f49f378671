//! Simulated analog tile engines: the RNS core and the fixed-point baseline.

mod config;
mod noise;
mod tile;

pub use config::{CoreConfig, CoreMode};
pub use noise::{inject_residue_noise, NoiseKind, NoiseModel};
pub use tile::{fixed_point_tile_mvm, residue_mvm, rns_tile_mvm, FixedPointOutput};
