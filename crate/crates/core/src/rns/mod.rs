//! Exact residue-number-system arithmetic.

mod barrett;
mod moduli;
mod residue;

pub use barrett::Barrett;
pub use moduli::{
    ceil_log2, mod_inverse, preset, preset_for_bits, required_output_bits, CrtWeight, ModuliSet, SignedRange,
    PRESETS,
};
pub(crate) use residue::lane_dot;
pub use residue::{residue_dot_product, ResidueVector};
