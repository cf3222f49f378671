use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quant::check_bits;
use crate::rns::{preset_for_bits, required_output_bits, ModuliSet};
use crate::rrns::RrnsCode;

/// Which tile engine a core simulates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoreMode {
    /// One MVM unit per modulus, analog modulo, lossless ADC capture.
    Rns { moduli: Arc<ModuliSet> },
    /// RNS core over a redundant code; outputs are voted and Case-2
    /// detections re-executed up to `attempts` times.
    Rrns { code: Arc<RrnsCode>, attempts: u32 },
    /// Single MVM unit whose ADC keeps the top `b_adc` of `b_out` bits.
    FixedPoint,
}

/// Tile size, operand and converter widths, and engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoreConfig {
    pub h: usize,
    pub b_in: u32,
    pub b_w: u32,
    pub b_dac: u32,
    pub b_adc: u32,
    pub mode: CoreMode,
}

impl CoreConfig {
    pub fn rns(h: usize, bits: u32, moduli: ModuliSet) -> Result<Self> {
        let w = moduli.bit_width();
        let cfg = Self { h, b_in: bits, b_w: bits, b_dac: w, b_adc: w, mode: CoreMode::Rns { moduli: Arc::new(moduli) } };
        cfg.validate()?;
        Ok(cfg)
    }

    /// RNS core with the named preset for `bits`-bit operands.
    pub fn rns_preset(bits: u32, h: usize) -> Result<Self> {
        let ms = preset_for_bits(bits).ok_or_else(|| Error::ConfigMismatch(format!("no moduli preset for {bits} bits")))?;
        Self::rns(h, bits, ms)
    }

    pub fn fixed_point(h: usize, bits: u32, b_adc: u32) -> Result<Self> {
        let cfg = Self { h, b_in: bits, b_w: bits, b_dac: bits, b_adc, mode: CoreMode::FixedPoint };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn rrns(h: usize, bits: u32, code: RrnsCode, attempts: u32) -> Result<Self> {
        let w = code.moduli().bit_width();
        let cfg = Self {
            h,
            b_in: bits,
            b_w: bits,
            b_dac: w,
            b_adc: w,
            mode: CoreMode::Rrns { code: Arc::new(code), attempts },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `b_in + b_w + ceil(log2 h) - 1`.
    pub fn b_out(&self) -> u32 {
        required_output_bits(self.b_in, self.b_w, self.h)
    }

    /// Low-order bits dropped by the fixed-point ADC (0 for RNS engines).
    pub fn lost_bits(&self) -> u32 {
        match self.mode {
            CoreMode::FixedPoint => self.b_out().saturating_sub(self.b_adc),
            _ => 0,
        }
    }

    /// Residue moduli driven by the MVM units, if this is an RNS engine.
    pub fn moduli(&self) -> Option<&Arc<ModuliSet>> {
        match &self.mode {
            CoreMode::Rns { moduli } => Some(moduli),
            CoreMode::Rrns { code, .. } => Some(code.moduli()),
            CoreMode::FixedPoint => None,
        }
    }

    /// Number of parallel MVM units (and DAC/ADC sets) per tile.
    pub fn units(&self) -> usize {
        self.moduli().map_or(1, |m| m.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.h == 0 {
            return Err(Error::ConfigMismatch("tile size h must be at least 1".into()));
        }
        check_bits(self.b_in)?;
        check_bits(self.b_w)?;
        let b_out = self.b_out();
        let converters = |w: u32| -> Result<()> {
            if self.b_dac != w || self.b_adc != w {
                return Err(Error::ConfigMismatch(format!(
                    "RNS converters must be {w} bits wide (b_dac = {}, b_adc = {})",
                    self.b_dac, self.b_adc
                )));
            }
            Ok(())
        };
        match &self.mode {
            CoreMode::Rns { moduli } => {
                converters(moduli.bit_width())?;
                if !moduli.supports_output_bits(b_out) {
                    return Err(Error::RangeViolation { log2_range: moduli.log2_range(), required: b_out });
                }
            }
            CoreMode::Rrns { code, attempts } => {
                converters(code.moduli().bit_width())?;
                if *attempts == 0 {
                    return Err(Error::ConfigMismatch("RRNS attempts must be at least 1".into()));
                }
                if b_out >= 64 || code.legitimate_range() < 1u64 << b_out {
                    return Err(Error::RangeViolation {
                        log2_range: (code.legitimate_range() as f64).log2(),
                        required: b_out,
                    });
                }
            }
            CoreMode::FixedPoint => {
                if self.b_adc == 0 || self.b_adc > b_out {
                    return Err(Error::ConfigMismatch(format!("fixed-point b_adc must lie in [1, {b_out}]")));
                }
                if self.b_dac < self.b_in.max(self.b_w) {
                    return Err(Error::ConfigMismatch("fixed-point DACs narrower than the operands".into()));
                }
            }
        }
        Ok(())
    }
}
