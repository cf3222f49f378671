//! Per-conversion DAC/ADC energy for RNS and fixed-point cores.
//!
//! `E_DAC = ENOB^2 * C_u * V_dd^2` and `E_ADC = k1 * ENOB + k2 * 4^ENOB`,
//! counted once per output element per MVM unit.

use serde::{Deserialize, Serialize};

use crate::analog::{CoreConfig, CoreMode};
use crate::error::{Error, Result};
use crate::rns::required_output_bits;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConverterParams<T> {
    /// Unit capacitance in farads.
    pub unit_capacitance: T,
    /// Supply voltage in volts.
    pub supply_voltage: T,
    /// ADC linear coefficient, joules per bit.
    pub adc_linear: T,
    /// ADC exponential coefficient, joules.
    pub adc_exponential: T,
}

impl<T: Real> Default for ConverterParams<T> {
    fn default() -> Self {
        Self {
            unit_capacitance: T::lit(0.5e-15),
            supply_voltage: T::lit(1.0),
            adc_linear: T::lit(100e-15),
            adc_exponential: T::lit(1e-18),
        }
    }
}

impl<T: Real> ConverterParams<T> {
    pub fn validate(&self) -> Result<()> {
        let all = [self.unit_capacitance, self.supply_voltage, self.adc_linear, self.adc_exponential];
        if all.iter().all(|v| v.is_finite() && *v > T::zero()) {
            Ok(())
        } else {
            Err(Error::ConfigMismatch("converter parameters must be positive and finite".into()))
        }
    }
}

pub fn dac_energy<T: Real>(enob: u32, params: &ConverterParams<T>) -> T {
    let e = T::from_u32(enob).unwrap();
    e * e * params.unit_capacitance * params.supply_voltage * params.supply_voltage
}

pub fn adc_energy<T: Real>(enob: u32, params: &ConverterParams<T>) -> T {
    params.adc_linear * T::from_u32(enob).unwrap() + params.adc_exponential * T::lit(4.0).powi(enob as i32)
}

/// Converter energy per output element of one core.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConversionEnergy<T> {
    /// DAC/ADC pairs, one per MVM unit.
    pub converters: usize,
    pub dac_enob: u32,
    /// ADC resolution actually costed (`b_out` for the fixed-point baseline).
    pub adc_enob: u32,
    pub dac_total: T,
    pub adc_total: T,
}

/// RNS engines pay `n` conversions at the residue width; the fixed-point
/// baseline pays one conversion at full output precision `b_out`.
pub fn core_conversion_energy<T: Real>(cfg: &CoreConfig, params: &ConverterParams<T>) -> Result<ConversionEnergy<T>> {
    cfg.validate()?;
    params.validate()?;
    let (converters, dac_enob, adc_enob) = match &cfg.mode {
        CoreMode::Rns { .. } | CoreMode::Rrns { .. } => (cfg.units(), cfg.b_dac, cfg.b_adc),
        CoreMode::FixedPoint => (1, cfg.b_dac, cfg.b_out()),
    };
    let count = T::from_usize(converters).unwrap();
    Ok(ConversionEnergy {
        converters,
        dac_enob,
        adc_enob,
        dac_total: count * dac_energy(dac_enob, params),
        adc_total: count * adc_energy(adc_enob, params),
    })
}

/// Fixed-point ADC energy over RNS ADC energy at `bits`, using the preset
/// moduli set for that width.
pub fn efficiency_ratio<T: Real>(bits: u32, h: usize, params: &ConverterParams<T>) -> Result<T> {
    let rns = core_conversion_energy(&CoreConfig::rns_preset(bits, h)?, params)?;
    let fixed = core_conversion_energy(&CoreConfig::fixed_point(h, bits, bits)?, params)?;
    Ok(fixed.adc_total / rns.adc_total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRow<T> {
    pub bits: u32,
    pub mode: &'static str,
    pub converters: usize,
    pub adc_enob: u32,
    pub dac: T,
    pub adc: T,
    /// Fixed-point over RNS ADC energy at this width (same on both rows).
    pub ratio: T,
}

/// Converter energy for both cores at every width in `bits`.
pub fn energy_table<T: Real>(bits: &[u32], h: usize, params: &ConverterParams<T>) -> Result<Vec<EnergyRow<T>>> {
    let mut rows = Vec::with_capacity(bits.len() * 2);
    for &b in bits {
        let rns = core_conversion_energy(&CoreConfig::rns_preset(b, h)?, params)?;
        let fixed = core_conversion_energy(&CoreConfig::fixed_point(h, b, b)?, params)?;
        debug_assert_eq!(fixed.adc_enob, required_output_bits(b, b, h));
        let ratio = fixed.adc_total / rns.adc_total;
        for (mode, e) in [("rns", rns), ("fixed_point", fixed)] {
            rows.push(EnergyRow {
                bits: b,
                mode,
                converters: e.converters,
                adc_enob: e.adc_enob,
                dac: e.dac_total,
                adc: e.adc_total,
                ratio,
            });
        }
    }
    Ok(rows)
}
