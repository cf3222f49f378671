use std::sync::Arc;

use crate::analog::{CoreConfig, CoreMode, NoiseModel};
use crate::error::{Error, Result};
use crate::quant::{max_level, QuantizedMatrix, QuantizedVector};
use crate::rng::Stream;
use crate::rns::{lane_dot, ModuliSet, ResidueVector};

/// Output of the fixed-point engine: truncated integers plus the number of
/// dropped low-order bits, so `values[k] << shift` approximates the exact sum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedPointOutput {
    pub values: Vec<i64>,
    pub shift: u32,
}

impl FixedPointOutput {
    /// Outputs rescaled to integer-product units.
    pub fn rescaled(&self) -> Vec<i64> {
        self.values.iter().map(|&v| v << self.shift).collect()
    }
}

fn check_operands<T>(wq: &QuantizedMatrix<T>, xq: &QuantizedVector<T>, cfg: &CoreConfig) -> Result<()> {
    if wq.cols != xq.len() {
        return Err(Error::DimensionMismatch { expected: wq.cols, actual: xq.len() });
    }
    if xq.len() > cfg.h || wq.rows > cfg.h {
        return Err(Error::ConfigMismatch(format!(
            "{}x{} tile does not fit an h = {} core",
            wq.rows, wq.cols, cfg.h
        )));
    }
    if wq.bits != cfg.b_w || xq.bits != cfg.b_in {
        return Err(Error::ConfigMismatch(format!(
            "operands quantized at ({}, {}) bits, core expects ({}, {})",
            xq.bits, wq.bits, cfg.b_in, cfg.b_w
        )));
    }
    let (qx, qw) = (max_level(cfg.b_in), max_level(cfg.b_w));
    if xq.values.iter().any(|v| v.abs() > qx) || wq.values.iter().any(|v| v.abs() > qw) {
        return Err(Error::ConfigMismatch("operand exceeds its quantized range".into()));
    }
    Ok(())
}

/// Per-modulus analog MVM followed by analog modulo and ADC capture.
///
/// Columns beyond `xq.len()` up to `h` are treated as zero padding. Output
/// lane `i` is corrupted with `noise` drawing from `stream.child(i)`.
pub fn rns_tile_mvm<T>(
    wq: &QuantizedMatrix<T>,
    xq: &QuantizedVector<T>,
    cfg: &CoreConfig,
    noise: &NoiseModel,
    stream: Stream,
) -> Result<ResidueVector> {
    let moduli = match &cfg.mode {
        CoreMode::FixedPoint => return Err(Error::ConfigMismatch("rns_tile_mvm needs an RNS core".into())),
        _ => cfg.moduli().expect("rns mode"),
    };
    cfg.validate()?;
    check_operands(wq, xq, cfg)?;

    residue_mvm(&wq.values, wq.rows, wq.cols, &xq.values, moduli, noise, stream)
}

/// Raw residue MVM over a row-major integer matrix, with no bit-width or
/// range checks. Lane `i` is corrupted with `noise` from `stream.child(i)`.
pub fn residue_mvm(
    w: &[i64],
    rows: usize,
    cols: usize,
    x: &[i64],
    moduli: &Arc<ModuliSet>,
    noise: &NoiseModel,
    stream: Stream,
) -> Result<ResidueVector> {
    if w.len() != rows * cols {
        return Err(Error::DimensionMismatch { expected: rows * cols, actual: w.len() });
    }
    if x.len() != cols {
        return Err(Error::DimensionMismatch { expected: cols, actual: x.len() });
    }
    let mut lanes = Vec::with_capacity(moduli.len());
    for (i, &m) in moduli.moduli().iter().enumerate() {
        let red = moduli.reducer(i);
        let mi = m as i64;
        let xr: Vec<u32> = x.iter().map(|v| v.rem_euclid(mi) as u32).collect();
        let mut row = vec![0u32; cols];
        let mut lane = Vec::with_capacity(rows);
        for r in 0..rows {
            for (dst, v) in row.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
                *dst = v.rem_euclid(mi) as u32;
            }
            lane.push(lane_dot(red, &row, &xr));
        }
        noise.corrupt_lane(&mut lane, m, &mut stream.child(i as u64).rng());
        lanes.push(lane);
    }
    ResidueVector::from_lanes(moduli, lanes)
}

/// Exact signed MVM truncated to the top `b_adc` of `b_out` bits (floor).
pub fn fixed_point_tile_mvm<T>(
    wq: &QuantizedMatrix<T>,
    xq: &QuantizedVector<T>,
    cfg: &CoreConfig,
) -> Result<FixedPointOutput> {
    if !matches!(cfg.mode, CoreMode::FixedPoint) {
        return Err(Error::ConfigMismatch("fixed_point_tile_mvm needs a fixed-point core".into()));
    }
    cfg.validate()?;
    check_operands(wq, xq, cfg)?;
    let shift = cfg.lost_bits();
    let values = (0..wq.rows)
        .map(|r| {
            let exact: i64 = wq.row(r).iter().zip(&xq.values).map(|(a, b)| a * b).sum();
            debug_assert!(exact.unsigned_abs() < 1u64 << (cfg.b_out() - 1));
            exact >> shift
        })
        .collect();
    Ok(FixedPointOutput { values, shift })
}
