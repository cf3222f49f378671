//! Max-abs scaling and symmetric signed quantization.
//!
//! Inputs get one scale per vector, weights one scale per row. Integer
//! levels span `[-(2^{b-1}-1), 2^{b-1}-1]`; rounding is half away from zero.
//! An all-zero vector or row falls back to scale 1.

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MIN_BITS: u32 = 2;
pub const MAX_BITS: u32 = 32;

/// Largest integer level at `bits`: `2^{bits-1} - 1`.
pub fn max_level(bits: u32) -> i64 {
    (1i64 << (bits - 1)) - 1
}

pub fn check_bits(bits: u32) -> Result<()> {
    if (MIN_BITS..=MAX_BITS).contains(&bits) {
        Ok(())
    } else {
        Err(Error::InvalidBits(bits))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedVector<T> {
    pub values: Vec<i64>,
    pub bits: u32,
    pub scale: T,
}

impl<T> QuantizedVector<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Row-major quantized matrix with one scale per row.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedMatrix<T> {
    pub values: Vec<i64>,
    pub rows: usize,
    pub cols: usize,
    pub bits: u32,
    pub row_scales: Vec<T>,
}

impl<T> QuantizedMatrix<T> {
    pub fn row(&self, r: usize) -> &[i64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }
}

fn max_abs<T: Real>(x: &[T], offset: usize) -> Result<T> {
    x.iter().enumerate().try_fold(T::zero(), |m, (i, &v)| {
        if v.is_finite() {
            Ok(m.max(v.abs()))
        } else {
            Err(Error::NonFinite(offset + i))
        }
    })
}

fn quantize_with<T: Real>(x: &[T], scale: T, bits: u32) -> Vec<i64> {
    let q = max_level(bits);
    let qf = T::from_i64_exact(q);
    x.iter()
        .map(|&v| {
            let level = (v / scale * qf).round().to_i64().unwrap_or(0);
            level.clamp(-q, q)
        })
        .collect()
}

fn scale_of<T: Real>(m: T) -> T {
    if m > T::zero() {
        m
    } else {
        T::one()
    }
}

pub fn quantize_input<T: Real>(x: &[T], bits: u32) -> Result<QuantizedVector<T>> {
    check_bits(bits)?;
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let scale = scale_of(max_abs(x, 0)?);
    Ok(QuantizedVector { values: quantize_with(x, scale, bits), bits, scale })
}

/// Quantize a row-major `rows x cols` matrix, scaling each row by its own max-abs.
pub fn quantize_weights<T: Real>(w: &[T], rows: usize, cols: usize, bits: u32) -> Result<QuantizedMatrix<T>> {
    check_bits(bits)?;
    if w.len() != rows * cols {
        return Err(Error::DimensionMismatch { expected: rows * cols, actual: w.len() });
    }
    let mut values = Vec::with_capacity(w.len());
    let mut row_scales = Vec::with_capacity(rows);
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let scale = scale_of(max_abs(row, r * cols)?);
        values.extend(quantize_with(row, scale, bits));
        row_scales.push(scale);
    }
    Ok(QuantizedMatrix { values, rows, cols, bits, row_scales })
}

/// `Y[k] = y_si[k] * s_inp * s_w[k] / ((2^{b_in-1}-1)(2^{b_w-1}-1))`.
pub fn dequantize_output<T: Real>(y_si: &[i64], s_inp: T, s_w: &[T], b_in: u32, b_w: u32) -> Result<Vec<T>> {
    if y_si.len() != s_w.len() {
        return Err(Error::DimensionMismatch { expected: s_w.len(), actual: y_si.len() });
    }
    let step = T::from_i64_exact(max_level(b_in)) * T::from_i64_exact(max_level(b_w));
    Ok(y_si
        .iter()
        .zip(s_w)
        .map(|(&y, &sw)| T::from_i64_exact(y) * s_inp * sw / step)
        .collect())
}
