use std::sync::Arc;

use super::moduli::ModuliSet;
use crate::error::{Error, Result};

/// An integer vector stored as one residue lane per modulus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidueVector {
    moduli: Arc<ModuliSet>,
    lanes: Vec<Vec<u32>>,
    len: usize,
}

impl ResidueVector {
    /// Forward-convert signed integers.
    pub fn encode(values: &[i64], moduli: &Arc<ModuliSet>) -> Result<Self> {
        let encoded: Vec<u64> = values.iter().map(|&v| moduli.encode_signed(v)).collect::<Result<_>>()?;
        let lanes = (0..moduli.len())
            .map(|i| {
                let r = moduli.reducer(i);
                encoded.iter().map(|&v| r.reduce(v)).collect()
            })
            .collect();
        Ok(Self { moduli: Arc::clone(moduli), lanes, len: values.len() })
    }

    /// Build from per-modulus lanes, validating lengths and residue bounds.
    pub fn from_lanes(moduli: &Arc<ModuliSet>, lanes: Vec<Vec<u32>>) -> Result<Self> {
        if lanes.len() != moduli.len() {
            return Err(Error::DimensionMismatch { expected: moduli.len(), actual: lanes.len() });
        }
        let len = lanes[0].len();
        for (lane, &m) in lanes.iter().zip(moduli.moduli()) {
            if lane.len() != len {
                return Err(Error::DimensionMismatch { expected: len, actual: lane.len() });
            }
            if let Some(&r) = lane.iter().find(|&&r| r >= m) {
                return Err(Error::InvalidResidue { residue: r, modulus: m });
            }
        }
        Ok(Self { moduli: Arc::clone(moduli), lanes, len })
    }

    pub fn moduli(&self) -> &Arc<ModuliSet> {
        &self.moduli
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn lane(&self, i: usize) -> &[u32] {
        &self.lanes[i]
    }

    pub fn lanes(&self) -> &[Vec<u32>] {
        &self.lanes
    }

    pub(crate) fn lanes_mut(&mut self) -> &mut [Vec<u32>] {
        &mut self.lanes
    }

    /// Residues of element `j` across all moduli.
    pub fn element(&self, j: usize) -> Vec<u32> {
        self.lanes.iter().map(|l| l[j]).collect()
    }

    /// CRT plus signed decode of every element.
    pub fn decode_signed(&self) -> Vec<i64> {
        (0..self.len)
            .map(|j| self.moduli.signed_decode(self.moduli.crt_unchecked(&self.element(j))))
            .collect()
    }
}

fn same_moduli(a: &Arc<ModuliSet>, b: &Arc<ModuliSet>) -> bool {
    Arc::ptr_eq(a, b) || a.moduli() == b.moduli()
}

/// Per-modulus `|sum_j a_i[j] * b_i[j]|_{m_i}`.
pub fn residue_dot_product(a: &ResidueVector, b: &ResidueVector) -> Result<Vec<u32>> {
    if !same_moduli(&a.moduli, &b.moduli) {
        return Err(Error::ModuliMismatch);
    }
    if a.len != b.len {
        return Err(Error::DimensionMismatch { expected: a.len, actual: b.len });
    }
    Ok((0..a.moduli.len()).map(|i| lane_dot(a.moduli.reducer(i), &a.lanes[i], &b.lanes[i])).collect())
}

#[inline]
pub(crate) fn lane_dot(r: super::Barrett, a: &[u32], b: &[u32]) -> u32 {
    a.iter().zip(b).fold(0u32, |acc, (&x, &y)| r.mul_add(acc, x, y))
}
