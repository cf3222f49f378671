use serde::{Deserialize, Serialize};

use super::barrett::Barrett;
use crate::error::{Error, Result};

/// CRT constants for one modulus: `M_i = M / m_i` and `T_i = M_i^{-1} mod m_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrtWeight {
    pub partial: u64,
    pub inverse: u32,
    /// `|M_i T_i|_M`, the basis element for modulus i.
    basis: u64,
}

/// Pairwise co-prime moduli with precomputed CRT constants.
///
/// Moduli are limited to 32 bits and their product to 64 bits, so every CRT
/// term `a_i * |M_i T_i|_M` fits in a `u128`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct ModuliSet {
    moduli: Vec<u32>,
    product: u64,
    weights: Vec<CrtWeight>,
    reducers: Vec<Barrett>,
    bit_width: u32,
}

/// Signed integers representable under the complement mapping `v < 0 -> v + M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignedRange {
    pub lo: i64,
    pub hi: i64,
}

impl SignedRange {
    pub fn contains(&self, v: i128) -> bool {
        v >= self.lo as i128 && v <= self.hi as i128
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Inverse of `a` modulo `m` by the extended Euclidean algorithm. `None` when
/// `gcd(a, m) != 1`.
pub fn mod_inverse(a: u64, m: u64) -> Option<u64> {
    let (mut old_r, mut r) = ((a % m) as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    (old_r == 1).then(|| old_s.rem_euclid(m as i128) as u64)
}

pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

impl ModuliSet {
    pub fn new(moduli: &[u64]) -> Result<Self> {
        if moduli.is_empty() {
            return Err(Error::EmptyModuli);
        }
        let mut narrow = Vec::with_capacity(moduli.len());
        for &m in moduli {
            if !(2..=u32::MAX as u64).contains(&m) {
                return Err(Error::InvalidModulus(m));
            }
            narrow.push(m as u32);
        }
        for (i, &a) in narrow.iter().enumerate() {
            for &b in &narrow[i + 1..] {
                let g = gcd(a as u64, b as u64);
                if g != 1 {
                    return Err(Error::NotCoprime { a, b, factor: g as u32 });
                }
            }
        }
        let product = narrow
            .iter()
            .try_fold(1u64, |acc, &m| acc.checked_mul(m as u64))
            .ok_or(Error::Overflow)?;

        let weights = narrow
            .iter()
            .map(|&m| {
                let partial = product / m as u64;
                let inverse = mod_inverse(partial, m as u64).expect("co-prime moduli") as u32;
                let basis = ((partial as u128 * inverse as u128) % product as u128) as u64;
                debug_assert_eq!((partial as u128 * inverse as u128) % m as u128, 1);
                CrtWeight { partial, inverse, basis }
            })
            .collect();
        let reducers = narrow.iter().map(|&m| Barrett::new(m)).collect();
        let bit_width = narrow.iter().map(|&m| ceil_log2(m as u64)).max().unwrap_or(0);
        Ok(Self { moduli: narrow, product, weights, reducers, bit_width })
    }

    pub fn moduli(&self) -> &[u32] {
        &self.moduli
    }

    pub fn len(&self) -> usize {
        self.moduli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moduli.is_empty()
    }

    /// Dynamic range `M`.
    pub fn range(&self) -> u64 {
        self.product
    }

    pub fn log2_range(&self) -> f64 {
        (self.product as f64).log2()
    }

    pub fn crt_weights(&self) -> &[CrtWeight] {
        &self.weights
    }

    pub fn reducer(&self, i: usize) -> Barrett {
        self.reducers[i]
    }

    /// Converter width needed for the widest residue, `max ceil(log2 m_i)`.
    pub fn bit_width(&self) -> u32 {
        self.bit_width
    }

    pub fn signed_range(&self) -> SignedRange {
        let hi = ((self.product - 1) / 2) as i64;
        SignedRange { lo: -hi, hi }
    }

    /// `log2(M) >= b_out`, checked exactly as `M >= 2^b_out`.
    pub fn supports_output_bits(&self, b_out: u32) -> bool {
        b_out < 64 && self.product >= 1u64 << b_out
    }

    /// Residues of `value` in `[0, M)`.
    pub fn residues_of(&self, value: u64) -> Vec<u32> {
        debug_assert!(value < self.product);
        self.reducers.iter().map(|r| r.reduce(value)).collect()
    }

    /// Residues of a signed value, after checking it against the signed range.
    pub fn forward_convert(&self, value: i64) -> Result<Vec<u32>> {
        Ok(self.residues_of(self.encode_signed(value)?))
    }

    /// Complement encoding of a signed value into `[0, M)`.
    pub fn encode_signed(&self, value: i64) -> Result<u64> {
        let range = self.signed_range();
        if !range.contains(value as i128) {
            return Err(Error::OutOfRange { value: value as i128, lo: range.lo, hi: range.hi });
        }
        Ok(if value < 0 { (value as i128 + self.product as i128) as u64 } else { value as u64 })
    }

    /// Reduce an arbitrary integer into `[0, M)` without a range check.
    pub fn wrap(&self, value: i128) -> u64 {
        value.rem_euclid(self.product as i128) as u64
    }

    /// CRT reconstruction `A = sum_i |a_i M_i T_i|_M`.
    pub fn crt_reconstruct(&self, residues: &[u32]) -> Result<u64> {
        if residues.len() != self.moduli.len() {
            return Err(Error::DimensionMismatch { expected: self.moduli.len(), actual: residues.len() });
        }
        for (&r, &m) in residues.iter().zip(&self.moduli) {
            if r >= m {
                return Err(Error::InvalidResidue { residue: r, modulus: m });
            }
        }
        Ok(self.crt_unchecked(residues))
    }

    pub(crate) fn crt_unchecked(&self, residues: &[u32]) -> u64 {
        let m = self.product as u128;
        let mut acc: u128 = 0;
        for (&r, w) in residues.iter().zip(&self.weights) {
            acc += (r as u128 * w.basis as u128) % m;
            if acc >= m {
                acc -= m;
            }
        }
        acc as u64
    }

    /// Map `[0, M)` back to the signed range.
    pub fn signed_decode(&self, value: u64) -> i64 {
        let half = (self.product - 1) / 2;
        if value <= half {
            value as i64
        } else {
            (value as i128 - self.product as i128) as i64
        }
    }

    pub fn decode_signed(&self, residues: &[u32]) -> Result<i64> {
        Ok(self.signed_decode(self.crt_reconstruct(residues)?))
    }
}

impl TryFrom<Vec<u64>> for ModuliSet {
    type Error = Error;

    fn try_from(v: Vec<u64>) -> Result<Self> {
        ModuliSet::new(&v)
    }
}

impl From<ModuliSet> for Vec<u64> {
    fn from(ms: ModuliSet) -> Self {
        ms.moduli.iter().map(|&m| m as u64).collect()
    }
}

/// Bits needed for a lossless `h`-element dot product of `b_in`- and
/// `b_w`-bit signed operands: `b_in + b_w + ceil(log2 h) - 1`.
pub fn required_output_bits(b_in: u32, b_w: u32, h: usize) -> u32 {
    b_in + b_w + ceil_log2(h as u64) - 1
}

/// Named moduli sets, one per converter width 4..=8, each the fewest
/// largest co-prime moduli of that width covering `h = 128`.
pub const PRESETS: [(&str, &[u64]); 5] = [
    ("rns4", &[15, 14, 13, 11]),
    ("rns5", &[31, 29, 28, 27]),
    ("rns6", &[63, 62, 61, 59]),
    ("rns7", &[127, 126, 125]),
    ("rns8", &[255, 254, 253]),
];

pub fn preset(name: &str) -> Option<ModuliSet> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, m)| ModuliSet::new(m).expect("presets are valid"))
}

/// Preset for converter width `bits`, if one exists.
pub fn preset_for_bits(bits: u32) -> Option<ModuliSet> {
    preset(&format!("rns{bits}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_inverse(a: u64, m: u64) -> u64 {
        (1..m).find(|t| (a % m) * t % m == 1).unwrap()
    }

    #[test]
    fn small_set_constants() {
        let ms = ModuliSet::new(&[3, 5, 7]).unwrap();
        assert_eq!(ms.range(), 105);
        let w: Vec<_> = ms.crt_weights().iter().map(|w| (w.partial, w.inverse)).collect();
        assert_eq!(w, vec![(35, 2), (21, 1), (15, 1)]);
        for w in ms.crt_weights() {
            let m = ms.range() / w.partial;
            assert_eq!(w.inverse as u64, brute_inverse(w.partial, m));
        }
        assert_eq!(ms.bit_width(), 3);
    }

    #[test]
    fn table_presets() {
        let ms = preset("rns4").unwrap();
        assert_eq!(ms.range(), 30030);
        assert!((ms.log2_range() - 14.874).abs() < 1e-3);
        for (name, _) in PRESETS {
            let ms = preset(name).unwrap();
            for (w, &m) in ms.crt_weights().iter().zip(ms.moduli()) {
                assert_eq!((w.partial as u128 * w.inverse as u128) % m as u128, 1);
            }
            // every preset covers h = 128 at its own width
            let b = ms.bit_width();
            assert!(ms.supports_output_bits(required_output_bits(b, b, 128)), "{name}");
        }
        assert_eq!(preset_for_bits(8).unwrap().moduli(), &[255, 254, 253]);
        assert!(preset("rns9").is_none());
    }

    #[test]
    fn rejects_bad_sets() {
        assert_eq!(ModuliSet::new(&[4, 6]), Err(Error::NotCoprime { a: 4, b: 6, factor: 2 }));
        assert_eq!(Error::NotCoprime { a: 4, b: 6, factor: 2 }.to_string(), "moduli 4 and 6 share factor 2");
        assert_eq!(ModuliSet::new(&[]), Err(Error::EmptyModuli));
        assert_eq!(ModuliSet::new(&[1, 3]), Err(Error::InvalidModulus(1)));
        assert_eq!(ModuliSet::new(&[1 << 33]), Err(Error::InvalidModulus(1 << 33)));
        let big = [4_294_967_291u64, 4_294_967_279, 4_294_967_231];
        assert_eq!(ModuliSet::new(&big), Err(Error::Overflow));
    }

    #[test]
    fn forward_and_back() {
        let ms = ModuliSet::new(&[3, 5, 7]).unwrap();
        assert_eq!(ms.forward_convert(23).unwrap(), vec![2, 3, 2]);
        assert_eq!(ms.forward_convert(0).unwrap(), vec![0, 0, 0]);
        assert_eq!(ms.forward_convert(-1).unwrap(), vec![2, 4, 6]);
        assert_eq!(ms.crt_reconstruct(&[2, 3, 2]).unwrap(), 23);
        assert_eq!(ms.crt_reconstruct(&[0, 0, 0]).unwrap(), 0);
        assert_eq!(ms.crt_reconstruct(&[2, 4, 6]).unwrap(), 104);
        assert_eq!(
            ms.crt_reconstruct(&[3, 0, 0]),
            Err(Error::InvalidResidue { residue: 3, modulus: 3 })
        );
        assert!(matches!(ms.forward_convert(53), Err(Error::OutOfRange { lo: -52, hi: 52, .. })));
        assert!(matches!(ms.forward_convert(-53), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn exhaustive_crt_matches_scan() {
        let ms = ModuliSet::new(&[3, 5, 7]).unwrap();
        for v in 0..105u64 {
            let r = ms.residues_of(v);
            // oracle: scan [0, M) for the value with matching residues
            let scan = (0..105u64)
                .find(|c| ms.moduli().iter().zip(&r).all(|(&m, &ri)| c % m as u64 == ri as u64))
                .unwrap();
            assert_eq!(ms.crt_reconstruct(&r).unwrap(), scan);
        }
    }

    #[test]
    fn signed_mapping() {
        let ms = ModuliSet::new(&[3, 5, 7]).unwrap();
        assert_eq!(ms.signed_decode(104), -1);
        assert_eq!(ms.signed_decode(52), 52);
        assert_eq!(ms.signed_decode(53), -52);
        assert_eq!(ms.encode_signed(-52).unwrap(), 53);
        assert_eq!(ms.signed_range(), SignedRange { lo: -52, hi: 52 });
        // even M
        let even = ModuliSet::new(&[4, 3]).unwrap();
        assert_eq!(even.signed_range(), SignedRange { lo: -5, hi: 5 });
        assert_eq!(even.signed_decode(6), -6);
    }

    #[test]
    fn output_bits() {
        assert_eq!(required_output_bits(4, 4, 128), 14);
        assert_eq!(required_output_bits(8, 8, 128), 22);
        assert_eq!(required_output_bits(1, 1, 1), 1);
        assert_eq!(required_output_bits(4, 4, 100), 14);
        let ms = preset("rns4").unwrap();
        assert!(ms.supports_output_bits(14));
        assert!(!ms.supports_output_bits(15));
        assert!(!ms.supports_output_bits(64));
    }

    #[test]
    fn serde_as_list() {
        #[derive(Serialize, Deserialize)]
        struct W {
            m: ModuliSet,
        }
        let w: W = toml::from_str("m = [3, 5, 7]").unwrap();
        assert_eq!(w.m.range(), 105);
        assert!(toml::from_str::<W>("m = [4, 6]").is_err());
        assert_eq!(toml::to_string(&w).unwrap().trim(), "m = [3, 5, 7]");
    }
}
