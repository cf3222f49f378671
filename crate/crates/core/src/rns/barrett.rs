/// Barrett reduction for a fixed modulus below 2^32.
///
/// `mu = floor(2^64 / m)`; the quotient estimate is off by at most one, so a
/// single conditional subtraction finishes the reduction for any `u64` input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Barrett {
    modulus: u64,
    mu: u128,
}

impl Barrett {
    pub const fn new(modulus: u32) -> Self {
        assert!(modulus >= 2);
        let mu = (1u128 << 64) / modulus as u128;
        Self { modulus: modulus as u64, mu }
    }

    #[inline]
    pub const fn reduce(self, x: u64) -> u32 {
        let q = ((self.mu * x as u128) >> 64) as u64;
        let r = x - q * self.modulus;
        (if r >= self.modulus { r - self.modulus } else { r }) as u32
    }

    /// `(acc + a * b) mod m` for `acc, a, b < m`.
    #[inline]
    pub const fn mul_add(self, acc: u32, a: u32, b: u32) -> u32 {
        self.reduce(acc as u64 + a as u64 * b as u64)
    }

    pub const fn modulus(self) -> u32 {
        self.modulus as u32
    }
}
