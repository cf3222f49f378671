use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("moduli set is empty")]
    EmptyModuli,
    #[error("modulus {0} is invalid: moduli must lie in [2, 2^32)")]
    InvalidModulus(u64),
    #[error("moduli {a} and {b} share factor {factor}")]
    NotCoprime { a: u32, b: u32, factor: u32 },
    #[error("moduli product overflows 64 bits")]
    Overflow,
    #[error("value {value} is outside the signed range [{lo}, {hi}]")]
    OutOfRange { value: i128, lo: i64, hi: i64 },
    #[error("residue {residue} is not below modulus {modulus}")]
    InvalidResidue { residue: u32, modulus: u32 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("operands are encoded against different moduli sets")]
    ModuliMismatch,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("bit width {0} is outside the supported range [2, 32]")]
    InvalidBits(u32),
    #[error("empty input")]
    EmptyInput,
    #[error("core configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error("moduli range 2^{log2_range:.2} cannot hold {required} output bits")]
    RangeViolation { log2_range: f64, required: u32 },
    #[error("value {value} is outside the legitimate range [0, {limit})")]
    OutOfLegitimateRange { value: u128, limit: u128 },
    #[error("invalid redundant code: {0}")]
    InvalidCode(String),
    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("tensor file: {0}")]
    TensorFile(String),
    #[error("model manifest: {0}")]
    Manifest(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
