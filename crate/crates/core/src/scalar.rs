use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar used for the real-valued side of the simulator
/// (scales, dequantized outputs, energies). Implemented for `f32` and `f64`.
pub trait Real:
    'static
    + Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
{
    fn from_i64_exact(v: i64) -> Self {
        Self::from_i64(v).unwrap()
    }

    fn lit(v: f64) -> Self {
        Self::from_f64(v).unwrap()
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap()
    }
}

impl Real for f32 {}
impl Real for f64 {}
