use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Scalar type the geometry and solver code is generic over: `f32` or `f64`.
pub trait Real: RealField + FromPrimitive + ToPrimitive + Copy + Send + Sync {
    /// Lossy conversion from an `f64` constant (configuration values,
    /// tolerances, literals).
    fn from_config(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant")
    }
}

impl<T: RealField + FromPrimitive + ToPrimitive + Copy + Send + Sync> Real for T {}
