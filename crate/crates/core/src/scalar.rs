//! Floating-point scalar abstraction for the analytical core.

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Scalar type of the analytical core: `f32` or `f64`.
///
/// Everything that is pure mathematics (spectral decomposition, entropies,
/// quadrature, optimisation) is written against this trait; simulation,
/// reconciliation and the wire formats pin `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + core::fmt::Debug + core::fmt::Display + Send + Sync + 'static
{
    /// Converts an `f64` constant into the scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 constant")
    }

    /// Lossy view as `f64`, for diagnostics and error messages.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + core::fmt::Debug
        + core::fmt::Display
        + Send
        + Sync
        + 'static
{
}
