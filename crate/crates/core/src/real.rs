//! Scalar abstraction for the theory-side code.

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar used by the spectral/theory code paths.
///
/// The matrix layer (`dense`, `experiments`) is `f64`-only; everything that
/// operates on spectra and scalars is generic over this trait so the same
/// formulas run at `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + NumAssign
    + Copy
    + Send
    + Sync
    + std::fmt::Debug
    + std::fmt::Display
    + serde::Serialize
    + serde::de::DeserializeOwned
    + 'static
{
    /// Lossy conversion from `f64`, used for literals in formulas.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Lossy conversion to `f64`, used at reporting boundaries.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + NumAssign
        + Copy
        + Send
        + Sync
        + std::fmt::Debug
        + std::fmt::Display
        + serde::Serialize
        + serde::de::DeserializeOwned
        + 'static
{
}
