/// Scalar type bound for every numeric routine in this crate.
///
/// Bridges the `num_traits` arithmetic surface (generic literals, `Float`
/// transcendentals) with faer's `RealField` (dense and sparse factorizations).
/// `f32` and `f64` satisfy it; nothing here assumes more than IEEE semantics.
pub trait Scalar:
    num_traits::Float
    + num_traits::NumAssign
    + faer::traits::RealField
    + core::fmt::Debug
    + core::fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Conversion from `f64`, used for constants and tolerances. Lossy for `f32`.
    #[inline]
    fn cast(x: f64) -> Self {
        <Self as num_traits::NumCast>::from(x).expect("f64 representable in Scalar")
    }

    /// Conversion from `usize` (dimension counts inside formulas).
    #[inline]
    fn cast_usize(n: usize) -> Self {
        Self::cast(n as f64)
    }

    /// Widening conversion to `f64` for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("Scalar representable in f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
