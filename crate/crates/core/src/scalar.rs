//! Generic real scalar used throughout the crate.
//!
//! All numerics are written against [`Real`] so the same code runs in `f32`
//! or `f64`; the crate-root aliases fix `f64`, which is what the CLI and the
//! verification suites use.

use nalgebra as na;
use num_complex::Complex;
use num_traits as nt;

/// Floating-point scalar all state carriers and algorithms are generic over.
pub trait Real:
    Copy
    + Send
    + Sync
    + 'static
    + na::RealField
    + nt::FloatConst
    + nt::FromPrimitive
    + std::fmt::LowerExp
{
    /// Positive infinity, used to report diverging relative entropies.
    fn infinity() -> Self;
}

impl Real for f32 {
    fn infinity() -> Self {
        f32::INFINITY
    }
}

impl Real for f64 {
    fn infinity() -> Self {
        f64::INFINITY
    }
}

/// Complex number over the crate scalar.
pub type C<T> = Complex<T>;

/// Converts an `f64` constant into the generic scalar.
#[inline]
pub fn r<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("constant representable in scalar type")
}

/// `|z|` for the crate's complex scalar.
#[inline]
pub fn cabs<T: Real>(z: C<T>) -> T {
    (z.re * z.re + z.im * z.im).sqrt()
}
