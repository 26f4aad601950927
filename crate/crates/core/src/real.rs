//! Scalar abstraction for the numeric kernels.
//!
//! Everything that crunches floats is generic over [`Real`] so the same code
//! runs in `f32` and `f64`. Tolerances that depend on the machine epsilon are
//! provided per implementation rather than derived, so the `f64` values match
//! the documented contracts exactly.

use num_complex::Complex;

/// Floating-point scalar usable throughout the crate.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + std::fmt::LowerExp
    + std::str::FromStr
    + Send
    + Sync
    + 'static
{
    /// Tolerance for unit-norm checks on evolved state vectors.
    fn norm_tol() -> Self;

    /// Convergence tolerance for iterative scalar solvers (Lambert W, fits).
    fn solver_tol() -> Self;
}

impl Real for f64 {
    fn norm_tol() -> f64 {
        1e-10
    }
    fn solver_tol() -> f64 {
        1e-12
    }
}

impl Real for f32 {
    fn norm_tol() -> f32 {
        1e-4
    }
    fn solver_tol() -> f32 {
        1e-6
    }
}

/// Complex number over a [`Real`] scalar.
pub type C<T> = Complex<T>;

/// Lossy conversion from an `f64` literal; panics only if the target type
/// cannot represent finite doubles at all, which no [`Real`] impl hits.
#[inline]
pub fn cst<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("finite f64 constant must convert")
}
