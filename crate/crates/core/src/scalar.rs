//! Scalar abstraction shared by every numerical module.
//!
//! All kernels are written against [`Real`], which is implemented for `f32`
//! and `f64`. Dense products go through [`Real::gemm`] so that each scalar
//! type can use the matching `matrixmultiply` kernel.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Convert an `f64` literal. Never fails for the supported types.
    fn lit(x: f64) -> Self;

    fn as_f64(self) -> f64;

    /// Absolute tolerance for scalar root solves.
    fn root_tol() -> Self;

    /// Row-major `c = a * b` with `a: m x k`, `b: k x n`, `c: m x n`.
    ///
    /// Single-threaded and deterministic for fixed shapes.
    fn gemm(m: usize, k: usize, n: usize, a: &[Self], b: &[Self], c: &mut [Self]);

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::lit(n as f64)
    }
}

macro_rules! check_shapes {
    ($m:expr, $k:expr, $n:expr, $a:expr, $b:expr, $c:expr) => {
        assert_eq!($a.len(), $m * $k, "gemm: lhs shape");
        assert_eq!($b.len(), $k * $n, "gemm: rhs shape");
        assert_eq!($c.len(), $m * $n, "gemm: output shape");
    };
}

impl Real for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }

    fn root_tol() -> Self {
        1e-12
    }

    fn gemm(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
        check_shapes!(m, k, n, a, b, c);
        if m == 0 || n == 0 {
            return;
        }
        // SAFETY: shapes checked above; row-major strides.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr(),
                k as isize,
                1,
                b.as_ptr(),
                n as isize,
                1,
                0.0,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
}

impl Real for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }

    fn root_tol() -> Self {
        16.0 * f32::EPSILON
    }

    fn gemm(m: usize, k: usize, n: usize, a: &[f32], b: &[f32], c: &mut [f32]) {
        check_shapes!(m, k, n, a, b, c);
        if m == 0 || n == 0 {
            return;
        }
        // SAFETY: shapes checked above; row-major strides.
        unsafe {
            matrixmultiply::sgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr(),
                k as isize,
                1,
                b.as_ptr(),
                n as isize,
                1,
                0.0,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
}

/// Reduce `x` into `[0, 1)`.
#[inline]
pub fn wrap_unit<T: Real>(x: T) -> T {
    let y = x - x.floor();
    // floor can round 1 - tiny up to exactly 1
    if y >= T::one() {
        T::zero()
    } else {
        y
    }
}
