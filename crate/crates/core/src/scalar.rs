//! Floating point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Real scalar type a network can be instantiated over (`f32` or `f64`).
pub trait Scalar:
    Float + FloatConst + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Short name used in container headers and CLI output.
    const NAME: &'static str;

    /// Converts an `f64` literal or statistic into this type (rounding for `f32`).
    fn cast(v: f64) -> Self;

    fn as_f64(self) -> f64;

    fn count(n: usize) -> Self {
        Self::cast(n as f64)
    }

    /// `c ← a·b` for an `m×k` by `k×n` product, each operand addressed by
    /// (row stride, column stride) so transposed views need no copy.
    #[allow(clippy::too_many_arguments)]
    fn gemm(m: usize, k: usize, n: usize, a: &[Self], a_strides: (usize, usize), b: &[Self], b_strides: (usize, usize), c: &mut [Self]);
}

fn check_gemm_extents<T>(m: usize, k: usize, n: usize, a: &[T], sa: (usize, usize), b: &[T], sb: (usize, usize), c: &[T]) {
    let span = |rows: usize, cols: usize, (rs, cs): (usize, usize)| {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows - 1) * rs + (cols - 1) * cs + 1
        }
    };
    assert!(a.len() >= span(m, k, sa) && b.len() >= span(k, n, sb) && c.len() >= m * n, "gemm operand too short");
}

macro_rules! gemm_impl {
    ($f:path) => {
        fn gemm(m: usize, k: usize, n: usize, a: &[Self], sa: (usize, usize), b: &[Self], sb: (usize, usize), c: &mut [Self]) {
            check_gemm_extents(m, k, n, a, sa, b, sb, c);
            // SAFETY: the extent check above keeps every strided access inside the slices.
            unsafe {
                $f(
                    m, k, n, 1.0,
                    a.as_ptr(), sa.0 as isize, sa.1 as isize,
                    b.as_ptr(), sb.0 as isize, sb.1 as isize,
                    0.0,
                    c.as_mut_ptr(), n as isize, 1,
                )
            }
        }
    };
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";

    #[inline]
    fn cast(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }

    gemm_impl!(matrixmultiply::sgemm);
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";

    #[inline]
    fn cast(v: f64) -> Self {
        v
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }

    gemm_impl!(matrixmultiply::dgemm);
}
