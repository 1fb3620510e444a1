use std::fmt::Debug;
use std::iter::Sum;
use std::ops::AddAssign;

use num_traits::Float;

/// Floating-point element type of the link network. `f32` is used for
/// training and inference, `f64` for gradient checking.
pub trait Scalar: Float + Default + Debug + Send + Sync + Sum + AddAssign + 'static {
    fn of(v: f64) -> Self;
    fn as_f64(self) -> f64;

    /// `c ← alpha · a · b + beta · c` for strided `m×k` and `k×n` operands.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        a_strides: (isize, isize),
        b: &[Self],
        b_strides: (isize, isize),
        beta: Self,
        c: &mut [Self],
        c_strides: (isize, isize),
    );
}

fn extent(rows: usize, cols: usize, (rs, cs): (isize, isize)) -> usize {
    if rows == 0 || cols == 0 {
        0
    } else {
        (rows - 1) * rs as usize + (cols - 1) * cs as usize + 1
    }
}

macro_rules! impl_scalar {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            fn of(v: f64) -> Self {
                v as $t
            }

            fn as_f64(self) -> f64 {
                self as f64
            }

            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                a_strides: (isize, isize),
                b: &[Self],
                b_strides: (isize, isize),
                beta: Self,
                c: &mut [Self],
                c_strides: (isize, isize),
            ) {
                assert!(a_strides.0 >= 0 && a_strides.1 >= 0);
                assert!(b_strides.0 >= 0 && b_strides.1 >= 0);
                assert!(c_strides.0 >= 0 && c_strides.1 >= 0);
                assert!(a.len() >= extent(m, k, a_strides), "lhs too short");
                assert!(b.len() >= extent(k, n, b_strides), "rhs too short");
                assert!(c.len() >= extent(m, n, c_strides), "output too short");
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: every index touched lies within the extents checked above.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        a_strides.0,
                        a_strides.1,
                        b.as_ptr(),
                        b_strides.0,
                        b_strides.1,
                        beta,
                        c.as_mut_ptr(),
                        c_strides.0,
                        c_strides.1,
                    );
                }
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

/// Row-major `m×k` times row-major `k×n`.
pub(crate) fn matmul<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T], accumulate: bool) {
    let beta = if accumulate { T::one() } else { T::zero() };
    T::gemm(m, k, n, T::one(), a, (k as isize, 1), b, (n as isize, 1), beta, c, (n as isize, 1));
}

/// `aᵀ · b` where `a` is row-major `k×m` and `b` row-major `k×n`.
pub(crate) fn matmul_tn<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T], accumulate: bool) {
    let beta = if accumulate { T::one() } else { T::zero() };
    T::gemm(m, k, n, T::one(), a, (1, m as isize), b, (n as isize, 1), beta, c, (n as isize, 1));
}

/// `a · bᵀ` where `a` is row-major `m×k` and `b` row-major `n×k`.
pub(crate) fn matmul_nt<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T], accumulate: bool) {
    let beta = if accumulate { T::one() } else { T::zero() };
    T::gemm(m, k, n, T::one(), a, (k as isize, 1), b, (1, k as isize), beta, c, (n as isize, 1));
}
