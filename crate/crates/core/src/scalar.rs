//! Scalar abstraction shared by every estimator in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the estimators are generic over: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Sum + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal or intermediate.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Real")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize converts to Real")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Sample mean and unbiased standard deviation.
pub(crate) fn mean_sd<T: Real>(v: &[T]) -> (T, T) {
    let n = v.len();
    if n == 0 {
        return (T::nan(), T::nan());
    }
    let nf = T::from_usize_lossy(n);
    let mean = v.iter().copied().sum::<T>() / nf;
    if n < 2 {
        return (mean, T::zero());
    }
    let ss = v.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>();
    (mean, (ss / (nf - T::one())).sqrt())
}

/// Empirical quantile with linear interpolation between order statistics
/// (type 7). `sorted` must be nondecreasing and nonempty.
pub(crate) fn quantile_sorted<T: Real>(sorted: &[T], p: T) -> T {
    let n = sorted.len();
    debug_assert!(n > 0);
    if n == 1 {
        return sorted[0];
    }
    let pos = p.max(T::zero()).min(T::one()) * T::from_usize_lossy(n - 1);
    let lo = pos.floor().to_usize().unwrap_or(0).min(n - 1);
    let hi = (lo + 1).min(n - 1);
    let frac = pos - T::from_usize_lossy(lo);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub(crate) fn sort_total<T: Real>(v: &mut [T]) {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
}

/// Sample median (average of the two middle order statistics for even n).
pub(crate) fn median<T: Real>(v: &[T]) -> Option<T> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    sort_total(&mut s);
    Some(quantile_sorted(&s, T::lit(0.5)))
}
