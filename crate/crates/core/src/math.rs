//! Log-space helpers.

use crate::scalar::Real;

/// `log Σ exp(x_i)`; returns `-inf` when every entry is `-inf` or the slice is empty.
pub fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    if max == T::infinity() {
        return max;
    }
    let s: T = xs.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

/// Shifts `log_weights` so they describe a normalized distribution and returns
/// the log-normalizer that was subtracted.
pub fn normalize_log<T: Real>(log_weights: &mut [T]) -> T {
    let z = log_sum_exp(log_weights);
    for w in log_weights.iter_mut() {
        *w -= z;
    }
    z
}

/// Sum in index order.
pub(crate) fn ordered_sum<T: Real, I: IntoIterator<Item = T>>(it: I) -> T {
    let mut acc = T::zero();
    for x in it {
        acc += x;
    }
    acc
}

/// Scientific notation with 17 significant digits, enough to round-trip an `f64`.
pub fn fmt_real<T: Real>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}
