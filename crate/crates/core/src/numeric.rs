//! Small numerical helpers shared across modules.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use statrs::function::gamma::ln_gamma;

/// log Σ exp(x_i); −∞ for an empty slice or all −∞ entries.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Draws an index with probability proportional to exp(w_i).
pub fn sample_log_weights<R: Rng + ?Sized>(w: &[f64], rng: &mut R) -> usize {
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(
        max.is_finite(),
        "all categorical weights are -inf or non-finite (max = {max})"
    );
    let total: f64 = w.iter().map(|x| (x - max).exp()).sum();
    let mut u = rng.random::<f64>() * total;
    for (i, x) in w.iter().enumerate() {
        u -= (x - max).exp();
        if u < 0.0 {
            return i;
        }
    }
    // rounding left a sliver of mass; hand it to the last positive weight
    w.iter().rposition(|x| *x > f64::NEG_INFINITY).unwrap()
}

/// log of the ascending factorial x (x+1) ... (x+n−1).
pub fn ln_rising(x: f64, n: usize) -> f64 {
    if n <= 32 {
        (0..n).map(|i| (x + i as f64).ln()).sum()
    } else {
        ln_gamma(x + n as f64) - ln_gamma(x)
    }
}

/// Beta draw kept inside the open unit interval.
pub fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let v: f64 = Beta::new(a, b).expect("positive beta shapes").sample(rng);
    v.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Quantile by linear interpolation between order statistics (R type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with denominator n − 1.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}
