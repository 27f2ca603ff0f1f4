//! Log-domain weight arithmetic and systematic resampling.

use alloc::vec::Vec;

use rand::Rng;

/// `ln Σ exp(x_i)`, stable under max-subtraction. Returns `-inf` for an
/// empty slice or when every entry is `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| libm::exp(v - max)).sum();
    max + libm::log(sum)
}

/// Converts log-weights into normalized linear weights. Returns the
/// log-normalizer, or `None` when all weights are zero (the slice is then
/// left untouched).
pub fn normalize_log_weights(log_weights: &[f64], out: &mut [f64]) -> Option<f64> {
    let norm = log_sum_exp(log_weights);
    if !norm.is_finite() {
        return None;
    }
    for (o, lw) in out.iter_mut().zip(log_weights) {
        *o = libm::exp(lw - norm);
    }
    Some(norm)
}

/// Systematic resampling: one uniform offset, `n` evenly spaced pointers.
/// `weights` must be non-negative with a positive sum.
pub fn systematic_resample<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let mut indices = Vec::with_capacity(n);
    if weights.is_empty() || n == 0 {
        return indices;
    }
    let step = total / n as f64;
    let offset: f64 = rng.random::<f64>() * step;
    let mut cumulative = weights[0];
    let mut i = 0;
    for k in 0..n {
        let pointer = offset + step * k as f64;
        while pointer >= cumulative && i + 1 < weights.len() {
            i += 1;
            cumulative += weights[i];
        }
        indices.push(i);
    }
    indices
}

/// Effective sample size `1 / Σ w^2` of normalized weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().map(|w| w * w).sum();
    if s > 0.0 {
        1.0 / s
    } else {
        0.0
    }
}
