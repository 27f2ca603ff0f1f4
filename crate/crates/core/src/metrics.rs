//! GOSPA between a set of true and a set of estimated positions.
//!
//! Positions are `(range, depth)` pairs and distances Euclidean. With
//! `d_c = min(d, c)` the metric is
//!
//! ```text
//! GOSPA = ( min_π Σ_pairs d_c^p + c^p / α · (|X| + |Y| - 2 · #pairs) )^(1/p)
//! ```
//!
//! where `π` pairs every element of the smaller set. The reported
//! components live in the p-th power domain (for `p = 1` they sum to the
//! total): pairs closer than `c` count as localization, a pair truncated at
//! `c` counts `c^p / 2` as missed and `c^p / 2` as false, and an unpaired
//! element counts `c^p / α`.

use alloc::vec::Vec;

use crate::assignment::min_cost_assignment;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GospaParams {
    pub cutoff: f64,
    pub order: f64,
    pub alpha: f64,
}

impl GospaParams {
    pub fn new(cutoff: f64, order: f64, alpha: f64) -> Result<Self> {
        if !(cutoff > 0.0) || !cutoff.is_finite() {
            return Err(invalid("cutoff", "must be positive and finite"));
        }
        if !(order >= 1.0) || !order.is_finite() {
            return Err(invalid("order", "must be >= 1"));
        }
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(invalid("alpha", "must lie in (0, 2]"));
        }
        Ok(Self { cutoff, order, alpha })
    }
}

impl Default for GospaParams {
    /// `c = 200`, `p = 1`, `α = 2`.
    fn default() -> Self {
        Self {
            cutoff: 200.0,
            order: 1.0,
            alpha: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Gospa {
    pub total: f64,
    pub localization: f64,
    pub missed: f64,
    pub false_alarms: f64,
}

fn distance(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    libm::hypot(a[0] - b[0], a[1] - b[1])
}

fn check(points: &[[f64; 2]]) -> Result<()> {
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("position"));
    }
    Ok(())
}

/// Canonical evaluation of one pairing: `pairs` holds `(truth, estimate)`
/// indices. The localization terms are summed in ascending order and the
/// total is `(localization + (missed + false_alarms))^(1/p)`, so equal-cost
/// pairings produce bit-identical totals.
pub fn evaluate_pairing(
    truth: &[[f64; 2]],
    estimates: &[[f64; 2]],
    pairs: &[(usize, usize)],
    params: &GospaParams,
) -> Gospa {
    let cp = libm::pow(params.cutoff, params.order);
    let mut local: Vec<f64> = Vec::with_capacity(pairs.len());
    let mut truncated = 0usize;
    for &(t, e) in pairs {
        let d = distance(&truth[t], &estimates[e]);
        if d < params.cutoff {
            local.push(libm::pow(d, params.order));
        } else {
            truncated += 1;
        }
    }
    local.sort_by(f64::total_cmp);
    let localization = local.iter().fold(0.0, |acc, v| acc + v);
    let unpaired_truth = truth.len() - pairs.len();
    let unpaired_est = estimates.len() - pairs.len();
    let missed = cp / 2.0 * truncated as f64 + cp / params.alpha * unpaired_truth as f64;
    let false_alarms = cp / 2.0 * truncated as f64 + cp / params.alpha * unpaired_est as f64;
    let power = localization + (missed + false_alarms);
    Gospa {
        total: libm::pow(power, 1.0 / params.order),
        localization,
        missed,
        false_alarms,
    }
}

pub fn gospa(truth: &[[f64; 2]], estimates: &[[f64; 2]], params: &GospaParams) -> Result<Gospa> {
    check(truth)?;
    check(estimates)?;
    let cols = estimates.len();
    let cost: Vec<f64> = truth
        .iter()
        .flat_map(|t| {
            estimates
                .iter()
                .map(move |e| libm::pow(distance(t, e).min(params.cutoff), params.order))
        })
        .collect();
    let assignment = min_cost_assignment(&cost, truth.len(), cols)?;
    let pairs: Vec<(usize, usize)> = assignment
        .iter()
        .enumerate()
        .filter_map(|(t, e)| e.map(|e| (t, e)))
        .collect();
    Ok(evaluate_pairing(truth, estimates, &pairs, params))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GospaRecord {
    pub step: usize,
    pub value: Gospa,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GospaSeries {
    pub records: Vec<GospaRecord>,
    /// Arithmetic mean of the per-step totals (0 for an empty series).
    pub mean: f64,
}

pub fn gospa_series(
    truth: &[Vec<[f64; 2]>],
    estimates: &[Vec<[f64; 2]>],
    params: &GospaParams,
) -> Result<GospaSeries> {
    if truth.len() != estimates.len() {
        return Err(Error::LengthMismatch {
            truth: truth.len(),
            estimates: estimates.len(),
        });
    }
    let records = truth
        .iter()
        .zip(estimates)
        .enumerate()
        .map(|(step, (t, e))| Ok(GospaRecord { step, value: gospa(t, e, params)? }))
        .collect::<Result<Vec<_>>>()?;
    let mean = if records.is_empty() {
        0.0
    } else {
        records.iter().map(|r| r.value.total).sum::<f64>() / records.len() as f64
    };
    Ok(GospaSeries { records, mean })
}

/// Mean of several series' totals pooled over all their steps.
pub fn pooled_mean(series: &[GospaSeries]) -> f64 {
    let (sum, count) = series.iter().fold((0.0, 0usize), |(s, n), g| {
        (s + g.records.iter().map(|r| r.value.total).sum::<f64>(), n + g.records.len())
    });
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchored_values() {
        let p = GospaParams::default();
        assert_eq!(gospa(&[], &[], &p).unwrap(), Gospa::default());
        let one_missed = gospa(&[[1000.0, 50.0]], &[], &p).unwrap();
        assert_eq!(one_missed.total, 100.0);
        assert_eq!(one_missed.missed, 100.0);
        let pair = gospa(&[[1000.0, 50.0]], &[[1050.0, 50.0]], &p).unwrap();
        assert_eq!(
            pair,
            Gospa {
                total: 50.0,
                localization: 50.0,
                missed: 0.0,
                false_alarms: 0.0
            }
        );
    }

    #[test]
    fn far_false_estimate_adds_half_cutoff() {
        let p = GospaParams::default();
        let truth = [[100.0, 10.0], [900.0, 70.0]];
        let est = vec![[110.0, 12.0], [880.0, 71.0]];
        let base = gospa(&truth, &est, &p).unwrap();
        let mut more = est.clone();
        more.push([4000.0, 150.0]);
        let with = gospa(&truth, &more, &p).unwrap();
        assert_eq!(with.total - base.total, 100.0);
        assert_eq!(with.false_alarms, 100.0);
    }

    #[test]
    fn truncated_pair_splits_into_missed_and_false() {
        let p = GospaParams::default();
        let g = gospa(&[[0.0, 0.0]], &[[500.0, 0.0]], &p).unwrap();
        assert_eq!((g.total, g.missed, g.false_alarms, g.localization), (200.0, 100.0, 100.0, 0.0));
    }

    #[test]
    fn higher_order_total_is_root_of_power_sum() {
        let p = GospaParams::new(200.0, 2.0, 2.0).unwrap();
        let g = gospa(&[[0.0, 0.0], [10.0, 0.0]], &[[3.0, 4.0]], &p).unwrap();
        assert_eq!(g.localization, 25.0);
        assert!((g.total - (25.0f64 + 20000.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn series_and_errors() {
        let p = GospaParams::default();
        let t = vec![vec![[0.0, 0.0]]; 4];
        let e = vec![vec![[30.0, 40.0]]; 4];
        let s = gospa_series(&t, &e, &p).unwrap();
        assert!(s.records.iter().all(|r| r.value.total == 50.0));
        assert_eq!(s.mean, 50.0);
        assert_eq!(
            gospa_series(&t, &e[..3], &p),
            Err(Error::LengthMismatch { truth: 4, estimates: 3 })
        );
        assert!(gospa(&[[f64::NAN, 0.0]], &[], &p).is_err());
        assert!(GospaParams::new(0.0, 1.0, 2.0).is_err());
        assert!(GospaParams::new(200.0, 0.5, 2.0).is_err());
        assert!(GospaParams::new(200.0, 1.0, 2.5).is_err());
        assert_eq!(pooled_mean(&[s.clone(), s]), 50.0);
    }
}
