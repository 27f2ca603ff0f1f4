//! Pieces shared by the direct and the baseline tracker: motion, survival,
//! birth, thresholds and the estimate record.

use alloc::vec::Vec;

use crate::dynamics::{transition_existence, BirthGrid, BirthModel, MotionModel, Roi};
use crate::error::{invalid, Result};
use crate::state::KinematicState;

/// Declaration threshold, pruning threshold and survival probability
/// together with the motion and birth models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackModel {
    pub motion: MotionModel,
    pub birth: BirthModel,
    pub survival: f64,
    pub declare_threshold: f64,
    pub prune_threshold: f64,
}

/// Range, depth, range-rate and depth-rate bounds of the default ROI.
pub const DEFAULT_ROI: [(f64, f64); 4] = [(0.0, 5000.0), (0.0, 200.0), (-4.0, 4.0), (-1.0, 1.0)];
/// Birth grid of the default ROI: 25 m x 2 m cells.
pub const DEFAULT_GRID: (usize, usize) = (200, 100);

impl TrackModel {
    /// Default models: random-acceleration variances `(1e-2, 1e-5)`, 1e-4
    /// expected births per step on the default grid, powers up to 1,
    /// survival 0.95, declaration at 0.5 and pruning below 1e-2.
    pub fn standard(step_duration: f64) -> Result<Self> {
        let [r, z, vr, vz] = DEFAULT_ROI;
        let grid = BirthGrid::new(Roi::new(r, z, vr, vz)?, DEFAULT_GRID.0, DEFAULT_GRID.1)?;
        let model = Self {
            motion: MotionModel::new(step_duration, [1e-2, 1e-5])?,
            birth: BirthModel::new(1e-4, grid, 1.0)?,
            survival: 0.95,
            declare_threshold: 0.5,
            prune_threshold: 1e-2,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.survival) {
            return Err(invalid("survival", "must lie in [0, 1]"));
        }
        for (name, t) in [
            ("declare_threshold", self.declare_threshold),
            ("prune_threshold", self.prune_threshold),
        ] {
            if !(t > 0.0 && t < 1.0) {
                return Err(invalid(name, "must lie in (0, 1)"));
            }
        }
        Ok(())
    }

    pub fn predict_existence(&self, existence: f64) -> f64 {
        transition_existence(existence, self.survival)
    }

    /// Strictly above the threshold.
    pub fn is_declared(&self, existence: f64) -> bool {
        existence > self.declare_threshold
    }

    pub fn is_pruned(&self, existence: f64) -> bool {
        existence < self.prune_threshold
    }

    /// True if the position lies inside the ROI position box.
    pub fn in_roi(&self, state: &KinematicState) -> bool {
        self.birth.grid.roi().contains_position(state.range, state.depth)
    }
}

/// Per-step output record of a PO, identical for both trackers.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub label: u64,
    pub declared: bool,
    pub state: KinematicState,
    /// MMSE per-tone powers; empty for trackers without a power state.
    pub powers: Vec<f64>,
    pub existence: f64,
}

/// Weighted mean of particle states. `weights` must be normalized.
pub fn weighted_mean_state(states: &[KinematicState], weights: &[f64]) -> KinematicState {
    let mut acc = [0.0; 4];
    for (s, w) in states.iter().zip(weights) {
        for (a, v) in acc.iter_mut().zip(s.to_array()) {
            *a += w * v;
        }
    }
    KinematicState::from_array(acc)
}

/// `posterior = w L / (w L + 1 - w)` with the likelihood ratio given in the
/// log domain.
pub fn existence_posterior(prior: f64, log_ratio: f64) -> f64 {
    if prior <= 0.0 || log_ratio == f64::NEG_INFINITY {
        return 0.0;
    }
    if prior >= 1.0 {
        return 1.0;
    }
    let logit = libm::log(prior) - libm::log1p(-prior) + log_ratio;
    if logit >= 0.0 {
        1.0 / (1.0 + libm::exp(-logit))
    } else {
        let e = libm::exp(logit);
        e / (1.0 + e)
    }
}
