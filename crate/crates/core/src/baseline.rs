//! Detect-then-track reference: matching-pursuit point measurements fed to
//! a particle-based Bernoulli multiobject tracker with probabilistic data
//! association by loopy sum-product message passing.
//!
//! Per step and legacy PO `i` with existence `w_i` and measurement `m`:
//!
//! ```text
//! β_i(0) = 1 - w_i P_d
//! β_i(m) = w_i P_d ℓ_i(m),      ℓ_i(m) = Σ_p ω_p N(z_m; H x_p, Σ)
//! ξ_m    = μ_c f_c(z_m) + μ_n(z_m)
//! ```
//!
//! where `μ_n(z) = μ_B ∫ f_B(x) N(z; Hx, Σ) dx` is the new-object
//! intensity. The association messages are kept unnormalized,
//!
//! ```text
//! φ_im = β_i(m) / (β_i(0) + Σ_{m' != m} β_i(m') ν_m'i)
//! ν_mi = 1 / (ξ_m + Σ_{i' != i} φ_i'm),
//! ```
//!
//! so a vanishing clutter rate needs no special casing.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::mp::{matching_pursuit, Dictionary};
use crate::resample::{log_sum_exp, systematic_resample};
use crate::scenario::MeasurementFrame;
use crate::state::KinematicState;
use crate::track::{weighted_mean_state, Estimate, TrackModel};

/// Point measurement extracted from one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMeasurement {
    pub range: f64,
    pub depth: f64,
    pub score: f64,
}

/// Grid matching pursuit with `k` iterations; cells scoring at or below
/// `threshold` are dropped.
pub fn detect(frame: &MeasurementFrame, dict: &Dictionary, k: usize, threshold: f64) -> Result<Vec<PointMeasurement>> {
    Ok(matching_pursuit(frame, dict, k)?
        .into_iter()
        .filter(|d| d.score > threshold)
        .map(|d| PointMeasurement {
            range: d.range,
            depth: d.depth,
            score: d.score,
        })
        .collect())
}

/// Score threshold such that, over the given noise-only frames, on average
/// `clutter_mean` of the `k` pursuit scores per frame lie strictly above it.
pub fn calibrate_threshold(noise_frames: &[MeasurementFrame], dict: &Dictionary, k: usize, clutter_mean: f64) -> Result<f64> {
    if noise_frames.is_empty() {
        return Err(invalid("noise_frames", "need at least one frame"));
    }
    if !(clutter_mean >= 0.0) || clutter_mean > k as f64 {
        return Err(invalid("clutter_mean", "must lie in [0, k]"));
    }
    let mut scores = Vec::with_capacity(noise_frames.len() * k);
    for f in noise_frames {
        scores.extend(matching_pursuit(f, dict, k)?.into_iter().map(|d| d.score));
    }
    scores.sort_by(|a, b| b.total_cmp(a));
    let keep = libm::round(clutter_mean * noise_frames.len() as f64) as usize;
    Ok(if keep >= scores.len() {
        0.0
    } else {
        scores[keep]
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub track: TrackModel,
    pub detection_probability: f64,
    /// Mean number of clutter measurements per step, uniform over the ROI.
    pub clutter_mean: f64,
    /// Measurement noise standard deviations `(range, depth)`.
    pub noise_std: (f64, f64),
    pub particles: usize,
    pub max_iterations: usize,
    /// Association iterations stop once no message changes by more than
    /// this (relative).
    pub tolerance: f64,
    /// Pursuit iterations per frame and score threshold.
    pub detections: usize,
    pub score_threshold: f64,
    pub seed: u64,
}

impl BaselineConfig {
    /// `P_d = 0.9`, two clutter measurements per step, noise at half the
    /// birth-grid resolution, threshold 0 (set it with
    /// [`calibrate_threshold`]).
    pub fn new(track: TrackModel, seed: u64) -> Self {
        let (dr, dz) = track.birth.grid.resolution();
        Self {
            track,
            detection_probability: 0.9,
            clutter_mean: 2.0,
            noise_std: (dr / 2.0, dz / 2.0),
            particles: 1000,
            max_iterations: 100,
            tolerance: 1e-10,
            detections: 10,
            score_threshold: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.track.validate()?;
        if !(self.detection_probability > 0.0 && self.detection_probability <= 1.0) {
            return Err(invalid("detection_probability", "must lie in (0, 1]"));
        }
        if !(self.clutter_mean >= 0.0) || !self.clutter_mean.is_finite() {
            return Err(invalid("clutter_mean", "must be finite and >= 0"));
        }
        if !(self.noise_std.0 > 0.0 && self.noise_std.1 > 0.0) {
            return Err(invalid("noise_std", "must be positive"));
        }
        if self.particles == 0 || self.max_iterations == 0 || self.detections == 0 {
            return Err(invalid("particles", "counts must be positive"));
        }
        if !(self.tolerance >= 0.0) || !self.score_threshold.is_finite() {
            return Err(invalid("tolerance", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Converged association beliefs.
#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    /// Per legacy PO: `[P(a_i = 0), P(a_i = 1), ..., P(a_i = M)]`.
    pub legacy: Vec<Vec<f64>>,
    /// Per measurement: probability of not originating from any legacy PO.
    pub unassociated: Vec<f64>,
    /// `ν_mi`, measurement-major.
    pub messages: Vec<f64>,
    /// Sweeps that changed some message by more than the tolerance.
    pub iterations: usize,
}

/// Runs the association message passing. `beta[i]` holds `[β_i(0),
/// β_i(1), ..., β_i(M)]`; `xi[m] > 0`. After every iteration `observer`
/// sees the PO-side beliefs (per PO over `0..=M`) and the
/// measurement-side beliefs (per measurement: not from a legacy PO, then
/// from PO `0..N`).
pub fn associate_traced<F: FnMut(&[Vec<f64>], &[Vec<f64>])>(
    beta: &[Vec<f64>],
    xi: &[f64],
    max_iterations: usize,
    tolerance: f64,
    mut observer: F,
) -> Result<Association> {
    let n = beta.len();
    let m = xi.len();
    if beta.iter().any(|b| b.len() != m + 1) {
        return Err(Error::DimensionMismatch("association weights".into()));
    }
    if xi.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(invalid("xi", "measurement weights must be positive and finite"));
    }
    if beta.iter().flatten().any(|b| !(*b >= 0.0) || !b.is_finite()) {
        return Err(invalid("beta", "association weights must be finite and >= 0"));
    }
    // nu[m * n + i]
    let mut nu: Vec<f64> = (0..m * n).map(|k| 1.0 / xi[k / n.max(1)]).collect();
    let mut phi = vec![0.0; n * m];
    let mut iterations = 0;
    let beliefs = |nu: &[f64]| -> Vec<Vec<f64>> {
        beta.iter()
            .enumerate()
            .map(|(i, b)| {
                let mut row: Vec<f64> = (0..=m)
                    .map(|k| if k == 0 { b[0] } else { b[k] * nu[(k - 1) * n + i] })
                    .collect();
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= s);
                row
            })
            .collect()
    };
    if n > 0 && m > 0 {
        for _ in 0..max_iterations {
            iterations += 1;
            // leave-one-out sums are formed explicitly: subtracting a
            // dominant term from a total would cancel the small ones
            for i in 0..n {
                let b = &beta[i];
                for k in 0..m {
                    let denom = b[0]
                        + (0..m)
                            .filter(|&k2| k2 != k)
                            .map(|k2| b[k2 + 1] * nu[k2 * n + i])
                            .sum::<f64>();
                    phi[i * m + k] = if denom > 0.0 { b[k + 1] / denom } else { 0.0 };
                }
            }
            let mut change = 0.0f64;
            for k in 0..m {
                for i in 0..n {
                    let others: f64 = (0..n).filter(|&i2| i2 != i).map(|i2| phi[i2 * m + k]).sum();
                    let new = 1.0 / (xi[k] + others);
                    let old = nu[k * n + i];
                    change = change.max((new - old).abs() / new.max(old));
                    nu[k * n + i] = new;
                }
            }
            let by_measurement: Vec<Vec<f64>> = (0..m)
                .map(|k| {
                    let total: f64 = xi[k] + (0..n).map(|i| phi[i * m + k]).sum::<f64>();
                    core::iter::once(xi[k])
                        .chain((0..n).map(|i| phi[i * m + k]))
                        .map(|v| v / total)
                        .collect()
                })
                .collect();
            observer(&beliefs(&nu), &by_measurement);
            if change <= tolerance {
                // the confirming sweep changed nothing
                iterations -= 1;
                break;
            }
        }
    }
    let unassociated = (0..m)
        .map(|k| {
            let total: f64 = xi[k] + (0..n).map(|i| phi[i * m + k]).sum::<f64>();
            xi[k] / total
        })
        .collect();
    Ok(Association {
        legacy: beliefs(&nu),
        unassociated,
        messages: nu,
        iterations,
    })
}

pub fn associate(beta: &[Vec<f64>], xi: &[f64], max_iterations: usize, tolerance: f64) -> Result<Association> {
    associate_traced(beta, xi, max_iterations, tolerance, |_, _| {})
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselinePo {
    pub label: u64,
    pub states: Vec<KinematicState>,
    pub weights: Vec<f64>,
    pub existence: f64,
    /// Born this step; exempt from pruning until its first update.
    pub newborn: bool,
}

impl BaselinePo {
    pub fn mmse_state(&self) -> KinematicState {
        weighted_mean_state(&self.states, &self.weights)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BaselineDiagnostics {
    pub step: usize,
    pub measurements: usize,
    pub born: usize,
    pub pruned: usize,
    pub po_count: usize,
    pub iterations: usize,
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

#[derive(Debug, Clone)]
pub struct BaselineTracker {
    config: BaselineConfig,
    pos: Vec<BaselinePo>,
    step: usize,
    next_label: u64,
    rng_predict: ChaCha8Rng,
    rng_birth: ChaCha8Rng,
    rng_resample: ChaCha8Rng,
    diagnostics: BaselineDiagnostics,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl BaselineTracker {
    pub fn new(config: BaselineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            pos: Vec::new(),
            step: 0,
            next_label: 0,
            rng_predict: stream(config.seed, 1),
            rng_birth: stream(config.seed, 2),
            rng_resample: stream(config.seed, 3),
            diagnostics: BaselineDiagnostics::default(),
        })
    }

    pub fn config(&self) -> &BaselineConfig {
        &self.config
    }

    pub fn pos(&self) -> &[BaselinePo] {
        &self.pos
    }

    pub fn diagnostics(&self) -> &BaselineDiagnostics {
        &self.diagnostics
    }

    /// Adds a legacy PO with uniform weights and returns its label.
    pub fn insert(&mut self, states: Vec<KinematicState>, existence: f64) -> Result<u64> {
        if states.is_empty() || !(0.0..=1.0).contains(&existence) {
            return Err(invalid("po", "need particles and an existence in [0, 1]"));
        }
        let label = self.next_label;
        self.next_label += 1;
        let n = states.len();
        self.pos.push(BaselinePo {
            label,
            states,
            weights: vec![1.0 / n as f64; n],
            existence,
            newborn: false,
        });
        Ok(label)
    }

    fn log_density(&self, z: &PointMeasurement, x: &KinematicState) -> f64 {
        let (sr, sz) = self.config.noise_std;
        let er = (z.range - x.range) / sr;
        let ez = (z.depth - x.depth) / sz;
        -0.5 * (er * er + ez * ez) - libm::log(core::f64::consts::TAU * sr * sz)
    }

    /// New-object intensity `μ_n(z)` for a uniform birth density.
    fn birth_intensity(&self, z: &PointMeasurement) -> f64 {
        let roi = self.config.track.birth.grid.roi();
        let (sr, sz) = self.config.noise_std;
        let mass_r = normal_cdf((roi.range.1 - z.range) / sr) - normal_cdf((roi.range.0 - z.range) / sr);
        let mass_z = normal_cdf((roi.depth.1 - z.depth) / sz) - normal_cdf((roi.depth.0 - z.depth) / sz);
        self.config.track.birth.mean_births / roi.area() * mass_r * mass_z
    }

    fn clutter_intensity(&self) -> f64 {
        self.config.clutter_mean / self.config.track.birth.grid.roi().area()
    }

    pub fn predict(&mut self) {
        let motion = self.config.track.motion;
        for po in &mut self.pos {
            for x in po.states.iter_mut() {
                *x = motion.predict(x, &mut self.rng_predict);
            }
            po.existence = self.config.track.predict_existence(po.existence);
        }
    }

    /// Association, legacy update and one new PO per measurement.
    pub fn update(&mut self, measurements: &[PointMeasurement]) -> Result<()> {
        let pd = self.config.detection_probability;
        let m = measurements.len();
        // per-PO, per-measurement log N(z_m; H x_p, Σ) for valid particles
        let log_lik: Vec<Vec<f64>> = self
            .pos
            .iter()
            .map(|po| {
                let mut out = vec![f64::NEG_INFINITY; po.states.len() * m];
                for (p, x) in po.states.iter().enumerate() {
                    if !self.config.track.in_roi(x) || po.weights[p] == 0.0 {
                        continue;
                    }
                    for (k, z) in measurements.iter().enumerate() {
                        out[p * m + k] = self.log_density(z, x);
                    }
                }
                out
            })
            .collect();
        let beta: Vec<Vec<f64>> = self
            .pos
            .iter()
            .zip(&log_lik)
            .map(|(po, ll)| {
                let mut row = Vec::with_capacity(m + 1);
                row.push(1.0 - po.existence * pd);
                for k in 0..m {
                    let terms: Vec<f64> = po
                        .weights
                        .iter()
                        .enumerate()
                        .map(|(p, w)| libm::log(*w) + ll[p * m + k])
                        .collect();
                    row.push(po.existence * pd * libm::exp(log_sum_exp(&terms)));
                }
                row
            })
            .collect();
        let clutter = self.clutter_intensity();
        let births: Vec<f64> = measurements.iter().map(|z| self.birth_intensity(z)).collect();
        let xi: Vec<f64> = births.iter().map(|b| clutter + b).collect();
        let assoc = associate(&beta, &xi, self.config.max_iterations, self.config.tolerance)?;
        let n = self.pos.len();

        for (i, po) in self.pos.iter_mut().enumerate() {
            let nu: Vec<f64> = (0..m).map(|k| assoc.messages[k * n + i]).collect();
            let detected: f64 = (0..m).map(|k| beta[i][k + 1] * nu[k]).sum();
            let present = po.existence * (1.0 - pd) + detected;
            let total = beta[i][0] + detected;
            po.existence = if total > 0.0 {
                (present / total).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let ll = &log_lik[i];
            let log_w: Vec<f64> = po
                .weights
                .iter()
                .enumerate()
                .map(|(p, w)| {
                    let mut f = 1.0 - pd;
                    for (k, nuk) in nu.iter().enumerate() {
                        f += pd * libm::exp(ll[p * m + k]) * nuk;
                    }
                    if !self.config.track.in_roi(&po.states[p]) {
                        f = 0.0;
                    }
                    libm::log(*w) + libm::log(f)
                })
                .collect();
            let norm = log_sum_exp(&log_w);
            if norm.is_finite() {
                for (w, lw) in po.weights.iter_mut().zip(&log_w) {
                    *w = libm::exp(lw - norm);
                }
            } else {
                po.existence = 0.0;
                let u = 1.0 / po.weights.len() as f64;
                po.weights.iter_mut().for_each(|w| *w = u);
            }
            po.newborn = false;
        }

        // new POs
        let roi = *self.config.track.birth.grid.roi();
        let (sr, sz) = self.config.noise_std;
        let np = self.config.particles;
        for (k, z) in measurements.iter().enumerate() {
            let free = assoc.unassociated[k];
            let existence = free * births[k] / xi[k];
            let mut states = Vec::with_capacity(np);
            let mut weights = Vec::with_capacity(np);
            for _ in 0..np {
                let er: f64 = StandardNormal.sample(&mut self.rng_birth);
                let ez: f64 = StandardNormal.sample(&mut self.rng_birth);
                let x = KinematicState::new(
                    z.range + sr * er,
                    z.depth + sz * ez,
                    self.rng_birth.random_range(roi.range_rate.0..roi.range_rate.1),
                    self.rng_birth.random_range(roi.depth_rate.0..roi.depth_rate.1),
                );
                weights.push(if roi.contains_position(x.range, x.depth) { 1.0 } else { 0.0 });
                states.push(x);
            }
            let s: f64 = weights.iter().sum();
            if !(s > 0.0) {
                continue;
            }
            weights.iter_mut().for_each(|w| *w /= s);
            let label = self.next_label;
            self.next_label += 1;
            self.pos.push(BaselinePo {
                label,
                states,
                weights,
                existence,
                newborn: true,
            });
        }
        self.diagnostics.measurements = m;
        self.diagnostics.born = m;
        self.diagnostics.iterations = assoc.iterations;
        self.resample();
        Ok(())
    }

    fn resample(&mut self) {
        for po in &mut self.pos {
            let n = po.states.len();
            let idx = systematic_resample(&po.weights, n, &mut self.rng_resample);
            po.states = idx.iter().map(|&i| po.states[i]).collect();
            po.weights = vec![1.0 / n as f64; n];
        }
    }

    /// Estimates for all kept POs; newborns are kept regardless of their
    /// existence until their first update.
    pub fn declare_and_prune(&mut self) -> Vec<Estimate> {
        let before = self.pos.len();
        let track = self.config.track;
        self.pos.retain(|po| po.newborn || !track.is_pruned(po.existence));
        self.diagnostics.pruned = before - self.pos.len();
        self.diagnostics.po_count = self.pos.len();
        self.pos
            .iter()
            .map(|po| Estimate {
                label: po.label,
                declared: track.is_declared(po.existence),
                state: po.mmse_state(),
                powers: Vec::new(),
                existence: po.existence,
            })
            .collect()
    }

    pub fn track_step(&mut self, measurements: &[PointMeasurement]) -> Result<Vec<Estimate>> {
        if measurements
            .iter()
            .any(|z| !self.config.track.birth.grid.roi().contains_position(z.range, z.depth))
        {
            return Err(Error::Domain("measurement outside the ROI".into()));
        }
        self.diagnostics = BaselineDiagnostics {
            step: self.step,
            ..BaselineDiagnostics::default()
        };
        self.predict();
        self.update(measurements)?;
        let est = self.declare_and_prune();
        self.step += 1;
        Ok(est)
    }

    /// Detection followed by [`BaselineTracker::track_step`]; also returns
    /// the measurements.
    pub fn step(&mut self, frame: &MeasurementFrame, dict: &Dictionary) -> Result<(Vec<PointMeasurement>, Vec<Estimate>)> {
        let z = detect(frame, dict, self.config.detections, self.config.score_threshold)?;
        let est = self.track_step(&z)?;
        Ok((z, est))
    }
}
