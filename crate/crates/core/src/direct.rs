//! Direct tracker: particle-based sum-product inference on raw snapshots.
//!
//! Each time step runs predict, birth, update and declare/prune. The update
//! iterates a fixed number of rounds. In every round and for every tone, PO
//! `n` is scored against an interference covariance built from all other
//! POs at their current expected existence, MMSE power and MMSE position,
//!
//! ```text
//! C_-n = Σ_{n' != n} w_n' γ̄_n' ā_n' ā_n'^H + η̄ I,
//! ```
//!
//! while its own `r_n in {0, 1}` is kept as two exact hypotheses: the
//! particle log-likelihood ratio is the rank-one delta of adding
//! `γ_p a(x_p) a(x_p)^H` to `C_-n`. The noise variances are reweighted
//! against the full plug-in covariance. Weights live in the log domain
//! until the end of the last round, after which every PO and the noise
//! particles are resampled systematically.

use alloc::collections::BTreeSet;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{GammaChain, GammaParameterization};
use crate::error::{invalid, Error, Result};
use crate::likelihood::{log_likelihood, project, CovarianceModel, SufficientStats};
use crate::linalg::CMatrix;
use crate::mp::{matching_pursuit, Dictionary};
use crate::resample::{effective_sample_size, log_sum_exp, systematic_resample};
use crate::scenario::MeasurementFrame;
use crate::state::KinematicState;
use crate::steering::SteeringField;
use crate::track::{existence_posterior, weighted_mean_state, Estimate, TrackModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectConfig {
    pub track: TrackModel,
    /// Joint (kinematic, powers) particles per PO.
    pub particles: usize,
    /// Noise-variance particles per tone.
    pub noise_particles: usize,
    pub bp_iterations: usize,
    pub power_chain: GammaChain,
    pub noise_chain: GammaChain,
    /// Upper end of the uniform initial noise-variance prior.
    pub noise_prior_max: f64,
    /// Grid cells proposed by matching pursuit for new POs each step.
    pub birth_seeds: usize,
    /// Resample only when ESS < threshold * N; `None` resamples every step.
    pub ess_threshold: Option<f64>,
    pub interference: Interference,
    pub seed: u64,
}

impl DirectConfig {
    pub fn new(track: TrackModel, seed: u64) -> Self {
        Self {
            track,
            particles: 1000,
            noise_particles: 200,
            bp_iterations: 3,
            power_chain: GammaChain::new(1e4, GammaParameterization::ShapeIsSpread)
                .expect("valid default chain"),
            noise_chain: GammaChain::new(1e2, GammaParameterization::ShapeIsSpread)
                .expect("valid default chain"),
            noise_prior_max: 2e-4,
            birth_seeds: 10,
            ess_threshold: None,
            interference: Interference::MomentMatched,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.track.validate()?;
        if self.particles == 0 {
            return Err(invalid("particles", "need at least one particle per PO"));
        }
        if self.noise_particles == 0 {
            return Err(invalid("noise_particles", "need at least one noise particle"));
        }
        if self.bp_iterations == 0 {
            return Err(invalid("bp_iterations", "need at least one round"));
        }
        if !(self.noise_prior_max > 0.0) || !self.noise_prior_max.is_finite() {
            return Err(invalid("noise_prior_max", "must be positive and finite"));
        }
        if self.birth_seeds == 0 {
            return Err(invalid("birth_seeds", "need at least one seed cell"));
        }
        if let Some(t) = self.ess_threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(invalid("ess_threshold", "must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Weighted particle belief of one potential object.
#[derive(Debug, Clone, PartialEq)]
pub struct PoBelief {
    pub label: u64,
    pub states: Vec<KinematicState>,
    /// `particles x tones`, particle-major.
    pub powers: Vec<f64>,
    /// Normalized particle weights.
    pub weights: Vec<f64>,
    pub existence: f64,
    /// Set while the PO has not yet been through a measurement update.
    /// Its velocities are then still distributed as the birth prior.
    pub newborn: bool,
}

impl PoBelief {
    /// Belief with uniform weights.
    pub fn new(label: u64, states: Vec<KinematicState>, powers: Vec<f64>, existence: f64) -> Result<Self> {
        let n = states.len();
        if n == 0 || powers.len() % n != 0 {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} powers for {n} particles",
                powers.len()
            )));
        }
        if !(0.0..=1.0).contains(&existence) {
            return Err(invalid("existence", "must lie in [0, 1]"));
        }
        Ok(Self {
            label,
            states,
            powers,
            weights: vec![1.0 / n as f64; n],
            existence,
            newborn: false,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn num_tones(&self) -> usize {
        self.powers.len() / self.states.len()
    }

    pub fn particle_powers(&self, p: usize) -> &[f64] {
        let t = self.num_tones();
        &self.powers[p * t..(p + 1) * t]
    }

    pub fn mmse_state(&self) -> KinematicState {
        weighted_mean_state(&self.states, &self.weights)
    }

    pub fn mmse_powers(&self) -> Vec<f64> {
        mean_powers(&self.powers, &self.weights, self.num_tones())
    }
}

fn mean_powers(powers: &[f64], weights: &[f64], tones: usize) -> Vec<f64> {
    let mut out = vec![0.0; tones];
    for (row, w) in powers.chunks_exact(tones).zip(weights) {
        for (o, g) in out.iter_mut().zip(row) {
            *o += w * g;
        }
    }
    out
}

/// Weighted noise-variance particles, one set per tone.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBelief {
    pub samples: Vec<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
}

impl NoiseBelief {
    pub fn mean(&self, tone: usize) -> f64 {
        self.samples[tone]
            .iter()
            .zip(&self.weights[tone])
            .map(|(s, w)| s * w)
            .sum()
    }
}

/// Counters of the most recent step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepDiagnostics {
    pub step: usize,
    pub born: usize,
    pub pruned: usize,
    pub po_count: usize,
    /// PO whose weights had to be reset to uniform (no particle had
    /// positive likelihood).
    pub weight_resets: Vec<u64>,
    /// `(label, ln Λ)` of the last update round.
    pub log_bayes_factors: Vec<(u64, f64)>,
    pub noise_mean: Vec<f64>,
}

#[cfg(feature = "parallel")]
fn map_indices<F>(n: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    use rayon::prelude::*;
    let mut out = Vec::with_capacity(n);
    (0..n).into_par_iter().map(f).collect_into_vec(&mut out);
    out
}

#[cfg(not(feature = "parallel"))]
fn map_indices<F>(n: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64,
{
    (0..n).map(f).collect()
}

/// Steering vectors of every particle of one PO for one step.
struct SteeringCache {
    tones: usize,
    elements: usize,
    /// `particles x tones x M`.
    vectors: Vec<Complex64>,
    valid: Vec<bool>,
}

impl SteeringCache {
    fn build(field: &SteeringField, track: &TrackModel, belief: &PoBelief) -> Self {
        let tones = field.num_tones();
        let elements = field.num_elements();
        let mut vectors = vec![Complex64::new(0.0, 0.0); belief.len() * tones * elements];
        let mut valid = vec![true; belief.len()];
        for (p, (x, ok)) in belief.states.iter().zip(valid.iter_mut()).enumerate() {
            if !track.in_roi(x) {
                *ok = false;
                continue;
            }
            let base = p * tones * elements;
            for tone in 0..tones {
                let out = &mut vectors[base + tone * elements..base + (tone + 1) * elements];
                if field.steering_into(x.range, x.depth, tone, out).is_err() {
                    *ok = false;
                    break;
                }
            }
        }
        Self {
            tones,
            elements,
            vectors,
            valid,
        }
    }

    #[inline]
    fn vector(&self, particle: usize, tone: usize) -> &[Complex64] {
        let start = (particle * self.tones + tone) * self.elements;
        &self.vectors[start..start + self.elements]
    }
}

/// How a PO enters the interference covariance of the others.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interference {
    /// `γ̄ ā ā^H` with the MMSE powers and the steering at the MMSE position.
    MmsePlugIn,
    /// Particle average `Σ_p ω_p γ_p a_p a_p^H`, i.e. the expected signal
    /// covariance of the PO given that it exists. Unlike the rank-one
    /// plug-in it also covers the position uncertainty of the PO, so a
    /// slightly misplaced track does not leak its source into the others.
    #[default]
    MomentMatched,
}

/// Signal covariance of one PO given existence, per tone.
fn signal_covariance(
    kind: Interference,
    field: &SteeringField,
    belief: &PoBelief,
    weights: &[f64],
    cache: &SteeringCache,
) -> Vec<Option<CMatrix>> {
    let tones = field.num_tones();
    let m = field.num_elements();
    match kind {
        Interference::MmsePlugIn => {
            let mean = weighted_mean_state(&belief.states, weights);
            let powers = mean_powers(&belief.powers, weights, tones);
            let mut a = vec![Complex64::new(0.0, 0.0); m];
            (0..tones)
                .map(|tone| {
                    field.steering_into(mean.range, mean.depth, tone, &mut a).ok()?;
                    let mut c = CMatrix::zeros(m);
                    c.add_outer(&a, powers[tone]);
                    Some(c)
                })
                .collect()
        }
        Interference::MomentMatched => {
            let mass: f64 = weights
                .iter()
                .zip(&cache.valid)
                .filter(|(_, ok)| **ok)
                .map(|(w, _)| w)
                .sum();
            let cutoff = weights.iter().fold(0.0f64, |a, w| a.max(*w)) * 1e-17;
            (0..tones)
                .map(|tone| {
                    if !(mass > 0.0) {
                        return None;
                    }
                    let mut c = CMatrix::zeros(m);
                    for (p, w) in weights.iter().enumerate() {
                        let g = belief.particle_powers(p)[tone];
                        // terms this small vanish below the rounding of the sum
                        if cache.valid[p] && *w > cutoff && g > 0.0 {
                            c.add_outer_lower(cache.vector(p, tone), w * g / mass);
                        }
                    }
                    c.mirror_lower();
                    Some(c)
                })
                .collect()
        }
    }
}

/// Result of [`bernoulli_update`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliPosterior {
    pub existence: f64,
    /// `ln Λ = ln Σ_p ω_p L_p / L_absent`.
    pub log_bayes_factor: f64,
    /// No particle had positive likelihood; weights were reset to uniform.
    pub reset: bool,
}

/// Measurement update of one Bernoulli particle belief.
///
/// `log_weights` are the prior log weights, `log_present` the per-particle
/// log-likelihoods given existence and `log_absent` the log-likelihood
/// given absence. Posterior weights are written to `weights`.
pub fn bernoulli_update(
    prior_existence: f64,
    log_weights: &[f64],
    log_present: &[f64],
    log_absent: f64,
    weights: &mut [f64],
) -> BernoulliPosterior {
    debug_assert_eq!(log_weights.len(), log_present.len());
    debug_assert_eq!(weights.len(), log_present.len());
    for (w, (lw, lp)) in weights.iter_mut().zip(log_weights.iter().zip(log_present)) {
        // stash the joint log terms; normalized below
        *w = lw + (lp - log_absent);
    }
    let log_lambda = log_sum_exp(weights);
    let reset = !log_lambda.is_finite();
    if reset {
        let u = 1.0 / weights.len() as f64;
        weights.iter_mut().for_each(|w| *w = u);
    } else {
        weights.iter_mut().for_each(|w| *w = libm::exp(*w - log_lambda));
    }
    BernoulliPosterior {
        existence: existence_posterior(prior_existence, log_lambda),
        log_bayes_factor: log_lambda,
        reset,
    }
}

/// Sequential direct tracker (single writer).
#[derive(Debug, Clone)]
pub struct DirectTracker {
    config: DirectConfig,
    field: SteeringField,
    dictionary: Arc<Dictionary>,
    beliefs: Vec<PoBelief>,
    noise: NoiseBelief,
    step: usize,
    next_label: u64,
    rng_predict: ChaCha8Rng,
    rng_birth: ChaCha8Rng,
    rng_resample: ChaCha8Rng,
    diagnostics: StepDiagnostics,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl DirectTracker {
    /// Empty PO list; noise variances drawn uniformly from
    /// `(0, noise_prior_max]` per tone.
    pub fn new(config: DirectConfig, field: SteeringField, dictionary: Arc<Dictionary>) -> Result<Self> {
        config.validate()?;
        if dictionary.num_tones() != field.num_tones() || dictionary.num_elements() != field.num_elements() {
            return Err(Error::DimensionMismatch(
                "dictionary does not match the steering field".into(),
            ));
        }
        if dictionary.grid() != &config.track.birth.grid {
            return Err(invalid("dictionary", "dictionary grid must equal the birth grid"));
        }
        let mut rng_init = stream(config.seed, 0);
        let tones = field.num_tones();
        let n = config.noise_particles;
        let samples = (0..tones)
            .map(|_| {
                (0..n)
                    .map(|_| config.noise_prior_max * (1.0 - rng_init.random::<f64>()))
                    .collect()
            })
            .collect();
        Ok(Self {
            config,
            field,
            dictionary,
            beliefs: Vec::new(),
            noise: NoiseBelief {
                samples,
                weights: vec![vec![1.0 / n as f64; n]; tones],
            },
            step: 0,
            next_label: 0,
            rng_predict: stream(config.seed, 1),
            rng_birth: stream(config.seed, 2),
            rng_resample: stream(config.seed, 3),
            diagnostics: StepDiagnostics::default(),
        })
    }

    pub fn config(&self) -> &DirectConfig {
        &self.config
    }

    pub fn beliefs(&self) -> &[PoBelief] {
        &self.beliefs
    }

    pub fn noise(&self) -> &NoiseBelief {
        &self.noise
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn diagnostics(&self) -> &StepDiagnostics {
        &self.diagnostics
    }

    /// Adds a PO (e.g. prior knowledge) and returns its label.
    pub fn insert_belief(&mut self, mut belief: PoBelief) -> Result<u64> {
        if belief.num_tones() != self.field.num_tones() {
            return Err(Error::DimensionMismatch("belief tone count differs from field".into()));
        }
        belief.label = self.next_label;
        self.next_label += 1;
        let label = belief.label;
        self.beliefs.push(belief);
        Ok(label)
    }

    pub fn set_noise(&mut self, noise: NoiseBelief) -> Result<()> {
        if noise.samples.len() != self.field.num_tones()
            || noise.samples.iter().zip(&noise.weights).any(|(s, w)| s.len() != w.len() || s.is_empty())
        {
            return Err(Error::DimensionMismatch("noise belief shape".into()));
        }
        if noise.samples.iter().flatten().any(|v| !(*v > 0.0)) {
            return Err(invalid("noise", "noise samples must be positive"));
        }
        self.noise = noise;
        Ok(())
    }

    /// Pushes every particle through the motion and power models, applies
    /// survival to existence and the Gamma chain to the noise variances.
    pub fn predict(&mut self) {
        let motion = self.config.track.motion;
        let chain = self.config.power_chain;
        for belief in &mut self.beliefs {
            for x in belief.states.iter_mut() {
                *x = motion.predict(x, &mut self.rng_predict);
            }
            for g in belief.powers.iter_mut() {
                *g = chain.sample(*g, &mut self.rng_predict);
            }
            belief.existence = self.config.track.predict_existence(belief.existence);
        }
        let noise_chain = self.config.noise_chain;
        for samples in &mut self.noise.samples {
            for eta in samples.iter_mut() {
                let next = noise_chain.sample(*eta, &mut self.rng_predict);
                // a variance that underflows to zero keeps its previous value
                *eta = if next > 0.0 { next } else { *eta };
            }
        }
    }

    /// Proposes new POs at the matching-pursuit cells that no existing PO
    /// occupies. Returns the number of POs added.
    pub fn birth(&mut self, frame: &MeasurementFrame) -> Result<usize> {
        let detections = matching_pursuit(frame, &self.dictionary, self.config.birth_seeds)?;
        let grid = self.config.track.birth.grid;
        let occupied: BTreeSet<usize> = self
            .beliefs
            .iter()
            .filter_map(|b| {
                let x = b.mmse_state();
                grid.cell_of(x.range, x.depth)
            })
            .collect();
        let tones = self.field.num_tones();
        let n = self.config.particles;
        let mut born = 0;
        for det in detections {
            if occupied.contains(&det.cell) {
                continue;
            }
            let mut states = Vec::with_capacity(n);
            let mut powers = Vec::with_capacity(n * tones);
            for _ in 0..n {
                states.push(self.config.track.birth.sample_in_cell(
                    det.cell,
                    tones,
                    &mut self.rng_birth,
                    &mut powers,
                ));
            }
            let existence = self.config.track.birth.cell_probability(det.cell);
            let mut belief = PoBelief::new(0, states, powers, existence)?;
            belief.newborn = true;
            self.insert_belief(belief)?;
            born += 1;
        }
        self.diagnostics.born = born;
        Ok(born)
    }

    fn check_frame(&self, frame: &MeasurementFrame) -> Result<()> {
        frame.validate()?;
        let (tones, m, j) = frame.shape();
        if tones != self.field.num_tones() || m != self.field.num_elements() || j == 0 {
            return Err(Error::DimensionMismatch(alloc::format!(
                "frame {tones} tones x {m} elements x {j} snapshots, field {} x {}",
                self.field.num_tones(),
                self.field.num_elements()
            )));
        }
        Ok(())
    }

    fn signal_covariances(
        &self,
        existence: &[f64],
        weights: &[Vec<f64>],
        caches: &[SteeringCache],
    ) -> Vec<Vec<Option<CMatrix>>> {
        self.beliefs
            .iter()
            .enumerate()
            .map(|(n, b)| {
                if existence[n] > 0.0 {
                    signal_covariance(self.config.interference, &self.field, b, &weights[n], &caches[n])
                } else {
                    Vec::new()
                }
            })
            .collect()
    }

    /// `η I + Σ_{n in members} w_n C_n` for one tone.
    fn mixture(&self, tone: usize, noise: f64, existence: &[f64], signals: &[Vec<Option<CMatrix>>], skip: Option<usize>) -> CMatrix {
        let mut c = CMatrix::scaled_identity(self.field.num_elements(), noise);
        for (n, sig) in signals.iter().enumerate() {
            if Some(n) == skip || existence[n] <= 0.0 {
                continue;
            }
            if let Some(Some(s)) = sig.get(tone) {
                c.add_scaled(s, existence[n]);
            }
        }
        c
    }

    /// Measurement update (all rounds) followed by resampling.
    pub fn update(&mut self, frame: &MeasurementFrame) -> Result<()> {
        self.check_frame(frame)?;
        let tones = self.field.num_tones();
        let m = self.field.num_elements();
        let rounds = self.config.bp_iterations;

        let caches: Vec<SteeringCache> = self
            .beliefs
            .iter()
            .map(|b| SteeringCache::build(&self.field, &self.config.track, b))
            .collect();
        let prior_log_weights: Vec<Vec<f64>> = self
            .beliefs
            .iter()
            .map(|b| b.weights.iter().map(|w| libm::log(*w)).collect())
            .collect();
        let prior_existence: Vec<f64> = self.beliefs.iter().map(|b| b.existence).collect();
        let noise_prior_log: Vec<Vec<f64>> = self
            .noise
            .weights
            .iter()
            .map(|w| w.iter().map(|v| libm::log(*v)).collect())
            .collect();

        let mut existence = prior_existence.clone();
        let mut weights: Vec<Vec<f64>> = self.beliefs.iter().map(|b| b.weights.clone()).collect();
        let mut noise_weights = self.noise.weights.clone();
        let mut log_bayes = vec![0.0; self.beliefs.len()];
        let mut resets = Vec::new();

        for round in 0..rounds {
            let signals = self.signal_covariances(&existence, &weights, &caches);
            let noise_mean: Vec<f64> = (0..tones)
                .map(|i| {
                    self.noise.samples[i]
                        .iter()
                        .zip(&noise_weights[i])
                        .map(|(s, w)| s * w)
                        .sum()
                })
                .collect();

            let mut next_existence = existence.clone();
            for (n, belief) in self.beliefs.iter().enumerate() {
                let mut models = Vec::with_capacity(tones);
                for (tone, &eta) in noise_mean.iter().enumerate() {
                    let c = self.mixture(tone, eta, &existence, &signals, Some(n));
                    let model = CovarianceModel::from_matrix(&c)?;
                    let stats = SufficientStats::new(&frame.blocks[tone], &model)?;
                    models.push((model, stats));
                }
                let cache = &caches[n];
                let prior = &prior_log_weights[n];
                let deltas = map_indices(belief.len(), |p| {
                    if !cache.valid[p] || prior[p] == f64::NEG_INFINITY {
                        return f64::NEG_INFINITY;
                    }
                    let mut scratch = [Complex64::new(0.0, 0.0); 64];
                    let mut heap;
                    let buf: &mut [Complex64] = if m <= scratch.len() {
                        &mut scratch[..m]
                    } else {
                        heap = vec![Complex64::new(0.0, 0.0); m];
                        &mut heap
                    };
                    let powers = belief.particle_powers(p);
                    let mut total = 0.0;
                    for (tone, (model, stats)) in models.iter().enumerate() {
                        let proj = project(model, stats, cache.vector(p, tone), buf);
                        match proj.delta(powers[tone]) {
                            Ok(d) => total += d,
                            Err(_) => return f64::NAN,
                        }
                    }
                    total
                });
                if deltas.iter().any(|d| d.is_nan()) {
                    return Err(Error::Numerical(alloc::format!(
                        "rank-one update failed for PO {}",
                        belief.label
                    )));
                }
                let post = bernoulli_update(prior_existence[n], prior, &deltas, 0.0, &mut weights[n]);
                log_bayes[n] = post.log_bayes_factor;
                next_existence[n] = post.existence;
                if post.reset && round + 1 == rounds {
                    resets.push(belief.label);
                }
            }
            existence = next_existence;

            // noise variances against the full plug-in covariance
            let signals = self.signal_covariances(&existence, &weights, &caches);
            for tone in 0..tones {
                let signal = self.mixture(tone, 1.0, &existence, &signals, None);
                let samples = &self.noise.samples[tone];
                let prior = &noise_prior_log[tone];
                let block = &frame.blocks[tone];
                let log_post = map_indices(samples.len(), |s| {
                    if prior[s] == f64::NEG_INFINITY {
                        return f64::NEG_INFINITY;
                    }
                    let mut c: CMatrix = signal.clone();
                    c.add_diagonal(samples[s] - 1.0);
                    match CovarianceModel::from_matrix(&c).and_then(|model| log_likelihood(block, &model)) {
                        Ok(ll) => prior[s] + ll,
                        Err(_) => f64::NEG_INFINITY,
                    }
                });
                let norm = log_sum_exp(&log_post);
                let nw = &mut noise_weights[tone];
                if norm.is_finite() {
                    for (w, lp) in nw.iter_mut().zip(&log_post) {
                        *w = libm::exp(lp - norm);
                    }
                } else {
                    nw.iter_mut().for_each(|w| *w = 1.0 / samples.len() as f64);
                }
            }
        }

        for ((belief, w), e) in self.beliefs.iter_mut().zip(weights).zip(&existence) {
            belief.weights = w;
            belief.existence = *e;
        }
        self.noise.weights = noise_weights;
        self.diagnostics.log_bayes_factors = self
            .beliefs
            .iter()
            .zip(&log_bayes)
            .map(|(b, l)| (b.label, *l))
            .collect();
        self.diagnostics.weight_resets = resets;
        self.diagnostics.noise_mean = (0..tones).map(|i| self.noise.mean(i)).collect();
        self.resample();
        Ok(())
    }

    fn should_resample(&self, weights: &[f64]) -> bool {
        match self.config.ess_threshold {
            None => true,
            Some(t) => effective_sample_size(weights) < t * weights.len() as f64,
        }
    }

    fn resample(&mut self) {
        let tones = self.field.num_tones();
        for b in 0..self.beliefs.len() {
            if !self.should_resample(&self.beliefs[b].weights) {
                self.beliefs[b].newborn = false;
                continue;
            }
            let belief = &mut self.beliefs[b];
            let n = belief.len();
            let idx = systematic_resample(&belief.weights, n, &mut self.rng_resample);
            let mut states: Vec<KinematicState> = idx.iter().map(|&i| belief.states[i]).collect();
            if belief.newborn {
                // the birth-step likelihood does not involve velocity, so
                // the posterior velocity is still the prior
                let roi = self.config.track.birth.grid.roi();
                for x in &mut states {
                    x.range_rate = self.rng_resample.random_range(roi.range_rate.0..roi.range_rate.1);
                    x.depth_rate = self.rng_resample.random_range(roi.depth_rate.0..roi.depth_rate.1);
                }
            }
            let mut powers = Vec::with_capacity(n * tones);
            for &i in &idx {
                powers.extend_from_slice(&belief.powers[i * tones..(i + 1) * tones]);
            }
            belief.states = states;
            belief.powers = powers;
            belief.weights = vec![1.0 / n as f64; n];
            belief.newborn = false;
        }
        for tone in 0..tones {
            if !self.should_resample(&self.noise.weights[tone]) {
                continue;
            }
            let n = self.noise.samples[tone].len();
            let idx = systematic_resample(&self.noise.weights[tone], n, &mut self.rng_resample);
            self.noise.samples[tone] = idx.iter().map(|&i| self.noise.samples[tone][i]).collect();
            self.noise.weights[tone] = vec![1.0 / n as f64; n];
        }
    }

    /// Emits an estimate for every surviving PO and removes POs whose
    /// existence fell below the pruning threshold.
    pub fn declare_and_prune(&mut self) -> Vec<Estimate> {
        let before = self.beliefs.len();
        let track = self.config.track;
        self.beliefs.retain(|b| !track.is_pruned(b.existence));
        self.diagnostics.pruned = before - self.beliefs.len();
        self.diagnostics.po_count = self.beliefs.len();
        self.beliefs
            .iter()
            .map(|b| Estimate {
                label: b.label,
                declared: track.is_declared(b.existence),
                state: b.mmse_state(),
                powers: b.mmse_powers(),
                existence: b.existence,
            })
            .collect()
    }

    /// predict, birth, update, declare/prune.
    pub fn step(&mut self, frame: &MeasurementFrame) -> Result<Vec<Estimate>> {
        self.check_frame(frame)?;
        self.diagnostics = StepDiagnostics {
            step: self.step,
            ..StepDiagnostics::default()
        };
        self.predict();
        self.birth(frame)?;
        self.update(frame)?;
        let estimates = self.declare_and_prune();
        self.step += 1;
        Ok(estimates)
    }
}
