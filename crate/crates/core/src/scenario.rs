//! Synthetic ground truth and raw array snapshots.
//!
//! Every snapshot of tone `i` is `Σ_l ρ_l a_i(x_l) + ε` with
//! `ρ_l ~ CN(0, γ_l)` drawn independently per snapshot and
//! `ε ~ CN(0, η_i I)`. Noise and each object draw from their own ChaCha
//! stream, so an object's contribution does not depend on which other
//! objects are present.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::state::KinematicState;
use crate::steering::{ArrayGeometry, SteeringField, WaveguideEnv};

/// Complex `M x J` snapshot matrix of one tone, stored snapshot-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotBlock {
    elements: usize,
    snapshots: usize,
    data: Vec<Complex64>,
}

impl SnapshotBlock {
    pub fn zeros(elements: usize, snapshots: usize) -> Self {
        Self {
            elements,
            snapshots,
            data: vec![Complex64::new(0.0, 0.0); elements * snapshots],
        }
    }

    /// `data` holds snapshot 0 (all `elements` entries), then snapshot 1, ...
    pub fn from_columns(elements: usize, snapshots: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != elements * snapshots {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {elements}x{snapshots} block",
                data.len()
            )));
        }
        Ok(Self {
            elements,
            snapshots,
            data,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.elements
    }

    pub fn num_snapshots(&self) -> usize {
        self.snapshots
    }

    pub fn snapshot(&self, j: usize) -> &[Complex64] {
        &self.data[j * self.elements..(j + 1) * self.elements]
    }

    pub fn snapshot_mut(&mut self, j: usize) -> &mut [Complex64] {
        &mut self.data[j * self.elements..(j + 1) * self.elements]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }
}

/// All tones of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementFrame {
    pub blocks: Vec<SnapshotBlock>,
}

impl MeasurementFrame {
    pub fn zeros(tones: usize, elements: usize, snapshots: usize) -> Self {
        Self {
            blocks: vec![SnapshotBlock::zeros(elements, snapshots); tones],
        }
    }

    pub fn num_tones(&self) -> usize {
        self.blocks.len()
    }

    /// `(tones, elements, snapshots)`; elements/snapshots are zero for an
    /// empty frame.
    pub fn shape(&self) -> (usize, usize, usize) {
        match self.blocks.first() {
            Some(b) => (self.blocks.len(), b.num_elements(), b.num_snapshots()),
            None => (0, 0, 0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (_, m, j) = self.shape();
        if self
            .blocks
            .iter()
            .any(|b| b.num_elements() != m || b.num_snapshots() != j)
        {
            return Err(Error::DimensionMismatch(
                "tones of a frame have inconsistent block sizes".into(),
            ));
        }
        Ok(())
    }
}

/// One simulated source over its active interval `[appear_step, disappear_step]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthObject {
    pub appear_step: usize,
    pub disappear_step: usize,
    /// One state per active step.
    pub trajectory: Vec<KinematicState>,
    /// Per active step, one linear power per tone.
    pub powers: Vec<Vec<f64>>,
    /// Optional per active step on/off switch; `None` means always on.
    pub transmit: Option<Vec<bool>>,
}

impl GroundTruthObject {
    /// Constant-velocity trajectory with constant per-tone powers.
    pub fn constant_velocity(
        start: KinematicState,
        appear_step: usize,
        disappear_step: usize,
        step_duration: f64,
        powers: Vec<f64>,
    ) -> Self {
        let len = disappear_step.saturating_sub(appear_step) + 1;
        let trajectory = (0..len)
            .map(|k| {
                let t = step_duration * k as f64;
                KinematicState::new(
                    start.range + t * start.range_rate,
                    start.depth + t * start.depth_rate,
                    start.range_rate,
                    start.depth_rate,
                )
            })
            .collect();
        Self {
            appear_step,
            disappear_step,
            trajectory,
            powers: vec![powers; len],
            transmit: None,
        }
    }

    pub fn is_active(&self, step: usize) -> bool {
        step >= self.appear_step && step <= self.disappear_step
    }

    pub fn state_at(&self, step: usize) -> Option<&KinematicState> {
        if self.is_active(step) {
            self.trajectory.get(step - self.appear_step)
        } else {
            None
        }
    }

    pub fn powers_at(&self, step: usize) -> Option<&[f64]> {
        if self.is_active(step) {
            self.powers.get(step - self.appear_step).map(Vec::as_slice)
        } else {
            None
        }
    }

    pub fn transmitting_at(&self, step: usize) -> bool {
        self.is_active(step)
            && self
                .transmit
                .as_ref()
                .map_or(true, |mask| mask[step - self.appear_step])
    }

    fn validate(&self, index: usize, tones: usize) -> Result<()> {
        if self.appear_step > self.disappear_step {
            return Err(invalid(
                "objects",
                format!("object {index}: appear_step after disappear_step"),
            ));
        }
        let len = self.disappear_step - self.appear_step + 1;
        if self.trajectory.len() != len || self.powers.len() != len {
            return Err(invalid(
                "objects",
                format!("object {index}: trajectory/powers must cover {len} active steps"),
            ));
        }
        if self.transmit.as_ref().is_some_and(|m| m.len() != len) {
            return Err(invalid(
                "objects",
                format!("object {index}: transmit mask must cover {len} active steps"),
            ));
        }
        for p in &self.powers {
            if p.len() != tones {
                return Err(invalid(
                    "objects",
                    format!("object {index}: expected {tones} powers per step"),
                ));
            }
            if p.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
                return Err(invalid(
                    "objects",
                    format!("object {index}: powers must be finite and >= 0"),
                ));
            }
        }
        if self.trajectory.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("object trajectory"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub field: SteeringField,
    pub objects: Vec<GroundTruthObject>,
    /// Per-tone noise variance.
    pub noise_power: Vec<f64>,
    pub snapshots: usize,
    pub num_steps: usize,
    pub step_duration: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.snapshots == 0 {
            return Err(invalid("snapshots", "need at least one snapshot per step"));
        }
        if self.num_steps == 0 {
            return Err(invalid("num_steps", "need at least one step"));
        }
        if !(self.step_duration > 0.0) || !self.step_duration.is_finite() {
            return Err(invalid("step_duration", "must be positive and finite"));
        }
        if self.noise_power.len() != self.field.num_tones() {
            return Err(invalid(
                "noise_power",
                format!("expected one value per tone ({})", self.field.num_tones()),
            ));
        }
        if self.noise_power.iter().any(|n| !(*n > 0.0) || !n.is_finite()) {
            return Err(invalid("noise_power", "must be positive and finite"));
        }
        for (i, o) in self.objects.iter().enumerate() {
            o.validate(i, self.field.num_tones())?;
        }
        Ok(())
    }

    fn empty_frames(&self) -> Vec<MeasurementFrame> {
        vec![
            MeasurementFrame::zeros(
                self.field.num_tones(),
                self.field.num_elements(),
                self.snapshots
            );
            self.num_steps
        ]
    }

    fn stream(&self, id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id);
        rng
    }
}

/// One object present at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthPoint {
    pub object: usize,
    pub state: KinematicState,
    pub powers: Vec<f64>,
    pub transmitting: bool,
}

/// Ground truth per time step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub steps: Vec<Vec<TruthPoint>>,
}

impl GroundTruth {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        let steps = (0..config.num_steps)
            .map(|k| {
                config
                    .objects
                    .iter()
                    .enumerate()
                    .filter_map(|(object, o)| {
                        Some(TruthPoint {
                            object,
                            state: *o.state_at(k)?,
                            powers: o.powers_at(k)?.to_vec(),
                            transmitting: o.transmitting_at(k),
                        })
                    })
                    .collect()
            })
            .collect();
        Self { steps }
    }

    /// Positions `(range, depth)` of all objects present at `step`.
    pub fn positions(&self, step: usize) -> Vec<[f64; 2]> {
        self.steps[step].iter().map(|p| p.state.position()).collect()
    }
}

#[inline]
fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = libm::sqrt(0.5 * variance);
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// White `CN(0, η_i I)` noise for every step, tone and snapshot.
pub fn noise_frames(config: &ScenarioConfig) -> Result<Vec<MeasurementFrame>> {
    config.validate()?;
    let mut rng = config.stream(0);
    let mut frames = config.empty_frames();
    for frame in &mut frames {
        for (block, &eta) in frame.blocks.iter_mut().zip(&config.noise_power) {
            for z in block.as_mut_slice() {
                *z = complex_normal(&mut rng, eta);
            }
        }
    }
    Ok(frames)
}

/// Noise-free contribution of object `index`, drawn from its own stream.
pub fn object_signal(config: &ScenarioConfig, index: usize) -> Result<Vec<MeasurementFrame>> {
    config.validate()?;
    let object = config
        .objects
        .get(index)
        .ok_or_else(|| invalid("object", format!("no object {index}")))?;
    let mut rng = config.stream(index as u64 + 1);
    let mut frames = config.empty_frames();
    let m = config.field.num_elements();
    let mut a = vec![Complex64::new(0.0, 0.0); m];
    for (k, frame) in frames.iter_mut().enumerate() {
        if !object.transmitting_at(k) {
            continue;
        }
        let x = object.state_at(k).expect("active object has a state");
        let powers = object.powers_at(k).expect("active object has powers");
        for (tone, block) in frame.blocks.iter_mut().enumerate() {
            config
                .field
                .steering_into(x.range, x.depth, tone, &mut a)
                .map_err(|e| Error::TrajectoryOutOfField {
                    object: index,
                    step: k,
                    reason: format!("{e}"),
                })?;
            for j in 0..config.snapshots {
                let rho = complex_normal(&mut rng, powers[tone]);
                for (z, ai) in block.snapshot_mut(j).iter_mut().zip(&a) {
                    *z += rho * ai;
                }
            }
        }
    }
    Ok(frames)
}

/// Simulates all frames plus the ground-truth record. Deterministic in
/// `config.seed`.
pub fn generate(config: &ScenarioConfig) -> Result<(Vec<MeasurementFrame>, GroundTruth)> {
    let mut frames = noise_frames(config)?;
    for index in 0..config.objects.len() {
        frames = superpose(&frames, &object_signal(config, index)?, 0.0)?;
    }
    Ok((frames, GroundTruth::from_config(config)))
}

/// Element-wise `a + 10^(db/20) b`.
pub fn superpose(
    frames_a: &[MeasurementFrame],
    frames_b: &[MeasurementFrame],
    power_scale_db: f64,
) -> Result<Vec<MeasurementFrame>> {
    if frames_a.len() != frames_b.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} frames vs {} frames",
            frames_a.len(),
            frames_b.len()
        )));
    }
    if !power_scale_db.is_finite() {
        return Err(Error::NonFinite("power_scale_db"));
    }
    let scale = libm::pow(10.0, power_scale_db / 20.0);
    frames_a
        .iter()
        .zip(frames_b)
        .map(|(fa, fb)| {
            if fa.shape() != fb.shape() || fa.blocks.len() != fb.blocks.len() {
                return Err(Error::DimensionMismatch(format!(
                    "frame shapes {:?} and {:?} differ",
                    fa.shape(),
                    fb.shape()
                )));
            }
            let blocks = fa
                .blocks
                .iter()
                .zip(&fb.blocks)
                .map(|(ba, bb)| {
                    let mut out = ba.clone();
                    for (z, w) in out.as_mut_slice().iter_mut().zip(bb.as_slice()) {
                        *z += w * scale;
                    }
                    out
                })
                .collect();
            Ok(MeasurementFrame { blocks })
        })
        .collect()
}

/// Tone set of the shallow-water experiment, Hz.
pub const PRESET_TONES: [f64; 7] = [49.0, 79.0, 112.0, 148.0, 201.0, 283.0, 388.0];
pub const PRESET_ELEMENTS: usize = 21;
pub const PRESET_SNAPSHOTS: usize = 3;
pub const PRESET_STEP_DURATION: f64 = 4.096;
pub const PRESET_STEPS: usize = 100;
pub const PRESET_WATER_DEPTH: f64 = 216.5;
pub const PRESET_SOUND_SPEED: f64 = 1500.0;
pub const PRESET_NOISE_POWER: f64 = 1e-4;
pub const PRESET_STATIC_POWER: f64 = 0.02;

/// Vertical array of the preset: 21 elements, 5.625 m apart from 94.125 m.
pub fn preset_field() -> SteeringField {
    SteeringField::isovelocity(
        ArrayGeometry::uniform(94.125, 5.625, PRESET_ELEMENTS).expect("valid preset array"),
        WaveguideEnv::new(PRESET_WATER_DEPTH, PRESET_SOUND_SPEED).expect("valid preset waveguide"),
        PRESET_TONES.to_vec(),
    )
    .expect("valid preset field")
}

/// Two-source shallow-water scenario: a static source mid-ROI and a source
/// closing in range at constant rate, 3 dB weaker than the static one.
pub fn swellex_like_preset() -> ScenarioConfig {
    let k = PRESET_STEPS;
    let tones = PRESET_TONES.len();
    let static_power = vec![PRESET_STATIC_POWER; tones];
    let moving_power: Vec<f64> = static_power
        .iter()
        .map(|g| g * libm::pow(10.0, -3.0 / 10.0))
        .collect();
    let objects = vec![
        GroundTruthObject::constant_velocity(
            KinematicState::new(2500.0, 80.0, 0.0, 0.0),
            0,
            k - 1,
            PRESET_STEP_DURATION,
            static_power,
        ),
        GroundTruthObject::constant_velocity(
            KinematicState::new(4000.0, 58.0, -2.5, 0.0),
            0,
            k - 1,
            PRESET_STEP_DURATION,
            moving_power,
        ),
    ];
    ScenarioConfig {
        field: preset_field(),
        objects,
        noise_power: vec![PRESET_NOISE_POWER; tones],
        snapshots: PRESET_SNAPSHOTS,
        num_steps: k,
        step_duration: PRESET_STEP_DURATION,
        seed: 1,
    }
}
