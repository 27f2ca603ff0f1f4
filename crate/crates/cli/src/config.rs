//! Run configuration: a versioned TOML document with `[scenario]`,
//! `[tracker]` (plus `[tracker.direct]` / `[tracker.baseline]`) and
//! `[metrics]` sections.
//!
//! A scenario may name a preset; explicitly given keys override it. The
//! archive keeps the fully expanded form, so a run can be reproduced from
//! its `config.toml` alone.

use std::path::{Path, PathBuf};

use dtrack_core::baseline::BaselineConfig;
use dtrack_core::direct::{DirectConfig, Interference};
use dtrack_core::dynamics::{BirthGrid, BirthModel, GammaChain, GammaParameterization, MotionModel, Roi};
use dtrack_core::metrics::GospaParams;
use dtrack_core::scenario::{swellex_like_preset, GroundTruthObject, ScenarioConfig};
use dtrack_core::state::KinematicState;
use dtrack_core::steering::{ArrayGeometry, Propagation, SteeringField, WaveguideEnv};
use dtrack_core::track::{TrackModel, DEFAULT_GRID, DEFAULT_ROI};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA: &str = "dtrack-run/1";
pub const PRESETS: [&str; 1] = ["swellex-like"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    pub seeds: Vec<u64>,
    /// Default archive directory; not part of the archived snapshot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub tracker: TrackerSection,
    #[serde(default)]
    pub metrics: MetricsSection,
}

/// A scalar applied to every tone, or one value per tone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerTone {
    All(f64),
    Each(Vec<f64>),
}

impl PerTone {
    fn expand(&self, tones: usize, key: &str) -> Result<Vec<f64>, CliError> {
        match self {
            PerTone::All(v) => Ok(vec![*v; tones]),
            PerTone::Each(v) if v.len() == tones => Ok(v.clone()),
            PerTone::Each(v) => Err(CliError::config(format!(
                "{key}: expected {tones} values (one per tone), got {}",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_duration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_power: Option<PerTone>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objects: Option<Vec<ObjectSection>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldModel {
    Isovelocity,
    PlaneWave,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub model: FieldModel,
    /// Hz.
    pub tones: Vec<f64>,
    /// Element depths (m).
    pub elements: Vec<f64>,
    pub sound_speed: f64,
    /// Isovelocity only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub water_depth: Option<f64>,
    /// Plane wave only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_depth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSection {
    /// `[range, depth, range_rate, depth_rate]` at `appear_step`.
    pub start: [f64; 4],
    #[serde(default)]
    pub appear_step: usize,
    /// Defaults to the last step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disappear_step: Option<usize>,
    /// Linear power per tone.
    pub power: PerTone,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transmit: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoiSection {
    pub range: [f64; 2],
    pub depth: [f64; 2],
    pub range_rate: [f64; 2],
    pub depth_rate: [f64; 2],
}

impl Default for RoiSection {
    fn default() -> Self {
        let [r, z, vr, vz] = DEFAULT_ROI.map(|(a, b)| [a, b]);
        Self {
            range: r,
            depth: z,
            range_rate: vr,
            depth_rate: vz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerSection {
    pub survival: f64,
    pub declare_threshold: f64,
    pub prune_threshold: f64,
    /// Random-acceleration variances `[range, depth]`.
    pub driving_variance: [f64; 2],
    pub mean_births: f64,
    /// Upper end of the uniform prior on newborn powers.
    pub power_max: f64,
    pub roi: RoiSection,
    /// Birth cells `[range, depth]`.
    pub grid: [usize; 2],
    pub direct: DirectSection,
    pub baseline: BaselineSection,
}

impl Default for TrackerSection {
    fn default() -> Self {
        let t = standard_track();
        Self {
            survival: t.survival,
            declare_threshold: t.declare_threshold,
            prune_threshold: t.prune_threshold,
            driving_variance: t.motion.driving_variance(),
            mean_births: t.birth.mean_births,
            power_max: t.birth.power_max,
            roi: RoiSection::default(),
            grid: [DEFAULT_GRID.0, DEFAULT_GRID.1],
            direct: DirectSection::default(),
            baseline: BaselineSection::default(),
        }
    }
}

fn standard_track() -> TrackModel {
    TrackModel::standard(4.096).expect("valid standard track model")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaForm {
    ShapeIsSpread,
    ShapeOverSpread,
}

impl From<GammaForm> for GammaParameterization {
    fn from(g: GammaForm) -> Self {
        match g {
            GammaForm::ShapeIsSpread => GammaParameterization::ShapeIsSpread,
            GammaForm::ShapeOverSpread => GammaParameterization::ShapeOverSpread,
        }
    }
}

impl From<GammaParameterization> for GammaForm {
    fn from(g: GammaParameterization) -> Self {
        match g {
            GammaParameterization::ShapeIsSpread => GammaForm::ShapeIsSpread,
            GammaParameterization::ShapeOverSpread => GammaForm::ShapeOverSpread,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterferenceKind {
    MomentMatched,
    MmsePlugIn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DirectSection {
    pub particles: usize,
    pub noise_particles: usize,
    pub bp_iterations: usize,
    pub power_spread: f64,
    pub noise_spread: f64,
    pub gamma_form: GammaForm,
    pub noise_prior_max: f64,
    pub birth_seeds: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ess_threshold: Option<f64>,
    pub interference: InterferenceKind,
}

impl Default for DirectSection {
    fn default() -> Self {
        let d = DirectConfig::new(standard_track(), 0);
        Self {
            particles: d.particles,
            noise_particles: d.noise_particles,
            bp_iterations: d.bp_iterations,
            power_spread: d.power_chain.spread(),
            noise_spread: d.noise_chain.spread(),
            gamma_form: d.power_chain.parameterization().into(),
            noise_prior_max: d.noise_prior_max,
            birth_seeds: d.birth_seeds,
            ess_threshold: d.ess_threshold,
            interference: match d.interference {
                Interference::MomentMatched => InterferenceKind::MomentMatched,
                Interference::MmsePlugIn => InterferenceKind::MmsePlugIn,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub detection_probability: f64,
    pub clutter_mean: f64,
    /// Measurement noise standard deviations `[range, depth]`.
    pub noise_std: [f64; 2],
    pub particles: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub detections: usize,
    /// Fixed detection threshold; calibrated on noise-only frames if absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score_threshold: Option<f64>,
    /// Noise-only frames used for the calibration.
    pub calibration_steps: usize,
}

impl Default for BaselineSection {
    fn default() -> Self {
        let b = BaselineConfig::new(standard_track(), 0);
        Self {
            detection_probability: b.detection_probability,
            clutter_mean: b.clutter_mean,
            noise_std: [b.noise_std.0, b.noise_std.1],
            particles: b.particles,
            max_iterations: b.max_iterations,
            tolerance: b.tolerance,
            detections: b.detections,
            score_threshold: None,
            calibration_steps: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub cutoff: f64,
    pub order: f64,
    pub alpha: f64,
}

impl Default for MetricsSection {
    fn default() -> Self {
        let g = GospaParams::default();
        Self {
            cutoff: g.cutoff,
            order: g.order,
            alpha: g.alpha,
        }
    }
}

/// Parses a configuration; errors carry the dotted key path.
pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let de = toml::Deserializer::new(text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.message().trim().to_string();
        // serde reports a missing key at its parent; name the key itself
        let path = match message
            .strip_prefix("missing field `")
            .and_then(|m| m.strip_suffix('`'))
        {
            Some(key) if path == "." => key.to_string(),
            Some(key) => format!("{path}.{key}"),
            None => path,
        };
        CliError::config(format!("{path}: {message}"))
    })?;
    if config.schema != SCHEMA {
        return Err(CliError::config(format!(
            "schema: unsupported schema `{}` (expected `{SCHEMA}`)",
            config.schema
        )));
    }
    if config.seeds.is_empty() {
        return Err(CliError::config("seeds: at least one seed is required"));
    }
    let mut sorted = config.seeds.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::config("seeds: duplicate seed"));
    }
    Ok(config)
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

fn preset_section(name: &str) -> Result<ScenarioSection, CliError> {
    match name {
        "swellex-like" => Ok(section_from_scenario(&swellex_like_preset())),
        other => Err(CliError::config(format!(
            "scenario.preset: unknown preset `{other}` (choices: {})",
            PRESETS.join(", ")
        ))),
    }
}

fn section_from_scenario(s: &ScenarioConfig) -> ScenarioSection {
    let field = s.field.clone();
    let (model, water_depth, sound_speed, reference_depth) = match *field.propagation() {
        Propagation::IsovelocityModes(env) => (FieldModel::Isovelocity, Some(env.water_depth), env.sound_speed, None),
        Propagation::PlaneWave {
            sound_speed,
            reference_depth,
        } => (FieldModel::PlaneWave, None, sound_speed, Some(reference_depth)),
    };
    let objects = s
        .objects
        .iter()
        .map(|o| ObjectSection {
            start: o.trajectory[0].to_array(),
            appear_step: o.appear_step,
            // objects that last the whole run follow a num_steps override
            disappear_step: (o.disappear_step + 1 != s.num_steps).then_some(o.disappear_step),
            power: PerTone::Each(o.powers[0].clone()),
            transmit: o.transmit.clone(),
        })
        .collect();
    ScenarioSection {
        preset: None,
        num_steps: Some(s.num_steps),
        snapshots: Some(s.snapshots),
        step_duration: Some(s.step_duration),
        noise_power: Some(PerTone::Each(s.noise_power.clone())),
        field: Some(FieldSection {
            model,
            tones: field.tones().to_vec(),
            elements: field.geometry().positions().to_vec(),
            sound_speed,
            water_depth,
            reference_depth,
        }),
        objects: Some(objects),
    }
}

fn required<T: Clone>(value: &Option<T>, key: &str) -> Result<T, CliError> {
    value
        .clone()
        .ok_or_else(|| CliError::config(format!("scenario.{key}: missing field `{key}` (no preset given)")))
}

fn core_err(key: &str) -> impl Fn(dtrack_core::Error) -> CliError + '_ {
    move |e| CliError::config(format!("{key}: {e}"))
}

impl RunConfig {
    /// Replaces the preset by its explicit values and drops the output
    /// directory, yielding the archived snapshot.
    pub fn expanded(&self) -> Result<RunConfig, CliError> {
        let mut scenario = match &self.scenario.preset {
            Some(name) => preset_section(name)?,
            None => ScenarioSection::default(),
        };
        let s = &self.scenario;
        macro_rules! overlay {
            ($($f:ident),*) => {$(if s.$f.is_some() { scenario.$f = s.$f.clone(); })*};
        }
        overlay!(num_steps, snapshots, step_duration, noise_power, field, objects);
        let out = RunConfig {
            schema: self.schema.clone(),
            seeds: self.seeds.clone(),
            out: None,
            scenario,
            tracker: self.tracker.clone(),
            metrics: self.metrics.clone(),
        };
        // surface every validation error before anything runs
        out.scenario_for(out.seeds[0])?;
        out.track_model()?;
        out.direct_config(0)?;
        out.baseline_config(0)?;
        out.gospa()?;
        Ok(out)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn field(&self) -> Result<SteeringField, CliError> {
        let f = required(&self.scenario.field, "field")?;
        let geometry = ArrayGeometry::new(f.elements.clone()).map_err(core_err("scenario.field.elements"))?;
        match f.model {
            FieldModel::Isovelocity => {
                let depth = f.water_depth.ok_or_else(|| {
                    CliError::config("scenario.field.water_depth: missing field `water_depth` (isovelocity model)")
                })?;
                let env = WaveguideEnv::new(depth, f.sound_speed).map_err(core_err("scenario.field"))?;
                SteeringField::isovelocity(geometry, env, f.tones).map_err(core_err("scenario.field"))
            }
            FieldModel::PlaneWave => SteeringField::plane_wave(
                geometry,
                f.tones,
                f.sound_speed,
                f.reference_depth.unwrap_or(0.0),
            )
            .map_err(core_err("scenario.field")),
        }
    }

    pub fn scenario_for(&self, seed: u64) -> Result<ScenarioConfig, CliError> {
        let s = &self.scenario;
        let field = self.field()?;
        let tones = field.num_tones();
        let num_steps = required(&s.num_steps, "num_steps")?;
        let step_duration = required(&s.step_duration, "step_duration")?;
        let noise_power = required(&s.noise_power, "noise_power")?.expand(tones, "scenario.noise_power")?;
        let objects = required(&s.objects, "objects")?
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let last = o.disappear_step.unwrap_or(num_steps.saturating_sub(1));
                let power = o.power.expand(tones, &format!("scenario.objects[{i}].power"))?;
                let mut obj = GroundTruthObject::constant_velocity(
                    KinematicState::from_array(o.start),
                    o.appear_step,
                    last,
                    step_duration,
                    power,
                );
                obj.transmit = o.transmit.clone();
                Ok(obj)
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let config = ScenarioConfig {
            field,
            objects,
            noise_power,
            snapshots: required(&s.snapshots, "snapshots")?,
            num_steps,
            step_duration,
            seed,
        };
        config.validate().map_err(core_err("scenario"))?;
        Ok(config)
    }

    pub fn step_duration(&self) -> Result<f64, CliError> {
        required(&self.scenario.step_duration, "step_duration")
    }

    pub fn track_model(&self) -> Result<TrackModel, CliError> {
        let t = &self.tracker;
        let roi = Roi::new(
            (t.roi.range[0], t.roi.range[1]),
            (t.roi.depth[0], t.roi.depth[1]),
            (t.roi.range_rate[0], t.roi.range_rate[1]),
            (t.roi.depth_rate[0], t.roi.depth_rate[1]),
        )
        .map_err(core_err("tracker.roi"))?;
        let grid = BirthGrid::new(roi, t.grid[0], t.grid[1]).map_err(core_err("tracker.grid"))?;
        let model = TrackModel {
            motion: MotionModel::new(self.step_duration()?, t.driving_variance)
                .map_err(core_err("tracker.driving_variance"))?,
            birth: BirthModel::new(t.mean_births, grid, t.power_max).map_err(core_err("tracker"))?,
            survival: t.survival,
            declare_threshold: t.declare_threshold,
            prune_threshold: t.prune_threshold,
        };
        model.validate().map_err(core_err("tracker"))?;
        Ok(model)
    }

    pub fn direct_config(&self, seed: u64) -> Result<DirectConfig, CliError> {
        let d = &self.tracker.direct;
        let form = d.gamma_form.into();
        let mut c = DirectConfig::new(self.track_model()?, seed);
        c.particles = d.particles;
        c.noise_particles = d.noise_particles;
        c.bp_iterations = d.bp_iterations;
        c.power_chain = GammaChain::new(d.power_spread, form).map_err(core_err("tracker.direct.power_spread"))?;
        c.noise_chain = GammaChain::new(d.noise_spread, form).map_err(core_err("tracker.direct.noise_spread"))?;
        c.noise_prior_max = d.noise_prior_max;
        c.birth_seeds = d.birth_seeds;
        c.ess_threshold = d.ess_threshold;
        c.interference = match d.interference {
            InterferenceKind::MomentMatched => Interference::MomentMatched,
            InterferenceKind::MmsePlugIn => Interference::MmsePlugIn,
        };
        c.validate().map_err(core_err("tracker.direct"))?;
        Ok(c)
    }

    /// The score threshold is left at the configured value or 0; callers
    /// calibrate it when [`BaselineSection::score_threshold`] is absent.
    pub fn baseline_config(&self, seed: u64) -> Result<BaselineConfig, CliError> {
        let b = &self.tracker.baseline;
        let mut c = BaselineConfig::new(self.track_model()?, seed);
        c.detection_probability = b.detection_probability;
        c.clutter_mean = b.clutter_mean;
        c.noise_std = (b.noise_std[0], b.noise_std[1]);
        c.particles = b.particles;
        c.max_iterations = b.max_iterations;
        c.tolerance = b.tolerance;
        c.detections = b.detections;
        c.score_threshold = b.score_threshold.unwrap_or(0.0);
        c.validate().map_err(core_err("tracker.baseline"))?;
        if b.score_threshold.is_none() && b.calibration_steps == 0 {
            return Err(CliError::config(
                "tracker.baseline.calibration_steps: must be >= 1 without a fixed score_threshold",
            ));
        }
        Ok(c)
    }

    pub fn gospa(&self) -> Result<GospaParams, CliError> {
        let m = &self.metrics;
        GospaParams::new(m.cutoff, m.order, m.alpha).map_err(core_err("metrics"))
    }
}
