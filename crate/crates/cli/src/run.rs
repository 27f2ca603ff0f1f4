//! Pipeline stages. Every stage reads its inputs from the archive written
//! by the previous one, so `sweep` and the individual subcommands produce
//! the same bytes. Seeds run in parallel on a pool of `workers` threads;
//! each seed's work is sequential and writes only its own directory.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use dtrack_core::baseline::{calibrate_threshold, BaselineTracker};
use dtrack_core::direct::DirectTracker;
use dtrack_core::metrics::{gospa, GospaParams};
use dtrack_core::mp::{build_dictionary, Dictionary};
use dtrack_core::scenario::{generate, noise_frames, MeasurementFrame};
use dtrack_core::steering::SteeringField;
use dtrack_core::track::Estimate;
use rayon::prelude::*;

use crate::archive::{self, GospaRow, SummaryRow};
use crate::config::{self, RunConfig};
use crate::CliError;

pub const TRACKERS: [&str; 2] = ["direct", "baseline-mp"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrackerKind {
    Direct,
    BaselineMp,
}

impl TrackerKind {
    pub const ALL: [TrackerKind; 2] = [TrackerKind::Direct, TrackerKind::BaselineMp];

    pub fn name(self) -> &'static str {
        match self {
            TrackerKind::Direct => TRACKERS[0],
            TrackerKind::BaselineMp => TRACKERS[1],
        }
    }
}

impl FromStr for TrackerKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        TrackerKind::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| CliError::config(format!("unknown tracker `{s}` (choices: {})", TRACKERS.join(", "))))
    }
}

// Independent RNG seeds for the trackers and the threshold calibration,
// so that none of them reuses the scenario's random streams.
const DIRECT_SALT: u64 = 1;
const BASELINE_SALT: u64 = 2;
const CALIBRATION_SALT: u64 = 3;

/// splitmix64 of `seed` mixed with `salt`.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn in_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::config("--workers must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    Ok(pool.install(job))
}

fn load_archive_config(out: &Path) -> Result<RunConfig, CliError> {
    let path = archive::config_path(out);
    if !path.is_file() {
        return Err(CliError::Runtime(format!("{}: not a run archive (no config.toml)", out.display())));
    }
    config::load(&path)?.expanded()
}

fn select_seeds(config: &RunConfig, only: Option<u64>) -> Result<Vec<u64>, CliError> {
    match only {
        None => Ok(config.seeds.clone()),
        Some(s) if config.seeds.contains(&s) => Ok(vec![s]),
        Some(s) => Err(CliError::config(format!("seed {s} is not part of this run (seeds: {:?})", config.seeds))),
    }
}

/// Writes the expanded configuration, frames and ground truth of every
/// seed (or only `seed`, which then replaces the configured seed list).
pub fn simulate(config: &RunConfig, out: &Path, seed: Option<u64>, workers: Option<usize>) -> Result<(), CliError> {
    let mut config = config.expanded()?;
    if let Some(s) = seed {
        config.seeds = vec![s];
    }
    archive::create_dir(out)?;
    archive::write_text(&archive::config_path(out), &config.to_toml())?;
    let results = in_pool(workers, || {
        config
            .seeds
            .par_iter()
            .map(|&s| {
                let dir = archive::seed_dir(out, s);
                archive::create_dir(&dir)?;
                let (frames, truth) = generate(&config.scenario_for(s)?)?;
                archive::write_frames(&dir.join("frames.bin"), &frames)?;
                archive::write_truth(&dir.join("truth.csv"), &truth)
            })
            .collect::<Vec<_>>()
    })?;
    results.into_iter().collect()
}

struct TrackerOutput {
    estimates: Vec<Vec<Estimate>>,
    detections: Option<Vec<Vec<dtrack_core::baseline::PointMeasurement>>>,
    log: String,
}

fn run_direct(
    config: &RunConfig,
    field: &SteeringField,
    dict: &Arc<Dictionary>,
    seed: u64,
    frames: &[MeasurementFrame],
) -> Result<TrackerOutput, CliError> {
    let mut tracker = DirectTracker::new(
        config.direct_config(derive_seed(seed, DIRECT_SALT))?,
        field.clone(),
        Arc::clone(dict),
    )?;
    let mut log = String::new();
    let mut estimates = Vec::with_capacity(frames.len());
    let start = Instant::now();
    for frame in frames {
        let t = Instant::now();
        let est = tracker.step(frame)?;
        let d = tracker.diagnostics();
        let _ = writeln!(
            log,
            "step {} pos {} born {} pruned {} declared {} weight_resets {} noise_mean {:?} elapsed_ms {:.1}",
            d.step,
            d.po_count,
            d.born,
            d.pruned,
            est.iter().filter(|e| e.declared).count(),
            d.weight_resets.len(),
            d.noise_mean,
            t.elapsed().as_secs_f64() * 1e3
        );
        estimates.push(est);
    }
    let _ = writeln!(log, "total_s {:.3}", start.elapsed().as_secs_f64());
    Ok(TrackerOutput {
        estimates,
        detections: None,
        log,
    })
}

fn run_baseline(
    config: &RunConfig,
    dict: &Dictionary,
    seed: u64,
    frames: &[MeasurementFrame],
) -> Result<TrackerOutput, CliError> {
    let mut bc = config.baseline_config(derive_seed(seed, BASELINE_SALT))?;
    let mut log = String::new();
    if config.tracker.baseline.score_threshold.is_none() {
        let mut noise = config.scenario_for(derive_seed(seed, CALIBRATION_SALT))?;
        noise.objects.clear();
        noise.num_steps = config.tracker.baseline.calibration_steps;
        bc.score_threshold = calibrate_threshold(&noise_frames(&noise)?, dict, bc.detections, bc.clutter_mean)?;
    }
    let _ = writeln!(log, "score_threshold {:e}", bc.score_threshold);
    let mut tracker = BaselineTracker::new(bc)?;
    let mut estimates = Vec::with_capacity(frames.len());
    let mut detections = Vec::with_capacity(frames.len());
    let start = Instant::now();
    for frame in frames {
        let t = Instant::now();
        let (z, est) = tracker.step(frame, dict)?;
        let d = tracker.diagnostics();
        let _ = writeln!(
            log,
            "step {} measurements {} pos {} born {} pruned {} declared {} bp_iterations {} elapsed_ms {:.1}",
            d.step,
            d.measurements,
            d.po_count,
            d.born,
            d.pruned,
            est.iter().filter(|e| e.declared).count(),
            d.iterations,
            t.elapsed().as_secs_f64() * 1e3
        );
        estimates.push(est);
        detections.push(z);
    }
    let _ = writeln!(log, "total_s {:.3}", start.elapsed().as_secs_f64());
    Ok(TrackerOutput {
        estimates,
        detections: Some(detections),
        log,
    })
}

/// Runs the given trackers on the archived frames of every seed (or only
/// `seed`) and writes estimates, detections and diagnostics.
pub fn track(out: &Path, trackers: &[TrackerKind], seed: Option<u64>, workers: Option<usize>) -> Result<(), CliError> {
    if trackers.is_empty() {
        return Err(CliError::config(format!("no tracker given (choices: {})", TRACKERS.join(", "))));
    }
    let config = load_archive_config(out)?;
    let seeds = select_seeds(&config, seed)?;
    let field = config.field()?;
    let model = config.track_model()?;
    let dict = Arc::new(build_dictionary(&field, &model.birth.grid)?);
    let results = in_pool(workers, || {
        seeds
            .par_iter()
            .map(|&s| {
                let dir = archive::seed_dir(out, s);
                let frames = archive::read_frames(&dir.join("frames.bin"))?;
                for &kind in trackers {
                    let output = match kind {
                        TrackerKind::Direct => run_direct(&config, &field, &dict, s, &frames)?,
                        TrackerKind::BaselineMp => run_baseline(&config, &dict, s, &frames)?,
                    };
                    let name = kind.name();
                    archive::write_estimates(&dir.join(format!("estimates_{name}.csv")), &output.estimates)?;
                    if let Some(z) = &output.detections {
                        archive::write_detections(&dir.join(format!("detections_{name}.csv")), z)?;
                    }
                    archive::write_text(&dir.join(format!("diagnostics_{name}.log")), &output.log)?;
                }
                Ok(())
            })
            .collect::<Vec<Result<(), CliError>>>()
    })?;
    results.into_iter().collect()
}

fn gospa_rows(truth: &[Vec<[f64; 2]>], estimates: &[Vec<Estimate>], params: &GospaParams) -> Result<Vec<GospaRow>, CliError> {
    truth
        .iter()
        .zip(estimates)
        .enumerate()
        .map(|(step, (t, es))| {
            let declared: Vec<[f64; 2]> = es.iter().filter(|e| e.declared).map(|e| e.state.position()).collect();
            let g = gospa(t, &declared, params)?;
            Ok(GospaRow {
                step,
                total: g.total,
                localization: g.localization,
                missed: g.missed,
                false_alarms: g.false_alarms,
                truth: t.len(),
                declared: declared.len(),
            })
        })
        .collect()
}

fn summarize(tracker: &str, seed: String, rows: &[&GospaRow]) -> SummaryRow {
    let n = rows.len().max(1) as f64;
    let mean = |f: fn(&GospaRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
    SummaryRow {
        tracker: tracker.to_string(),
        seed,
        steps: rows.len(),
        mean_gospa: mean(|r| r.total),
        mean_localization: mean(|r| r.localization),
        mean_missed: mean(|r| r.missed),
        mean_false_alarms: mean(|r| r.false_alarms),
    }
}

/// Scores every tracker that has estimates in the archive, writes the
/// per-step GOSPA files and `summary.csv`, and returns the summary rows.
/// Repeated calls rewrite identical files.
pub fn evaluate(out: &Path) -> Result<Vec<SummaryRow>, CliError> {
    let config = load_archive_config(out)?;
    let params = config.gospa()?;
    let steps = config.scenario_for(config.seeds[0])?.num_steps;
    let mut summary = Vec::new();
    for kind in TrackerKind::ALL {
        let name = kind.name();
        let mut all: Vec<(u64, Vec<GospaRow>)> = Vec::new();
        for &s in &config.seeds {
            let dir = archive::seed_dir(out, s);
            let path = dir.join(format!("estimates_{name}.csv"));
            if !path.exists() {
                continue;
            }
            let truth = archive::read_truth_positions(&dir.join("truth.csv"), steps)?;
            let estimates = archive::read_estimates(&path, steps)?;
            let rows = gospa_rows(&truth, &estimates, &params)?;
            archive::write_gospa(&dir.join(format!("gospa_{name}.csv")), &rows)?;
            all.push((s, rows));
        }
        if all.is_empty() {
            continue;
        }
        for (s, rows) in &all {
            summary.push(summarize(name, s.to_string(), &rows.iter().collect::<Vec<_>>()));
        }
        let pooled: Vec<&GospaRow> = all.iter().flat_map(|(_, r)| r).collect();
        summary.push(summarize(name, "pooled".into(), &pooled));
    }
    if summary.is_empty() {
        return Err(CliError::Runtime(format!(
            "{}: no tracker estimates to evaluate",
            out.display()
        )));
    }
    archive::write_summary(&out.join("summary.csv"), &summary)?;
    Ok(summary)
}

/// simulate, track and evaluate in one go.
pub fn sweep(
    config: &RunConfig,
    out: &Path,
    trackers: &[TrackerKind],
    seed: Option<u64>,
    workers: Option<usize>,
) -> Result<Vec<SummaryRow>, CliError> {
    simulate(config, out, seed, workers)?;
    track(out, trackers, None, workers)?;
    evaluate(out)
}

/// Seeds as rows, trackers as columns.
pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut trackers: Vec<&str> = Vec::new();
    let mut seeds: Vec<&str> = Vec::new();
    for r in rows {
        if !trackers.contains(&r.tracker.as_str()) {
            trackers.push(&r.tracker);
        }
        if !seeds.contains(&r.seed.as_str()) {
            seeds.push(&r.seed);
        }
    }
    let mut s = format!("{:<8}", "seed");
    for t in &trackers {
        let _ = write!(s, " {t:>12}");
    }
    s.push('\n');
    for seed in seeds {
        let _ = write!(s, "{seed:<8}");
        for t in &trackers {
            match rows.iter().find(|r| r.seed == seed && r.tracker == *t) {
                Some(r) => {
                    let _ = write!(s, " {:>12.2}", r.mean_gospa);
                }
                None => {
                    let _ = write!(s, " {:>12}", "-");
                }
            }
        }
        s.push('\n');
    }
    s
}
