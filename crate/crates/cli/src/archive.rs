//! On-disk run archive.
//!
//! ```text
//! <out>/config.toml                  expanded run configuration
//! <out>/summary.csv                  mean GOSPA per tracker and seed, plus pooled rows
//! <out>/seed-<s>/frames.bin          raw array data (layout below)
//! <out>/seed-<s>/truth.csv
//! <out>/seed-<s>/estimates_<t>.csv   one row per PO and step, same columns for every tracker
//! <out>/seed-<s>/detections_<t>.csv  point measurements (detect-then-track trackers only)
//! <out>/seed-<s>/gospa_<t>.csv
//! <out>/seed-<s>/diagnostics_<t>.log the only file with wall-clock timing
//! ```
//!
//! `frames.bin` is the 8-byte magic `DTFRAME1`, four little-endian `u32`
//! (steps, tones, snapshots, elements) and then little-endian `f32`
//! `(re, im)` pairs with the element index varying fastest, followed by
//! snapshot, tone and step.
//!
//! Floats in the CSV files are written in shortest round-trip form, so
//! reading them back reproduces the exact values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use dtrack_core::baseline::PointMeasurement;
use dtrack_core::Complex64;
use dtrack_core::scenario::{GroundTruth, MeasurementFrame, SnapshotBlock};
use dtrack_core::state::KinematicState;
use dtrack_core::track::Estimate;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const FRAME_MAGIC: &[u8; 8] = b"DTFRAME1";

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

pub fn config_path(out: &Path) -> PathBuf {
    out.join("config.toml")
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

pub fn write_frames(path: &Path, frames: &[MeasurementFrame]) -> Result<(), CliError> {
    let (tones, elements, snapshots) = frames.first().map_or((0, 0, 0), MeasurementFrame::shape);
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let mut header = FRAME_MAGIC.to_vec();
    for n in [frames.len(), tones, snapshots, elements] {
        let n = u32::try_from(n).map_err(|_| CliError::Runtime("frame dimension exceeds u32".into()))?;
        header.extend_from_slice(&n.to_le_bytes());
    }
    w.write_all(&header).map_err(io_err(path))?;
    for frame in frames {
        if frame.shape() != (tones, elements, snapshots) {
            return Err(CliError::Runtime("frames differ in shape".into()));
        }
        for block in &frame.blocks {
            for z in block.as_slice() {
                w.write_all(&(z.re as f32).to_le_bytes()).map_err(io_err(path))?;
                w.write_all(&(z.im as f32).to_le_bytes()).map_err(io_err(path))?;
            }
        }
    }
    w.flush().map_err(io_err(path))
}

pub fn read_frames(path: &Path) -> Result<Vec<MeasurementFrame>, CliError> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(io_err(path))?)
        .read_to_end(&mut bytes)
        .map_err(io_err(path))?;
    let bad = |what: &str| CliError::Runtime(format!("{}: {what}", path.display()));
    if bytes.len() < 24 || &bytes[..8] != FRAME_MAGIC {
        return Err(bad("not a frame archive"));
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap()) as usize;
    let (steps, tones, snapshots, elements) = (dim(0), dim(1), dim(2), dim(3));
    let per_block = snapshots * elements;
    if bytes.len() != 24 + steps * tones * per_block * 8 {
        return Err(bad("payload size does not match the header"));
    }
    let mut values = bytes[24..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
    let mut frames = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mut blocks = Vec::with_capacity(tones);
        for _ in 0..tones {
            let data = (0..per_block)
                .map(|_| Complex64::new(values.next().unwrap(), values.next().unwrap()))
                .collect();
            blocks.push(SnapshotBlock::from_columns(elements, snapshots, data).map_err(|e| bad(&e.to_string()))?);
        }
        frames.push(MeasurementFrame { blocks });
    }
    Ok(frames)
}

fn join_values(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn split_values(s: &str, path: &Path) -> Result<Vec<f64>, CliError> {
    s.split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| CliError::Runtime(format!("{}: bad number `{t}`", path.display())))
        })
        .collect()
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    csv::Reader::from_path(path)
        .map_err(csv_err(path))?
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(csv_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub step: usize,
    pub object: usize,
    pub range: f64,
    pub depth: f64,
    pub range_rate: f64,
    pub depth_rate: f64,
    pub transmitting: bool,
    /// Space-separated per-tone powers.
    pub powers: String,
}

pub fn write_truth(path: &Path, truth: &GroundTruth) -> Result<(), CliError> {
    let rows = truth.steps.iter().enumerate().flat_map(|(step, points)| {
        points.iter().map(move |p| TruthRow {
            step,
            object: p.object,
            range: p.state.range,
            depth: p.state.depth,
            range_rate: p.state.range_rate,
            depth_rate: p.state.depth_rate,
            transmitting: p.transmitting,
            powers: join_values(&p.powers),
        })
    });
    write_rows(path, rows)
}

/// Per-step true positions for a run of `steps` steps.
pub fn read_truth_positions(path: &Path, steps: usize) -> Result<Vec<Vec<[f64; 2]>>, CliError> {
    let mut out = vec![Vec::new(); steps];
    for row in read_rows::<TruthRow>(path)? {
        out.get_mut(row.step)
            .ok_or_else(|| CliError::Runtime(format!("{}: step {} out of range", path.display(), row.step)))?
            .push([row.range, row.depth]);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub step: usize,
    pub label: u64,
    pub declared: bool,
    pub existence: f64,
    pub range: f64,
    pub depth: f64,
    pub range_rate: f64,
    pub depth_rate: f64,
    /// Space-separated MMSE powers; empty for trackers without powers.
    pub powers: String,
}

impl EstimateRow {
    pub fn new(step: usize, e: &Estimate) -> Self {
        Self {
            step,
            label: e.label,
            declared: e.declared,
            existence: e.existence,
            range: e.state.range,
            depth: e.state.depth,
            range_rate: e.state.range_rate,
            depth_rate: e.state.depth_rate,
            powers: join_values(&e.powers),
        }
    }

    pub fn to_estimate(&self, path: &Path) -> Result<Estimate, CliError> {
        Ok(Estimate {
            label: self.label,
            declared: self.declared,
            state: KinematicState::new(self.range, self.depth, self.range_rate, self.depth_rate),
            powers: split_values(&self.powers, path)?,
            existence: self.existence,
        })
    }
}

pub fn write_estimates(path: &Path, per_step: &[Vec<Estimate>]) -> Result<(), CliError> {
    let rows = per_step
        .iter()
        .enumerate()
        .flat_map(|(k, es)| es.iter().map(move |e| EstimateRow::new(k, e)));
    write_rows(path, rows)
}

/// Per-step estimate records for a run of `steps` steps.
pub fn read_estimates(path: &Path, steps: usize) -> Result<Vec<Vec<Estimate>>, CliError> {
    let mut out = vec![Vec::new(); steps];
    for row in read_rows::<EstimateRow>(path)? {
        let e = row.to_estimate(path)?;
        out.get_mut(row.step)
            .ok_or_else(|| CliError::Runtime(format!("{}: step {} out of range", path.display(), row.step)))?
            .push(e);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub step: usize,
    pub range: f64,
    pub depth: f64,
    pub score: f64,
}

pub fn write_detections(path: &Path, per_step: &[Vec<PointMeasurement>]) -> Result<(), CliError> {
    let rows = per_step.iter().enumerate().flat_map(|(step, zs)| {
        zs.iter().map(move |z| DetectionRow {
            step,
            range: z.range,
            depth: z.depth,
            score: z.score,
        })
    });
    write_rows(path, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GospaRow {
    pub step: usize,
    pub total: f64,
    pub localization: f64,
    pub missed: f64,
    pub false_alarms: f64,
    pub truth: usize,
    pub declared: usize,
}

pub fn write_gospa(path: &Path, rows: &[GospaRow]) -> Result<(), CliError> {
    write_rows(path, rows)
}

pub fn read_gospa(path: &Path) -> Result<Vec<GospaRow>, CliError> {
    read_rows(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub tracker: String,
    /// A seed, or `pooled`.
    pub seed: String,
    pub steps: usize,
    pub mean_gospa: f64,
    pub mean_localization: f64,
    pub mean_missed: f64,
    pub mean_false_alarms: f64,
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<(), CliError> {
    write_rows(path, rows)
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>, CliError> {
    read_rows(path)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_round_trip_at_single_precision() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("frames.bin");
        let mut frames = vec![MeasurementFrame::zeros(2, 3, 2); 2];
        let mut v = 0.0;
        for f in &mut frames {
            for b in &mut f.blocks {
                for z in b.as_mut_slice() {
                    v += 1.0;
                    *z = Complex64::new(v, -v / 4.0);
                }
            }
        }
        write_frames(&path, &frames).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 24 + 2 * 2 * 2 * 3 * 8);
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        // first payload value is step 0, tone 0, snapshot 0, element 0
        assert_eq!(&bytes[24..28], &1.0f32.to_le_bytes());
        assert_eq!(read_frames(&path).unwrap(), frames);
        std::fs::write(&path, &bytes[..30]).unwrap();
        assert!(read_frames(&path).is_err());
    }

    #[test]
    fn estimates_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        let e = Estimate {
            label: 7,
            declared: true,
            state: KinematicState::new(1234.567890123, 0.1 + 0.2, -2.5e-9, 1.0 / 3.0),
            powers: vec![0.02, 1e-300, 0.1 + 0.7],
            existence: 0.999_999_999_7,
        };
        let bare = Estimate { powers: vec![], ..e.clone() };
        let per_step = vec![vec![e], vec![], vec![bare]];
        write_estimates(&path, &per_step).unwrap();
        assert_eq!(read_estimates(&path, 3).unwrap(), per_step);
        assert!(read_estimates(&path, 2).is_err());
    }
}
