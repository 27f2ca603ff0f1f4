//! Grid matching pursuit over the steering dictionary.
//!
//! Scores are fused incoherently: cell `q` scores `Σ_i Σ_j |a_iq^H r_ij|^2`.
//! After a cell is selected its projection is removed from every snapshot
//! residual of every tone separately.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::dynamics::BirthGrid;
use crate::error::{Error, Result};
use crate::linalg::dot_conj;
use crate::scenario::MeasurementFrame;
use crate::steering::SteeringField;

/// Unit-norm steering vectors at every grid cell center, per tone.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    grid: BirthGrid,
    elements: usize,
    /// Per tone, `cells x M` (cell-major).
    atoms: Vec<Vec<Complex64>>,
}

impl Dictionary {
    pub fn grid(&self) -> &BirthGrid {
        &self.grid
    }

    pub fn num_cells(&self) -> usize {
        self.grid.len()
    }

    pub fn num_tones(&self) -> usize {
        self.atoms.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements
    }

    pub fn atom(&self, tone: usize, cell: usize) -> &[Complex64] {
        &self.atoms[tone][cell * self.elements..(cell + 1) * self.elements]
    }
}

pub fn build_dictionary(field: &SteeringField, grid: &BirthGrid) -> Result<Dictionary> {
    let q = grid.len();
    let m = field.num_elements();
    let atoms = (0..field.num_tones())
        .map(|tone| {
            let mut column = vec![Complex64::new(0.0, 0.0); q * m];
            for (cell, out) in column.chunks_exact_mut(m).enumerate() {
                let (r, z) = grid.center(cell);
                field.steering_into(r, z, tone, out)?;
            }
            Ok(column)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dictionary {
        grid: *grid,
        elements: m,
        atoms,
    })
}

/// One selected grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub cell: usize,
    pub range: f64,
    pub depth: f64,
    /// Per tone, `(1/J) Σ_j |a^H r_j|^2` at selection time.
    pub powers: Vec<f64>,
    /// Fused score of the cell when it was selected.
    pub score: f64,
}

#[cfg(feature = "parallel")]
fn for_each_cell<F>(data: &mut [Complex64], width: usize, f: F)
where
    F: Fn(usize, &mut [Complex64]) + Sync + Send,
{
    use rayon::prelude::*;
    data.par_chunks_mut(width)
        .enumerate()
        .for_each(|(q, c)| f(q, c));
}

#[cfg(not(feature = "parallel"))]
fn for_each_cell<F>(data: &mut [Complex64], width: usize, f: F)
where
    F: Fn(usize, &mut [Complex64]),
{
    data.chunks_exact_mut(width)
        .enumerate()
        .for_each(|(q, c)| f(q, c));
}

/// Runs `k` pursuit iterations and returns the detections in selection
/// order. A cell is selected at most once; ties go to the lowest index.
pub fn matching_pursuit(frame: &MeasurementFrame, dict: &Dictionary, k: usize) -> Result<Vec<Detection>> {
    let mut residual_energy = Vec::new();
    matching_pursuit_traced(frame, dict, k, &mut residual_energy)
}

/// Same as [`matching_pursuit`], also recording the per-tone residual
/// energy before the first and after every iteration.
pub fn matching_pursuit_traced(
    frame: &MeasurementFrame,
    dict: &Dictionary,
    k: usize,
    residual_energy: &mut Vec<Vec<f64>>,
) -> Result<Vec<Detection>> {
    let cells = dict.num_cells();
    if k == 0 {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: "need at least one iteration".into(),
        });
    }
    if k > cells {
        return Err(Error::TooManyDetections {
            requested: k,
            cells,
        });
    }
    frame.validate()?;
    let (tones, m, j_count) = frame.shape();
    if tones != dict.num_tones() || m != dict.num_elements() {
        return Err(Error::DimensionMismatch(format!(
            "frame has {tones} tones x {m} elements, dictionary {} x {}",
            dict.num_tones(),
            dict.num_elements()
        )));
    }

    let mut residuals: Vec<Vec<Complex64>> =
        frame.blocks.iter().map(|b| b.as_slice().to_vec()).collect();
    // correlations a_q^H r_j, per tone laid out cells x J
    let mut corr: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); cells * j_count]; tones];
    for tone in 0..tones {
        let res = &residuals[tone];
        for_each_cell(&mut corr[tone], j_count, |q, out| {
            let atom = dict.atom(tone, q);
            for (j, o) in out.iter_mut().enumerate() {
                *o = dot_conj(atom, &res[j * m..(j + 1) * m]);
            }
        });
    }
    let energy = |res: &Vec<Vec<Complex64>>| -> Vec<f64> {
        res.iter()
            .map(|r| r.iter().map(|z| z.norm_sqr()).sum())
            .collect()
    };
    residual_energy.clear();
    residual_energy.push(energy(&residuals));

    let mut selected = vec![false; cells];
    let mut scores = vec![0.0f64; cells];
    let mut detections = Vec::with_capacity(k);
    for _ in 0..k {
        scores.iter_mut().for_each(|s| *s = 0.0);
        for c in &corr {
            for (s, row) in scores.iter_mut().zip(c.chunks_exact(j_count)) {
                *s += row.iter().map(|z| z.norm_sqr()).sum::<f64>();
            }
        }
        let mut best = usize::MAX;
        let mut best_score = f64::NEG_INFINITY;
        for (q, &s) in scores.iter().enumerate() {
            if !selected[q] && s > best_score {
                best = q;
                best_score = s;
            }
        }
        selected[best] = true;
        let mut powers = Vec::with_capacity(tones);
        for tone in 0..tones {
            let coeffs: Vec<Complex64> = corr[tone][best * j_count..(best + 1) * j_count].to_vec();
            powers.push(coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>() / j_count as f64);
            let atom = dict.atom(tone, best);
            for (j, c) in coeffs.iter().enumerate() {
                for (r, a) in residuals[tone][j * m..(j + 1) * m].iter_mut().zip(atom) {
                    *r -= a * c;
                }
            }
            for_each_cell(&mut corr[tone], j_count, |q, out| {
                let g = dot_conj(dict.atom(tone, q), atom);
                for (o, c) in out.iter_mut().zip(&coeffs) {
                    *o -= g * c;
                }
            });
        }
        residual_energy.push(energy(&residuals));
        let (range, depth) = dict.grid.center(best);
        detections.push(Detection {
            cell: best,
            range,
            depth,
            powers,
            score: best_score.max(0.0),
        });
    }
    Ok(detections)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Roi;
    use crate::scenario::SnapshotBlock;
    use crate::steering::{ArrayGeometry, WaveguideEnv};

    fn small_grid() -> BirthGrid {
        BirthGrid::new(
            Roi::new((0.0, 2000.0), (0.0, 100.0), (-4.0, 4.0), (-1.0, 1.0)).unwrap(),
            8,
            5,
        )
        .unwrap()
    }

    fn field() -> SteeringField {
        SteeringField::isovelocity(
            ArrayGeometry::uniform(5.0, 10.0, 10).unwrap(),
            WaveguideEnv::new(100.0, 1500.0).unwrap(),
            vec![120.0, 250.0],
        )
        .unwrap()
    }

    fn frame_from_atom(dict: &Dictionary, cell: usize, amplitudes: &[Complex64]) -> MeasurementFrame {
        let m = dict.num_elements();
        let blocks = (0..dict.num_tones())
            .map(|tone| {
                let mut data = Vec::new();
                for rho in amplitudes {
                    data.extend(dict.atom(tone, cell).iter().map(|a| a * rho));
                }
                SnapshotBlock::from_columns(m, amplitudes.len(), data).unwrap()
            })
            .collect();
        MeasurementFrame { blocks }
    }

    #[test]
    fn dictionary_columns() {
        let f = field();
        let d = build_dictionary(&f, &small_grid()).unwrap();
        assert_eq!(d.num_cells(), 40);
        let (r, z) = small_grid().center(17);
        let a = f
            .steering_vector(&crate::KinematicState::at_rest(r, z), 1)
            .unwrap();
        assert_eq!(d.atom(1, 17), a.as_slice());
        for q in 0..40 {
            let n: f64 = d.atom(0, q).iter().map(|z| z.norm_sqr()).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
        let one = BirthGrid::new(*small_grid().roi(), 1, 1).unwrap();
        let d1 = build_dictionary(&f, &one).unwrap();
        let (r, z) = one.center(0);
        assert_eq!(
            d1.atom(0, 0),
            f.steering_vector(&crate::KinematicState::at_rest(r, z), 0)
                .unwrap()
                .as_slice()
        );
    }

    #[test]
    fn exact_recovery_of_on_grid_source() {
        let d = build_dictionary(&field(), &small_grid()).unwrap();
        let rho = [
            Complex64::new(1.5, -0.2),
            Complex64::new(-0.3, 0.9),
            Complex64::new(0.1, 0.4),
        ];
        let frame = frame_from_atom(&d, 23, &rho);
        let dets = matching_pursuit(&frame, &d, 3).unwrap();
        assert_eq!(dets[0].cell, 23);
        let expected = rho.iter().map(|r| r.norm_sqr()).sum::<f64>() / 3.0;
        for p in &dets[0].powers {
            assert!((p - expected).abs() < 1e-12 * expected);
        }
        // nothing left after the exact projection
        assert!(dets[1].score < 1e-20);
    }

    #[test]
    fn zero_frame_returns_lowest_cells() {
        let d = build_dictionary(&field(), &small_grid()).unwrap();
        let frame = MeasurementFrame::zeros(2, 10, 2);
        let dets = matching_pursuit(&frame, &d, 4).unwrap();
        assert_eq!(dets.iter().map(|d| d.cell).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        assert!(dets.iter().all(|d| d.score == 0.0));
    }

    #[test]
    fn too_many_iterations() {
        let d = build_dictionary(&field(), &small_grid()).unwrap();
        let frame = MeasurementFrame::zeros(2, 10, 1);
        assert_eq!(
            matching_pursuit(&frame, &d, 41),
            Err(Error::TooManyDetections {
                requested: 41,
                cells: 40
            })
        );
        assert!(matching_pursuit(&frame, &d, 0).is_err());
        assert!(matching_pursuit(&MeasurementFrame::zeros(1, 10, 1), &d, 1).is_err());
    }
}
