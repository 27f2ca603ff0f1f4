//! State-transition and birth models shared by both trackers.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{invalid, Result};
use crate::state::KinematicState;

/// Constant-rate motion in (range, depth) with white acceleration noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionModel {
    step_duration: f64,
    driving_variance: [f64; 2],
}

impl MotionModel {
    pub fn new(step_duration: f64, driving_variance: [f64; 2]) -> Result<Self> {
        if !(step_duration > 0.0) || !step_duration.is_finite() {
            return Err(invalid("step_duration", "must be positive and finite"));
        }
        if driving_variance.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(invalid("driving_variance", "entries must be finite and >= 0"));
        }
        Ok(Self {
            step_duration,
            driving_variance,
        })
    }

    pub fn step_duration(&self) -> f64 {
        self.step_duration
    }

    pub fn driving_variance(&self) -> [f64; 2] {
        self.driving_variance
    }

    pub fn transition_matrix(&self) -> [[f64; 4]; 4] {
        let d = self.step_duration;
        [
            [1.0, 0.0, d, 0.0],
            [0.0, 1.0, 0.0, d],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }

    pub fn noise_gain(&self) -> [[f64; 2]; 4] {
        let d = self.step_duration;
        let h = 0.5 * d * d;
        [[h, 0.0], [0.0, h], [d, 0.0], [0.0, d]]
    }

    /// `F x`.
    pub fn mean(&self, x: &KinematicState) -> KinematicState {
        let d = self.step_duration;
        KinematicState::new(
            x.range + d * x.range_rate,
            x.depth + d * x.depth_rate,
            x.range_rate,
            x.depth_rate,
        )
    }

    /// `W diag(q) W^T`.
    pub fn process_covariance(&self) -> [[f64; 4]; 4] {
        let w = self.noise_gain();
        let mut out = [[0.0; 4]; 4];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, entry) in row.iter_mut().enumerate() {
                *entry = (0..2)
                    .map(|k| w[r][k] * self.driving_variance[k] * w[c][k])
                    .sum();
            }
        }
        out
    }

    /// Draws `F x + W q` with `q ~ N(0, diag(driving_variance))`.
    pub fn predict<R: Rng + ?Sized>(&self, x: &KinematicState, rng: &mut R) -> KinematicState {
        let qr: f64 = rng.sample::<f64, _>(StandardNormal) * libm::sqrt(self.driving_variance[0]);
        let qd: f64 = rng.sample::<f64, _>(StandardNormal) * libm::sqrt(self.driving_variance[1]);
        let d = self.step_duration;
        let h = 0.5 * d * d;
        let m = self.mean(x);
        KinematicState::new(
            m.range + h * qr,
            m.depth + h * qd,
            m.range_rate + d * qr,
            m.depth_rate + d * qd,
        )
    }
}

/// How the two numbers of the power/noise Gamma chain map onto the
/// distribution. Both variants keep `E[next | prev] = prev`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaParameterization {
    /// shape `prev / c`, scale `c`: variance `prev * c`.
    ShapeOverSpread,
    /// shape `c`, scale `prev / c`: variance `prev^2 / c`.
    ShapeIsSpread,
}

/// Mean-preserving Gamma random walk on a positive quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaChain {
    spread: f64,
    parameterization: GammaParameterization,
}

impl GammaChain {
    pub fn new(spread: f64, parameterization: GammaParameterization) -> Result<Self> {
        if !(spread > 0.0) || !spread.is_finite() {
            return Err(invalid("spread", "Gamma spread parameter must be positive"));
        }
        Ok(Self {
            spread,
            parameterization,
        })
    }

    pub fn spread(&self) -> f64 {
        self.spread
    }

    pub fn parameterization(&self) -> GammaParameterization {
        self.parameterization
    }

    /// Conditional variance of the next value given `prev`.
    pub fn variance(&self, prev: f64) -> f64 {
        match self.parameterization {
            GammaParameterization::ShapeOverSpread => prev * self.spread,
            GammaParameterization::ShapeIsSpread => prev * prev / self.spread,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, prev: f64, rng: &mut R) -> f64 {
        transition_power(prev, self, rng)
    }
}

/// Draws the next power (or noise variance) given the previous one.
pub fn transition_power<R: Rng + ?Sized>(prev: f64, chain: &GammaChain, rng: &mut R) -> f64 {
    if !(prev > 0.0) {
        return 0.0;
    }
    let (shape, scale) = match chain.parameterization {
        GammaParameterization::ShapeOverSpread => (prev / chain.spread, chain.spread),
        GammaParameterization::ShapeIsSpread => (chain.spread, prev / chain.spread),
    };
    match Gamma::new(shape, scale) {
        Ok(g) => g.sample(rng),
        Err(_) => prev,
    }
}

/// `p_s * p_prev`: a PO that does not exist never comes back.
pub fn transition_existence(existence: f64, survival: f64) -> f64 {
    survival * existence
}

/// Region of interest: position box plus the velocity box of the birth prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Roi {
    pub range: (f64, f64),
    pub depth: (f64, f64),
    pub range_rate: (f64, f64),
    pub depth_rate: (f64, f64),
}

impl Roi {
    pub fn new(
        range: (f64, f64),
        depth: (f64, f64),
        range_rate: (f64, f64),
        depth_rate: (f64, f64),
    ) -> Result<Self> {
        for (name, (lo, hi)) in [
            ("roi.range", range),
            ("roi.depth", depth),
            ("roi.range_rate", range_rate),
            ("roi.depth_rate", depth_rate),
        ] {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(invalid(name, "bounds must be finite with lower < upper"));
            }
        }
        Ok(Self {
            range,
            depth,
            range_rate,
            depth_rate,
        })
    }

    pub fn contains_position(&self, range: f64, depth: f64) -> bool {
        range >= self.range.0 && range <= self.range.1 && depth >= self.depth.0 && depth <= self.depth.1
    }

    pub fn area(&self) -> f64 {
        (self.range.1 - self.range.0) * (self.depth.1 - self.depth.0)
    }
}

/// Axis-aligned cell of the birth partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellBounds {
    pub range: (f64, f64),
    pub depth: (f64, f64),
}

impl CellBounds {
    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.range.0 + self.range.1),
            0.5 * (self.depth.0 + self.depth.1),
        )
    }

    pub fn area(&self) -> f64 {
        (self.range.1 - self.range.0) * (self.depth.1 - self.depth.0)
    }
}

/// Regular range x depth partition of the ROI position box.
///
/// Cell `q = range_index * depth_cells + depth_index`. Cells are half-open
/// `[lo, hi)` except along the upper ROI edges, so every ROI point belongs to
/// exactly one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirthGrid {
    roi: Roi,
    range_cells: usize,
    depth_cells: usize,
}

impl BirthGrid {
    pub fn new(roi: Roi, range_cells: usize, depth_cells: usize) -> Result<Self> {
        if range_cells == 0 || depth_cells == 0 {
            return Err(invalid("grid", "need at least one cell per axis"));
        }
        Ok(Self {
            roi,
            range_cells,
            depth_cells,
        })
    }

    pub fn roi(&self) -> &Roi {
        &self.roi
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.range_cells, self.depth_cells)
    }

    pub fn len(&self) -> usize {
        self.range_cells * self.depth_cells
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn resolution(&self) -> (f64, f64) {
        (
            (self.roi.range.1 - self.roi.range.0) / self.range_cells as f64,
            (self.roi.depth.1 - self.roi.depth.0) / self.depth_cells as f64,
        )
    }

    pub fn cell(&self, index: usize) -> CellBounds {
        let (dr, dz) = self.resolution();
        let ri = index / self.depth_cells;
        let zi = index % self.depth_cells;
        let r0 = self.roi.range.0 + dr * ri as f64;
        let z0 = self.roi.depth.0 + dz * zi as f64;
        let r1 = if ri + 1 == self.range_cells {
            self.roi.range.1
        } else {
            r0 + dr
        };
        let z1 = if zi + 1 == self.depth_cells {
            self.roi.depth.1
        } else {
            z0 + dz
        };
        CellBounds {
            range: (r0, r1),
            depth: (z0, z1),
        }
    }

    pub fn center(&self, index: usize) -> (f64, f64) {
        self.cell(index).center()
    }

    fn axis_index(value: f64, lo: f64, hi: f64, cells: usize) -> Option<usize> {
        if !(value >= lo && value <= hi) {
            return None;
        }
        let idx = ((value - lo) / (hi - lo) * cells as f64) as usize;
        Some(idx.min(cells - 1))
    }

    /// Index of the cell containing the position, `None` outside the ROI.
    pub fn cell_of(&self, range: f64, depth: f64) -> Option<usize> {
        let ri = Self::axis_index(range, self.roi.range.0, self.roi.range.1, self.range_cells)?;
        let zi = Self::axis_index(depth, self.roi.depth.0, self.roi.depth.1, self.depth_cells)?;
        Some(ri * self.depth_cells + zi)
    }

    /// Length of a cell diagonal.
    pub fn cell_diagonal(&self) -> f64 {
        let (dr, dz) = self.resolution();
        libm::hypot(dr, dz)
    }
}

/// Poisson birth process restricted to the ROI, uniform in position and
/// velocity, uniform per-tone power in `[0, power_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirthModel {
    pub mean_births: f64,
    pub grid: BirthGrid,
    pub power_max: f64,
}

impl BirthModel {
    pub fn new(mean_births: f64, grid: BirthGrid, power_max: f64) -> Result<Self> {
        if !(mean_births > 0.0) || !mean_births.is_finite() {
            return Err(invalid("birth_mean", "must be positive and finite"));
        }
        if !(power_max > 0.0) || !power_max.is_finite() {
            return Err(invalid("power_prior_max", "must be positive and finite"));
        }
        Ok(Self {
            mean_births,
            grid,
            power_max,
        })
    }

    /// Birth intensity per unit area in the position plane, `mu_B f_B(x)`.
    pub fn intensity(&self) -> f64 {
        self.mean_births / self.grid.roi().area()
    }

    /// Expected births `mu_B,n` in one cell.
    pub fn cell_mean(&self, index: usize) -> f64 {
        self.mean_births * self.grid.cell(index).area() / self.grid.roi().area()
    }

    /// Birth probability `mu / (mu + 1)` of a cell's new PO.
    pub fn cell_probability(&self, index: usize) -> f64 {
        let mu = self.cell_mean(index);
        mu / (mu + 1.0)
    }

    /// Draws a new PO's state and powers uniformly inside a cell.
    pub fn sample_in_cell<R: Rng + ?Sized>(
        &self,
        index: usize,
        num_tones: usize,
        rng: &mut R,
        powers: &mut Vec<f64>,
    ) -> KinematicState {
        let b = self.grid.cell(index);
        let roi = self.grid.roi();
        let x = KinematicState::new(
            rng.random_range(b.range.0..b.range.1),
            rng.random_range(b.depth.0..b.depth.1),
            rng.random_range(roi.range_rate.0..roi.range_rate.1),
            rng.random_range(roi.depth_rate.0..roi.depth_rate.1),
        );
        for _ in 0..num_tones {
            powers.push(rng.random_range(0.0..self.power_max));
        }
        x
    }
}

/// Per-cell birth summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirthCell {
    pub index: usize,
    pub bounds: CellBounds,
    pub expected_births: f64,
    pub probability: f64,
    /// Uniform position density inside the cell (1 / area).
    pub density: f64,
}

pub fn birth_cells(model: &BirthModel) -> Vec<BirthCell> {
    (0..model.grid.len())
        .map(|index| {
            let bounds = model.grid.cell(index);
            BirthCell {
                index,
                bounds,
                expected_births: model.cell_mean(index),
                probability: model.cell_probability(index),
                density: 1.0 / bounds.area(),
            }
        })
        .collect()
}
