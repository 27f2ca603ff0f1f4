//! Bernoulli-Gaussian snapshot likelihood.
//!
//! Each snapshot of a tone is `CN(0, C)` with
//! `C = Σ_n w_n γ_n a_n a_n^H + η I`. The covariance is factorized once;
//! adding a single PO on top of it is then scored with the rank-one identity
//!
//! ```text
//! u = C^-1 a,  q = a^H u
//! Δ = -J ln(1 + γ q) + γ / (1 + γ q) Σ_j |u^H z_j|^2
//! ```
//!
//! which costs one triangular solve per candidate steering vector.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot_conj, norm_sqr, CMatrix, Cholesky};
use crate::scenario::SnapshotBlock;

/// One signal term of the covariance: `weight * power * a a^H`.
#[derive(Debug, Clone, Copy)]
pub struct Contributor<'a> {
    /// Existence weight in `[0, 1]` (binary `r`, or its expectation).
    pub weight: f64,
    pub power: f64,
    pub steering: &'a [Complex64],
}

/// Factorized Hermitian positive-definite snapshot covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    chol: Cholesky,
    log_det: f64,
}

impl CovarianceModel {
    pub fn from_matrix(matrix: &CMatrix) -> Result<Self> {
        if matrix.as_slice().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("covariance"));
        }
        let chol = Cholesky::factor(matrix)?;
        let log_det = chol.log_det();
        Ok(Self { chol, log_det })
    }

    pub fn dim(&self) -> usize {
        self.chol.dim()
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    /// The dense matrix `L L^H`.
    pub fn matrix(&self) -> CMatrix {
        self.chol.reconstruct()
    }

    /// `z^H C^-1 z`.
    pub fn quadratic_form(&self, z: &[Complex64]) -> f64 {
        let mut w = z.to_vec();
        self.chol.forward_solve_in_place(&mut w);
        norm_sqr(&w)
    }
}

/// Dense `Σ w γ a a^H + η I` (only validated, not factorized).
pub fn covariance_matrix(
    dim: usize,
    contributors: &[Contributor<'_>],
    noise_power: f64,
) -> Result<CMatrix> {
    if !(noise_power > 0.0) || !noise_power.is_finite() {
        return Err(invalid("noise_power", "must be positive and finite"));
    }
    let mut c = CMatrix::scaled_identity(dim, noise_power);
    for contributor in contributors {
        if !contributor.weight.is_finite() || !contributor.power.is_finite() {
            return Err(Error::NonFinite("contributor weight/power"));
        }
        if !(0.0..=1.0).contains(&contributor.weight) {
            return Err(invalid("weight", "existence weight must lie in [0, 1]"));
        }
        if contributor.power < 0.0 {
            return Err(invalid("power", "power must be non-negative"));
        }
        if contributor.steering.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "steering vector has {} entries, expected {dim}",
                contributor.steering.len()
            )));
        }
        if contributor
            .steering
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite("steering vector"));
        }
        let scale = contributor.weight * contributor.power;
        if scale > 0.0 {
            c.add_outer(contributor.steering, scale);
        }
    }
    Ok(c)
}

pub fn assemble_covariance(
    dim: usize,
    contributors: &[Contributor<'_>],
    noise_power: f64,
) -> Result<CovarianceModel> {
    CovarianceModel::from_matrix(&covariance_matrix(dim, contributors, noise_power)?)
}

fn check_block(block: &SnapshotBlock, model: &CovarianceModel) -> Result<()> {
    if block.num_elements() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "snapshot block has {} elements, covariance is {}x{}",
            block.num_elements(),
            model.dim(),
            model.dim()
        )));
    }
    Ok(())
}

/// `Σ_j [-M ln π - ln det C - z_j^H C^-1 z_j]`.
pub fn log_likelihood(block: &SnapshotBlock, model: &CovarianceModel) -> Result<f64> {
    check_block(block, model)?;
    let m = model.dim() as f64;
    let per_snapshot_const = -m * libm::log(PI) - model.log_det;
    let mut total = 0.0;
    let mut scratch = vec![Complex64::new(0.0, 0.0); model.dim()];
    for j in 0..block.num_snapshots() {
        scratch.copy_from_slice(block.snapshot(j));
        model.chol.forward_solve_in_place(&mut scratch);
        total += per_snapshot_const - norm_sqr(&scratch);
    }
    Ok(total)
}

/// Snapshots whitened by the base covariance factor, `w_j = L^-1 z_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    dim: usize,
    snapshots: usize,
    whitened: Vec<Complex64>,
    scatter: Option<CMatrix>,
}

impl SufficientStats {
    pub fn new(block: &SnapshotBlock, model: &CovarianceModel) -> Result<Self> {
        check_block(block, model)?;
        let dim = model.dim();
        let mut whitened = block.as_slice().to_vec();
        for w in whitened.chunks_exact_mut(dim) {
            model.chol.forward_solve_in_place(w);
        }
        Ok(Self {
            dim,
            snapshots: block.num_snapshots(),
            whitened,
            scatter: None,
        })
    }

    /// Also keeps the raw scatter matrix `Σ_j z_j z_j^H` for dense scoring.
    pub fn with_scatter(block: &SnapshotBlock, model: &CovarianceModel) -> Result<Self> {
        let mut stats = Self::new(block, model)?;
        let mut scatter = CMatrix::zeros(stats.dim);
        for j in 0..block.num_snapshots() {
            scatter.add_outer(block.snapshot(j), 1.0);
        }
        stats.scatter = Some(scatter);
        Ok(stats)
    }

    pub fn num_snapshots(&self) -> usize {
        self.snapshots
    }

    pub fn whitened(&self, j: usize) -> &[Complex64] {
        &self.whitened[j * self.dim..(j + 1) * self.dim]
    }

    pub fn scatter(&self) -> Option<&CMatrix> {
        self.scatter.as_ref()
    }
}

/// Per-candidate quantities of the rank-one update: `q = a^H C^-1 a` and
/// `energy = Σ_j |a^H C^-1 z_j|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rank1Projection {
    pub gain: f64,
    pub energy: f64,
    pub snapshots: usize,
}

impl Rank1Projection {
    /// `ln f(Z | C + γ a a^H) - ln f(Z | C)`.
    #[inline]
    pub fn delta(&self, power: f64) -> Result<f64> {
        if !(power >= 0.0) {
            return Err(invalid("power", "power must be non-negative"));
        }
        if power == 0.0 {
            return Ok(0.0);
        }
        let denom = 1.0 + power * self.gain;
        if !(denom > 0.0) || !denom.is_finite() {
            return Err(Error::Numerical(format!(
                "1 + γq = {denom} is not positive (γ = {power}, q = {})",
                self.gain
            )));
        }
        Ok(-(self.snapshots as f64) * libm::log(denom) + power / denom * self.energy)
    }
}

/// Computes the projection of candidate `a`. `scratch` must hold `M`
/// entries and is overwritten.
#[inline]
pub fn project(
    model: &CovarianceModel,
    stats: &SufficientStats,
    steering: &[Complex64],
    scratch: &mut [Complex64],
) -> Rank1Projection {
    scratch.copy_from_slice(steering);
    model.chol.forward_solve_in_place(scratch);
    let gain = norm_sqr(scratch);
    let energy = (0..stats.snapshots)
        .map(|j| dot_conj(scratch, stats.whitened(j)).norm_sqr())
        .sum();
    Rank1Projection {
        gain,
        energy,
        snapshots: stats.snapshots,
    }
}

/// Log-likelihood change from adding `power * a a^H` to the base covariance.
pub fn rank1_delta_loglik(
    model: &CovarianceModel,
    stats: &SufficientStats,
    steering: &[Complex64],
    power: f64,
) -> Result<f64> {
    if steering.len() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "steering vector has {} entries, covariance is {}x{}",
            steering.len(),
            model.dim(),
            model.dim()
        )));
    }
    let mut scratch = vec![Complex64::new(0.0, 0.0); model.dim()];
    project(model, stats, steering, &mut scratch).delta(power)
}
