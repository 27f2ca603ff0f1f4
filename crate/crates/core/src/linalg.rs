//! Small dense complex linear algebra: Hermitian matrices, Cholesky
//! factorization and triangular solves.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Square complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn scaled_identity(n: usize, scale: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(scale, 0.0);
        }
        m
    }

    pub fn from_row_major(n: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch(alloc::format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.n + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.data[row * self.n + col] = value;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// Adds `scale * v v^H`.
    pub fn add_outer(&mut self, v: &[Complex64], scale: f64) {
        let n = self.n;
        debug_assert_eq!(v.len(), n);
        for r in 0..n {
            let vr = v[r] * scale;
            let row = &mut self.data[r * n..(r + 1) * n];
            for (c, entry) in row.iter_mut().enumerate() {
                *entry += vr * v[c].conj();
            }
        }
    }

    /// Adds `scale * v v^H` to the lower triangle only; finish with
    /// [`CMatrix::mirror_lower`].
    pub fn add_outer_lower(&mut self, v: &[Complex64], scale: f64) {
        let n = self.n;
        debug_assert_eq!(v.len(), n);
        for r in 0..n {
            let vr = v[r] * scale;
            let row = &mut self.data[r * n..r * n + r + 1];
            for (entry, vc) in row.iter_mut().zip(v) {
                *entry += vr * vc.conj();
            }
        }
    }

    /// Overwrites the strict upper triangle with the conjugate of the lower
    /// one and zeroes the imaginary part of the diagonal.
    pub fn mirror_lower(&mut self) {
        let n = self.n;
        for r in 0..n {
            self.data[r * n + r].im = 0.0;
            for c in r + 1..n {
                self.data[r * n + c] = self.data[c * n + r].conj();
            }
        }
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &CMatrix, scale: f64) {
        assert_eq!(self.n, other.n, "matrix dimensions differ");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * scale;
        }
    }

    pub fn add_diagonal(&mut self, value: f64) {
        for i in 0..self.n {
            self.data[i * self.n + i] += value;
        }
    }

    /// Largest absolute deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.n {
            for c in 0..=r {
                let d = (self.get(r, c) - self.get(c, r).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L L^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    l: CMatrix,
}

impl Cholesky {
    /// Factorizes a Hermitian positive-definite matrix. Only the lower
    /// triangle of `a` is read.
    pub fn factor(a: &CMatrix) -> Result<Self> {
        let n = a.dim();
        let mut l = CMatrix::zeros(n);
        for j in 0..n {
            let mut diag = a.get(j, j).re;
            for k in 0..j {
                diag -= l.get(j, k).norm_sqr();
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let ljj = libm::sqrt(diag);
            l.set(j, j, Complex64::new(ljj, 0.0));
            let inv = 1.0 / ljj;
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                let (ri, rj) = (i * n, j * n);
                for k in 0..j {
                    s -= l.data[ri + k] * l.data[rj + k].conj();
                }
                l.set(i, j, s * inv);
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.dim()
    }

    pub fn factor_matrix(&self) -> &CMatrix {
        &self.l
    }

    /// `ln det A = 2 Σ ln L_ii`.
    pub fn log_det(&self) -> f64 {
        (0..self.l.dim())
            .map(|i| libm::log(self.l.get(i, i).re))
            .sum::<f64>()
            * 2.0
    }

    /// Solves `L y = b` in place.
    #[inline]
    pub fn forward_solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.l.dim();
        debug_assert_eq!(b.len(), n);
        let data = &self.l.data;
        for i in 0..n {
            let row = &data[i * n..i * n + i];
            let mut s = b[i];
            for (lik, bk) in row.iter().zip(b[..i].iter()) {
                s -= *lik * *bk;
            }
            b[i] = s / data[i * n + i].re;
        }
    }

    /// Solves `L^H x = y` in place.
    pub fn backward_solve_in_place(&self, y: &mut [Complex64]) {
        let n = self.l.dim();
        let data = &self.l.data;
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= data[k * n + i].conj() * y[k];
            }
            y[i] = s / data[i * n + i].re;
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        self.forward_solve_in_place(b);
        self.backward_solve_in_place(b);
    }

    /// Reconstructs `L L^H`.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.l.dim();
        let mut a = CMatrix::zeros(n);
        for r in 0..n {
            for c in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..=r.min(c) {
                    s += self.l.get(r, k) * self.l.get(c, k).conj();
                }
                a.set(r, c, s);
            }
        }
        a
    }
}

/// `Σ_k conj(a_k) b_k`.
#[inline]
pub fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    Complex64::new(re, im)
}

#[inline]
pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample_pd() -> CMatrix {
        let mut a = CMatrix::scaled_identity(3, 0.5);
        a.add_outer(&[c(1.0, 0.5), c(-0.3, 0.2), c(0.1, -1.0)], 2.0);
        a.add_outer(&[c(0.0, 1.0), c(0.7, 0.0), c(0.2, 0.2)], 1.0);
        a
    }

    #[test]
    fn lower_outer_then_mirror_equals_full() {
        let v = [c(1.0, 0.5), c(-0.3, 0.2), c(0.1, -1.0)];
        let w = [c(0.0, 1.0), c(0.7, 0.0), c(0.2, 0.2)];
        let mut full = CMatrix::scaled_identity(3, 0.5);
        full.add_outer(&v, 2.0);
        full.add_outer(&w, 0.3);
        let mut half = CMatrix::scaled_identity(3, 0.5);
        half.add_outer_lower(&v, 2.0);
        half.add_outer_lower(&w, 0.3);
        half.mirror_lower();
        for (a, b) in full.as_slice().iter().zip(half.as_slice()) {
            assert!((a - b).norm() < 1e-15);
        }
        assert_eq!(half.hermitian_defect(), 0.0);
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = sample_pd();
        let chol = Cholesky::factor(&a).unwrap();
        let back = chol.reconstruct();
        for r in 0..3 {
            for col in 0..3 {
                assert!((back.get(r, col) - a.get(r, col)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn solve_matches_multiplication() {
        let a = sample_pd();
        let chol = Cholesky::factor(&a).unwrap();
        let b = [c(1.0, 0.0), c(0.0, -2.0), c(0.5, 0.5)];
        let mut x = b;
        chol.solve_in_place(&mut x);
        for r in 0..3 {
            let mut s = c(0.0, 0.0);
            for k in 0..3 {
                s += a.get(r, k) * x[k];
            }
            assert!((s - b[r]).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut a = CMatrix::scaled_identity(2, 1.0);
        a.set(1, 1, c(-1.0, 0.0));
        assert_eq!(
            Cholesky::factor(&a),
            Err(Error::NotPositiveDefinite { pivot: 1 })
        );
    }

    #[test]
    fn log_det_of_scaled_identity() {
        let chol = Cholesky::factor(&CMatrix::scaled_identity(3, 2.0)).unwrap();
        assert!((chol.log_det() - 3.0 * core::f64::consts::LN_2).abs() < 1e-14);
    }
}
