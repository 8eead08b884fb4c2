//! Periodic grids, sampled fields and their Fourier coefficients.
//!
//! The torus is `[−L, L)^d` sampled at `N` points per axis. Samples are stored
//! row-major with the last axis contiguous, so the flat index of
//! `(i_0, …, i_{d−1})` is `Σ i_a N^{d−1−a}`.

mod fft;
mod snapshot;

pub use fft::Spectral;
pub use snapshot::{read_snapshot, write_snapshot, SnapshotHeader};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniform periodic grid on `[−L, L)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    half_length: f64,
}

impl Grid {
    pub fn new(dim: usize, n_per_axis: usize, box_half_length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Param(format!("grid dimension must be 1, 2 or 3, got {dim}")));
        }
        if n_per_axis < 4 || !n_per_axis.is_power_of_two() {
            return Err(Error::Param(format!(
                "points per axis must be a power of two >= 4, got {n_per_axis}"
            )));
        }
        if !(box_half_length > 0.0 && box_half_length.is_finite()) {
            return Err(Error::Param(format!(
                "box half-length must be positive, got {box_half_length}"
            )));
        }
        Ok(Grid {
            dim,
            n: n_per_axis,
            half_length: box_half_length,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_per_axis(&self) -> usize {
        self.n
    }

    pub fn box_half_length(&self) -> f64 {
        self.half_length
    }

    /// Total number of samples `N^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacing `2L/N`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.n as f64
    }

    /// Cell volume `(2L/N)^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Box volume `(2L)^d`.
    pub fn volume(&self) -> f64 {
        (2.0 * self.half_length).powi(self.dim as i32)
    }

    /// Base wavenumber `π/L`.
    pub fn base_wavenumber(&self) -> f64 {
        std::f64::consts::PI / self.half_length
    }

    /// Largest `|k|²` resolved by the grid, `d·(πN/(2L))²`.
    pub fn max_wavenumber_sq(&self) -> f64 {
        let kmax = std::f64::consts::PI * self.n as f64 / (2.0 * self.half_length);
        self.dim as f64 * kmax * kmax
    }

    /// Multi-index of a flat index.
    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        let mut rem = flat;
        for a in (0..self.dim).rev() {
            idx[a] = rem % self.n;
            rem /= self.n;
        }
        idx
    }

    /// Physical coordinates of a flat index; unused axes are 0.
    pub fn coords(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let h = self.spacing();
        let mut xi = [0.0; 3];
        for a in 0..self.dim {
            xi[a] = -self.half_length + idx[a] as f64 * h;
        }
        xi
    }

    /// Signed integer frequency of a transform index along one axis, in `[−N/2, N/2)`.
    pub fn signed_frequency(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Wave vector of a flat transform index.
    pub fn wavevector(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let k0 = self.base_wavenumber();
        let mut k = [0.0; 3];
        for a in 0..self.dim {
            k[a] = k0 * self.signed_frequency(idx[a]) as f64;
        }
        k
    }

    /// `|k|²` for every flat transform index.
    pub fn wavenumber_sq_table(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let k = self.wavevector(i);
                k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
            })
            .collect()
    }

    /// Flat index of `−k` for every flat index `k` (modulo `N` per axis).
    pub fn negation_table(&self) -> Vec<usize> {
        (0..self.len())
            .map(|flat| {
                let idx = self.multi_index(flat);
                let mut out = 0;
                for &i in idx.iter().take(self.dim) {
                    out = out * self.n + (self.n - i) % self.n;
                }
                out
            })
            .collect()
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Real samples on a [`Grid`]. All samples are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite sample {} at index {i}",
                values[i]
            )));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        ScalarField {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        ScalarField {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f(ξ)` at every grid point.
    pub fn from_fn<F: Fn([f64; 3]) -> f64>(grid: Grid, f: F) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self::from_values(grid, values)
    }

    /// `offset + Σ a_j cos(k_j·ξ + φ_j)` over `terms` random wavevectors with
    /// integer frequencies up to `max_freq` per axis and amplitudes decaying like `1/(1+|m|²)`.
    pub fn random_smooth<R: rand::Rng>(
        grid: Grid,
        rng: &mut R,
        terms: usize,
        max_freq: i64,
        offset: f64,
    ) -> Result<Self> {
        let k0 = grid.base_wavenumber();
        let waves: Vec<([f64; 3], f64, f64)> = (0..terms)
            .map(|_| {
                let mut k = [0.0; 3];
                let mut m2 = 0.0;
                for ka in k.iter_mut().take(grid.dim) {
                    let m = rng.gen_range(-max_freq..=max_freq) as f64;
                    m2 += m * m;
                    *ka = m * k0;
                }
                let amp = rng.gen_range(-1.0..1.0) / (1.0 + m2);
                (k, amp, rng.gen_range(0.0..std::f64::consts::TAU))
            })
            .collect();
        Self::from_fn(grid, |xi| {
            offset
                + waves
                    .iter()
                    .map(|(k, a, ph)| a * (k[0] * xi[0] + k[1] * xi[1] + k[2] * xi[2] + ph).cos())
                    .sum::<f64>()
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `⟨f, g⟩_{L²}` by the grid rule, exact for trigonometric interpolants.
    pub fn inner(&self, other: &ScalarField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        Ok(s * self.grid.cell_volume())
    }

    /// `∫ f`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `‖f‖_{L^p}` by the grid rule.
    pub fn norm_lp(&self, p: f64) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
        (s * self.grid.cell_volume()).powf(1.0 / p)
    }

    /// `‖f‖_{L²}`.
    pub fn norm_l2(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v * v).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    /// Pointwise product.
    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, |a, b| a * b)
    }

    /// `a·self + b·other`.
    pub fn axpby(&self, a: f64, other: &ScalarField, b: f64) -> Result<ScalarField> {
        self.zip_with(other, |x, y| a * x + b * y)
    }

    pub fn scale(&self, a: f64) -> ScalarField {
        self.map(|v| a * v)
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &ScalarField, f: F) -> Result<ScalarField> {
        self.grid.check_same(&other.grid)?;
        Ok(ScalarField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Negative part `x⁻ = max(−x, 0)`, so that `x = x⁺ − x⁻`.
    pub fn negative_part(&self) -> ScalarField {
        self.map(|v| (-v).max(0.0))
    }

    /// Writes `index, ξ_0 … ξ_{d−1}, value` rows; intended for small grids.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["index".to_string()];
        for a in 0..self.grid.dim {
            header.push(format!("xi{a}"));
        }
        header.push("value".into());
        wtr.write_record(&header)?;
        for (i, v) in self.values.iter().enumerate() {
            let xi = self.grid.coords(i);
            let mut row = vec![i.to_string()];
            for x in xi.iter().take(self.grid.dim) {
                row.push(format!("{x:e}"));
            }
            row.push(format!("{v:e}"));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Fourier coefficients `F_k` of a real field, with `f(ξ) = Σ F_k e^{ik·(ξ+L)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    /// Wraps coefficients, enforcing Hermitian symmetry to `tol` relative to the largest one.
    pub fn from_coeffs(grid: Grid, coeffs: Vec<Complex64>, tol: f64) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        let neg = grid.negation_table();
        for (i, &j) in neg.iter().enumerate() {
            if (coeffs[i] - coeffs[j].conj()).norm() > tol * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::Domain(format!(
                    "coefficients are not Hermitian at index {i}"
                )));
            }
        }
        Ok(SpectralField { grid, coeffs })
    }

    pub(crate) fn new_unchecked(grid: Grid, coeffs: Vec<Complex64>) -> Self {
        SpectralField { grid, coeffs }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `Σ |F_k|²`.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(Grid::new(0, 8, 1.0).is_err());
        assert!(Grid::new(4, 8, 1.0).is_err());
        assert!(Grid::new(2, 6, 1.0).is_err());
        assert!(Grid::new(2, 2, 1.0).is_err());
        assert!(Grid::new(2, 8, 0.0).is_err());
        let g = Grid::new(3, 32, 8.0).unwrap();
        assert_eq!(g.len(), 32768);
        assert!((g.cell_volume() - 0.125).abs() < 1e-15);
        assert!((g.max_wavenumber_sq() - 3.0 * (std::f64::consts::PI * 2.0).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn index_round_trip() {
        let g = Grid::new(3, 8, 1.0).unwrap();
        let neg = g.negation_table();
        for flat in 0..g.len() {
            let m = g.multi_index(flat);
            assert_eq!(m[0] * 64 + m[1] * 8 + m[2], flat);
            assert_eq!(neg[neg[flat]], flat);
            let k = g.wavevector(flat);
            let kn = g.wavevector(neg[flat]);
            for a in 0..3 {
                let nyquist = g.signed_frequency(m[a]) == -4;
                assert!(nyquist || (k[a] + kn[a]).abs() < 1e-12);
            }
        }
        assert_eq!(g.coords(0), [-1.0, -1.0, -1.0]);
    }

    #[test]
    fn non_finite_samples_rejected() {
        let g = Grid::new(1, 4, 1.0).unwrap();
        assert!(ScalarField::from_values(g, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(matches!(
            ScalarField::from_values(g, vec![0.0; 3]),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn mismatched_grids_rejected() {
        let a = ScalarField::zeros(Grid::new(1, 4, 1.0).unwrap());
        let b = ScalarField::zeros(Grid::new(1, 8, 1.0).unwrap());
        assert!(matches!(a.inner(&b), Err(Error::GridMismatch(_))));
    }
}
