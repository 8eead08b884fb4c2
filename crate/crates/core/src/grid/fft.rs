use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{Grid, ScalarField, SpectralField};
use crate::error::{Error, Result};

/// Transform plan and Fourier-multiplier calculus for one grid.
///
/// The forward transform carries the factor `1/N^d`, so that
/// `‖f‖²_{L²} = (2L)^d Σ_k |F_k|²`.
///
/// Plans are immutable and shareable; transpose buffers are kept per thread.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    k_sq: Arc<Vec<f64>>,
    neg: Arc<Vec<usize>>,
}

thread_local! {
    static PACKED: RefCell<Vec<Complex64>> = const { RefCell::new(Vec::new()) };
    static SCRATCH: RefCell<(Vec<Complex64>, Vec<Complex64>)> = const { RefCell::new((Vec::new(), Vec::new())) };
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.n_per_axis();
        Spectral {
            grid,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            k_sq: Arc::new(grid.wavenumber_sq_table()),
            neg: Arc::new(grid.negation_table()),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `|k|²` per flat transform index.
    pub fn k_sq(&self) -> &[f64] {
        &self.k_sq
    }

    /// Flat index of `−k` per flat transform index.
    pub fn negation(&self) -> &[usize] {
        &self.neg
    }

    /// Unnormalized in-place multidimensional transform.
    pub fn fft_in_place(&self, data: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inverse } else { &self.forward };
        let n = self.grid.n_per_axis();
        let dim = self.grid.dim();
        SCRATCH.with(|cell| {
            let (scratch, lines) = &mut *cell.borrow_mut();
            scratch.resize(plan.get_inplace_scratch_len(), Complex64::new(0.0, 0.0));
            lines.resize(data.len(), Complex64::new(0.0, 0.0));
            for axis in 0..dim {
                let stride = n.pow((dim - 1 - axis) as u32);
                if stride == 1 {
                    plan.process_with_scratch(data, scratch);
                    continue;
                }
                let block = n * stride;
                // Line-major loops: each line is written contiguously while the
                // strided reads stay within a few cache lines.
                for (src, dst) in data.chunks(block).zip(lines.chunks_mut(block)) {
                    for (i, line) in dst.chunks_mut(n).enumerate() {
                        for (j, v) in line.iter_mut().enumerate() {
                            *v = src[j * stride + i];
                        }
                    }
                }
                plan.process_with_scratch(lines, scratch);
                for (src, dst) in lines.chunks(block).zip(data.chunks_mut(block)) {
                    for (i, line) in src.chunks(n).enumerate() {
                        for (j, v) in line.iter().enumerate() {
                            dst[j * stride + i] = *v;
                        }
                    }
                }
            }
        });
    }

    /// Forward transform of raw real samples into normalized coefficients.
    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft_in_place(&mut buf, false);
        let scale = 1.0 / self.grid.len() as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    /// Transforms two real sample arrays with one complex transform.
    pub fn forward_real_pair(&self, a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut fa = vec![Complex64::new(0.0, 0.0); a.len()];
        let mut fb = vec![Complex64::new(0.0, 0.0); a.len()];
        self.forward_real_pair_into(a, b, &mut fa, &mut fb);
        (fa, fb)
    }

    /// [`Spectral::forward_real_pair`] into caller-owned buffers.
    pub fn forward_real_pair_into(&self, a: &[f64], b: &[f64], fa: &mut [Complex64], fb: &mut [Complex64]) {
        let mut z = PACKED.with(|c| std::mem::take(&mut *c.borrow_mut()));
        z.clear();
        z.extend(a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)));
        self.fft_in_place(&mut z, false);
        let scale = 0.5 / self.grid.len() as f64;
        for (k, &mk) in self.neg.iter().enumerate() {
            let zk = z[k];
            let zm = z[mk].conj();
            fa[k] = (zk + zm) * scale;
            let d = (zk - zm) * scale;
            fb[k] = Complex64::new(d.im, -d.re);
        }
        PACKED.with(|c| *c.borrow_mut() = z);
    }

    /// Inverse transform of normalized coefficients, keeping the real part.
    pub fn inverse_real(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut out = vec![0.0; coeffs.len()];
        self.inverse_real_into(coeffs, &mut out);
        out
    }

    /// [`Spectral::inverse_real`] into a caller-owned buffer.
    pub fn inverse_real_into(&self, coeffs: &[Complex64], out: &mut [f64]) {
        let mut buf = PACKED.with(|c| std::mem::take(&mut *c.borrow_mut()));
        buf.clear();
        buf.extend_from_slice(coeffs);
        self.fft_in_place(&mut buf, true);
        for (o, c) in out.iter_mut().zip(&buf) {
            *o = c.re;
        }
        PACKED.with(|c| *c.borrow_mut() = buf);
    }

    fn check(&self, g: &Grid) -> Result<()> {
        if *g == self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "plan for {:?} applied to {:?}",
                self.grid, g
            )))
        }
    }

    pub fn transform(&self, f: &ScalarField) -> Result<SpectralField> {
        self.check(f.grid())?;
        Ok(SpectralField::new_unchecked(self.grid, self.forward_real(f.values())))
    }

    pub fn inverse_transform(&self, f: &SpectralField) -> Result<ScalarField> {
        self.check(f.grid())?;
        ScalarField::from_values(self.grid, self.inverse_real(f.coeffs()))
    }

    /// Applies the real multiplier `m(|k|²)` to `f`.
    pub fn apply_multiplier<M: Fn(f64) -> f64>(&self, f: &ScalarField, m: M) -> Result<ScalarField> {
        self.check(f.grid())?;
        let mut c = self.forward_real(f.values());
        for (ci, &k2) in c.iter_mut().zip(self.k_sq.iter()) {
            *ci *= m(k2);
        }
        ScalarField::from_values(self.grid, self.inverse_real(&c))
    }

    /// `Δf` on the trigonometric interpolant.
    pub fn laplacian(&self, f: &ScalarField) -> Result<ScalarField> {
        self.apply_multiplier(f, |k2| -k2)
    }

    /// `(νI − Δ)^{−s} f`.
    pub fn shifted_inverse(&self, f: &ScalarField, nu: f64, s: f64) -> Result<ScalarField> {
        self.check(f.grid())?;
        check_nu_for(nu, f, s)?;
        self.apply_multiplier(f, |k2| {
            let base = nu + k2;
            if base == 0.0 {
                0.0
            } else {
                base.powf(-s)
            }
        })
    }

    /// `(νI − Δ)f`.
    pub fn shifted_operator(&self, f: &ScalarField, nu: f64) -> Result<ScalarField> {
        self.apply_multiplier(f, |k2| nu + k2)
    }

    /// `(2L)^d Σ_k w(|k|²)|F_k|²`.
    pub fn weighted_energy<W: Fn(f64) -> f64>(&self, coeffs: &[Complex64], w: W) -> f64 {
        let s: f64 = coeffs
            .iter()
            .zip(self.k_sq.iter())
            .map(|(c, &k2)| w(k2) * c.norm_sqr())
            .sum();
        s * self.grid.volume()
    }

    pub fn norm_l2(&self, f: &ScalarField) -> Result<f64> {
        self.check(f.grid())?;
        Ok(f.norm_l2())
    }

    /// `(‖f‖²_{L²} + ‖∇f‖²_{L²})^{1/2}`.
    pub fn norm_h1(&self, f: &ScalarField) -> Result<f64> {
        self.check(f.grid())?;
        let c = self.forward_real(f.values());
        Ok(self.weighted_energy(&c, |k2| 1.0 + k2).sqrt())
    }

    /// `‖(νI − Δ)^{−1/2} f‖_{L²}`.
    pub fn norm_hminus1_nu(&self, f: &ScalarField, nu: f64) -> Result<f64> {
        self.check(f.grid())?;
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::Param(format!("H^-1_nu norm needs nu > 0, got {nu}")));
        }
        let c = self.forward_real(f.values());
        Ok(self.hminus1_nu_sq_from_coeffs(&c, nu).sqrt())
    }

    /// `‖·‖²_{H⁻¹_ν}` of normalized coefficients.
    pub fn hminus1_nu_sq_from_coeffs(&self, c: &[Complex64], nu: f64) -> f64 {
        self.weighted_energy(c, |k2| 1.0 / (nu + k2))
    }

    /// Homogeneous norm `(Σ_{k≠0} |k|^{2s}|F_k|²·(2L)^d)^{1/2}`.
    ///
    /// For `s < 0` the mean must vanish: a zero mode whose `L²` mass exceeds
    /// `1e−10·‖f‖_{L²}` is an error.
    pub fn norm_homogeneous(&self, f: &ScalarField, s: f64) -> Result<f64> {
        self.check(f.grid())?;
        let c = self.forward_real(f.values());
        if s < 0.0 {
            let mean_norm = c[0].norm() * self.grid.volume().sqrt();
            let tolerance = 1e-10 * f.norm_l2();
            if mean_norm > tolerance {
                return Err(Error::ZeroMode {
                    order: s,
                    mean_norm,
                    tolerance,
                });
            }
        }
        Ok(self
            .weighted_energy(&c, |k2| if k2 == 0.0 { 0.0 } else { k2.powf(s) })
            .sqrt())
    }

    /// `⟨u, x⟩_{H⁻¹_ν}` as `⟨(ν−Δ)^{−1/2}u, (ν−Δ)^{−1/2}x⟩_{L²}` in physical space.
    pub fn pairing_hminus1_nu_factored(&self, u: &ScalarField, x: &ScalarField, nu: f64) -> Result<f64> {
        let a = self.shifted_inverse(u, nu, 0.5)?;
        let b = self.shifted_inverse(x, nu, 0.5)?;
        a.inner(&b)
    }

    /// `⟨u, x⟩_{H⁻¹_ν}` as `(2L)^d Σ_k (ν+|k|²)^{−1} Re(U_k X̄_k)`.
    pub fn pairing_hminus1_nu(&self, u: &ScalarField, x: &ScalarField, nu: f64) -> Result<f64> {
        self.check(u.grid())?;
        self.check(x.grid())?;
        if !(nu > 0.0) {
            return Err(Error::Param(format!("H^-1_nu pairing needs nu > 0, got {nu}")));
        }
        let (cu, cx) = self.forward_real_pair(u.values(), x.values());
        let s: f64 = cu
            .iter()
            .zip(&cx)
            .zip(self.k_sq.iter())
            .map(|((a, b), &k2)| (a * b.conj()).re / (nu + k2))
            .sum();
        Ok(s * self.grid.volume())
    }

    /// Largest `‖u‖_{L^{2d/(d−2)}} / ‖u‖_{𝓗¹}` over the given mean-zero fields (`d = 3` only).
    pub fn fit_embedding_constant(&self, fields: &[ScalarField]) -> Result<f64> {
        let d = self.grid.dim();
        if d < 3 {
            return Err(Error::Param(format!(
                "the critical Sobolev embedding needs d >= 3, got d = {d}"
            )));
        }
        let p = 2.0 * d as f64 / (d as f64 - 2.0);
        let mut best = 0.0f64;
        for f in fields {
            let h = self.norm_homogeneous(f, 1.0)?;
            if h > 0.0 {
                best = best.max(f.norm_lp(p) / h);
            }
        }
        Ok(best)
    }
}

fn check_nu_for(nu: f64, f: &ScalarField, s: f64) -> Result<()> {
    if !nu.is_finite() || nu < 0.0 {
        return Err(Error::Param(format!("shift nu must be >= 0, got {nu}")));
    }
    if nu == 0.0 && s > 0.0 {
        let mean = f.integral() / f.grid().volume();
        if mean.abs() * f.grid().volume().sqrt() > 1e-10 * f.norm_l2() {
            return Err(Error::Param(
                "nu = 0 with a nonzero mean: the zero mode has no inverse".into(),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn pure_mode_has_two_coefficients() {
        let g = Grid::new(2, 16, 2.0).unwrap();
        let sp = Spectral::new(g);
        let f = ScalarField::from_fn(g, |x| (PI * x[0] / 2.0).cos()).unwrap();
        let c = sp.transform(&f).unwrap();
        let big: Vec<usize> = (0..g.len()).filter(|&i| c.coeffs()[i].norm() > 1e-12).collect();
        assert_eq!(big.len(), 2);
        for i in big {
            let k = g.wavevector(i);
            assert!(((k[0]).abs() - PI / 2.0).abs() < 1e-12 && k[1] == 0.0);
            assert!((c.coeffs()[i].norm() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn paired_transform_matches_single() {
        let g = Grid::new(3, 8, 1.5).unwrap();
        let sp = Spectral::new(g);
        let a: Vec<f64> = (0..g.len()).map(|i| ((i * 37 % 101) as f64).sin()).collect();
        let b: Vec<f64> = (0..g.len()).map(|i| ((i * 13 % 89) as f64).cos()).collect();
        let (fa, fb) = sp.forward_real_pair(&a, &b);
        let ea = sp.forward_real(&a);
        let eb = sp.forward_real(&b);
        for i in 0..g.len() {
            assert!((fa[i] - ea[i]).norm() < 1e-14);
            assert!((fb[i] - eb[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn nu_zero_inverse_rules() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let sp = Spectral::new(g);
        let c = ScalarField::constant(g, 1.0);
        assert!(matches!(sp.shifted_inverse(&c, 0.0, 1.0), Err(Error::Param(_))));
        assert!(matches!(sp.shifted_inverse(&c, -1.0, 1.0), Err(Error::Param(_))));
        assert!(matches!(sp.norm_hminus1_nu(&c, 0.0), Err(Error::Param(_))));
        let m = ScalarField::from_fn(g, |x| (PI * x[0]).sin()).unwrap();
        assert!(sp.shifted_inverse(&m, 0.0, 1.0).is_ok());
    }
}
