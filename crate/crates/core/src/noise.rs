//! Trace-class Wiener noise built from a finite family of smooth modes.
//!
//! `W(t) = Σ_k √μ_k β_k(t) e_k` with independent Brownian motions `β_k`.
//! The multiplication operator `σ(x)dW = x·dW` and the rectification
//! `(σ⊗σ)(x) = (Σ_k μ_k e_k²)·x` act pointwise.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, Spectral};

/// Spatial shape of the noise modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModeFamily {
    /// Tensor-product mollifier bumps at dyadic centers inside the central half-box.
    Bumps,
    /// Every mode is the constant `value`.
    Constant { value: f64 },
}

/// Weights `μ_k`, `k = 1, 2, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayLaw {
    /// `μ_k = ρ^k`.
    Geometric { rho: f64 },
    /// `μ_k = k^{−p}`.
    Power { exponent: f64 },
    /// Weights listed explicitly; the family is exactly this long.
    Explicit { weights: Vec<f64> },
    /// All weights zero: the deterministic reduction.
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub family: ModeFamily,
    pub decay: DecayLaw,
    pub modes: usize,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            family: ModeFamily::Bumps,
            decay: DecayLaw::Geometric { rho: 0.5 },
            modes: 16,
        }
    }
}

/// Relative tail allowed by the summability criterion.
pub const TAIL_FRACTION: f64 = 0.01;

/// One mode `e_k` and its constants.
#[derive(Debug, Clone)]
pub struct Mode {
    pub field: ScalarField,
    pub squared: ScalarField,
    pub mu: f64,
    pub sup_norm: f64,
    pub grad_ld_norm: f64,
    /// `‖e_k‖²_∞ + ‖∇e_k‖²_{L^d} + 1`.
    pub mu_prime: f64,
    pub center: [f64; 3],
    pub radius: f64,
}

/// Bump profile `exp(1 − 1/(1 − t²))` on `|t| < 1`, with `φ(0) = 1`.
fn mollifier(t: f64) -> f64 {
    if t.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    } else {
        0.0
    }
}

/// `φ′(t)/φ(t) = −2t/(1 − t²)²`.
fn mollifier_log_slope(t: f64) -> f64 {
    let s = 1.0 - t * t;
    -2.0 * t / (s * s)
}

fn bump_centers(grid: &Grid, count: usize) -> Vec<([f64; 3], f64)> {
    let d = grid.dim();
    let half = grid.box_half_length() / 2.0;
    let mut out = vec![([0.0; 3], half)];
    let mut level = 1u32;
    while out.len() < count {
        let radius = half / 2f64.powi(level as i32);
        let per_axis = 1usize << level;
        let axis_centers: Vec<f64> = (0..per_axis)
            .map(|j| (2.0 * j as f64 + 1.0 - per_axis as f64) * radius)
            .collect();
        let total = per_axis.pow(d as u32);
        for flat in 0..total {
            if out.len() == count {
                break;
            }
            let mut c = [0.0; 3];
            let mut rem = flat;
            for a in (0..d).rev() {
                c[a] = axis_centers[rem % per_axis];
                rem /= per_axis;
            }
            out.push((c, radius));
        }
        level += 1;
    }
    out.truncate(count);
    out
}

/// Value and gradient of the bump centered at `c` with radius `r`.
pub fn bump_with_gradient(xi: [f64; 3], c: [f64; 3], r: f64, dim: usize) -> (f64, [f64; 3]) {
    let mut t = [0.0; 3];
    let mut value = 1.0;
    for a in 0..dim {
        t[a] = (xi[a] - c[a]) / r;
        value *= mollifier(t[a]);
    }
    let mut grad = [0.0; 3];
    if value > 0.0 {
        for a in 0..dim {
            grad[a] = value * mollifier_log_slope(t[a]) / r;
        }
    }
    (value, grad)
}

fn weights(decay: &DecayLaw, k_modes: usize) -> Result<Vec<f64>> {
    match decay {
        DecayLaw::Geometric { rho } => {
            if !(*rho > 0.0 && *rho < 1.0) {
                return Err(Error::Summability(format!(
                    "geometric decay needs 0 < rho < 1, got {rho}"
                )));
            }
            Ok((1..=k_modes).map(|k| rho.powi(k as i32)).collect())
        }
        DecayLaw::Power { exponent } => {
            if !(*exponent > 1.0) {
                return Err(Error::Summability(format!(
                    "power decay k^-p diverges for p = {exponent} <= 1"
                )));
            }
            Ok((1..=k_modes).map(|k| (k as f64).powf(-exponent)).collect())
        }
        DecayLaw::Explicit { weights } => {
            if weights.len() != k_modes {
                return Err(Error::Param(format!(
                    "{} explicit weights for {k_modes} modes",
                    weights.len()
                )));
            }
            if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
                return Err(Error::Param("explicit weights must be finite and >= 0".into()));
            }
            Ok(weights.clone())
        }
        DecayLaw::Off => Ok(vec![0.0; k_modes]),
    }
}

/// Upper bound for `Σ_{k>K} μ_k`.
fn weight_tail(decay: &DecayLaw, k_modes: usize) -> f64 {
    let k = k_modes as f64;
    match decay {
        DecayLaw::Geometric { rho } => rho.powf(k + 1.0) / (1.0 - rho),
        DecayLaw::Power { exponent } => k.powf(1.0 - exponent) / (exponent - 1.0),
        DecayLaw::Explicit { .. } | DecayLaw::Off => 0.0,
    }
}

/// The assembled noise model on a grid.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    grid: Grid,
    spec: NoiseSpec,
    modes: Vec<Mode>,
    strat_field: ScalarField,
    c0: f64,
    trace_sum: f64,
    tail_bound: f64,
}

impl NoiseModel {
    /// Builds the modes and all per-mode constants by grid quadrature.
    pub fn build(spec: &NoiseSpec, grid: Grid) -> Result<Self> {
        if spec.modes == 0 {
            return Err(Error::Param("the noise needs at least one mode".into()));
        }
        let mu = weights(&spec.decay, spec.modes)?;
        let d = grid.dim();
        let dv = grid.cell_volume();
        let shapes: Vec<([f64; 3], f64)> = match spec.family {
            ModeFamily::Bumps => bump_centers(&grid, spec.modes),
            ModeFamily::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::Param("constant mode value must be finite".into()));
                }
                vec![([0.0; 3], f64::INFINITY); spec.modes]
            }
        };

        let mut modes = Vec::with_capacity(spec.modes);
        for (k, &(center, radius)) in shapes.iter().enumerate() {
            let mut values = Vec::with_capacity(grid.len());
            let mut grad_d = 0.0;
            for i in 0..grid.len() {
                let (v, g) = match spec.family {
                    ModeFamily::Bumps => bump_with_gradient(grid.coords(i), center, radius, d),
                    ModeFamily::Constant { value } => (value, [0.0; 3]),
                };
                values.push(v);
                let gn = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
                grad_d += gn.powi(d as i32);
            }
            let field = ScalarField::from_values(grid, values)?;
            let sup_norm = field.max_abs();
            let grad_ld_norm = (grad_d * dv).powf(1.0 / d as f64);
            let squared = field.map(|v| v * v);
            modes.push(Mode {
                mu_prime: sup_norm * sup_norm + grad_ld_norm * grad_ld_norm + 1.0,
                field,
                squared,
                mu: mu[k],
                sup_norm,
                grad_ld_norm,
                center,
                radius,
            });
        }

        let trace_sum: f64 = modes.iter().map(|m| m.mu * m.mu_prime).sum();
        let max_mu_prime = modes.iter().fold(0.0f64, |a, m| a.max(m.mu_prime));
        let tail_bound = weight_tail(&spec.decay, spec.modes) * max_mu_prime;
        if tail_bound > TAIL_FRACTION * (trace_sum + tail_bound) {
            return Err(Error::Summability(format!(
                "tail bound {tail_bound:e} exceeds {}% of the trace {:e}; increase the mode count",
                TAIL_FRACTION * 100.0,
                trace_sum + tail_bound
            )));
        }

        let c0 = modes
            .iter()
            .map(|m| {
                let s2 = m.sup_norm * m.sup_norm;
                m.mu * s2.max(1.0) * (s2 + 4.0 * m.grad_ld_norm * m.grad_ld_norm)
            })
            .sum();

        let mut strat = vec![0.0; grid.len()];
        for m in &modes {
            for (s, e2) in strat.iter_mut().zip(m.squared.values()) {
                *s += m.mu * e2;
            }
        }
        let strat_field = ScalarField::from_values(grid, strat)?;

        Ok(NoiseModel {
            grid,
            spec: spec.clone(),
            modes,
            strat_field,
            c0,
            trace_sum,
            tail_bound,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// `Σ_k μ_k e_k²`.
    pub fn strat_field(&self) -> &ScalarField {
        &self.strat_field
    }

    /// `Σ μ_k (‖e_k‖²_∞ ∨ 1)(‖e_k‖²_∞ + 4‖∇e_k‖²_{L^d})`, embedding constants set to 1.
    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// `Σ_{k ≤ K} μ_k μ′_k`.
    pub fn trace_sum(&self) -> f64 {
        self.trace_sum
    }

    /// Bound on the neglected `Σ_{k > K} μ_k μ′_k`.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// `Σ μ_k ‖e_k‖²_∞`, the bound on `‖σ⊗σ‖_{L²→L²}`.
    pub fn strat_norm_bound(&self) -> f64 {
        self.modes.iter().map(|m| m.mu * m.sup_norm * m.sup_norm).sum()
    }

    /// True when every weight vanishes.
    pub fn is_off(&self) -> bool {
        self.modes.iter().all(|m| m.mu == 0.0)
    }

    /// Writes `√dt Σ_k √μ_k g_k e_k` into `out`.
    pub fn assemble_into(&self, gaussians: &[f64], dt: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (m, &g) in self.modes.iter().zip(gaussians) {
            let a = (m.mu * dt).sqrt() * g;
            if a == 0.0 {
                continue;
            }
            for (o, e) in out.iter_mut().zip(m.field.values()) {
                *o += a * e;
            }
        }
    }
}

/// Counter-based Gaussian source keyed by `(seed, path)`.
///
/// The draw for mode `k` in fine slot `n` depends only on `(seed, path, n, k)`.
/// A step spanning `substeps` fine slots uses the normalized sum of their draws,
/// so a run with `dt` and `substeps = 2m` sees exactly the Brownian path of a
/// run with `dt/2` and `substeps = m`.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    substeps: u64,
}

impl NoiseStream {
    pub fn new(seed: u64, path: u64, substeps: u64) -> Result<Self> {
        if substeps == 0 {
            return Err(Error::Param("substeps must be at least 1".into()));
        }
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&path.to_le_bytes());
        Ok(NoiseStream {
            rng: ChaCha8Rng::from_seed(key),
            substeps,
        })
    }

    pub fn substeps(&self) -> u64 {
        self.substeps
    }

    /// Standard normal draw for one `(fine slot, mode)` pair, by Box–Muller.
    fn fine_draw(&mut self, slot: u64, mode: usize) -> f64 {
        self.rng.set_stream(slot);
        self.rng.set_word_pos(4 * mode as u128);
        let a = self.rng.next_u64();
        let b = self.rng.next_u64();
        let u1 = ((a >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64);
        let u2 = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Standard normal coefficients for step `step`, one per mode.
    pub fn gaussians(&mut self, step: u64, modes: usize, out: &mut Vec<f64>) {
        out.clear();
        let scale = 1.0 / (self.substeps as f64).sqrt();
        for k in 0..modes {
            let mut s = 0.0;
            for j in 0..self.substeps {
                s += self.fine_draw(step * self.substeps + j, k);
            }
            out.push(s * scale);
        }
    }
}

/// One realized increment of the Wiener process.
#[derive(Debug, Clone)]
pub struct WienerIncrement {
    pub dt: f64,
    pub gaussians: Vec<f64>,
    pub assembled: ScalarField,
}

/// Draws the increment over step `step` of length `dt`.
pub fn sample_increment(
    model: &NoiseModel,
    dt: f64,
    stream: &mut NoiseStream,
    step: u64,
) -> Result<WienerIncrement> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Param(format!("increment needs dt > 0, got {dt}")));
    }
    let mut gaussians = Vec::new();
    stream.gaussians(step, model.len(), &mut gaussians);
    let mut values = vec![0.0; model.grid.len()];
    model.assemble_into(&gaussians, dt, &mut values);
    Ok(WienerIncrement {
        dt,
        gaussians,
        assembled: ScalarField::from_values(model.grid, values)?,
    })
}

/// `σ(x)dW = x·dW`.
pub fn sigma_apply(x: &ScalarField, dw: &WienerIncrement) -> Result<ScalarField> {
    x.mul(&dw.assembled)
}

/// `(σ⊗σ)(x) = (Σ μ_k e_k²)·x`.
pub fn strat_correction(x: &ScalarField, model: &NoiseModel) -> Result<ScalarField> {
    x.mul(&model.strat_field)
}

/// Monte-Carlo comparison of `E‖x·dW‖²_ℍ/dt` with `Σ μ_k ‖x e_k‖²_ℍ` in one space.
#[derive(Debug, Clone, Serialize)]
pub struct IsometryLine {
    pub space: String,
    pub empirical: f64,
    pub analytic: f64,
    pub ratio: f64,
    /// Standard error of `empirical`.
    pub std_error: f64,
    /// `|empirical − analytic| ≤ 3·std_error`.
    pub within_3sigma: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IsometryReport {
    pub n_samples: usize,
    pub dt: f64,
    pub nu: f64,
    pub l2: IsometryLine,
    pub hminus1_nu: IsometryLine,
}

fn isometry_line(space: &str, samples: &[f64], analytic: f64) -> IsometryLine {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let std_error = (var / n).sqrt();
    IsometryLine {
        space: space.into(),
        empirical: mean,
        analytic,
        ratio: if analytic == 0.0 { if mean == 0.0 { 1.0 } else { f64::INFINITY } } else { mean / analytic },
        std_error,
        within_3sigma: (mean - analytic).abs() <= 3.0 * std_error,
    }
}

/// Samples `n_samples` increments and compares both sides of Itô's isometry
/// in `L²` and `H⁻¹_ν`.
pub fn ito_isometry_check(
    model: &NoiseModel,
    x: &ScalarField,
    n_samples: usize,
    dt: f64,
    nu: f64,
    stream: &mut NoiseStream,
) -> Result<IsometryReport> {
    if n_samples < 100 {
        return Err(Error::Param(format!("isometry check needs >= 100 samples, got {n_samples}")));
    }
    if x.grid() != model.grid() {
        return Err(Error::GridMismatch("datum and noise live on different grids".into()));
    }
    let sp = Spectral::new(model.grid);
    let mut an_l2 = 0.0;
    let mut an_h = 0.0;
    for m in &model.modes {
        if m.mu == 0.0 {
            continue;
        }
        let xe = x.mul(&m.field)?;
        an_l2 += m.mu * xe.norm_l2().powi(2);
        an_h += m.mu * sp.norm_hminus1_nu(&xe, nu)?.powi(2);
    }

    let len = model.grid.len();
    let mut g = Vec::new();
    let mut dw = vec![0.0; len];
    let mut pair = [vec![0.0; len], vec![0.0; len]];
    let mut l2 = Vec::with_capacity(n_samples);
    let mut hm = Vec::with_capacity(n_samples);
    let dv = model.grid.cell_volume();
    let mut step = 0u64;
    while l2.len() < n_samples {
        let take = (n_samples - l2.len()).min(2);
        for slot in pair.iter_mut().take(take) {
            stream.gaussians(step, model.len(), &mut g);
            step += 1;
            model.assemble_into(&g, dt, &mut dw);
            for ((p, xv), w) in slot.iter_mut().zip(x.values()).zip(&dw) {
                *p = xv * w;
            }
            l2.push(slot.iter().map(|v| v * v).sum::<f64>() * dv / dt);
        }
        let (fa, fb) = sp.forward_real_pair(&pair[0], &pair[1]);
        hm.push(sp.hminus1_nu_sq_from_coeffs(&fa, nu) / dt);
        if take == 2 {
            hm.push(sp.hminus1_nu_sq_from_coeffs(&fb, nu) / dt);
        }
    }

    Ok(IsometryReport {
        n_samples,
        dt,
        nu,
        l2: isometry_line("L2", &l2, an_l2),
        hminus1_nu: isometry_line("H-1_nu", &hm, an_h),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(3, 16, 8.0).unwrap()
    }

    #[test]
    fn bump_layout_for_sixteen_modes() {
        let c = bump_centers(&grid(), 16);
        assert_eq!(c.len(), 16);
        assert_eq!(c[0], ([0.0; 3], 4.0));
        assert!(c[1..9].iter().all(|&(_, r)| r == 2.0));
        assert!(c[9..].iter().all(|&(_, r)| r == 1.0));
        assert_eq!(c[1].0, [-2.0, -2.0, -2.0]);
        assert_eq!(c[9].0, [-3.0, -3.0, -3.0]);
        assert_eq!(c[10].0, [-3.0, -3.0, -1.0]);
    }

    #[test]
    fn analytic_gradient_matches_difference_quotient() {
        let c = [0.3, -0.2, 0.1];
        let xi = [0.9, 0.4, -0.5];
        let (_, g) = bump_with_gradient(xi, c, 1.5, 3);
        let h = 1e-6;
        for a in 0..3 {
            let mut p = xi;
            let mut m = xi;
            p[a] += h;
            m[a] -= h;
            let fd = (bump_with_gradient(p, c, 1.5, 3).0 - bump_with_gradient(m, c, 1.5, 3).0) / (2.0 * h);
            assert!((fd - g[a]).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_substeps_rejected() {
        assert!(NoiseStream::new(1, 0, 0).is_err());
    }

    #[test]
    fn substep_sums_couple_exactly() {
        let mut coarse = NoiseStream::new(9, 3, 2).unwrap();
        let mut fine = NoiseStream::new(9, 3, 1).unwrap();
        let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
        coarse.gaussians(5, 4, &mut a);
        fine.gaussians(10, 4, &mut b);
        fine.gaussians(11, 4, &mut c);
        for k in 0..4 {
            assert!((a[k] - (b[k] + c[k]) / 2f64.sqrt()).abs() < 1e-15);
        }
    }
}
