use serde::Serialize;

use super::{mean_and_band, PathDiagnostics};
use crate::error::{Error, Result};

/// Fitted moment constants of one `(λ, ν, ε)` cell.
#[derive(Debug, Clone, Serialize)]
pub struct MomentCell {
    pub lambda: f64,
    pub nu: f64,
    pub epsilon: f64,
    pub n_paths: usize,
    /// `E sup_t ‖X(t)‖²_{H⁻¹_ν} / ‖x‖²_{H⁻¹_ν}`.
    pub c_hminus1: f64,
    pub band_hminus1: f64,
    /// `E sup_t ‖X(t)‖²_{L²} / ‖x‖²_{L²}`.
    pub c_l2: f64,
    pub band_l2: f64,
}

impl MomentCell {
    /// Fits the cell from paths that record `‖X‖²_{H⁻¹_ν}` at the cell's `ν`.
    pub fn fit(lambda: f64, nu: f64, epsilon: f64, paths: &[PathDiagnostics]) -> Result<Self> {
        let mut hm = Vec::with_capacity(paths.len());
        let mut l2 = Vec::with_capacity(paths.len());
        for p in paths {
            let series = p.hminus1_series(nu).ok_or_else(|| {
                Error::Param(format!("path {} does not record the H^-1_nu norm at nu = {nu}", p.path_id))
            })?;
            let x0 = series[0];
            hm.push(series.iter().copied().fold(0.0, f64::max) / x0);
            let l0 = p.rows[0].norm_l2_sq;
            l2.push(p.rows.iter().map(|r| r.norm_l2_sq).fold(0.0, f64::max) / l0);
        }
        let (c_hminus1, band_hminus1) = mean_and_band(&hm);
        let (c_l2, band_l2) = mean_and_band(&l2);
        Ok(MomentCell {
            lambda,
            nu,
            epsilon,
            n_paths: paths.len(),
            c_hminus1,
            band_hminus1,
            c_l2,
            band_l2,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub cells: Vec<MomentCell>,
    /// `max C / min C` across cells.
    pub spread_hminus1: f64,
    pub spread_l2: f64,
    pub factor: f64,
    pub pass: bool,
}

/// Checks that the fitted constants agree within `factor` across cells.
pub fn moment_bound_check(cells: Vec<MomentCell>, factor: f64) -> Result<MomentReport> {
    if cells.is_empty() {
        return Err(Error::Param("moment check needs at least one cell".into()));
    }
    let spread = |f: &dyn Fn(&MomentCell) -> f64| {
        let max = cells.iter().map(f).fold(f64::MIN, f64::max);
        let min = cells.iter().map(f).fold(f64::MAX, f64::min);
        max / min
    };
    let spread_hminus1 = spread(&|c| c.c_hminus1);
    let spread_l2 = spread(&|c| c.c_l2);
    Ok(MomentReport {
        pass: spread_hminus1 <= factor && spread_l2 <= factor,
        cells,
        spread_hminus1,
        spread_l2,
        factor,
    })
}

/// Gradient bound across `λ`: `E∫₀ᵀ‖∇Ψ_λ(X_λ)‖² ≤ C(1 + ‖x‖²_{L²} + ∫(x ln x − x))`.
#[derive(Debug, Clone, Serialize)]
pub struct GradientBoundReport {
    pub lambdas: Vec<f64>,
    pub integrals: Vec<f64>,
    pub rhs_scale: f64,
    /// Smallest `C` consistent with every `λ`.
    pub fitted_c: f64,
}

/// `scale = 1 + ‖x‖²_{L²} + ∫(x ln x − x)`; each entry pairs `λ` with its paths.
pub fn gradient_bound_check(per_lambda: &[(f64, &[PathDiagnostics])], scale: f64) -> Result<GradientBoundReport> {
    let mut lambdas = Vec::new();
    let mut integrals = Vec::new();
    for (lambda, paths) in per_lambda {
        let v: Vec<f64> = paths
            .iter()
            .map(|p| p.rows.last().map_or(0.0, |r| r.yosida_grad_integral))
            .collect();
        if v.is_empty() {
            return Err(Error::Param(format!("no paths for lambda = {lambda}")));
        }
        lambdas.push(*lambda);
        integrals.push(mean_and_band(&v).0);
    }
    let fitted_c = integrals.iter().fold(0.0f64, |m, v| m.max(v / scale));
    Ok(GradientBoundReport {
        lambdas,
        integrals,
        rhs_scale: scale,
        fitted_c,
    })
}
