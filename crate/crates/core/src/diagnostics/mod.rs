//! Per-path diagnostics and the estimate checks built on them.

mod energy;
mod ensemble;
mod moments;
mod nu_rate;
mod operator;
mod weak_form;

pub use energy::{energy_balance_check, EnergyLine, EnergyReport};
pub use ensemble::{
    format_float, mean_and_band, row_columns, row_values, ColumnSummary, EnsembleReport, LedgerLine, MIN_ASSERTED_PATHS,
};
pub use moments::{gradient_bound_check, moment_bound_check, GradientBoundReport, MomentCell, MomentReport};
pub use nu_rate::{nu_rate_check, NuRateReport, RatePoint};
pub use operator::{operator_spot_checks, OperatorReport};
pub use weak_form::weak_form_residual;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ScalarField, Spectral};
use crate::monotone::{log_resolvent, YosidaParams};
use crate::noise::NoiseModel;

/// Which diagnostics a run records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSpec {
    /// Shifts `ν` at which `‖X‖²_{H⁻¹_ν}` is recorded.
    pub nu_grid: Vec<f64>,
    /// Number of leading noise modes used as weak-form test functions.
    pub weak_modes: usize,
    /// Energy diagnostics; requires `λ ≤ 1/2`.
    pub energy: bool,
    /// Samples with `max_a |ξ_a| ≥ shell·L` count towards the leakage metric.
    pub leakage_shell: f64,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        DiagnosticsSpec {
            nu_grid: vec![1.0, 0.1],
            weak_modes: 8,
            energy: true,
            leakage_shell: 0.9,
        }
    }
}

impl DiagnosticsSpec {
    pub fn validate(&self, noise: &NoiseModel) -> Result<()> {
        if self.nu_grid.is_empty() || self.nu_grid.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Param("diagnostic nu grid must hold positive values".into()));
        }
        if self.weak_modes > noise.len() {
            return Err(Error::Param(format!(
                "{} weak-form modes requested but the noise has {}",
                self.weak_modes,
                noise.len()
            )));
        }
        if !(self.leakage_shell > 0.0 && self.leakage_shell < 1.0) {
            return Err(Error::Param("leakage shell must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Diagnostics of one path at one output time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticRow {
    pub step: u64,
    pub t: f64,
    pub norm_l2_sq: f64,
    /// `‖X‖²_{H⁻¹_ν}` for each `ν` of the spec's grid.
    pub norm_hminus1_nu_sq: Vec<f64>,
    /// `Σ_{k≠0} |k|⁻²|X̂_k|²·(2L)^d`, the homogeneous norm of the mean-free part.
    pub norm_hminus1_homog_sq: f64,
    pub phi_lambda: f64,
    /// Samples where `Φ_λ` used the continuation of `j_λ` to negative arguments.
    pub phi_negative_samples: usize,
    pub grad_psi_l2_sq: f64,
    /// `∫₀ᵗ ‖∇Ψ̃_λ(X)‖²` accumulated per step at the right endpoint.
    pub dissipation: f64,
    /// `∫₀ᵗ ‖X‖²_{L²}` accumulated per step by the trapezoid rule.
    pub l2_time_integral: f64,
    /// `∫₀ᵗ ‖∇Ψ_λ(X)‖²` accumulated like `dissipation`.
    pub yosida_grad_integral: f64,
    pub min_value: f64,
    pub negativity_fraction: f64,
    pub mass: f64,
    pub leakage: f64,
    pub weak_residuals: Vec<f64>,
}

/// A step at which the field took negative values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NegativityEvent {
    pub step: u64,
    pub t: f64,
    pub fraction: f64,
    pub min_value: f64,
}

/// Everything recorded along one path.
#[derive(Debug, Clone)]
pub struct PathDiagnostics {
    pub path_id: u64,
    pub lambda: f64,
    pub nu_grid: Vec<f64>,
    pub rows: Vec<DiagnosticRow>,
    /// Indices of the noise modes tracked for the weak form.
    pub weak_modes: Vec<usize>,
    pub negativity_events: Vec<NegativityEvent>,
    pub resolvent_solves: usize,
    pub max_resolvent_residual: f64,
    pub final_state: Option<ScalarField>,
}

impl PathDiagnostics {
    /// Column of `‖X‖²_{H⁻¹_ν}` for a recorded `ν`.
    pub fn hminus1_series(&self, nu: f64) -> Option<Vec<f64>> {
        let j = self.nu_grid.iter().position(|&v| (v - nu).abs() <= 1e-15 * nu.max(1.0))?;
        Some(self.rows.iter().map(|r| r.norm_hminus1_nu_sq[j]).collect())
    }
}

/// Value of `Φ_λ` and how many samples were negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiLambda {
    pub value: f64,
    pub negative_samples: usize,
}

/// `Φ_λ(x) = ∫ j_λ(x) + (λ/2)x²` by the grid rule.
///
/// Negative samples are evaluated with the continuation
/// `j_λ(r) = j(J_λ(r)) + (r − J_λ(r))²/(2λ)` and counted.
pub fn phi_lambda(x: &ScalarField, p: &YosidaParams) -> Result<PhiLambda> {
    if p.lambda() > 0.5 {
        return Err(Error::Param(format!("the energy needs lambda <= 1/2, got {}", p.lambda())));
    }
    let mut log_j = Vec::with_capacity(x.values().len());
    for &v in x.values() {
        log_j.push(log_resolvent(v, p, None)?);
    }
    Ok(phi_from_log_resolvent(x.values(), &log_j, p.lambda(), x.grid().cell_volume()))
}

pub(crate) fn phi_from_log_resolvent(x: &[f64], log_j: &[f64], lambda: f64, dv: f64) -> PhiLambda {
    let mut s = 0.0;
    let mut neg = 0;
    for (&v, &y) in x.iter().zip(log_j) {
        if v < 0.0 {
            neg += 1;
        }
        s += y.exp() * (y - 1.0) + 0.5 * lambda * y * y + 0.5 * lambda * v * v;
    }
    PhiLambda {
        value: s * dv,
        negative_samples: neg,
    }
}

/// Fraction of `∫|X|` lying in the outer shell `max_a |ξ_a| ≥ shell·L`.
pub fn leakage(x: &ScalarField, shell: f64) -> f64 {
    let g = x.grid();
    let cut = shell * g.box_half_length();
    let mut inner = 0.0;
    let mut outer = 0.0;
    for (i, &v) in x.values().iter().enumerate() {
        let xi = g.coords(i);
        let m = xi.iter().take(g.dim()).fold(0.0f64, |m, c| m.max(c.abs()));
        if m >= cut {
            outer += v.abs();
        } else {
            inner += v.abs();
        }
    }
    if inner + outer == 0.0 {
        0.0
    } else {
        outer / (inner + outer)
    }
}

/// Shell mask used by [`leakage`], precomputed for repeated evaluation.
pub(crate) fn shell_mask(grid: &crate::grid::Grid, shell: f64) -> Vec<bool> {
    let cut = shell * grid.box_half_length();
    (0..grid.len())
        .map(|i| {
            let xi = grid.coords(i);
            xi.iter().take(grid.dim()).fold(0.0f64, |m, c| m.max(c.abs())) >= cut
        })
        .collect()
}

/// Point metrics of a field that need no transform.
pub(crate) struct PointMetrics {
    pub min_value: f64,
    pub negativity_fraction: f64,
    pub mass: f64,
    pub leakage: f64,
}

pub(crate) fn point_metrics(x: &[f64], shell: &[bool], dv: f64) -> PointMetrics {
    let mut min_value = f64::INFINITY;
    let mut neg = 0usize;
    let mut sum = 0.0;
    let mut inner = 0.0;
    let mut outer = 0.0;
    for (&v, &s) in x.iter().zip(shell) {
        min_value = min_value.min(v);
        if v < 0.0 {
            neg += 1;
        }
        sum += v;
        if s {
            outer += v.abs();
        } else {
            inner += v.abs();
        }
    }
    PointMetrics {
        min_value,
        negativity_fraction: neg as f64 / x.len() as f64,
        mass: sum * dv,
        leakage: if inner + outer == 0.0 { 0.0 } else { outer / (inner + outer) },
    }
}

/// Spectral norms of a field from its normalized coefficients.
pub(crate) fn spectral_norms(sp: &Spectral, x_hat: &[num_complex::Complex64], nu_grid: &[f64]) -> (Vec<f64>, f64) {
    let hm: Vec<f64> = nu_grid.iter().map(|&nu| sp.hminus1_nu_sq_from_coeffs(x_hat, nu)).collect();
    let homog = sp.weighted_energy(x_hat, |k2| if k2 == 0.0 { 0.0 } else { 1.0 / k2 });
    (hm, homog)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn leakage_of_shell_supported_field_is_one() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        let x = ScalarField::from_fn(g, |xi| if xi[0].abs().max(xi[1].abs()) >= 0.9 { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(leakage(&x, 0.9), 1.0);
        let mask = shell_mask(&g, 0.9);
        assert_eq!(point_metrics(x.values(), &mask, g.cell_volume()).leakage, 1.0);
    }

    #[test]
    fn negative_samples_are_flagged_not_rejected() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let p = YosidaParams::new(0.5).unwrap();
        let x = ScalarField::from_values(g, vec![1.0, -0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        let phi = phi_lambda(&x, &p).unwrap();
        assert_eq!(phi.negative_samples, 1);
        assert!(phi.value.is_finite());
    }
}
