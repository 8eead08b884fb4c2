use super::PathDiagnostics;
use crate::error::{Error, Result};

/// `(t, r_j(t))` for test mode `j`, where
/// `r_j(t) = |⟨X(t), e_j⟩ − ⟨x, e_j⟩ − Σ_steps (dt⟨Ψ̃_λ(X), (Δ−ν)e_j⟩ + ⟨X·dW + ½dt(σ⊗σ)(X), e_j⟩)|`.
pub fn weak_form_residual(path: &PathDiagnostics, j: usize) -> Result<Vec<(f64, f64)>> {
    let slot = path.weak_modes.iter().position(|&m| m == j).ok_or_else(|| {
        Error::Replay(format!(
            "mode {j} was not tracked on path {} (tracked: {:?})",
            path.path_id, path.weak_modes
        ))
    })?;
    Ok(path.rows.iter().map(|r| (r.t, r.weak_residuals[slot])).collect())
}
