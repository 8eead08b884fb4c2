use serde::Serialize;

use super::{mean_and_band, PathDiagnostics};
use crate::error::{Error, Result};

/// Energy balance at one output time.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyLine {
    pub t: f64,
    /// Mean of `Φ_λ(X(t)) + ∫₀ᵗ‖∇Ψ̃_λ(X)‖²`.
    pub lhs: f64,
    /// Mean of `Φ_λ(x) + Σμ_k‖e_k‖²_∞(λ+1)∫₀ᵗ‖X‖²`.
    pub rhs: f64,
    /// Mean of `RHS − LHS`.
    pub slack: f64,
    /// Half-width `3σ/√n` of the slack band.
    pub band: f64,
    /// Discretization allowance from a `dt`-halving run.
    pub allowance: f64,
    /// Mean of `Φ_λ(X(t)) + ∫₀ᵗ‖∇Ψ̃_λ(X)‖² − Φ_λ(x)`, which vanishes without noise.
    pub identity_gap: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    pub n_paths: usize,
    pub noise_constant: f64,
    pub lines: Vec<EnergyLine>,
    pub all_pass: bool,
    /// `min_{t>0} (slack + band + allowance)`; 0 when there is no positive time.
    pub worst_margin: f64,
}

fn slacks(paths: &[PathDiagnostics], noise_constant: f64, ti: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut lhs = Vec::with_capacity(paths.len());
    let mut rhs = Vec::with_capacity(paths.len());
    let mut slack = Vec::with_capacity(paths.len());
    let mut gap = Vec::with_capacity(paths.len());
    for p in paths {
        let r = &p.rows[ti];
        let phi0 = p.rows[0].phi_lambda;
        let l = r.phi_lambda + r.dissipation;
        let rr = phi0 + noise_constant * (p.lambda + 1.0) * r.l2_time_integral;
        lhs.push(l);
        rhs.push(rr);
        slack.push(rr - l);
        gap.push(l - phi0);
    }
    (lhs, rhs, slack, gap)
}

/// Per-time mean slack of a set of paths.
pub fn mean_slack(paths: &[PathDiagnostics], noise_constant: f64) -> Vec<(f64, f64)> {
    let nt = paths.first().map_or(0, |p| p.rows.len());
    (0..nt)
        .map(|ti| {
            let (_, _, s, _) = slacks(paths, noise_constant, ti);
            (paths[0].rows[ti].t, mean_and_band(&s).0)
        })
        .collect()
}

/// Checks `E Φ_λ(X(t)) + E∫‖∇Ψ̃_λ‖² ≤ E Φ_λ(x) + Σμ_k‖e_k‖²_∞(λ+1) E∫‖X‖²`.
///
/// `noise_constant` is `Σ μ_k ‖e_k‖²_∞`. When `halved` holds paths run with
/// `dt/2` under the same Brownian path, the allowance at each common output
/// time is the Richardson estimate `2|slack_dt − slack_{dt/2}|` of the first
/// order bias; otherwise it is zero. A time passes when
/// `slack ≥ −(band + allowance)`.
pub fn energy_balance_check(
    paths: &[PathDiagnostics],
    noise_constant: f64,
    halved: Option<&[PathDiagnostics]>,
) -> Result<EnergyReport> {
    let first = paths
        .first()
        .ok_or_else(|| Error::Param("energy check needs at least one path".into()))?;
    if paths.iter().any(|p| p.lambda > 0.5) {
        return Err(Error::Param("the energy inequality is stated for lambda <= 1/2".into()));
    }
    let fine = halved.map(|h| {
        let ids: Vec<u64> = h.iter().map(|p| p.path_id).collect();
        let coarse: Vec<PathDiagnostics> = paths.iter().filter(|p| ids.contains(&p.path_id)).cloned().collect();
        (mean_slack(&coarse, noise_constant), mean_slack(h, noise_constant))
    });

    let mut lines = Vec::new();
    for (ti, row) in first.rows.iter().enumerate() {
        let (l, r, s, g) = slacks(paths, noise_constant, ti);
        let (slack, band) = mean_and_band(&s);
        let allowance = match &fine {
            Some((c, f)) => {
                let cs = c.iter().find(|(t, _)| (t - row.t).abs() < 1e-9).map(|v| v.1);
                let fs = f.iter().find(|(t, _)| (t - row.t).abs() < 1e-9).map(|v| v.1);
                match (cs, fs) {
                    (Some(a), Some(b)) => 2.0 * (a - b).abs(),
                    _ => {
                        return Err(Error::Param(format!(
                            "halved run has no output at t = {}",
                            row.t
                        )))
                    }
                }
            }
            None => 0.0,
        };
        lines.push(EnergyLine {
            t: row.t,
            lhs: mean_and_band(&l).0,
            rhs: mean_and_band(&r).0,
            slack,
            band,
            allowance,
            identity_gap: mean_and_band(&g).0,
            pass: slack >= -(band + allowance),
        });
    }
    let worst_margin = lines
        .iter()
        .filter(|l| l.t > 0.0)
        .map(|l| l.slack + l.band + l.allowance)
        .fold(f64::INFINITY, f64::min);
    let worst_margin = if worst_margin.is_finite() { worst_margin } else { 0.0 };
    Ok(EnergyReport {
        n_paths: paths.len(),
        noise_constant,
        all_pass: lines.iter().all(|l| l.pass),
        lines,
        worst_margin,
    })
}
