use std::sync::Arc;

use rayon::prelude::*;

use super::integrator::Integrator;
use super::SimConfig;
use crate::diagnostics::{
    phi_from_log_resolvent, point_metrics, shell_mask, spectral_norms, DiagnosticRow, NegativityEvent,
    PathDiagnostics,
};
use crate::error::{Error, Result};
use crate::grid::{ScalarField, Spectral};
use crate::noise::NoiseModel;

/// Weak-form bookkeeping: `⟨X(t), e_j⟩ − ⟨x, e_j⟩ − Σ_steps (dt⟨Ψ̃_λ(X), (Δ−ν)e_j⟩ + ⟨Y − X, e_j⟩)`.
struct WeakTracker {
    tests: Vec<Vec<f64>>,
    operators: Vec<Vec<f64>>,
    initial: Vec<f64>,
    accumulated: Vec<f64>,
    dv: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl WeakTracker {
    fn new(noise: &NoiseModel, sp: &Spectral, nu: f64, count: usize, x0: &[f64]) -> Result<Self> {
        let dv = sp.grid().cell_volume();
        let mut tests = Vec::new();
        let mut operators = Vec::new();
        for m in noise.modes().iter().take(count) {
            let lap = sp.laplacian(&m.field)?;
            let op = lap.axpby(1.0, &m.field, -nu)?;
            tests.push(m.field.values().to_vec());
            operators.push(op.into_values());
        }
        let initial = tests.iter().map(|e| dot(x0, e) * dv).collect();
        Ok(WeakTracker {
            accumulated: vec![0.0; tests.len()],
            tests,
            operators,
            initial,
            dv,
        })
    }

    fn residuals(&self, x: &[f64]) -> Vec<f64> {
        self.tests
            .iter()
            .enumerate()
            .map(|(j, e)| (dot(x, e) * self.dv - self.initial[j] - self.accumulated[j]).abs())
            .collect()
    }

    fn accumulate(&mut self, it: &Integrator) {
        let lambda = it.yosida_params().lambda();
        let dt = it.dt();
        let x = it.x();
        let psi: Vec<f64> = it.phi().iter().zip(x).map(|(p, v)| p + lambda * v).collect();
        let incr: Vec<f64> = it.explicit_part().iter().zip(x).map(|(y, v)| y - v).collect();
        for j in 0..self.tests.len() {
            self.accumulated[j] += dt * dot(&psi, &self.operators[j]) * self.dv + dot(&incr, &self.tests[j]) * self.dv;
        }
    }
}

/// Runs one path and records diagnostics every `output_stride` steps and at `T`.
pub fn simulate_path(cfg: &SimConfig, noise: &Arc<NoiseModel>, sp: &Spectral, path_id: u64) -> Result<PathDiagnostics> {
    let mut it = Integrator::for_path(cfg, sp.clone(), noise.clone(), path_id)?;
    let n_steps = cfg.n_steps() as u64;
    let dt = cfg.dt;
    let grid = cfg.grid;
    let dv = grid.cell_volume();
    let lambda = cfg.params.lambda;
    let shell = shell_mask(&grid, cfg.diagnostics.leakage_shell);
    let mut weak = if cfg.diagnostics.weak_modes > 0 {
        Some(WeakTracker::new(noise, sp, cfg.params.nu, cfg.diagnostics.weak_modes, it.x())?)
    } else {
        None
    };

    let mut rows = Vec::new();
    let mut events = Vec::new();
    let mut dissipation = 0.0;
    let mut l2_integral = 0.0;
    let mut yosida_grad_integral = 0.0;
    let mut prev_l2 = 0.0;
    let mut solves = 0usize;
    let mut max_residual = 0.0f64;

    for n in 0..=n_steps {
        let prep = if n < n_steps { it.prepare() } else { it.evaluate() }.map_err(|e| match e {
            Error::Stability { .. } => e,
            other => Error::Domain(format!("path {path_id}, step {n}, t = {}: {other}", n as f64 * dt)),
        })?;
        if n > 0 {
            dissipation += dt * prep.grad_psi_sq;
            yosida_grad_integral += dt * prep.grad_yosida_sq;
            l2_integral += 0.5 * dt * (prev_l2 + prep.l2_sq);
        }
        prev_l2 = prep.l2_sq;

        let pm = point_metrics(it.x(), &shell, dv);
        let t = n as f64 * dt;
        if pm.min_value < 0.0 {
            events.push(NegativityEvent {
                step: n,
                t,
                fraction: pm.negativity_fraction,
                min_value: pm.min_value,
            });
        }

        if n % cfg.output_stride as u64 == 0 || n == n_steps {
            let (hm, homog) = spectral_norms(sp, it.x_hat(), &cfg.diagnostics.nu_grid);
            let phi = phi_from_log_resolvent(it.x(), it.log_resolvent(), lambda, dv);
            rows.push(DiagnosticRow {
                step: n,
                t,
                norm_l2_sq: prep.l2_sq,
                norm_hminus1_nu_sq: hm,
                norm_hminus1_homog_sq: homog,
                phi_lambda: phi.value,
                phi_negative_samples: phi.negative_samples,
                grad_psi_l2_sq: prep.grad_psi_sq,
                dissipation,
                l2_time_integral: l2_integral,
                yosida_grad_integral,
                min_value: pm.min_value,
                negativity_fraction: pm.negativity_fraction,
                mass: pm.mass,
                leakage: pm.leakage,
                weak_residuals: weak.as_ref().map(|w| w.residuals(it.x())).unwrap_or_default(),
            });
        }

        if n < n_steps {
            if let Some(w) = weak.as_mut() {
                w.accumulate(&it);
            }
            it.advance().map_err(|e| match e {
                Error::Stability { .. } | Error::NonConvergence { .. } => e,
                other => Error::Domain(format!("path {path_id}, step {n}: {other}")),
            })?;
            if let Some(s) = it.last_solve() {
                solves += 1;
                max_residual = max_residual.max(s.relative_residual);
            }
        }
    }

    Ok(PathDiagnostics {
        path_id,
        lambda,
        nu_grid: cfg.diagnostics.nu_grid.clone(),
        rows,
        weak_modes: (0..cfg.diagnostics.weak_modes).collect(),
        negativity_events: events,
        resolvent_solves: solves,
        max_resolvent_residual: max_residual,
        final_state: if cfg.keep_final_state {
            Some(ScalarField::from_values(grid, it.x().to_vec())?)
        } else {
            None
        },
    })
}

/// Runs paths `0..cfg.n_paths` on `workers` threads; results are ordered by path id.
pub fn run_ensemble(cfg: &SimConfig, workers: usize) -> Result<Vec<PathDiagnostics>> {
    let noise = Arc::new(NoiseModel::build(&cfg.noise, cfg.grid)?);
    let sp = Spectral::new(cfg.grid);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Param(format!("worker pool: {e}")))?;
    pool.install(|| {
        (0..cfg.n_paths as u64)
            .into_par_iter()
            .map(|p| simulate_path(cfg, &noise, &sp, p))
            .collect()
    })
}
