//! Synchronously coupled runs across regularization schedules.
//!
//! Limits are taken in the order ε, then ν, then λ. Every member of a stage
//! shares the time step and the keyed noise stream, so differences between
//! members are pathwise differences under identical Wiener increments.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::integrator::Integrator;
use super::{RegularizationParams, SimConfig, StepMode};
use crate::diagnostics::{mean_and_band, nu_rate_check, NuRateReport, RatePoint};
use crate::error::{Error, Result};
use crate::grid::Spectral;
use crate::noise::{NoiseModel, NoiseStream};

/// Schedules of the three regularization parameters, each non-increasing.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct Schedules {
    pub epsilon: Vec<f64>,
    pub nu: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl Schedules {
    pub fn validate(&self) -> Result<()> {
        for (name, s) in [("epsilon", &self.epsilon), ("nu", &self.nu), ("lambda", &self.lambda)] {
            if s.windows(2).any(|w| w[1] > w[0]) {
                return Err(Error::Config(format!("{name} schedule must be non-increasing: {s:?}")));
            }
        }
        if self.epsilon.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::Config("epsilon schedule entries must be positive".into()));
        }
        Ok(())
    }
}

/// Ensemble statistics of `sup_t ‖X_a(t) − X_b(t)‖²` between two members.
#[derive(Debug, Clone, Serialize)]
pub struct StageComparison {
    pub a: f64,
    pub b: f64,
    pub mean_sup_dist_sq: f64,
    pub band: f64,
    /// Same statistic for `(X_a − X_b)𝟙_K` on the central half-box.
    pub mean_sup_local_dist_sq: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CascadeStage {
    pub name: String,
    pub values: Vec<f64>,
    /// Parameters held fixed during the stage; `None` for the varied one.
    pub fixed_lambda: Option<f64>,
    pub fixed_nu: Option<f64>,
    pub fixed_epsilon: Option<f64>,
    /// Consecutive members.
    pub consecutive: Vec<StageComparison>,
    /// Each member against the reference path (ε stage only: the direct path).
    pub to_reference: Vec<StageComparison>,
    pub reference_distances_decreasing: Option<bool>,
    pub rate: Option<NuRateReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CascadeReport {
    pub n_paths: usize,
    pub dt: f64,
    /// The distances are measured in `H⁻¹_ν` with this `ν`.
    pub distance_nu: f64,
    pub stages: Vec<CascadeStage>,
}

/// Per-path sup distances, over the output times, for every requested pair.
fn coupled_path(
    cfg: &SimConfig,
    members: &[(RegularizationParams, StepMode)],
    pairs: &[(usize, usize)],
    noise: &Arc<NoiseModel>,
    sp: &Spectral,
    path: u64,
    distance_nu: f64,
    interior: &[bool],
) -> Result<Vec<(f64, f64)>> {
    let x0 = cfg.datum.build(&cfg.grid)?;
    let mut its = members
        .iter()
        .map(|(p, mode)| {
            let stream = NoiseStream::new(cfg.seed, path, cfg.substeps)?;
            Integrator::new(sp.clone(), noise.clone(), p, *mode, cfg.dt, stream, &x0)
        })
        .collect::<Result<Vec<_>>>()?;
    let n_steps = cfg.n_steps() as u64;
    let mut sups = vec![(0.0f64, 0.0f64); pairs.len()];
    let k2 = sp.k_sq();
    let mut diff = vec![Complex64::new(0.0, 0.0); cfg.grid.len()];
    let mut local = vec![0.0; cfg.grid.len()];
    for n in 0..=n_steps {
        let record = n % cfg.output_stride as u64 == 0 || n == n_steps;
        for (pi, &(a, b)) in pairs.iter().enumerate().filter(|_| record) {
            let (xa, xb) = (its[a].x_hat(), its[b].x_hat());
            let mut d = 0.0;
            for i in 0..diff.len() {
                diff[i] = xa[i] - xb[i];
                d += diff[i].norm_sqr() / (distance_nu + k2[i]);
            }
            d *= cfg.grid.volume();
            let (ra, rb) = (its[a].x(), its[b].x());
            for i in 0..local.len() {
                local[i] = if interior[i] { ra[i] - rb[i] } else { 0.0 };
            }
            let lh = sp.forward_real(&local);
            let dl = sp.hminus1_nu_sq_from_coeffs(&lh, distance_nu);
            sups[pi].0 = sups[pi].0.max(d);
            sups[pi].1 = sups[pi].1.max(dl);
        }
        if n < n_steps {
            for it in its.iter_mut() {
                it.prepare()?;
                it.advance()?;
            }
        }
    }
    Ok(sups)
}

fn run_stage(
    cfg: &SimConfig,
    members: &[(RegularizationParams, StepMode)],
    pairs: &[(usize, usize)],
    noise: &Arc<NoiseModel>,
    sp: &Spectral,
    distance_nu: f64,
) -> Result<Vec<(f64, f64, f64)>> {
    let interior: Vec<bool> = (0..cfg.grid.len())
        .map(|i| {
            let xi = cfg.grid.coords(i);
            xi.iter()
                .take(cfg.grid.dim())
                .all(|c| c.abs() < 0.5 * cfg.grid.box_half_length())
        })
        .collect();
    let per_path: Vec<Vec<(f64, f64)>> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|p| coupled_path(cfg, members, pairs, noise, sp, p, distance_nu, &interior))
        .collect::<Result<_>>()?;
    Ok((0..pairs.len())
        .map(|j| {
            let d: Vec<f64> = per_path.iter().map(|v| v[j].0).collect();
            let l: Vec<f64> = per_path.iter().map(|v| v[j].1).collect();
            let (m, band) = mean_and_band(&d);
            (m, band, mean_and_band(&l).0)
        })
        .collect())
}

fn comparisons(pairs: &[(usize, usize)], stats: &[(f64, f64, f64)], labels: &dyn Fn(usize) -> f64) -> Vec<StageComparison> {
    pairs
        .iter()
        .zip(stats)
        .map(|(&(a, b), &(m, band, l))| StageComparison {
            a: labels(a),
            b: labels(b),
            mean_sup_dist_sq: m,
            band,
            mean_sup_local_dist_sq: l,
        })
        .collect()
}

/// Runs the ε, ν and λ stages on `workers` threads.
///
/// `cfg.params` supplies the fixed values: the ε stage runs at `(cfg.λ, cfg.ν)`,
/// the ν stage at `cfg.λ` with `ε = 0`, the λ stage at `ν = min(ν schedule ∪ {cfg.ν})`
/// with `ε = 0`. All members use `cfg.dt`, which must satisfy the step bound of
/// every direct-mode member.
pub fn cascade_study(cfg: &SimConfig, schedules: &Schedules, workers: usize, distance_nu: f64) -> Result<CascadeReport> {
    schedules.validate()?;
    if !(distance_nu > 0.0) {
        return Err(Error::Param("distance shift must be positive".into()));
    }
    let noise = Arc::new(NoiseModel::build(&cfg.noise, cfg.grid)?);
    let sp = Spectral::new(cfg.grid);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Param(format!("worker pool: {e}")))?;
    let base = cfg.params;
    let mut stages = Vec::new();

    pool.install(|| -> Result<()> {
        if !schedules.epsilon.is_empty() {
            let mut members = vec![(RegularizationParams { epsilon: 0.0, ..base }, StepMode::Direct)];
            for &e in &schedules.epsilon {
                members.push((RegularizationParams { epsilon: e, ..base }, StepMode::Yosida));
            }
            let m = schedules.epsilon.len();
            let mut pairs: Vec<(usize, usize)> = (1..m).map(|i| (i, i + 1)).collect();
            pairs.extend((1..=m).map(|i| (i, 0)));
            let stats = run_stage(cfg, &members, &pairs, &noise, &sp, distance_nu)?;
            let label = |i: usize| if i == 0 { 0.0 } else { schedules.epsilon[i - 1] };
            let all = comparisons(&pairs, &stats, &label);
            let (consecutive, to_reference) = all.split_at(m - 1);
            let decreasing = to_reference
                .windows(2)
                .all(|w| w[1].mean_sup_dist_sq < w[0].mean_sup_dist_sq);
            stages.push(CascadeStage {
                name: "epsilon".into(),
                values: schedules.epsilon.clone(),
                fixed_lambda: Some(base.lambda),
                fixed_nu: Some(base.nu),
                fixed_epsilon: None,
                consecutive: consecutive.to_vec(),
                to_reference: to_reference.to_vec(),
                reference_distances_decreasing: Some(decreasing),
                rate: None,
            });
        }

        if !schedules.nu.is_empty() {
            let members: Vec<_> = schedules
                .nu
                .iter()
                .map(|&nu| (RegularizationParams { nu, epsilon: 0.0, ..base }, StepMode::Direct))
                .collect();
            let pairs: Vec<(usize, usize)> = (1..members.len()).map(|i| (i - 1, i)).collect();
            let stats = run_stage(cfg, &members, &pairs, &noise, &sp, distance_nu)?;
            let all = comparisons(&pairs, &stats, &|i| schedules.nu[i]);
            let points: Vec<RatePoint> = all
                .iter()
                .map(|c| RatePoint {
                    delta: (c.a - c.b).abs(),
                    dist_sq: c.mean_sup_dist_sq,
                })
                .collect();
            let x0 = cfg.datum.build(&cfg.grid)?;
            let rate = if points.is_empty() { None } else { Some(nu_rate_check(&points, x0.norm_l2())) };
            stages.push(CascadeStage {
                name: "nu".into(),
                values: schedules.nu.clone(),
                fixed_lambda: Some(base.lambda),
                fixed_nu: None,
                fixed_epsilon: Some(0.0),
                consecutive: all,
                to_reference: Vec::new(),
                reference_distances_decreasing: None,
                rate,
            });
        }

        if !schedules.lambda.is_empty() {
            let nu = schedules.nu.iter().copied().fold(base.nu, f64::min);
            let members: Vec<_> = schedules
                .lambda
                .iter()
                .map(|&lambda| (RegularizationParams { lambda, nu, epsilon: 0.0, ..base }, StepMode::Direct))
                .collect();
            let pairs: Vec<(usize, usize)> = (1..members.len()).map(|i| (i - 1, i)).collect();
            let stats = run_stage(cfg, &members, &pairs, &noise, &sp, distance_nu)?;
            stages.push(CascadeStage {
                name: "lambda".into(),
                values: schedules.lambda.clone(),
                fixed_lambda: None,
                fixed_nu: Some(nu),
                fixed_epsilon: Some(0.0),
                consecutive: comparisons(&pairs, &stats, &|i| schedules.lambda[i]),
                to_reference: Vec::new(),
                reference_distances_decreasing: None,
                rate: None,
            });
        }
        Ok(())
    })?;

    Ok(CascadeReport {
        n_paths: cfg.n_paths,
        dt: cfg.dt,
        distance_nu,
        stages,
    })
}
