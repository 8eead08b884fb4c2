//! Time integration of the regularized equations and the cascade runner.

mod cascade;
mod datum;
mod full_drift;
mod integrator;
mod path;

pub use cascade::{cascade_study, CascadeReport, CascadeStage, Schedules, StageComparison};
pub use datum::{BumpSpec, DatumSpec};
pub use full_drift::{resolvent_full_drift, FullDriftSolver, SolveStats};
pub use integrator::{step_ito, Integrator, Prepared, SolverState};
pub use path::{run_ensemble, simulate_path};

use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsSpec;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::monotone::{YosidaParams, DEFAULT_MAX_ITER, DEFAULT_NEWTON_TOL};
use crate::noise::{NoiseModel, NoiseSpec};

/// Default relative tolerance of the full-drift resolvent.
pub const DEFAULT_SOLVER_TOL: f64 = 1e-10;
/// Default iteration cap of the full-drift resolvent.
pub const DEFAULT_SOLVER_MAX_ITER: usize = 200;
/// Default safety factor of the time-step bound.
pub const DEFAULT_C_STAB: f64 = 0.25;

/// The triple `(λ, ν, ε)` and solver tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizationParams {
    pub lambda: f64,
    pub nu: f64,
    pub epsilon: f64,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl RegularizationParams {
    pub fn new(lambda: f64, nu: f64, epsilon: f64) -> Result<Self> {
        let p = RegularizationParams {
            lambda,
            nu,
            epsilon,
            solver_tol: DEFAULT_SOLVER_TOL,
            solver_max_iter: DEFAULT_SOLVER_MAX_ITER,
            newton_tol: DEFAULT_NEWTON_TOL,
            newton_max_iter: DEFAULT_MAX_ITER,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::Param(format!("lambda must lie in (0, 1], got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.nu) {
            return Err(Error::Param(format!("nu must lie in [0, 1], got {}", self.nu)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Param(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if !(self.solver_tol > 0.0) || self.solver_max_iter == 0 {
            return Err(Error::Param("solver tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }

    pub fn yosida(&self) -> Result<YosidaParams> {
        YosidaParams::with_tolerance(self.lambda, self.newton_tol, self.newton_max_iter)
    }
}

/// How the drift is advanced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    /// IMEX step of `(Δ−ν)Ψ̃_λ`: the `λ(Δ−ν)` part implicit, the rest explicit.
    Direct,
    /// Implicit step of the Yosida approximation `A^ε = (I − 𝕁_ε)/ε`.
    Yosida,
}

/// Largest admissible time step.
///
/// Direct mode: `c_stab·λ/(ν + |k|²_max)`. Yosida mode: the drift is implicit and
/// only the explicit rectification `½σ⊗σ` limits the step, giving
/// `c_stab/(½ max Σμ_k e_k²)`.
pub fn stability_bound(
    grid: &Grid,
    params: &RegularizationParams,
    noise: &NoiseModel,
    mode: StepMode,
    c_stab: f64,
) -> f64 {
    match mode {
        StepMode::Direct => c_stab * params.lambda / (params.nu + grid.max_wavenumber_sq()),
        StepMode::Yosida => {
            let s = noise.strat_field().max_abs();
            if s > 0.0 {
                c_stab / (0.5 * s)
            } else {
                f64::INFINITY
            }
        }
    }
}

/// Everything needed to simulate one family of paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub grid: Grid,
    pub noise: NoiseSpec,
    pub params: RegularizationParams,
    pub mode: StepMode,
    pub dt: f64,
    pub t_final: f64,
    /// Diagnostics are recorded every `output_stride` steps and at the final time.
    pub output_stride: usize,
    /// Fine Brownian slots per step; see [`crate::noise::NoiseStream`].
    pub substeps: u64,
    pub c_stab: f64,
    pub datum: DatumSpec,
    pub n_paths: usize,
    pub seed: u64,
    pub diagnostics: DiagnosticsSpec,
    /// Keep the final field of every path.
    pub keep_final_state: bool,
}

impl SimConfig {
    /// Desk-scale defaults: `d = 3`, `N = 32`, `L = 8`, `K = 16`, `T = 1`, `λ = 1/2`, `ν = 0`.
    pub fn desk_default() -> Self {
        SimConfig {
            grid: Grid::new(3, 32, 8.0).expect("valid grid"),
            noise: NoiseSpec::default(),
            params: RegularizationParams::new(0.5, 0.0, 0.0).expect("valid params"),
            mode: StepMode::Direct,
            dt: 0.0,
            t_final: 1.0,
            output_stride: 50,
            substeps: 1,
            c_stab: DEFAULT_C_STAB,
            datum: DatumSpec::default(),
            n_paths: 100,
            seed: 20240601,
            diagnostics: DiagnosticsSpec::default(),
            keep_final_state: false,
        }
    }

    /// Number of steps `T/dt`, rounded to the nearest integer.
    pub fn n_steps(&self) -> usize {
        if self.t_final == 0.0 {
            0
        } else {
            (self.t_final / self.dt).round() as usize
        }
    }

    /// Replaces `dt` by `T/n` with the smallest `n` that respects the stability bound.
    pub fn with_auto_dt(mut self, noise: &NoiseModel) -> Self {
        let bound = stability_bound(&self.grid, &self.params, noise, self.mode, self.c_stab);
        let t = if self.t_final > 0.0 { self.t_final } else { 1.0 };
        let n = (t / bound).ceil().max(1.0);
        self.dt = t / n;
        self
    }

    /// Checks all preconditions; `allow_unstable_dt` skips the time-step bound only.
    pub fn validate(&self, noise: &NoiseModel, allow_unstable_dt: bool) -> Result<()> {
        self.params.validate()?;
        if self.mode == StepMode::Yosida && self.params.epsilon <= 0.0 {
            return Err(Error::Param("yosida mode needs epsilon > 0".into()));
        }
        if self.diagnostics.energy && self.params.lambda > 0.5 {
            return Err(Error::Param(format!(
                "energy diagnostics need lambda <= 1/2, got {}",
                self.params.lambda
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Param(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::Param(format!("t_final must be >= 0, got {}", self.t_final)));
        }
        if self.t_final > 0.0 {
            let n = self.t_final / self.dt;
            if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
                return Err(Error::Param(format!(
                    "t_final = {} is not a whole number of steps dt = {}",
                    self.t_final, self.dt
                )));
            }
        }
        if self.output_stride == 0 || self.substeps == 0 || self.n_paths == 0 {
            return Err(Error::Param("output_stride, substeps and n_paths must be >= 1".into()));
        }
        if !allow_unstable_dt {
            let bound = stability_bound(&self.grid, &self.params, noise, self.mode, self.c_stab);
            if self.dt > bound * (1.0 + 1e-12) {
                return Err(Error::Param(format!(
                    "dt = {:e} exceeds the stability bound {bound:e}",
                    self.dt
                )));
            }
        }
        let x = self.datum.build(&self.grid)?;
        if x.values().iter().any(|&v| v <= 0.0) {
            return Err(Error::Param("initial datum must be strictly positive on the grid".into()));
        }
        self.diagnostics.validate(noise)?;
        Ok(())
    }
}
