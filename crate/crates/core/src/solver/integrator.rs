use std::sync::Arc;

use num_complex::Complex64;

use super::full_drift::{FullDriftSolver, SolveStats};
use super::{RegularizationParams, SimConfig, StepMode};
use crate::error::{Error, Result};
use crate::grid::{ScalarField, Spectral};
use crate::monotone::{log_resolvent, YosidaParams};
use crate::noise::{NoiseModel, NoiseStream};

/// Snapshot of a path: time, current field and step counter.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub time: f64,
    pub field: ScalarField,
    pub step_index: u64,
}

/// Quantities of the current field computed while preparing a step.
#[derive(Debug, Clone, Copy, Default)]
pub struct Prepared {
    /// `‖∇Ψ̃_λ(X)‖²_{L²}`.
    pub grad_psi_sq: f64,
    /// `‖∇Ψ_λ(X)‖²_{L²}`.
    pub grad_yosida_sq: f64,
    /// `‖X‖²_{L²}`.
    pub l2_sq: f64,
}

/// Advances one path. Each step is split in two phases:
///
/// * [`Integrator::prepare`] evaluates `Ψ_λ(X)`, draws the increment and forms
///   the explicit part `Y = X + ½dt(σ⊗σ)(X) + X·dW`;
/// * [`Integrator::advance`] solves for the new field.
///
/// Between the phases the current field, its coefficients and `Ψ_λ(X)` are
/// all available for diagnostics.
#[derive(Debug, Clone)]
pub struct Integrator {
    sp: Spectral,
    noise: Arc<NoiseModel>,
    yp: YosidaParams,
    params: RegularizationParams,
    mode: StepMode,
    dt: f64,
    stream: NoiseStream,
    denom: Vec<f64>,
    half_dt_strat: Vec<f64>,
    x: Vec<f64>,
    x_hat: Vec<Complex64>,
    log_j: Vec<f64>,
    phi: Vec<f64>,
    y: Vec<f64>,
    y_hat: Vec<Complex64>,
    phi_hat: Vec<Complex64>,
    dw: Vec<f64>,
    gauss: Vec<f64>,
    solver: Option<FullDriftSolver>,
    last_solve: Option<SolveStats>,
    step: u64,
    prepared: bool,
}

impl Integrator {
    pub fn new(
        sp: Spectral,
        noise: Arc<NoiseModel>,
        params: &RegularizationParams,
        mode: StepMode,
        dt: f64,
        stream: NoiseStream,
        initial: &ScalarField,
    ) -> Result<Self> {
        if initial.grid() != sp.grid() || noise.grid() != sp.grid() {
            return Err(Error::GridMismatch("datum, noise and plan must share a grid".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::Param(format!("dt must be positive, got {dt}")));
        }
        let yp = params.yosida()?;
        let nu = params.nu;
        let denom = sp
            .k_sq()
            .iter()
            .map(|&k2| 1.0 / (1.0 + dt * yp.lambda() * (nu + k2)))
            .collect();
        let half_dt_strat = noise.strat_field().values().iter().map(|s| 0.5 * dt * s).collect();
        let solver = match mode {
            StepMode::Direct => None,
            StepMode::Yosida => {
                if !(params.epsilon > 0.0) {
                    return Err(Error::Param("yosida mode needs epsilon > 0".into()));
                }
                Some(FullDriftSolver::new(sp.clone(), params)?)
            }
        };
        let n = initial.values().len();
        let x = initial.values().to_vec();
        let x_hat = sp.forward_real(&x);
        let mut log_j = vec![0.0; n];
        for (l, &v) in log_j.iter_mut().zip(&x) {
            *l = log_resolvent(v, &yp, None)?;
        }
        Ok(Integrator {
            yp,
            params: *params,
            mode,
            dt,
            stream,
            denom,
            half_dt_strat,
            x,
            x_hat,
            log_j,
            phi: vec![0.0; n],
            y: vec![0.0; n],
            y_hat: vec![Complex64::new(0.0, 0.0); n],
            phi_hat: vec![Complex64::new(0.0, 0.0); n],
            dw: vec![0.0; n],
            gauss: Vec::new(),
            solver,
            last_solve: None,
            step: 0,
            prepared: false,
            noise,
            sp,
        })
    }

    /// Builds the integrator of `path` for a configuration.
    pub fn for_path(cfg: &SimConfig, sp: Spectral, noise: Arc<NoiseModel>, path: u64) -> Result<Self> {
        let x0 = cfg.datum.build(&cfg.grid)?;
        let stream = NoiseStream::new(cfg.seed, path, cfg.substeps)?;
        Integrator::new(sp, noise, &cfg.params, cfg.mode, cfg.dt, stream, &x0)
    }

    pub fn spectral(&self) -> &Spectral {
        &self.sp
    }

    pub fn yosida_params(&self) -> &YosidaParams {
        &self.yp
    }

    pub fn params(&self) -> &RegularizationParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    /// Current field samples.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Normalized coefficients of the current field.
    pub fn x_hat(&self) -> &[Complex64] {
        &self.x_hat
    }

    /// `ln J_λ(X) = Ψ_λ(X)` per sample, valid after [`Integrator::prepare`].
    pub fn log_resolvent(&self) -> &[f64] {
        &self.log_j
    }

    /// `Ψ_λ(X) − Ψ_λ(0)` per sample, valid after [`Integrator::prepare`].
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Explicit part `Y = X + ½dt(σ⊗σ)(X) + X·dW`, valid after [`Integrator::prepare`].
    pub fn explicit_part(&self) -> &[f64] {
        &self.y
    }

    /// Standard normal coefficients of the current step's increment.
    pub fn gaussians(&self) -> &[f64] {
        &self.gauss
    }

    /// Statistics of the most recent full-drift resolvent solve.
    pub fn last_solve(&self) -> Option<SolveStats> {
        self.last_solve
    }

    pub fn state(&self) -> Result<SolverState> {
        Ok(SolverState {
            time: self.time(),
            field: ScalarField::from_values(*self.sp.grid(), self.x.clone())?,
            step_index: self.step,
        })
    }

    /// Evaluates the nonlinearity, draws the increment and forms `Y`.
    pub fn prepare(&mut self) -> Result<Prepared> {
        let psi0 = self.yp.psi_at_zero();
        for (i, &v) in self.x.iter().enumerate() {
            let y = log_resolvent(v, &self.yp, Some(self.log_j[i])).map_err(|e| Error::Pointwise {
                index: i,
                source: Box::new(e),
            })?;
            self.log_j[i] = y;
            self.phi[i] = y - psi0;
        }

        if self.noise.is_off() {
            self.y.copy_from_slice(&self.x);
        } else {
            self.stream.gaussians(self.step, self.noise.len(), &mut self.gauss);
            self.noise.assemble_into(&self.gauss, self.dt, &mut self.dw);
            for i in 0..self.x.len() {
                let xi = self.x[i];
                self.y[i] = xi + self.half_dt_strat[i] * xi + xi * self.dw[i];
            }
        }

        self.sp
            .forward_real_pair_into(&self.y, &self.phi, &mut self.y_hat, &mut self.phi_hat);

        let lambda = self.yp.lambda();
        let k2 = self.sp.k_sq();
        let (g, gy) = gradient_energies(k2, &self.phi_hat, &self.x_hat, lambda);
        let l2_sq = self.x.iter().map(|v| v * v).sum::<f64>() * self.sp.grid().cell_volume();
        self.prepared = true;
        let vol = self.sp.grid().volume();
        Ok(Prepared {
            grad_psi_sq: g * vol,
            grad_yosida_sq: gy * vol,
            l2_sq,
        })
    }

    /// Completes the step prepared by [`Integrator::prepare`].
    pub fn advance(&mut self) -> Result<()> {
        if !self.prepared {
            self.prepare()?;
        }
        self.prepared = false;
        match self.mode {
            StepMode::Direct => {
                let k2 = self.sp.k_sq();
                let nu = self.params.nu;
                for i in 0..self.x.len() {
                    self.x_hat[i] = (self.y_hat[i] - self.phi_hat[i] * (self.dt * (nu + k2[i]))) * self.denom[i];
                }
                self.sp.inverse_real_into(&self.x_hat, &mut self.x);
            }
            StepMode::Yosida => {
                let eps = self.params.epsilon;
                let a = eps + self.dt;
                let solver = self.solver.as_mut().expect("solver present in yosida mode");
                let (u, stats) = solver.solve(&self.y, a, Some(&self.y))?;
                self.last_solve = Some(stats);
                let wy = eps / a;
                let wu = self.dt / a;
                for i in 0..self.x.len() {
                    self.x[i] = wy * self.y[i] + wu * u[i];
                }
                self.x_hat = self.sp.forward_real(&self.x);
            }
        }
        self.step += 1;
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Stability {
                step: self.step as usize,
                time: self.time(),
            });
        }
        Ok(())
    }

    /// Evaluates `‖∇Ψ̃_λ(X)‖²` and `‖X‖²` without drawing noise.
    pub fn evaluate(&mut self) -> Result<Prepared> {
        let psi0 = self.yp.psi_at_zero();
        for (i, &v) in self.x.iter().enumerate() {
            let y = log_resolvent(v, &self.yp, Some(self.log_j[i]))?;
            self.log_j[i] = y;
            self.phi[i] = y - psi0;
        }
        let ph = self.sp.forward_real(&self.phi);
        let lambda = self.yp.lambda();
        let k2 = self.sp.k_sq();
        let (g, gy) = gradient_energies(k2, &ph, &self.x_hat, lambda);
        self.phi_hat = ph;
        let vol = self.sp.grid().volume();
        Ok(Prepared {
            grad_psi_sq: g * vol,
            grad_yosida_sq: gy * vol,
            l2_sq: self.x.iter().map(|v| v * v).sum::<f64>() * self.sp.grid().cell_volume(),
        })
    }
}

/// `Σ|k|²|φ̂ + λX̂|²` and `Σ|k|²|φ̂|²`.
fn gradient_energies(k2: &[f64], phi_hat: &[Complex64], x_hat: &[Complex64], lambda: f64) -> (f64, f64) {
    let mut g = 0.0;
    let mut gy = 0.0;
    for i in 0..k2.len() {
        g += k2[i] * (phi_hat[i] + x_hat[i] * lambda).norm_sqr();
        gy += k2[i] * phi_hat[i].norm_sqr();
    }
    (g, gy)
}

/// One Itô step of `state` under `cfg` in the given mode.
///
/// Convenience wrapper that builds a fresh [`Integrator`]; paths use the
/// integrator directly to keep plans and warm starts.
pub fn step_ito(state: &SolverState, cfg: &SimConfig, mode: StepMode, path: u64) -> Result<SolverState> {
    let noise = Arc::new(NoiseModel::build(&cfg.noise, cfg.grid)?);
    let stream = NoiseStream::new(cfg.seed, path, cfg.substeps)?;
    let mut it = Integrator::new(Spectral::new(cfg.grid), noise, &cfg.params, mode, cfg.dt, stream, &state.field)?;
    it.step = state.step_index;
    it.advance()?;
    Ok(SolverState {
        time: state.time + cfg.dt,
        field: ScalarField::from_values(cfg.grid, it.x)?,
        step_index: state.step_index + 1,
    })
}
