//! The resolvent `𝕁_a = (I + aA_ν)⁻¹` of the full drift `A_ν = (ν − Δ)Ψ̃_λ`.
//!
//! Given `x`, find `u` with `F(u) = u + a(ν − Δ)Ψ̃_λ(u) − x = 0`.
//! The primary iteration is a fixed point preconditioned by the constant
//! coefficient operator `(I + aκ(ν − Δ))⁻¹`, with `κ` the midpoint of the
//! range of `Ψ̃′_λ(u)`. Its linear contraction factor is
//! `(max Ψ̃′ − min Ψ̃′)/(max Ψ̃′ + min Ψ̃′) < 1`. When it stalls, the solver
//! switches to Newton steps whose linear systems
//! `(D⁻¹ + a(ν − Δ))η = −F`, `δ = η/D`, `D = Ψ̃′_λ(u)`, are symmetric positive
//! definite and solved by preconditioned conjugate gradients.
//!
//! Residuals are measured in `H⁻¹_ν`, with `ν` replaced by 1 when `ν = 0`.

use num_complex::Complex64;
use serde::Serialize;

use super::RegularizationParams;
use crate::error::{Error, Result};
use crate::grid::{ScalarField, Spectral};
use crate::monotone::{log_resolvent, YosidaParams};

/// Outcome of one resolvent solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub newton_steps: usize,
    pub relative_residual: f64,
}

/// Reusable solver with scratch buffers for one grid.
#[derive(Debug, Clone)]
pub struct FullDriftSolver {
    sp: Spectral,
    yp: YosidaParams,
    nu: f64,
    tol: f64,
    max_iter: usize,
    log_j: Vec<f64>,
}

const STALL_RATIO: f64 = 0.7;
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

impl FullDriftSolver {
    pub fn new(sp: Spectral, params: &RegularizationParams) -> Result<Self> {
        let n = sp.grid().len();
        Ok(FullDriftSolver {
            yp: params.yosida()?,
            nu: params.nu,
            tol: params.solver_tol,
            max_iter: params.solver_max_iter,
            log_j: vec![0.0; n],
            sp,
        })
    }

    fn norm_weight(&self) -> f64 {
        if self.nu > 0.0 {
            self.nu
        } else {
            1.0
        }
    }

    /// `Ψ̃_λ(u)` into `psi`, `Ψ̃′_λ(u)` into `deriv`, warm-starting from the last call.
    fn nonlinearity(&mut self, u: &[f64], psi: &mut [f64], deriv: Option<&mut [f64]>) -> Result<()> {
        let lambda = self.yp.lambda();
        let psi0 = self.yp.psi_at_zero();
        for (i, &ui) in u.iter().enumerate() {
            let y = log_resolvent(ui, &self.yp, Some(self.log_j[i])).map_err(|e| Error::Pointwise {
                index: i,
                source: Box::new(e),
            })?;
            self.log_j[i] = y;
            psi[i] = y - psi0 + lambda * ui;
        }
        if let Some(d) = deriv {
            for (di, &y) in d.iter_mut().zip(&self.log_j) {
                *di = lambda + 1.0 / (lambda + y.exp());
            }
        }
        Ok(())
    }

    /// Residual coefficients `F̂ = û + a(ν+|k|²)Ψ̂ − x̂` and their `H⁻¹` norm.
    fn residual(&self, u_hat: &[Complex64], psi_hat: &[Complex64], x_hat: &[Complex64], a: f64, f_hat: &mut [Complex64]) -> f64 {
        let k2 = self.sp.k_sq();
        for i in 0..f_hat.len() {
            f_hat[i] = u_hat[i] + psi_hat[i] * (a * (self.nu + k2[i])) - x_hat[i];
        }
        let w = self.norm_weight();
        self.sp.weighted_energy(f_hat, |q| 1.0 / (w + q)).sqrt()
    }

    /// Solves `u + a(ν − Δ)Ψ̃_λ(u) = x`, starting from `guess` when given.
    pub fn solve(&mut self, x: &[f64], a: f64, guess: Option<&[f64]>) -> Result<(Vec<f64>, SolveStats)> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Param(format!("resolvent step must be positive, got {a}")));
        }
        let n = x.len();
        if n != self.sp.grid().len() {
            return Err(Error::GridMismatch("resolvent input has the wrong length".into()));
        }
        if x.iter().all(|&v| v == 0.0) {
            return Ok((vec![0.0; n], SolveStats::default()));
        }
        let k2 = self.sp.k_sq().to_vec();
        let w = self.norm_weight();
        let x_hat = self.sp.forward_real(x);
        let x_norm = self.sp.weighted_energy(&x_hat, |q| 1.0 / (w + q)).sqrt();

        let mut u: Vec<f64> = match guess {
            Some(g) if g.len() == n => g.to_vec(),
            _ => x.to_vec(),
        };
        let mut psi = vec![0.0; n];
        let mut deriv = vec![0.0; n];
        let mut f_hat = vec![ZERO; n];
        let mut stats = SolveStats::default();
        let mut prev = f64::INFINITY;
        let mut use_newton = false;

        loop {
            self.nonlinearity(&u, &mut psi, Some(&mut deriv))?;
            let (u_hat, psi_hat) = self.sp.forward_real_pair(&u, &psi);
            let res = self.residual(&u_hat, &psi_hat, &x_hat, a, &mut f_hat);
            stats.relative_residual = res / x_norm;
            if !res.is_finite() {
                return Err(Error::NonConvergence {
                    input: x_norm,
                    residual: res,
                    iterations: stats.iterations,
                });
            }
            if res <= self.tol * x_norm {
                return Ok((u, stats));
            }
            if stats.iterations >= self.max_iter {
                return Err(Error::NonConvergence {
                    input: x_norm,
                    residual: stats.relative_residual,
                    iterations: stats.iterations,
                });
            }
            if res > STALL_RATIO * prev {
                use_newton = true;
            }
            prev = res;
            stats.iterations += 1;

            if use_newton {
                stats.newton_steps += 1;
                let f = self.sp.inverse_real(&f_hat);
                let eta = self.pcg(&deriv, &f, a)?;
                for i in 0..n {
                    u[i] += eta[i] / deriv[i];
                }
            } else {
                let (lo, hi) = deriv
                    .iter()
                    .fold((f64::INFINITY, 0.0f64), |(l, h), &d| (l.min(d), h.max(d)));
                let kappa = 0.5 * (lo + hi);
                let mut u_new = u_hat;
                for i in 0..n {
                    u_new[i] -= f_hat[i] / (1.0 + a * kappa * (self.nu + k2[i]));
                }
                u = self.sp.inverse_real(&u_new);
            }
        }
    }

    /// Solves `(D⁻¹ + a(ν − Δ))η = −f` by conjugate gradients.
    fn pcg(&self, deriv: &[f64], f: &[f64], a: f64) -> Result<Vec<f64>> {
        let n = f.len();
        let k2 = self.sp.k_sq();
        let dinv: Vec<f64> = deriv.iter().map(|d| 1.0 / d).collect();
        let dbar = dinv.iter().sum::<f64>() / n as f64;
        let apply = |v: &[f64]| -> Vec<f64> {
            let mut c = self.sp.forward_real(v);
            for i in 0..n {
                c[i] *= a * (self.nu + k2[i]);
            }
            let lv = self.sp.inverse_real(&c);
            (0..n).map(|i| dinv[i] * v[i] + lv[i]).collect()
        };
        let precond = |r: &[f64]| -> Vec<f64> {
            let mut c = self.sp.forward_real(r);
            for i in 0..n {
                c[i] /= dbar + a * (self.nu + k2[i]);
            }
            self.sp.inverse_real(&c)
        };
        let dot = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(a, b)| a * b).sum::<f64>();

        let mut eta = vec![0.0; n];
        let mut r: Vec<f64> = f.iter().map(|v| -v).collect();
        let r0 = dot(&r, &r).sqrt();
        let mut z = precond(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        for _ in 0..self.max_iter {
            if dot(&r, &r).sqrt() <= 1e-6 * r0 {
                break;
            }
            let ap = apply(&p);
            let alpha = rz / dot(&p, &ap);
            for i in 0..n {
                eta[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            z = precond(&r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Ok(eta)
    }
}

/// `𝕁_ε(x)`: solves `u − ε(Δ − ν)Ψ̃_λ(u) = x`.
pub fn resolvent_full_drift(x: &ScalarField, p: &RegularizationParams) -> Result<ScalarField> {
    if !(p.epsilon > 0.0) {
        return Err(Error::Param(format!("resolvent needs epsilon > 0, got {}", p.epsilon)));
    }
    let mut solver = FullDriftSolver::new(Spectral::new(*x.grid()), p)?;
    let (u, _) = solver.solve(x.values(), p.epsilon, None)?;
    ScalarField::from_values(*x.grid(), u)
}
