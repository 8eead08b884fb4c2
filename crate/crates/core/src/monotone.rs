//! Scalar proximal calculus for the logarithm.
//!
//! The resolvent `J_λ(r)` is the unique positive root of `x + λ ln x = r`.
//! Everything else in this module is built from it:
//!
//! | function | formula |
//! |---|---|
//! | [`yosida`] | `Ψ_λ(r) = (r − J_λ(r))/λ = ln J_λ(r)` |
//! | [`rectified`] | `Ψ̃_λ(r) = Ψ_λ(r) − Ψ_λ(0) + λr` |
//! | [`rectified_derivative`] | `Ψ̃′_λ(r) = λ + 1/(λ + J_λ(r))` |
//! | [`moreau_envelope`] | `j_λ(r) = j(J_λ(r)) + (r − J_λ(r))²/(2λ)` |
//! | [`yosida_gap`] | `Ψ_λ(r) + r/(λ + J_λ(r)) − 2r` |
//!
//! The root is found in log coordinates, `g(y) = e^y + λy − r`, which stays
//! well scaled when `J_λ(r) ≈ e^{r/λ}` is tiny.

use crate::error::{Error, Result};
use crate::grid::ScalarField;

/// Default absolute residual tolerance of the scalar root finder.
pub const DEFAULT_NEWTON_TOL: f64 = 1e-12;
/// Default iteration cap of the scalar root finder.
pub const DEFAULT_MAX_ITER: usize = 100;

/// The maximal monotone graph `r ↦ ln r` on `(0, ∞)` and its potential.
#[derive(Debug, Clone, Copy, Default)]
pub struct LogOperator;

impl LogOperator {
    /// `Ψ(r) = ln r`, defined for `r > 0` only.
    pub fn psi(r: f64) -> Result<f64> {
        if r > 0.0 && r.is_finite() {
            Ok(r.ln())
        } else {
            Err(Error::Domain(format!("ln is undefined at r = {r}")))
        }
    }

    /// The potential `j(r) = r ln r − r`, with `j(0) = 0` and `j(r) = +∞` for `r < 0`.
    pub fn potential(r: f64) -> f64 {
        if r > 0.0 {
            r * r.ln() - r
        } else if r == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Regularization level and root-finder settings, with `Ψ_λ(0)` cached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YosidaParams {
    lambda: f64,
    newton_tol: f64,
    max_iter: usize,
    psi_at_zero: f64,
}

impl YosidaParams {
    /// Parameters with the default tolerance and iteration cap.
    pub fn new(lambda: f64) -> Result<Self> {
        Self::with_tolerance(lambda, DEFAULT_NEWTON_TOL, DEFAULT_MAX_ITER)
    }

    pub fn with_tolerance(lambda: f64, newton_tol: f64, max_iter: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::Param(format!("lambda must lie in (0, 1], got {lambda}")));
        }
        if !(newton_tol > 0.0 && newton_tol.is_finite()) {
            return Err(Error::Param(format!("newton_tol must be positive, got {newton_tol}")));
        }
        if max_iter == 0 {
            return Err(Error::Param("max_iter must be at least 1".into()));
        }
        let mut p = YosidaParams {
            lambda,
            newton_tol,
            max_iter,
            psi_at_zero: 0.0,
        };
        p.psi_at_zero = log_resolvent(0.0, &p, None)?;
        Ok(p)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn newton_tol(&self) -> f64 {
        self.newton_tol
    }

    pub fn max_iter(&self) -> usize {
        self.max_iter
    }

    /// The cached value `Ψ_λ(0) = ln J_λ(0)`.
    pub fn psi_at_zero(&self) -> f64 {
        self.psi_at_zero
    }
}

/// Bracket `[lo, hi]` for `y = ln J_λ(r)`.
fn bracket(r: f64, lambda: f64) -> (f64, f64) {
    if r > 0.0 {
        let lo = ((r + lambda) / (1.0 + lambda)).ln();
        let hi = if r >= 1.0 { r.ln() } else { 0.0 };
        (lo.min(hi), hi)
    } else {
        ((r - 1.0) / lambda, r / lambda)
    }
}

/// Solves `e^y + λy = r` for `y = ln J_λ(r)`.
///
/// `guess` warm-starts the iteration; it is clamped into the bracket.
pub fn log_resolvent(r: f64, p: &YosidaParams, guess: Option<f64>) -> Result<f64> {
    if !r.is_finite() {
        return Err(Error::Domain(format!("resolvent argument must be finite, got {r}")));
    }
    let lambda = p.lambda;
    let g = |y: f64| y.exp() + lambda * y - r;

    // Warm starts along a path are usually within 1e−2 of the root: a few
    // Halley steps converge without paying for the bracket's logarithms.
    let mut guess = guess;
    if let Some(mut y) = guess.filter(|v| v.is_finite()) {
        for _ in 0..4 {
            let ey = y.exp();
            let gy = ey + lambda * y - r;
            if !gy.is_finite() {
                break;
            }
            let tol = p
                .newton_tol
                .max(4.0 * f64::EPSILON * (r.abs() + ey + lambda * y.abs()));
            if gy.abs() <= tol {
                return Ok(y);
            }
            let d1 = ey + lambda;
            let step = 2.0 * gy * d1 / (2.0 * d1 * d1 - gy * ey);
            if !(step.abs() <= 0.5) {
                break;
            }
            y -= step;
        }
        guess = Some(y);
    }

    let (mut lo, mut hi) = bracket(r, lambda);
    let mut y = match guess {
        Some(v) if v.is_finite() => v.clamp(lo, hi),
        _ => hi,
    };
    let mut gy = g(y);
    let mut residual = f64::INFINITY;
    for _ in 0..p.max_iter {
        let ey = y.exp();
        residual = gy.abs();
        let tol = p
            .newton_tol
            .max(4.0 * f64::EPSILON * (r.abs() + ey + lambda * y.abs()));
        if residual <= tol {
            return Ok(y);
        }
        if gy > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        if hi - lo <= 2.0 * f64::EPSILON * y.abs().max(1.0) {
            // Bracket collapsed to adjacent floats: y is the best representable root.
            return Ok(y);
        }
        let step = gy / (ey + lambda);
        let mut next = y - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        y = next;
        gy = g(y);
    }
    Err(Error::NonConvergence {
        input: r,
        residual,
        iterations: p.max_iter,
    })
}

/// The resolvent `J_λ(r) = (I + λ ln)⁻¹(r)`.
pub fn resolvent(r: f64, p: &YosidaParams) -> Result<f64> {
    Ok(log_resolvent(r, p, None)?.exp())
}

/// The Yosida approximation `Ψ_λ(r) = (r − J_λ(r))/λ`, evaluated as `ln J_λ(r)`.
pub fn yosida(r: f64, p: &YosidaParams) -> Result<f64> {
    log_resolvent(r, p, None)
}

/// The rectified nonlinearity `Ψ̃_λ(r) = Ψ_λ(r) − Ψ_λ(0) + λr`.
pub fn rectified(r: f64, p: &YosidaParams) -> Result<f64> {
    Ok(yosida(r, p)? - p.psi_at_zero + p.lambda * r)
}

/// `Ψ̃′_λ(r) = λ + 1/(λ + J_λ(r))`.
pub fn rectified_derivative(r: f64, p: &YosidaParams) -> Result<f64> {
    Ok(p.lambda + 1.0 / (p.lambda + resolvent(r, p)?))
}

/// The Moreau envelope `j_λ(r)` for `r ≥ 0`.
pub fn moreau_envelope(r: f64, p: &YosidaParams) -> Result<f64> {
    if r < 0.0 {
        return Err(Error::Domain(format!(
            "Moreau envelope of r ln r - r is not evaluated at negative r = {r}"
        )));
    }
    moreau_envelope_extended(r, p)
}

/// `j_λ(r) = j(J_λ(r)) + (r − J_λ(r))²/(2λ)` for every real `r`.
///
/// With `y = ln J_λ(r)` this is `J(y − 1) + λy²/2`.
pub fn moreau_envelope_extended(r: f64, p: &YosidaParams) -> Result<f64> {
    let y = log_resolvent(r, p, None)?;
    Ok(y.exp() * (y - 1.0) + 0.5 * p.lambda * y * y)
}

/// `Ψ_λ(r) + r/(λ + J_λ(r)) − 2r`, non-positive for `λ ≤ 1/2`.
pub fn yosida_gap(r: f64, p: &YosidaParams) -> Result<f64> {
    if p.lambda > 0.5 {
        return Err(Error::Param(format!(
            "the gap inequality requires lambda <= 1/2, got {}",
            p.lambda
        )));
    }
    if !(r > 0.0) {
        return Err(Error::Domain(format!("gap is defined for r > 0, got {r}")));
    }
    let y = log_resolvent(r, p, None)?;
    Ok(y + r / (p.lambda + y.exp()) - 2.0 * r)
}

/// Scalar functions that [`apply_pointwise`] can map over a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarOp {
    Resolvent,
    Yosida,
    Rectified,
    RectifiedDerivative,
    MoreauEnvelope,
    YosidaGap,
}

impl ScalarOp {
    pub fn eval(self, r: f64, p: &YosidaParams) -> Result<f64> {
        match self {
            ScalarOp::Resolvent => resolvent(r, p),
            ScalarOp::Yosida => yosida(r, p),
            ScalarOp::Rectified => rectified(r, p),
            ScalarOp::RectifiedDerivative => rectified_derivative(r, p),
            ScalarOp::MoreauEnvelope => moreau_envelope(r, p),
            ScalarOp::YosidaGap => yosida_gap(r, p),
        }
    }
}

/// Applies `f` to every sample of `field`, keeping the grid.
///
/// The first failing sample aborts the map and is reported with its flat index.
pub fn apply_pointwise<F>(f: F, field: &ScalarField) -> Result<ScalarField>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut out = Vec::with_capacity(field.values().len());
    for (index, &v) in field.values().iter().enumerate() {
        let fv = f(v).map_err(|e| Error::Pointwise {
            index,
            source: Box::new(e),
        })?;
        out.push(fv);
    }
    ScalarField::from_values(*field.grid(), out).map_err(|e| match e {
        Error::Domain(msg) => Error::Domain(format!("pointwise image: {msg}")),
        other => other,
    })
}
