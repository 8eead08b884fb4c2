//! Numeric spot checks of the drift `A(u) = (Δ − ν)Ψ̃_λ(u)` on random fields.
//!
//! Pairings are taken in `H⁻¹_ν`, where `⟨A(u), w⟩_{H⁻¹_ν} = −⟨Ψ̃_λ(u), w⟩_{L²}`.
//! Both sides are evaluated independently and their disagreement is reported.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{ScalarField, Spectral};
use crate::monotone::{apply_pointwise, rectified, YosidaParams};

#[derive(Debug, Clone, Serialize)]
pub struct OperatorReport {
    pub lambda: f64,
    pub nu: f64,
    pub n_pairs: usize,
    /// Largest `⟨A(u)−A(v), u−v⟩ / ‖u−v‖²_{H⁻¹_ν}`; monotonicity needs a finite value.
    pub monotonicity_c: f64,
    /// Largest `(⟨A(u), u⟩ + λ‖u‖²₂) / ‖u‖²_{H⁻¹_ν}`.
    pub coercivity_c: f64,
    /// Largest `‖A(u)‖_{V*} / ‖u‖₂`, with `‖A(u)‖_{V*} = ‖Ψ̃_λ(u)‖₂`.
    pub boundedness_ratio: f64,
    /// `λ + 1/λ`.
    pub c_lambda: f64,
    /// Largest relative gap between the spectral pairing and `−⟨Ψ̃_λ(u), w⟩₂`.
    pub pairing_discrepancy: f64,
    /// Moduli of continuity of `θ ↦ ⟨A(u+θv), x⟩` at steps `1/64` and `1/128`.
    pub hemicontinuity_moduli: [f64; 2],
    /// Smallest `Ψ̃_λ(r)r − Ψ̃_λ(r)²/(1+λ+1/λ)` over all sampled values.
    pub pointwise_bound_min: f64,
    pub pass: bool,
}

fn pairing_a(sp: &Spectral, psi_u: &ScalarField, w: &ScalarField, nu: f64) -> Result<f64> {
    // (Δ − ν)Ψ̃ = −(ν − Δ)Ψ̃, then the H⁻¹_ν pairing undoes the shift spectrally.
    let a = sp.shifted_operator(psi_u, nu)?.scale(-1.0);
    sp.pairing_hminus1_nu(&a, w, nu)
}

/// Runs the spot checks on `n_pairs` seeded random signed fields of amplitude `amplitude`.
pub fn operator_spot_checks(
    sp: &Spectral,
    p: &YosidaParams,
    nu: f64,
    n_pairs: usize,
    amplitude: f64,
    seed: u64,
) -> Result<OperatorReport> {
    if !(nu > 0.0) {
        return Err(Error::Param(format!("spot checks pair in H^-1_nu and need nu > 0, got {nu}")));
    }
    if n_pairs == 0 {
        return Err(Error::Param("spot checks need at least one pair".into()));
    }
    let grid = *sp.grid();
    let lambda = p.lambda();
    let psi = |f: &ScalarField| apply_pointwise(|r| rectified(r, p), f);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let field = |rng: &mut ChaCha8Rng| -> Result<ScalarField> {
        let offset = amplitude * rand::Rng::gen_range(rng, -1.0..1.0);
        Ok(ScalarField::random_smooth(grid, rng, 6, 3, 0.0)?.scale(amplitude).map(|v| v + offset))
    };

    let c_lambda = lambda + 1.0 / lambda;
    let pw_const = 1.0 + c_lambda;
    let mut monotonicity_c = f64::NEG_INFINITY;
    let mut coercivity_c = f64::NEG_INFINITY;
    let mut boundedness_ratio = 0.0f64;
    let mut pairing_discrepancy = 0.0f64;
    let mut pointwise_bound_min = f64::INFINITY;
    let mut sample = (None, None, None);

    for i in 0..n_pairs {
        let u = field(&mut rng)?;
        let v = field(&mut rng)?;
        let (pu, pv) = (psi(&u)?, psi(&v)?);
        let diff = u.axpby(1.0, &v, -1.0)?;

        let spectral = pairing_a(sp, &pu, &diff, nu)? - pairing_a(sp, &pv, &diff, nu)?;
        let direct = -pu.axpby(1.0, &pv, -1.0)?.inner(&diff)?;
        let scale = direct.abs().max(f64::MIN_POSITIVE);
        pairing_discrepancy = pairing_discrepancy.max((spectral - direct).abs() / scale);
        let hm = sp.norm_hminus1_nu(&diff, nu)?.powi(2);
        if hm > 0.0 {
            monotonicity_c = monotonicity_c.max(direct / hm);
        }

        let au_u = pairing_a(sp, &pu, &u, nu)?;
        let hm_u = sp.norm_hminus1_nu(&u, nu)?.powi(2);
        let l2_u = u.norm_l2();
        if hm_u > 0.0 {
            coercivity_c = coercivity_c.max((au_u + lambda * l2_u * l2_u) / hm_u);
        }
        if l2_u > 0.0 {
            boundedness_ratio = boundedness_ratio.max(pu.norm_l2() / l2_u);
        }
        for (r, s) in u.values().iter().zip(pu.values()) {
            pointwise_bound_min = pointwise_bound_min.min(s * r - s * s / pw_const);
        }
        if i == 0 {
            sample = (Some(u), Some(v), Some(field(&mut rng)?));
        }
    }

    let (u, v, x) = match sample {
        (Some(u), Some(v), Some(x)) => (u, v, x),
        _ => unreachable!("n_pairs > 0"),
    };
    let mut moduli = [0.0; 2];
    for (slot, steps) in [64usize, 128].into_iter().enumerate() {
        let mut prev: Option<f64> = None;
        for s in 0..=steps {
            let theta = s as f64 / steps as f64;
            let w = u.axpby(1.0, &v, theta)?;
            let f = pairing_a(sp, &psi(&w)?, &x, nu)?;
            if let Some(pf) = prev {
                moduli[slot] = f64::max(moduli[slot], (f - pf).abs());
            }
            prev = Some(f);
        }
    }

    let tol = 1e-10;
    let pass = monotonicity_c <= tol * (1.0 + c_lambda)
        && pairing_discrepancy <= 1e-8
        && boundedness_ratio <= c_lambda * (1.0 + tol)
        && pointwise_bound_min >= -tol * amplitude * amplitude * pw_const
        && moduli[1] <= 0.75 * moduli[0] + f64::EPSILON;
    Ok(OperatorReport {
        lambda,
        nu,
        n_pairs,
        monotonicity_c,
        coercivity_c,
        boundedness_ratio,
        c_lambda,
        pairing_discrepancy,
        hemicontinuity_moduli: moduli,
        pointwise_bound_min,
        pass,
    })
}
