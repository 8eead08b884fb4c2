use std::sync::Arc;

use logdiff::diagnostics::{
    energy_balance_check, gradient_bound_check, leakage, mean_and_band, moment_bound_check, nu_rate_check,
    operator_spot_checks, phi_lambda, weak_form_residual, DiagnosticsSpec, EnsembleReport, MomentCell, RatePoint,
    MIN_ASSERTED_PATHS,
};
use logdiff::error::Error;
use logdiff::grid::{Grid, ScalarField, Spectral};
use logdiff::monotone::{apply_pointwise, rectified, LogOperator, YosidaParams};
use logdiff::noise::{DecayLaw, NoiseModel, NoiseSpec, NoiseStream};
use logdiff::solver::{run_ensemble, DatumSpec, Integrator, RegularizationParams, SimConfig, StepMode};

fn config(noise_on: bool) -> SimConfig {
    let mut cfg = SimConfig::desk_default();
    cfg.grid = Grid::new(2, 16, 4.0).unwrap();
    if !noise_on {
        cfg.noise.decay = DecayLaw::Off;
    }
    cfg.datum = DatumSpec::Cosine {
        mean: 1.2,
        amplitude: 0.8,
        mode: [1, 2, 0],
    };
    cfg.params = RegularizationParams::new(0.5, 0.1, 0.0).unwrap();
    cfg.t_final = 0.5;
    cfg.n_paths = 4;
    cfg.output_stride = 20;
    cfg.diagnostics = DiagnosticsSpec {
        weak_modes: 3,
        ..DiagnosticsSpec::default()
    };
    let noise = NoiseModel::build(&cfg.noise, cfg.grid).unwrap();
    cfg.with_auto_dt(&noise)
}

/// `min_s j(s) + (r − s)²/(2λ)` by golden-section search in `ln s`.
fn envelope(r: f64, lambda: f64) -> f64 {
    let obj = |y: f64| {
        let s = y.exp();
        LogOperator::potential(s) + (r - s).powi(2) / (2.0 * lambda)
    };
    let (mut a, mut b) = (-60.0f64, r.abs().max(1.0).ln() + 5.0);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..300 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if obj(c) < obj(d) {
            b = d;
        } else {
            a = c;
        }
    }
    obj(0.5 * (a + b))
}

#[test]
fn phi_of_constant_field_matches_quadrature() {
    let grid = Grid::new(3, 8, 2.0).unwrap();
    for (lambda, c) in [(0.5, 2.0), (0.1, 0.3)] {
        let p = YosidaParams::new(lambda).unwrap();
        let phi = phi_lambda(&ScalarField::constant(grid, c), &p).unwrap();
        let expected = grid.volume() * (envelope(c, lambda) + 0.5 * lambda * c * c);
        assert!((phi.value - expected).abs() <= 1e-8 * expected.abs());
        assert_eq!(phi.negative_samples, 0);
    }
    let p = YosidaParams::new(0.6).unwrap();
    assert!(matches!(phi_lambda(&ScalarField::constant(grid, 1.0), &p), Err(Error::Param(_))));
}

/// Fourth-order periodic central difference along axis `a`.
fn derivative(f: &ScalarField, a: usize) -> Vec<f64> {
    let g = f.grid();
    let n = g.n_per_axis();
    let h = g.spacing();
    let stride = n.pow((g.dim() - 1 - a) as u32);
    let v = f.values();
    (0..v.len())
        .map(|i| {
            let idx = (i / stride) % n;
            let at = |s: isize| {
                let j = ((idx as isize + s).rem_euclid(n as isize)) as usize;
                v[i - idx * stride + j * stride]
            };
            (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h)
        })
        .collect()
}

#[test]
fn dissipation_integrand_matches_finite_differences() {
    let grid = Grid::new(2, 128, 4.0).unwrap();
    let params = RegularizationParams::new(0.25, 0.1, 0.0).unwrap();
    let yp = params.yosida().unwrap();
    let x0 = ScalarField::from_fn(grid, |x| 1.0 + 0.6 * (-(x[0] * x[0] + 2.0 * x[1] * x[1]) / 2.0).exp()).unwrap();
    let noise = Arc::new(
        NoiseModel::build(
            &NoiseSpec {
                decay: DecayLaw::Off,
                ..NoiseSpec::default()
            },
            grid,
        )
        .unwrap(),
    );
    let stream = NoiseStream::new(0, 0, 1).unwrap();
    let mut it = Integrator::new(Spectral::new(grid), noise, &params, StepMode::Direct, 1e-3, stream, &x0).unwrap();
    let prepared = it.prepare().unwrap();
    let psi = apply_pointwise(|r| rectified(r, &yp), &x0).unwrap();
    let fd: f64 = (0..2)
        .map(|a| derivative(&psi, a).iter().map(|d| d * d).sum::<f64>())
        .sum::<f64>()
        * grid.cell_volume();
    assert!((prepared.grad_psi_sq - fd).abs() <= 1e-5 * fd, "{} vs {fd}", prepared.grad_psi_sq);
    assert!((prepared.l2_sq - x0.norm_l2().powi(2)).abs() <= 1e-12 * prepared.l2_sq);
}

#[test]
fn deterministic_energy_dissipates_with_first_order_identity_gap() {
    let mut cfg = config(false);
    cfg.params.nu = 0.0;
    let coarse = run_ensemble(&cfg, 1).unwrap();
    let mut fine_cfg = cfg.clone();
    fine_cfg.dt /= 2.0;
    fine_cfg.output_stride *= 2;
    let fine = run_ensemble(&fine_cfg, 1).unwrap();
    let rc = energy_balance_check(&coarse, 0.0, None).unwrap();
    let rf = energy_balance_check(&fine, 0.0, None).unwrap();
    for (lc, lf) in rc.lines.iter().zip(&rf.lines).skip(1) {
        assert_eq!(lc.t, lf.t);
        // Without noise the band vanishes: slack is the exact discrete dissipation balance.
        assert_eq!(lc.band, 0.0);
        assert!(lc.slack >= 0.0 && lf.slack >= 0.0);
        assert!((lc.slack + lc.identity_gap).abs() <= 1e-9 * lc.lhs.abs());
        let ratio = lc.identity_gap / lf.identity_gap;
        assert!((1.6..2.4).contains(&ratio), "gap ratio {ratio} at t = {}", lc.t);
    }
    assert!(rc.all_pass);
}

#[test]
fn energy_check_rejects_large_lambda() {
    let mut cfg = config(false);
    cfg.diagnostics.energy = false;
    cfg.params.lambda = 0.75;
    cfg.n_paths = 1;
    let noise = NoiseModel::build(&cfg.noise, cfg.grid).unwrap();
    let cfg = cfg.with_auto_dt(&noise);
    let paths = run_ensemble(&cfg, 1).unwrap();
    assert!(matches!(energy_balance_check(&paths, 0.0, None), Err(Error::Param(_))));
}

#[test]
fn weak_form_residuals_are_tracked_only_for_requested_modes() {
    let cfg = config(true);
    let paths = run_ensemble(&cfg, 1).unwrap();
    let r = weak_form_residual(&paths[0], 2).unwrap();
    assert_eq!(r.len(), paths[0].rows.len());
    assert_eq!(r[0].1, 0.0);
    assert!(matches!(weak_form_residual(&paths[0], 3), Err(Error::Replay(_))));
}

#[test]
fn operator_spot_checks_pass() {
    let grid = Grid::new(3, 16, 8.0).unwrap();
    let sp = Spectral::new(grid);
    for lambda in [0.5, 0.1] {
        let p = YosidaParams::new(lambda).unwrap();
        let r = operator_spot_checks(&sp, &p, 0.5, 8, 2.0, 17).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.monotonicity_c <= 0.0);
    }
    let p = YosidaParams::new(0.5).unwrap();
    assert!(operator_spot_checks(&sp, &p, 0.0, 8, 1.0, 1).is_err());
}

#[test]
fn rate_fit_recovers_synthetic_exponent() {
    let points: Vec<RatePoint> = [0.1, 0.05, 0.025, 0.0125]
        .iter()
        .map(|&d| RatePoint {
            delta: d,
            dist_sq: 3.0 * f64::powf(d, 1.5),
        })
        .chain(std::iter::once(RatePoint { delta: 0.0, dist_sq: 0.0 }))
        .collect();
    let r = nu_rate_check(&points, 1.0);
    assert!((r.alpha.unwrap() - 1.5).abs() < 1e-12);
    assert!((r.intercept.unwrap() - 3f64.ln()).abs() < 1e-12);
    assert_eq!(r.coincident, 1);
    assert_eq!(r.coincident_max_dist_sq, 0.0);
}

#[test]
fn deterministic_moment_constant_is_one() {
    let mut cfg = config(false);
    cfg.n_paths = 1;
    let paths = run_ensemble(&cfg, 1).unwrap();
    let cell = MomentCell::fit(0.5, 1.0, 0.0, &paths).unwrap();
    assert!((cell.c_hminus1 - 1.0).abs() <= 1e-12, "{}", cell.c_hminus1);
    assert!(cell.c_l2 <= 1.0 + 1e-12);
    assert!(MomentCell::fit(0.5, 0.37, 0.0, &paths).is_err());
    let r = moment_bound_check(vec![cell.clone(), cell], 2.0).unwrap();
    assert!(r.pass && (r.spread_hminus1 - 1.0).abs() < 1e-15);
    let g = gradient_bound_check(&[(0.5, &paths)], 2.0).unwrap();
    assert!(g.fitted_c > 0.0);
}

#[test]
fn mean_band_is_three_standard_errors() {
    let (m, b) = mean_and_band(&[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(m, 2.5);
    let s = (5.0f64 / 3.0).sqrt();
    assert!((b - 3.0 * s / 2.0).abs() < 1e-15);
}

#[test]
fn small_ensembles_are_informational_only() {
    let cfg = config(true);
    let paths = run_ensemble(&cfg, 1).unwrap();
    assert!(paths.len() < MIN_ASSERTED_PATHS);
    let mut report = EnsembleReport::from_paths(&paths).unwrap();
    report.assert_statistical("band criterion", -1.0, 0.0, false);
    assert!(report.all_pass());
    report.assert_exact("exact criterion", -1.0, 0.0, false);
    assert!(!report.all_pass());
    let mut buf = Vec::new();
    report.write_summary_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.lines().next().unwrap().starts_with("t,"));
    assert_eq!(text.lines().count(), paths[0].rows.len() + 1);
}

#[test]
fn leakage_of_centered_bump_is_small() {
    let grid = Grid::new(3, 16, 8.0).unwrap();
    let x = ScalarField::from_fn(grid, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()).unwrap();
    assert!(leakage(&x, 0.9) < 1e-10);
}
