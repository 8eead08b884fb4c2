use std::f64::consts::PI;
use std::sync::Arc;

use logdiff::diagnostics::DiagnosticsSpec;
use logdiff::error::Error;
use logdiff::grid::{Grid, ScalarField, Spectral};
use logdiff::monotone::{apply_pointwise, rectified, rectified_derivative, resolvent};
use logdiff::noise::{DecayLaw, NoiseModel, NoiseSpec, NoiseStream};
use logdiff::solver::{
    resolvent_full_drift, run_ensemble, stability_bound, step_ito, DatumSpec, FullDriftSolver, Integrator,
    RegularizationParams, SimConfig, SolverState, StepMode,
};

fn quiet() -> NoiseSpec {
    NoiseSpec {
        decay: DecayLaw::Off,
        ..NoiseSpec::default()
    }
}

fn small_config() -> SimConfig {
    let mut cfg = SimConfig::desk_default();
    cfg.grid = Grid::new(2, 16, 4.0).unwrap();
    cfg.datum = DatumSpec::Cosine {
        mean: 1.5,
        amplitude: 0.5,
        mode: [1, 1, 0],
    };
    cfg.params = RegularizationParams::new(0.5, 0.1, 0.0).unwrap();
    cfg.t_final = 0.25;
    cfg.n_paths = 2;
    cfg.output_stride = 10;
    cfg.diagnostics = DiagnosticsSpec {
        weak_modes: 2,
        ..DiagnosticsSpec::default()
    };
    let noise = NoiseModel::build(&cfg.noise, cfg.grid).unwrap();
    cfg.with_auto_dt(&noise)
}

/// Independent residual `‖u + a(ν−Δ)Ψ̃(u) − x‖_{H⁻¹_ν} / ‖x‖_{H⁻¹_ν}`.
fn residual(sp: &Spectral, u: &ScalarField, x: &ScalarField, a: f64, p: &RegularizationParams) -> f64 {
    let yp = p.yosida().unwrap();
    let psi = apply_pointwise(|r| rectified(r, &yp), u).unwrap();
    let f = u
        .axpby(1.0, &sp.shifted_operator(&psi, p.nu).unwrap(), a)
        .unwrap()
        .axpby(1.0, x, -1.0)
        .unwrap();
    sp.norm_hminus1_nu(&f, p.nu).unwrap() / sp.norm_hminus1_nu(x, p.nu).unwrap()
}

#[test]
fn full_drift_resolvent_meets_tolerance_independently() {
    let grid = Grid::new(3, 16, 8.0).unwrap();
    let sp = Spectral::new(grid);
    for (lambda, nu, eps) in [(0.5, 0.2, 0.1), (0.25, 0.1, 0.05), (0.1, 1.0, 0.5)] {
        let p = RegularizationParams::new(lambda, nu, eps).unwrap();
        let x = ScalarField::from_fn(grid, |xi| {
            1.0 + 2.0 * (-(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]) / 4.0).exp()
        })
        .unwrap();
        let mut solver = FullDriftSolver::new(sp.clone(), &p).unwrap();
        let (u, stats) = solver.solve(x.values(), eps, None).unwrap();
        let u = ScalarField::from_values(grid, u).unwrap();
        assert!(stats.relative_residual <= 1e-10, "{stats:?}");
        assert!(residual(&sp, &u, &x, eps, &p) <= 2e-10);
        assert_eq!(resolvent_full_drift(&x, &p).unwrap(), u);
    }
}

/// `u + εν Ψ̃(u) = c` for constant data, by bisection.
fn constant_resolvent(c: f64, eps: f64, p: &RegularizationParams) -> f64 {
    let yp = p.yosida().unwrap();
    let f = |u: f64| u + eps * p.nu * rectified(u, &yp).unwrap() - c;
    let (mut lo, mut hi) = (c.min(0.0) - 10.0, c.max(0.0) + 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn full_drift_resolvent_linearizes_around_constants() {
    let grid = Grid::new(2, 32, 4.0).unwrap();
    let sp = Spectral::new(grid);
    let mut p = RegularizationParams::new(0.25, 0.5, 0.2).unwrap();
    p.solver_tol = 1e-12;
    let yp = p.yosida().unwrap();
    let c = 1.3;
    let u0 = constant_resolvent(c, p.epsilon, &p);
    let base = resolvent_full_drift(&ScalarField::constant(grid, c), &p).unwrap();
    assert!(base.values().iter().all(|v| (v - u0).abs() <= 1e-12));

    let h = ScalarField::from_fn(grid, |x| (PI / 4.0 * x[0]).cos() + 0.5 * (PI / 2.0 * x[1]).sin()).unwrap();
    let d = rectified_derivative(u0, &yp).unwrap();
    let linear = sp.apply_multiplier(&h, |k2| 1.0 / (1.0 + p.epsilon * d * (p.nu + k2))).unwrap();
    let err = |amp: f64| {
        let x = ScalarField::constant(grid, c).axpby(1.0, &h, amp).unwrap();
        let u = resolvent_full_drift(&x, &p).unwrap();
        let pred = ScalarField::constant(grid, u0).axpby(1.0, &linear, amp).unwrap();
        u.axpby(1.0, &pred, -1.0).unwrap().max_abs()
    };
    let (e1, e2) = (err(1e-2), err(5e-3));
    assert!(e1 <= 1e-2 * 1e-2 * 10.0, "{e1}");
    let ratio = e1 / e2;
    assert!((3.0..5.0).contains(&ratio), "second-order ratio {ratio}");
}

#[test]
fn deterministic_constant_state_is_stationary() {
    let mut cfg = small_config();
    cfg.noise = quiet();
    cfg.params.nu = 0.0;
    cfg.datum = DatumSpec::Constant { value: 2.0 };
    let paths = run_ensemble(&cfg, 1).unwrap();
    for r in &paths[0].rows {
        assert!((r.min_value - 2.0).abs() <= 1e-13);
        assert!((r.mass - 2.0 * cfg.grid.volume()).abs() <= 1e-10);
    }
}

#[test]
fn mass_is_conserved_without_shift_and_noise() {
    let mut cfg = small_config();
    cfg.noise = quiet();
    cfg.params.nu = 0.0;
    let paths = run_ensemble(&cfg, 1).unwrap();
    let m0 = paths[0].rows[0].mass;
    for r in &paths[0].rows {
        assert!((r.mass - m0).abs() <= 1e-11 * m0);
    }
}

/// Linearized decay of a small cosine perturbation against `exp(−Ψ̃′(c)(ν+k²)t)`.
#[test]
fn small_perturbation_decays_at_linear_rate_with_first_order_error() {
    let grid = Grid::new(1, 16, 4.0).unwrap();
    // ν = 0 keeps the mean, and with it Ψ̃′(c), fixed.
    let params = RegularizationParams::new(0.5, 0.0, 0.0).unwrap();
    let yp = params.yosida().unwrap();
    let (c, amp) = (1.2, 1e-7);
    let k = PI / 4.0;
    let x0 = ScalarField::from_fn(grid, |x| c + amp * (k * x[0]).cos()).unwrap();
    let noise = Arc::new(NoiseModel::build(&quiet(), grid).unwrap());
    let sp = Spectral::new(grid);
    let t_final = 0.5;
    let rate = rectified_derivative(c, &yp).unwrap() * k * k;
    let err = |n: usize| {
        let dt = t_final / n as f64;
        let stream = NoiseStream::new(0, 0, 1).unwrap();
        let mut it = Integrator::new(sp.clone(), noise.clone(), &params, StepMode::Direct, dt, stream, &x0).unwrap();
        for _ in 0..n {
            it.advance().unwrap();
        }
        let coeffs = sp.forward_real(it.x());
        let a = 2.0 * coeffs[1].norm();
        (a / amp - (-rate * t_final).exp()).abs()
    };
    let (e1, e2, e3) = (err(40), err(80), err(160));
    let r1 = e1 / e2;
    let r2 = e2 / e3;
    assert!((1.7..2.3).contains(&r1), "ratios {r1} {r2}");
    assert!((1.7..2.3).contains(&r2), "ratios {r1} {r2}");
}

#[test]
fn step_ito_matches_integrator() {
    let cfg = small_config();
    let x0 = cfg.datum.build(&cfg.grid).unwrap();
    let state = SolverState {
        time: 0.0,
        field: x0.clone(),
        step_index: 0,
    };
    let next = step_ito(&state, &cfg, StepMode::Direct, 3).unwrap();
    let noise = Arc::new(NoiseModel::build(&cfg.noise, cfg.grid).unwrap());
    let mut it = Integrator::for_path(&cfg, Spectral::new(cfg.grid), noise, 3).unwrap();
    it.advance().unwrap();
    assert_eq!(next.field.values(), it.x());
    assert_eq!(next.step_index, 1);
    assert!((next.time - cfg.dt).abs() < 1e-15);
}

#[test]
fn yosida_step_tends_to_direct_step_as_epsilon_shrinks() {
    let mut cfg = small_config();
    cfg.n_paths = 1;
    cfg.t_final = 10.0 * cfg.dt;
    cfg.diagnostics.weak_modes = 0;
    cfg.keep_final_state = true;
    let direct = run_ensemble(&cfg, 1).unwrap()[0].final_state.clone().unwrap();
    let mut dists = Vec::new();
    for eps in [0.2, 0.1, 0.05, 0.025] {
        let mut c = cfg.clone();
        c.mode = StepMode::Yosida;
        c.params.epsilon = eps;
        let f = run_ensemble(&c, 1).unwrap()[0].final_state.clone().unwrap();
        dists.push(f.axpby(1.0, &direct, -1.0).unwrap().norm_l2());
    }
    assert!(dists.windows(2).all(|w| w[1] < w[0]), "{dists:?}");
}

#[test]
fn ensembles_are_reproducible_and_worker_independent() {
    let cfg = small_config();
    let a = run_ensemble(&cfg, 1).unwrap();
    let b = run_ensemble(&cfg, 2).unwrap();
    for (p, q) in a.iter().zip(&b) {
        assert_eq!(p.rows, q.rows);
    }
    assert_ne!(a[0].rows.last().unwrap().norm_l2_sq, a[1].rows.last().unwrap().norm_l2_sq);
}

#[test]
fn validation_catches_bad_configurations() {
    let cfg = small_config();
    let noise = NoiseModel::build(&cfg.noise, cfg.grid).unwrap();
    cfg.validate(&noise, false).unwrap();

    let mut c = cfg.clone();
    c.dt *= 4.0;
    c.t_final = 40.0 * c.dt;
    assert!(matches!(c.validate(&noise, false), Err(Error::Param(_))));
    c.validate(&noise, true).unwrap();

    let mut c = cfg.clone();
    c.mode = StepMode::Yosida;
    assert!(c.validate(&noise, false).is_err());

    let mut c = cfg.clone();
    c.params.lambda = 0.6;
    assert!(c.validate(&noise, false).is_err());
    c.diagnostics.energy = false;
    c.validate(&noise, false).unwrap();

    let mut c = cfg.clone();
    c.datum = DatumSpec::Constant { value: 0.0 };
    assert!(c.validate(&noise, false).is_err());

    let mut c = cfg;
    c.diagnostics.weak_modes = 17;
    assert!(c.validate(&noise, false).is_err());
}

#[test]
fn stability_bound_scales_with_lambda_and_grid() {
    let cfg = SimConfig::desk_default();
    let noise = NoiseModel::build(&cfg.noise, cfg.grid).unwrap();
    let b1 = stability_bound(&cfg.grid, &cfg.params, &noise, StepMode::Direct, 0.25);
    let mut p = cfg.params;
    p.lambda = 0.25;
    let b2 = stability_bound(&cfg.grid, &p, &noise, StepMode::Direct, 0.25);
    assert!((b1 / b2 - 2.0).abs() < 1e-12);
    let yb = stability_bound(&cfg.grid, &cfg.params, &noise, StepMode::Yosida, 0.25);
    assert!((yb - 0.5 / noise.strat_field().max_abs()).abs() < 1e-12);
}

#[test]
fn zero_final_time_records_only_the_initial_row() {
    let mut cfg = small_config();
    cfg.t_final = 0.0;
    let paths = run_ensemble(&cfg, 1).unwrap();
    assert_eq!(paths[0].rows.len(), 1);
    assert_eq!(paths[0].rows[0].t, 0.0);
    assert_eq!(paths[0].rows[0].dissipation, 0.0);
}

#[test]
fn resolvent_keeps_positive_constants_positive() {
    let p = RegularizationParams::new(0.5, 0.5, 1.0).unwrap();
    let yp = p.yosida().unwrap();
    let c = 1e-3;
    let u = constant_resolvent(c, 1.0, &p);
    assert!(u > 0.0);
    // At equilibrium `u + εν Ψ̃(u) = c` with Ψ̃(u) > 0 for u > 0.
    assert!(rectified(u, &yp).unwrap() > 0.0 && u < c);
    assert!(resolvent(u, &yp).unwrap() > 0.0);
}
