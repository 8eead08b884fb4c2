use std::f64::consts::PI;

use logdiff::error::Error;
use logdiff::grid::{read_snapshot, write_snapshot, Grid, ScalarField, Spectral};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rough(grid: Grid, rng: &mut ChaCha8Rng) -> ScalarField {
    let v = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ScalarField::from_values(grid, v).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn max_rel_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    let scale = b.max_abs().max(f64::MIN_POSITIVE);
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / scale
}

#[test]
fn plancherel_on_rough_fields() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (d, n, l) in [(1, 64, 2.0), (2, 16, 8.0), (3, 16, 8.0)] {
        let grid = Grid::new(d, n, l).unwrap();
        let sp = Spectral::new(grid);
        for _ in 0..5 {
            let f = rough(grid, &mut rng);
            let c = sp.transform(&f).unwrap();
            assert!(rel(c.energy() * grid.volume(), f.norm_l2().powi(2)) <= 1e-12);
            let back = sp.inverse_transform(&c).unwrap();
            assert!(max_rel_diff(&back, &f) <= 1e-13);
        }
    }
}

#[test]
fn multipliers_compose() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let grid = Grid::new(3, 16, 8.0).unwrap();
    let sp = Spectral::new(grid);
    for nu in [1.0, 0.1] {
        let f = rough(grid, &mut rng);
        let half_twice = sp
            .shifted_inverse(&sp.shifted_inverse(&f, nu, 0.5).unwrap(), nu, 0.5)
            .unwrap();
        let full = sp.shifted_inverse(&f, nu, 1.0).unwrap();
        assert!(max_rel_diff(&half_twice, &full) <= 1e-12);
        let identity = sp.shifted_operator(&full, nu).unwrap();
        assert!(max_rel_diff(&identity, &f) <= 1e-12);
    }
}

#[test]
fn laplacian_of_trigonometric_field_is_exact() {
    let grid = Grid::new(2, 32, 3.0).unwrap();
    let sp = Spectral::new(grid);
    let k = PI / 3.0;
    let f = ScalarField::from_fn(grid, |x| (3.0 * k * x[0]).cos() * (2.0 * k * x[1]).sin()).unwrap();
    let lap = sp.laplacian(&f).unwrap();
    let exact = f.scale(-13.0 * k * k);
    assert!(max_rel_diff(&lap, &exact) <= 1e-12);
}

#[test]
fn h1_norm_matches_quadrature_of_gradient() {
    let grid = Grid::new(2, 32, 4.0).unwrap();
    let sp = Spectral::new(grid);
    let k = PI / 4.0;
    let f = ScalarField::from_fn(grid, |x| 1.0 + (k * x[0]).sin() * (2.0 * k * x[1]).cos()).unwrap();
    let grad_sq = ScalarField::from_fn(grid, |x| {
        let gx = k * (k * x[0]).cos() * (2.0 * k * x[1]).cos();
        let gy = -2.0 * k * (k * x[0]).sin() * (2.0 * k * x[1]).sin();
        gx * gx + gy * gy
    })
    .unwrap();
    let expected = f.norm_l2().powi(2) + grad_sq.integral();
    assert!(rel(sp.norm_h1(&f).unwrap().powi(2), expected) <= 1e-12);
}

#[test]
fn hminus1_nu_of_a_mode_is_analytic() {
    let grid = Grid::new(3, 16, 8.0).unwrap();
    let sp = Spectral::new(grid);
    let k = PI / 8.0;
    let f = ScalarField::from_fn(grid, |x| (2.0 * k * x[1]).cos()).unwrap();
    for nu in [1.0, 0.01] {
        let expected = f.norm_l2().powi(2) / (nu + 4.0 * k * k);
        assert!(rel(sp.norm_hminus1_nu(&f, nu).unwrap().powi(2), expected) <= 1e-12);
    }
}

#[test]
fn hminus1_nu_is_monotone_in_nu() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let grid = Grid::new(3, 16, 8.0).unwrap();
    let sp = Spectral::new(grid);
    let nus = [1.0, 0.5, 0.1, 0.01];
    let mut violations = 0;
    for _ in 0..100 {
        let offset = rng.gen_range(-1.0..1.0);
        let f = ScalarField::random_smooth(grid, &mut rng, 6, 4, offset).unwrap();
        let norms: Vec<f64> = nus.iter().map(|&nu| sp.norm_hminus1_nu(&f, nu).unwrap()).collect();
        violations += norms.windows(2).filter(|w| w[1] < w[0]).count();
    }
    assert_eq!(violations, 0);
}

#[test]
fn pairing_agrees_both_ways() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let grid = Grid::new(3, 16, 8.0).unwrap();
    let sp = Spectral::new(grid);
    for nu in [1.0, 0.1, 0.01] {
        let u = rough(grid, &mut rng);
        let x = rough(grid, &mut rng);
        let a = sp.pairing_hminus1_nu(&u, &x, nu).unwrap();
        let b = sp.pairing_hminus1_nu_factored(&u, &x, nu).unwrap();
        let scale = sp.norm_hminus1_nu(&u, nu).unwrap() * sp.norm_hminus1_nu(&x, nu).unwrap();
        assert!((a - b).abs() <= 1e-10 * scale);
        let self_pair = sp.pairing_hminus1_nu(&u, &u, nu).unwrap();
        assert!(rel(self_pair, sp.norm_hminus1_nu(&u, nu).unwrap().powi(2)) <= 1e-12);
    }
}

#[test]
fn zero_mode_is_rejected_where_undefined() {
    let grid = Grid::new(2, 8, 1.0).unwrap();
    let sp = Spectral::new(grid);
    let c = ScalarField::constant(grid, 2.0);
    assert!(matches!(sp.norm_homogeneous(&c, -1.0), Err(Error::ZeroMode { .. })));
    assert!(matches!(sp.shifted_inverse(&c, 0.0, 1.0), Err(Error::Param(_))));
    assert!(matches!(sp.norm_hminus1_nu(&c, 0.0), Err(Error::Param(_))));
    let mean_free = ScalarField::from_fn(grid, |x| (PI * x[0]).sin()).unwrap();
    assert!(sp.norm_homogeneous(&mean_free, -1.0).unwrap() > 0.0);
}

#[test]
fn grid_mismatch_is_an_error() {
    let a = Grid::new(2, 8, 1.0).unwrap();
    let b = Grid::new(2, 16, 1.0).unwrap();
    let sp = Spectral::new(a);
    let f = ScalarField::zeros(b);
    assert!(matches!(sp.transform(&f), Err(Error::GridMismatch(_))));
    assert!(ScalarField::zeros(a).inner(&f).is_err());
}

#[test]
fn invalid_grids_and_fields() {
    assert!(Grid::new(4, 8, 1.0).is_err());
    assert!(Grid::new(2, 7, 1.0).is_err());
    assert!(Grid::new(2, 8, -1.0).is_err());
    let g = Grid::new(1, 4, 1.0).unwrap();
    assert!(ScalarField::from_values(g, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
    assert!(ScalarField::from_values(g, vec![0.0; 3]).is_err());
}

#[test]
fn snapshot_round_trip_and_truncation() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid = Grid::new(3, 8, 2.5).unwrap();
    let f = rough(grid, &mut rng);
    let mut buf = Vec::new();
    write_snapshot(&mut buf, &f).unwrap();
    assert_eq!(buf.len(), 16 + 8 * grid.len());
    let (h, g) = read_snapshot(buf.as_slice()).unwrap();
    assert_eq!((h.dim, h.n_per_axis, h.box_half_length), (3, 8, 2.5));
    assert_eq!(g, f);
    assert!(read_snapshot(&buf[..buf.len() - 1]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hminus1_nu_bounded_by_l2_over_nu(seed in any::<u64>(), nu in 0.01f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = Grid::new(2, 16, 4.0).unwrap();
        let sp = Spectral::new(grid);
        let f = rough(grid, &mut rng);
        let h = sp.norm_hminus1_nu(&f, nu).unwrap();
        prop_assert!(h * h <= f.norm_l2().powi(2) / nu * (1.0 + 1e-12));
    }

    #[test]
    fn transform_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = Grid::new(2, 8, 1.0).unwrap();
        let sp = Spectral::new(grid);
        let (f, g) = (rough(grid, &mut rng), rough(grid, &mut rng));
        let lhs = sp.transform(&f.axpby(a, &g, b).unwrap()).unwrap();
        let (cf, cg) = (sp.transform(&f).unwrap(), sp.transform(&g).unwrap());
        for ((l, x), y) in lhs.coeffs().iter().zip(cf.coeffs()).zip(cg.coeffs()) {
            prop_assert!((l - (x * a + y * b)).norm() <= 1e-13);
        }
    }
}
