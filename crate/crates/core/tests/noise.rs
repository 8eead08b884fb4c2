use logdiff::error::Error;
use logdiff::grid::{Grid, ScalarField};
use logdiff::noise::{
    ito_isometry_check, sample_increment, sigma_apply, strat_correction, DecayLaw, ModeFamily, NoiseModel,
    NoiseSpec, NoiseStream,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid() -> Grid {
    Grid::new(3, 16, 8.0).unwrap()
}

fn model() -> NoiseModel {
    NoiseModel::build(&NoiseSpec::default(), grid()).unwrap()
}

#[test]
fn geometric_weights_and_constants() {
    let m = model();
    assert_eq!(m.len(), 16);
    for (k, mode) in m.modes().iter().enumerate() {
        assert!((mode.mu - 0.5f64.powi(k as i32 + 1)).abs() < 1e-15);
        assert!(mode.sup_norm > 0.0 && mode.sup_norm <= 1.0);
    }
    let direct: f64 = m.modes().iter().map(|e| e.mu * e.mu_prime).sum();
    assert!((m.trace_sum() - direct).abs() <= 1e-12 * direct);
    assert!(m.tail_bound() <= 0.01 * (m.trace_sum() + m.tail_bound()));
    let s = m.strat_field().max_abs();
    assert!(s <= m.strat_norm_bound() * (1.0 + 1e-12));
}

#[test]
fn slowly_decaying_weights_fail_the_tail_criterion() {
    let spec = NoiseSpec {
        decay: DecayLaw::Power { exponent: 1.1 },
        ..NoiseSpec::default()
    };
    assert!(matches!(NoiseModel::build(&spec, grid()), Err(Error::Summability(_))));
}

#[test]
fn off_noise_is_deterministic() {
    let spec = NoiseSpec {
        decay: DecayLaw::Off,
        ..NoiseSpec::default()
    };
    let m = NoiseModel::build(&spec, grid()).unwrap();
    assert!(m.is_off());
    assert_eq!(m.strat_field().max_abs(), 0.0);
    let mut stream = NoiseStream::new(1, 0, 1).unwrap();
    let dw = sample_increment(&m, 0.1, &mut stream, 0).unwrap();
    assert_eq!(dw.assembled.max_abs(), 0.0);
}

#[test]
fn increments_require_positive_dt() {
    let m = model();
    let mut stream = NoiseStream::new(1, 0, 1).unwrap();
    assert!(sample_increment(&m, 0.0, &mut stream, 0).is_err());
}

#[test]
fn stratonovich_pairing_identity() {
    let m = model();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let x = ScalarField::random_smooth(grid(), &mut rng, 8, 3, 0.5).unwrap();
        let lhs = strat_correction(&x, &m).unwrap().inner(&x).unwrap();
        let rhs: f64 = m
            .modes()
            .iter()
            .map(|e| e.mu * x.mul(&e.field).unwrap().norm_l2().powi(2))
            .sum();
        assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1e-300));
    }
}

#[test]
fn stratonovich_correction_pushes_negative_part_down() {
    let m = model();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut violations = 0;
    for _ in 0..100 {
        let offset = rng.gen_range(-0.5..0.5);
        let x = ScalarField::random_smooth(grid(), &mut rng, 8, 3, offset).unwrap();
        let neg = x.negative_part();
        let lhs = strat_correction(&x, &m).unwrap().inner(&neg).unwrap();
        let rhs: f64 = -m
            .modes()
            .iter()
            .map(|e| e.mu * neg.mul(&e.field).unwrap().norm_l2().powi(2))
            .sum::<f64>();
        assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1e-12));
        if lhs > 0.0 {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn ito_isometry_within_band() {
    let m = model();
    let x = ScalarField::from_fn(grid(), |xi| 1.0 + (-(xi[0] * xi[0] + xi[1] * xi[1]) / 8.0).exp()).unwrap();
    let mut stream = NoiseStream::new(2024, 0, 1).unwrap();
    let r = ito_isometry_check(&m, &x, 10_000, 0.01, 0.5, &mut stream).unwrap();
    assert!(r.l2.within_3sigma, "{:?}", r.l2);
    assert!(r.hminus1_nu.within_3sigma, "{:?}", r.hminus1_nu);
    assert!((r.l2.ratio - 1.0).abs() < 0.05);
}

#[test]
fn isometry_needs_enough_samples() {
    let m = model();
    let x = ScalarField::constant(grid(), 1.0);
    let mut stream = NoiseStream::new(1, 0, 1).unwrap();
    assert!(matches!(
        ito_isometry_check(&m, &x, 10, 0.01, 1.0, &mut stream),
        Err(Error::Param(_))
    ));
}

#[test]
fn constant_family_multiplies_pointwise() {
    let spec = NoiseSpec {
        family: ModeFamily::Constant { value: 2.0 },
        decay: DecayLaw::Explicit { weights: vec![0.25] },
        modes: 1,
    };
    let g = Grid::new(1, 8, 1.0).unwrap();
    let m = NoiseModel::build(&spec, g).unwrap();
    let mut stream = NoiseStream::new(5, 1, 1).unwrap();
    let dw = sample_increment(&m, 0.04, &mut stream, 3).unwrap();
    // √(μ dt)·g·e = √0.01·g·2
    let expected = 0.2 * dw.gaussians[0];
    assert!(dw.assembled.values().iter().all(|v| (v - expected).abs() < 1e-15));
    let x = ScalarField::constant(g, 3.0);
    let s = sigma_apply(&x, &dw).unwrap();
    assert!((s.values()[0] - 3.0 * expected).abs() < 1e-15);
    assert!(strat_correction(&x, &m).unwrap().values().iter().all(|v| (v - 3.0).abs() < 1e-15));
}

#[test]
fn streams_are_keyed_by_seed_and_path() {
    let draw = |seed, path, step| {
        let mut s = NoiseStream::new(seed, path, 1).unwrap();
        let mut out = Vec::new();
        s.gaussians(step, 4, &mut out);
        out
    };
    assert_eq!(draw(1, 2, 3), draw(1, 2, 3));
    assert_ne!(draw(1, 2, 3), draw(1, 3, 3));
    assert_ne!(draw(1, 2, 3), draw(2, 2, 3));
    assert_ne!(draw(1, 2, 3), draw(1, 2, 4));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn coarse_steps_sum_fine_slots(seed in any::<u64>(), path in 0u64..1000, step in 0u64..10_000) {
        let mut coarse = NoiseStream::new(seed, path, 4).unwrap();
        let mut fine = NoiseStream::new(seed, path, 1).unwrap();
        let mut a = Vec::new();
        coarse.gaussians(step, 3, &mut a);
        let mut sum = vec![0.0; 3];
        let mut b = Vec::new();
        for j in 0..4 {
            fine.gaussians(4 * step + j, 3, &mut b);
            for k in 0..3 {
                sum[k] += b[k] / 2.0;
            }
        }
        for k in 0..3 {
            prop_assert!((a[k] - sum[k]).abs() <= 1e-14);
        }
    }
}
