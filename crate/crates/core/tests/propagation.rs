use proptest::prelude::*;
use specalloc::propagation::{fit_alpha, sample_path_losses};
use specalloc::{Location, LogDistance, LogDistanceParams, PathLoss, Region};

fn world(params: LogDistanceParams) -> LogDistance {
    LogDistance::new(params, &Region::default()).unwrap()
}

proptest! {
    #[test]
    fn fit_recovers_the_exponent_without_shadowing(alpha in 2.0..5.0f64, seed in any::<u64>()) {
        let p = LogDistanceParams { alpha, ..LogDistanceParams::default().deterministic() };
        let samples = sample_path_losses(&world(p), &Region::default(), 200, seed);
        let fitted = fit_alpha(&samples, p.pl0_db, p.d0_m).unwrap();
        prop_assert!((fitted - alpha).abs() < 1e-9);
    }

    #[test]
    fn loss_is_reciprocal_and_seed_stable(
        ax in 0.0..1000.0f64, ay in 0.0..1000.0f64, bx in 0.0..1000.0f64, by in 0.0..1000.0f64, seed in any::<u64>(),
    ) {
        let p = LogDistanceParams { seed, fading_amplitude_db: 2.0, ..LogDistanceParams::default() };
        let m = world(p);
        let (a, b) = (Location::new(ax, ay), Location::new(bx, by));
        prop_assert_eq!(m.loss_db(a, b), m.loss_db(b, a));
        prop_assert_eq!(m.loss_db(a, b), world(p).loss_db(a, b));
    }

    #[test]
    fn fading_stays_within_its_amplitude(ax in 0.0..1000.0f64, ay in 0.0..1000.0f64, amp in 0.0..6.0f64) {
        let p = LogDistanceParams { fading_amplitude_db: amp, ..LogDistanceParams::default() };
        let m = world(p);
        let a = Location::new(ax, ay);
        let b = Location::new(500.0, 500.0);
        prop_assert!(m.fade_db(a, b).abs() <= amp + 1e-12);
    }
}

#[test]
fn shadowing_is_unbiased_and_has_the_configured_spread() {
    let p = LogDistanceParams { seed: 17, ..LogDistanceParams::default() };
    let m = world(p);
    let samples = sample_path_losses(&m, &Region::default(), 20_000, 3);
    let residuals: Vec<f64> = samples
        .iter()
        .filter(|(d, _)| *d > p.d0_m)
        .map(|&(d, l)| l - p.mean_loss_db(d))
        .collect();
    let n = residuals.len() as f64;
    let mean = residuals.iter().sum::<f64>() / n;
    let sd = (residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!(mean.abs() < 0.15, "{mean}");
    assert!((sd - p.shadowing_sigma_db).abs() < 0.2, "{sd}");
}

#[test]
fn fit_rejects_degenerate_input() {
    assert!(fit_alpha(&[], 40.0, 1.0).is_err());
    assert!(fit_alpha(&[(10.0, 70.0), (10.0, 72.0)], 40.0, 1.0).is_err());
    assert!(fit_alpha(&[(0.5, 30.0), (0.9, 35.0)], 40.0, 1.0).is_err());
}
