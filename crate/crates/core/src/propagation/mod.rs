//! Deterministic path-loss models.
//!
//! [`LogDistance`] is the seeded log-distance world with lognormal shadowing
//! and an optional small-scale fading term. [`GridPathLoss`] imports rasters
//! computed elsewhere.

mod grid;
pub mod noise;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Location, Region};
use crate::{Error, Result};

pub use grid::{load_grid, save_grid, GridBacked, GridPathLoss};

const SHADOW_STREAM: u64 = 0x5348_4144;
const FADE_STREAM: u64 = 0x4641_4445;

/// Fading is quantized this many times finer than the shadowing grid.
pub const FADING_SUBDIVISION: f64 = 16.0;

/// Attenuation between two locations, in dB.
pub trait PathLoss: Sync {
    fn loss_db(&self, a: Location, b: Location) -> f64;

    /// Linear gain, `10^(-loss/10)`.
    fn gain(&self, a: Location, b: Location) -> f64 {
        10f64.powf(-self.loss_db(a, b) / 10.0)
    }
}

impl<T: PathLoss + ?Sized> PathLoss for &T {
    fn loss_db(&self, a: Location, b: Location) -> f64 {
        (**self).loss_db(a, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogDistanceParams {
    pub alpha: f64,
    pub pl0_db: f64,
    pub d0_m: f64,
    pub shadowing_sigma_db: f64,
    pub fading_amplitude_db: f64,
    pub seed: u64,
}

impl Default for LogDistanceParams {
    fn default() -> Self {
        LogDistanceParams {
            alpha: 3.3,
            pl0_db: 40.0,
            d0_m: 1.0,
            shadowing_sigma_db: 4.0,
            fading_amplitude_db: 0.0,
            seed: 0,
        }
    }
}

impl LogDistanceParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha > 0.0
            && self.d0_m > 0.0
            && self.shadowing_sigma_db >= 0.0
            && self.fading_amplitude_db >= 0.0
            && self.pl0_db.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("log-distance parameters {self:?}")))
        }
    }

    /// Same parameters with shadowing and fading switched off.
    pub fn deterministic(&self) -> Self {
        LogDistanceParams {
            shadowing_sigma_db: 0.0,
            fading_amplitude_db: 0.0,
            ..*self
        }
    }

    /// Distance-only part of the loss.
    pub fn mean_loss_db(&self, distance_m: f64) -> f64 {
        self.pl0_db + 10.0 * self.alpha * (distance_m.max(self.d0_m) / self.d0_m).log10()
    }
}

/// Log-distance model with hash-realized shadowing and fading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDistance {
    pub params: LogDistanceParams,
    cell_m: f64,
}

impl LogDistance {
    /// Shadowing is quantized at the region's `grid_cell_m`.
    pub fn new(params: LogDistanceParams, region: &Region) -> Result<Self> {
        params.validate()?;
        region.validate()?;
        Ok(LogDistance {
            params,
            cell_m: region.grid_cell_m,
        })
    }

    pub fn cell_m(&self) -> f64 {
        self.cell_m
    }

    /// Zero-mean Gaussian shadowing term for the pair, in dB.
    pub fn shadow_db(&self, a: Location, b: Location) -> f64 {
        if self.params.shadowing_sigma_db == 0.0 {
            return 0.0;
        }
        let ca = noise::quantize(a.x, a.y, self.cell_m);
        let cb = noise::quantize(b.x, b.y, self.cell_m);
        let u = noise::unit_open(noise::pair_hash(self.params.seed, SHADOW_STREAM, ca, cb));
        self.params.shadowing_sigma_db * noise::inverse_normal_cdf(u)
    }

    /// Zero-mean small-scale term, uniform in `[-A, A]`.
    pub fn fade_db(&self, a: Location, b: Location) -> f64 {
        if self.params.fading_amplitude_db == 0.0 {
            return 0.0;
        }
        let step = self.cell_m / FADING_SUBDIVISION;
        let ca = noise::quantize(a.x, a.y, step);
        let cb = noise::quantize(b.x, b.y, step);
        let u = noise::unit_open(noise::pair_hash(self.params.seed, FADE_STREAM, ca, cb));
        self.params.fading_amplitude_db * (2.0 * u - 1.0)
    }

    /// The same world without the small-scale term.
    pub fn without_fading(&self) -> Self {
        LogDistance {
            params: LogDistanceParams {
                fading_amplitude_db: 0.0,
                ..self.params
            },
            cell_m: self.cell_m,
        }
    }
}

impl PathLoss for LogDistance {
    fn loss_db(&self, a: Location, b: Location) -> f64 {
        self.params.mean_loss_db(a.distance(b)) + self.shadow_db(a, b) + self.fade_db(a, b)
    }
}

/// Least-squares path-loss exponent for known `pl0_db` and `d0_m`.
///
/// Minimizes `sum (loss - pl0 - 10 a log10(d/d0))^2`, a regression through the
/// origin on log-distance. Samples at or inside `d0_m` carry no slope
/// information and are skipped.
pub fn fit_alpha(samples: &[(f64, f64)], pl0_db: f64, d0_m: f64) -> Result<f64> {
    if !(d0_m > 0.0) {
        return Err(Error::Unfittable(format!("reference distance {d0_m}")));
    }
    let usable: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(d, loss)| d.is_finite() && loss.is_finite() && *d > d0_m)
        .map(|&(d, loss)| (10.0 * (d / d0_m).log10(), loss - pl0_db))
        .collect();
    let first = usable.first().map(|s| s.0);
    if usable.len() < 2 || usable.iter().all(|s| Some(s.0) == first) {
        return Err(Error::Unfittable(
            "need at least two distinct distances beyond d0".into(),
        ));
    }
    let sxy: f64 = usable.iter().map(|(x, y)| x * y).sum();
    let sxx: f64 = usable.iter().map(|(x, _)| x * x).sum();
    Ok(sxy / sxx)
}

/// Draws `count` random link measurements `(distance_m, loss_db)` from a model.
pub fn sample_path_losses(
    model: &dyn PathLoss,
    region: &Region,
    count: usize,
    seed: u64,
) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let a = Location::new(
                rng.gen_range(0.0..=region.width_m),
                rng.gen_range(0.0..=region.height_m),
            );
            let b = Location::new(
                rng.gen_range(0.0..=region.width_m),
                rng.gen_range(0.0..=region.height_m),
            );
            (a.distance(b), model.loss_db(a, b))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};

    fn plain(alpha: f64) -> LogDistance {
        let params = LogDistanceParams {
            alpha,
            pl0_db: 40.0,
            d0_m: 1.0,
            shadowing_sigma_db: 0.0,
            fading_amplitude_db: 0.0,
            seed: 1,
        };
        LogDistance::new(params, &Region::default()).unwrap()
    }

    #[test]
    fn log_distance_hand_values() {
        let m = plain(3.0);
        let a = Location::new(100.0, 100.0);
        assert!((m.loss_db(a, Location::new(110.0, 100.0)) - 70.0).abs() < 1e-12);
        assert_eq!(m.loss_db(a, Location::new(100.5, 100.0)), 40.0);
        assert_eq!(m.loss_db(a, a), 40.0);
    }

    #[test]
    fn fit_alpha_hand_least_squares() {
        let alpha = fit_alpha(&[(10.0, 70.0), (100.0, 100.0)], 40.0, 1.0).unwrap();
        assert!((alpha - 3.0).abs() < 1e-12);
    }

    #[test]
    fn fit_alpha_recovers_noiseless_exponent() {
        let samples: Vec<_> = (1..200)
            .map(|i| {
                let d = 2.0 + i as f64 * 4.7;
                (d, 40.0 + 33.0 * d.log10())
            })
            .collect();
        assert!((fit_alpha(&samples, 40.0, 1.0).unwrap() - 3.3).abs() < 1e-9);
    }

    #[test]
    fn fit_alpha_degenerate() {
        assert!(fit_alpha(&[(10.0, 70.0), (10.0, 71.0)], 40.0, 1.0).is_err());
        assert!(fit_alpha(&[(10.0, 70.0)], 40.0, 1.0).is_err());
        assert!(fit_alpha(&[(0.5, 40.0), (1.0, 40.0), (20.0, 80.0)], 40.0, 1.0).is_err());
    }

    #[test]
    fn fit_alpha_on_shadowed_world_lands_near_truth() {
        let region = Region::default();
        let model = LogDistance::new(LogDistanceParams::default(), &region).unwrap();
        let samples = sample_path_losses(&model, &region, 200, 5);
        let alpha = fit_alpha(&samples, 40.0, 1.0).unwrap();
        assert!((alpha - 3.3).abs() < 0.1, "alpha {alpha}");
    }

    #[test]
    fn shadowing_statistics() {
        let region = Region::default();
        let params = LogDistanceParams {
            seed: 77,
            ..LogDistanceParams::default()
        };
        let model = LogDistance::new(params, &region).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            let a = Location::new(rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0));
            let b = Location::new(rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0));
            let s = model.shadow_db(a, b);
            sum += s;
            sq += s * s;
        }
        let mean = sum / n as f64;
        let std = (sq / n as f64 - mean * mean).sqrt();
        assert!(mean.abs() < 0.1, "mean {mean}");
        assert!((std / 4.0 - 1.0).abs() < 0.05, "std {std}");
    }

    #[test]
    fn fading_bounded_and_fine_grained() {
        let params = LogDistanceParams {
            fading_amplitude_db: 3.0,
            ..LogDistanceParams::default()
        };
        let model = LogDistance::new(params, &Region::default()).unwrap();
        let a = Location::new(10.0, 10.0);
        let mut distinct = std::collections::BTreeSet::new();
        for i in 0..64 {
            let b = Location::new(500.0 + i as f64 * 0.7, 500.0);
            let f = model.fade_db(a, b);
            assert!(f.abs() <= 3.0);
            distinct.insert(f.to_bits());
        }
        assert!(distinct.len() > 40);
    }

    proptest! {
        #[test]
        fn reciprocal_and_deterministic(
            ax in 0.0f64..1000.0, ay in 0.0f64..1000.0,
            bx in 0.0f64..1000.0, by in 0.0f64..1000.0,
            seed in any::<u64>(),
        ) {
            let params = LogDistanceParams { seed, fading_amplitude_db: 2.0, ..LogDistanceParams::default() };
            let m = LogDistance::new(params, &Region::default()).unwrap();
            let a = Location::new(ax, ay);
            let b = Location::new(bx, by);
            prop_assert_eq!(m.loss_db(a, b).to_bits(), m.loss_db(b, a).to_bits());
            let again = LogDistance::new(params, &Region::default()).unwrap();
            prop_assert_eq!(m.loss_db(a, b).to_bits(), again.loss_db(a, b).to_bits());
        }

        #[test]
        fn monotone_in_distance_without_randomness(d1 in 1.0f64..700.0, step in 1e-3f64..200.0) {
            let m = plain(3.3);
            let o = Location::new(0.0, 0.0);
            prop_assert!(m.loss_db(o, Location::new(d1 + step, 0.0)) > m.loss_db(o, Location::new(d1, 0.0)));
        }
    }
}
