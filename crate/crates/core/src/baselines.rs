//! Non-learning allocators used as comparison points.

use serde::{Deserialize, Serialize};

use crate::dataset::idw::idw_points;
use crate::model::{dbm_to_mw, Location, PowerDbm, Scenario, SecondaryUser};
use crate::oracle::{optimal_power, received_power, AllocationDecision, OracleConfig};
use crate::propagation::{LogDistanceParams, PathLoss};
use crate::{Error, Result};

/// Listen-before-talk: transmit at a fixed power only where the sensed
/// aggregate is below a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LbtConfig {
    pub threshold_dbm: f64,
    pub grant_power_dbm: f64,
}

impl Default for LbtConfig {
    fn default() -> Self {
        // 3 dB above the default noise floor: any PU signal comparable to
        // the noise blocks transmission.
        LbtConfig {
            threshold_dbm: -117.0,
            grant_power_dbm: 0.0,
        }
    }
}

pub fn lbt_allocate<M: PathLoss + ?Sized>(
    scenario: &Scenario,
    su: &SecondaryUser,
    model: &M,
    cfg: &OracleConfig,
    lbt: &LbtConfig,
) -> AllocationDecision {
    debug_assert!(lbt.grant_power_dbm <= cfg.max_su_power_dbm);
    if received_power(scenario, su.loc, model, cfg).0 < lbt.threshold_dbm {
        AllocationDecision::Granted(PowerDbm(lbt.grant_power_dbm))
    } else {
        AllocationDecision::Denied
    }
}

/// Interpolation-based allocator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IpbConfig {
    pub alpha_fitted: f64,
    pub pl0_db: f64,
    pub d0_m: f64,
    pub use_idw_correction: bool,
    pub idw_neighbors: usize,
}

impl Default for IpbConfig {
    fn default() -> Self {
        IpbConfig {
            alpha_fitted: 3.3,
            pl0_db: 40.0,
            d0_m: 1.0,
            use_idw_correction: true,
            idw_neighbors: 4,
        }
    }
}

impl IpbConfig {
    fn base(&self) -> LogDistanceParams {
        LogDistanceParams {
            alpha: self.alpha_fitted,
            pl0_db: self.pl0_db,
            d0_m: self.d0_m,
            shadowing_sigma_db: 0.0,
            fading_amplitude_db: 0.0,
            seed: 0,
        }
    }
}

/// Path-loss estimate built from PU parameters and sensor readings.
///
/// The base is log-distance with the fitted exponent. With correction on,
/// each sensor whose reading carries PU energy above noise yields an exponent
/// adjustment: the dB residual between the PU part of its reading and the
/// predicted PU power, divided by `10 log10(d/d0)` to its dominant PU. The
/// adjustments are spread over the area by log-distance IDW, and a link uses
/// the mean adjustment at its two endpoints, which keeps it reciprocal.
#[derive(Debug, Clone)]
pub struct EstimatedLoss {
    base: LogDistanceParams,
    adjustments: Vec<(Location, f64)>,
    neighbors: usize,
}

impl EstimatedLoss {
    pub fn build(scenario: &Scenario, cfg: &OracleConfig, ipb: &IpbConfig) -> Result<Self> {
        let base = ipb.base();
        base.validate()?;
        if ipb.idw_neighbors == 0 {
            return Err(Error::InvalidInput("idw_neighbors must be at least 1".into()));
        }
        let mut adjustments = Vec::new();
        if ipb.use_idw_correction {
            if scenario.sensors.len() < ipb.idw_neighbors {
                return Err(Error::InvalidInput(format!(
                    "{} sensors, correction needs {}",
                    scenario.sensors.len(),
                    ipb.idw_neighbors
                )));
            }
            let noise = cfg.noise_mw();
            for sensor in &scenario.sensors {
                let mut predicted = 0.0;
                let mut dominant: Option<(f64, Location)> = None;
                for pu in &scenario.pus {
                    let d = pu.loc.distance(sensor.loc);
                    let p = dbm_to_mw(PowerDbm(pu.tx_power.0 - base.mean_loss_db(d)));
                    predicted += p;
                    if dominant.is_none_or(|(best, _)| p > best) {
                        dominant = Some((p, pu.loc));
                    }
                }
                let observed = dbm_to_mw(sensor.reading) - noise;
                let Some((_, source)) = dominant else { continue };
                let span = 10.0 * (source.distance(sensor.loc) / base.d0_m).log10();
                if observed <= 0.0 || predicted <= 0.0 || span < 3.0 {
                    continue;
                }
                let residual_db = 10.0 * (observed / predicted).log10();
                adjustments.push((sensor.loc, -residual_db / span));
            }
        }
        Ok(EstimatedLoss {
            base,
            adjustments,
            neighbors: ipb.idw_neighbors,
        })
    }

    pub fn exponent_adjustment(&self, at: Location) -> f64 {
        if self.adjustments.is_empty() {
            0.0
        } else {
            idw_points(&self.adjustments, at, self.neighbors)
        }
    }
}

impl PathLoss for EstimatedLoss {
    fn loss_db(&self, a: Location, b: Location) -> f64 {
        let alpha = self.base.alpha
            + 0.5 * (self.exponent_adjustment(a) + self.exponent_adjustment(b));
        let d = a.distance(b).max(self.base.d0_m);
        self.base.pl0_db + 10.0 * alpha * (d / self.base.d0_m).log10()
    }
}

/// Applies the allocation rule with estimated path losses.
pub fn ipb_allocate(
    scenario: &Scenario,
    su: &SecondaryUser,
    cfg: &OracleConfig,
    ipb: &IpbConfig,
) -> Result<AllocationDecision> {
    let estimate = EstimatedLoss::build(scenario, cfg, ipb)?;
    Ok(optimal_power(scenario, su, &estimate, cfg).decision)
}
