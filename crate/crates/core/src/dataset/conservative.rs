//! Conservative labels.
//!
//! Small-scale fading makes the true allocation jitter over a few meters. The
//! jitter amplitude `y` is estimated by probing the allocation at random points
//! near the SU, and the label is lowered by `scale * y`.
//!
//! Each probe value is the difference between the allocation with fading and
//! without it at the same point. Differencing removes the smooth distance
//! trend and the piecewise-constant shadowing, so `y` measures only the
//! small-scale part; with fading off it is exactly zero.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Location, PowerDbm, Scenario};
use crate::oracle::{optimal_from_states, pur_link_states, AllocationDecision, OracleConfig};
use crate::propagation::noise::derive_seed;
use crate::propagation::LogDistance;
use crate::{Error, Result};

const PROBE_STREAM: u64 = 0xC0_5E47;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConservativeConfig {
    pub neighborhood_radius_m: f64,
    pub n_probes: usize,
    /// Fraction of the amplitude subtracted from the label.
    pub scale: f64,
}

impl Default for ConservativeConfig {
    fn default() -> Self {
        ConservativeConfig {
            neighborhood_radius_m: 5.0,
            n_probes: 16,
            scale: 1.0,
        }
    }
}

impl ConservativeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.neighborhood_radius_m > 0.0 && self.n_probes >= 2 && self.scale >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("conservative config {self:?}")))
        }
    }
}

/// Spread of a set of dB values; zero when empty.
pub fn amplitude(values_db: &[f64]) -> f64 {
    let max = values_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values_db.iter().copied().fold(f64::INFINITY, f64::min);
    if values_db.is_empty() {
        0.0
    } else {
        max - min
    }
}

/// `label - scale * y`; a denial stays a denial.
pub fn lower_label(label: AllocationDecision, y_db: f64, scale: f64) -> AllocationDecision {
    match label {
        AllocationDecision::Granted(p) => AllocationDecision::Granted(PowerDbm(p.0 - scale * y_db)),
        AllocationDecision::Denied => AllocationDecision::Denied,
    }
}

/// Probe points uniform in the disk around `center`, clamped into the region.
pub fn probe_points(scenario: &Scenario, center: Location, cfg: &ConservativeConfig) -> Vec<Location> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(scenario.seed, PROBE_STREAM));
    let region = &scenario.region;
    (0..cfg.n_probes)
        .map(|_| {
            let r = cfg.neighborhood_radius_m * rng.gen::<f64>().sqrt();
            let theta = TAU * rng.gen::<f64>();
            Location::new(
                (center.x + r * theta.cos()).clamp(0.0, region.width_m),
                (center.y + r * theta.sin()).clamp(0.0, region.height_m),
            )
        })
        .collect()
}

/// Small-scale amplitude around `center`, or `None` if any probe is denied.
pub fn local_amplitude(
    scenario: &Scenario,
    center: Location,
    model: &LogDistance,
    cfg: &OracleConfig,
    ccfg: &ConservativeConfig,
) -> Option<f64> {
    let smooth = model.without_fading();
    let full_states = pur_link_states(scenario, model, cfg);
    let smooth_states = pur_link_states(scenario, &smooth, cfg);
    let mut residuals = Vec::with_capacity(ccfg.n_probes);
    for probe in probe_points(scenario, center, ccfg) {
        let full = optimal_from_states(&full_states, probe, model, cfg).decision.to_dbm()?;
        let base = optimal_from_states(&smooth_states, probe, &smooth, cfg).decision.to_dbm()?;
        residuals.push(full - base);
    }
    Some(amplitude(&residuals))
}

/// Conservative version of `label` for the first requesting SU of `scenario`.
pub fn conservative_label(
    scenario: &Scenario,
    label: AllocationDecision,
    model: &LogDistance,
    cfg: &OracleConfig,
    ccfg: &ConservativeConfig,
) -> Result<AllocationDecision> {
    ccfg.validate()?;
    let su = scenario
        .sus
        .first()
        .ok_or_else(|| Error::InvalidInput("scenario has no requesting SU".into()))?;
    if !label.is_granted() {
        return Ok(AllocationDecision::Denied);
    }
    Ok(match local_amplitude(scenario, su.loc, model, cfg, ccfg) {
        Some(y) => lower_label(label, y, ccfg.scale),
        None => AllocationDecision::Denied,
    })
}
