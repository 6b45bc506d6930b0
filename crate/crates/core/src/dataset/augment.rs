//! Synthetic samples derived from labeled ones. Every synthetic keeps the
//! label of its source.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::idw::{augment_idw, IdwDomain};
use super::LabelRow;
use crate::model::{Location, PowerDbm, Region, Scenario};
use crate::oracle::{optimal_power, sensor_readings, AllocationDecision, OracleConfig};
use crate::propagation::noise::derive_seed;
use crate::propagation::PathLoss;
use crate::{Error, Result};

const FAR_PU_STREAM: u64 = 0xFA2_0000;
const IDW_STREAM: u64 = 0x1D3_0000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FarPuConfig {
    pub d_far_m: f64,
    pub delta_db: f64,
    /// Synthetics attempted per source sample.
    pub per_sample: usize,
    /// Largest accepted change of the recomputed label.
    pub epsilon_db: f64,
}

impl Default for FarPuConfig {
    fn default() -> Self {
        FarPuConfig {
            d_far_m: 500.0,
            delta_db: 10.0,
            per_sample: 4,
            epsilon_db: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub far_pu: FarPuConfig,
    pub rotations: Vec<u32>,
    /// Interpolated sensors added per IDW synthetic; 0 disables.
    pub idw_new_sensors: usize,
    pub idw_neighbors: usize,
    pub idw_domain: IdwDomain,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            far_pu: FarPuConfig::default(),
            rotations: Vec::new(),
            idw_new_sensors: 0,
            idw_neighbors: 4,
            idw_domain: IdwDomain::Dbm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FarPuOutcome {
    pub kept: Vec<Scenario>,
    /// Synthetics whose recomputed label drifted by more than epsilon.
    pub dropped: usize,
    /// Absolute drift of every generated synthetic, kept or not; infinite
    /// when exactly one side is a denial.
    pub drifts_db: Vec<f64>,
}

fn drift_db(a: AllocationDecision, b: AllocationDecision) -> f64 {
    match (a.to_dbm(), b.to_dbm()) {
        (Some(x), Some(y)) => (x - y).abs(),
        (None, None) => 0.0,
        _ => f64::INFINITY,
    }
}

/// Lowers the power of every PU farther than `d_far_m` from the binding PU by
/// an independent draw in `(0, delta_db]`, recomputes sensor readings, and
/// keeps the synthetic only if the true label barely moved.
pub fn augment_far_pu<M: PathLoss + ?Sized>(
    scenario: &Scenario,
    label: &LabelRow,
    model: &M,
    cfg: &OracleConfig,
    far: &FarPuConfig,
) -> Result<FarPuOutcome> {
    if !(far.d_far_m >= 0.0 && far.delta_db > 0.0 && far.epsilon_db >= 0.0) {
        return Err(Error::InvalidInput(format!("far-PU settings {far:?}")));
    }
    let Some(binding) = label.binding else {
        return Ok(FarPuOutcome::default());
    };
    let anchor = scenario
        .pu(binding.pu_id)
        .ok_or_else(|| Error::InvalidInput(format!("binding PU {} not in scenario", binding.pu_id)))?
        .loc;
    let far_idx: Vec<usize> = scenario
        .pus
        .iter()
        .enumerate()
        .filter(|(_, pu)| pu.id != binding.pu_id && pu.loc.distance(anchor) > far.d_far_m)
        .map(|(i, _)| i)
        .collect();
    if far_idx.is_empty() {
        return Ok(FarPuOutcome::default());
    }
    let su = scenario
        .sus
        .first()
        .ok_or_else(|| Error::InvalidInput("scenario has no requesting SU".into()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(scenario.seed, FAR_PU_STREAM));
    let mut out = FarPuOutcome::default();
    for j in 0..far.per_sample {
        let mut synth = scenario.clone();
        synth.seed = derive_seed(scenario.seed, FAR_PU_STREAM + 1 + j as u64);
        for &i in &far_idx {
            // 1 - u with u in [0, 1) lies in (0, 1].
            let cut = far.delta_db * (1.0 - rng.gen::<f64>());
            synth.pus[i].tx_power = PowerDbm(synth.pus[i].tx_power.0 - cut);
        }
        synth.sensors = sensor_readings(&synth, model, cfg);
        let drift = drift_db(optimal_power(&synth, su, model, cfg).decision, label.optimal);
        out.drifts_db.push(drift);
        if drift <= far.epsilon_db {
            out.kept.push(synth);
        } else {
            out.dropped += 1;
        }
    }
    Ok(out)
}

/// Counter-clockwise rotation of `loc` about the center of a square region.
pub fn rotate_location(loc: Location, region: &Region, degrees: u32) -> Result<Location> {
    let side = region.width_m;
    match degrees % 360 {
        0 => Ok(loc),
        90 => Ok(Location::new(side - loc.y, loc.x)),
        180 => Ok(Location::new(side - loc.x, side - loc.y)),
        270 => Ok(Location::new(loc.y, side - loc.x)),
        _ => Err(Error::InvalidInput(format!("rotation by {degrees} degrees"))),
    }
}

/// Copy of `scenario` with every entity rotated; readings are carried over.
pub fn augment_rotate(scenario: &Scenario, degrees: u32) -> Result<Scenario> {
    let region = scenario.region;
    if region.width_m != region.height_m {
        return Err(Error::InvalidInput(format!(
            "rotation needs a square region, got {}x{} m",
            region.width_m, region.height_m
        )));
    }
    let rot = |loc: Location| rotate_location(loc, &region, degrees);
    let mut out = scenario.clone();
    for pu in &mut out.pus {
        pu.loc = rot(pu.loc)?;
        for pur in &mut pu.receivers {
            pur.loc = rot(pur.loc)?;
        }
    }
    for s in &mut out.sensors {
        s.loc = rot(s.loc)?;
    }
    for s in &mut out.sus {
        s.loc = rot(s.loc)?;
    }
    for s in &mut out.active_sus {
        s.loc = rot(s.loc)?;
    }
    Ok(out)
}

/// Copy of `scenario` with `count` interpolated sensors at seeded uniform
/// positions.
pub fn augment_idw_uniform(
    scenario: &Scenario,
    count: usize,
    k: usize,
    domain: IdwDomain,
) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(scenario.seed, IDW_STREAM));
    let region = &scenario.region;
    let locs: Vec<Location> = (0..count)
        .map(|_| {
            Location::new(
                rng.gen_range(0.0..region.width_m),
                rng.gen_range(0.0..region.height_m),
            )
            .snapped()
        })
        .collect();
    augment_idw(scenario, &locs, k, domain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PrimaryUser, PuReceiver, SecondaryUser};
    use crate::oracle::Binding;
    use crate::propagation::{LogDistance, LogDistanceParams};

    fn pu(id: u32, x: f64, y: f64, p: f64) -> PrimaryUser {
        PrimaryUser {
            id,
            loc: Location::new(x, y),
            tx_power: PowerDbm(p),
            receivers: vec![PuReceiver { id, loc: Location::new(x + 20.0, y) }],
        }
    }

    fn labeled(s: &Scenario, m: &LogDistance, cfg: &OracleConfig) -> LabelRow {
        let o = optimal_power(s, &s.sus[0], m, cfg);
        LabelRow { sample_id: 0, optimal: o.decision, binding: o.binding, conservative: None }
    }

    fn world() -> LogDistance {
        LogDistance::new(LogDistanceParams::default().deterministic(), &Region::default()).unwrap()
    }

    #[test]
    fn single_pu_has_no_far_set() {
        let mut s = Scenario::empty(Region::default(), 1);
        s.pus.push(pu(0, 100.0, 100.0, 0.0));
        s.sus.push(SecondaryUser { id: 0, loc: Location::new(150.0, 100.0) });
        let (m, cfg) = (world(), OracleConfig::default());
        let out = augment_far_pu(&s, &labeled(&s, &m, &cfg), &m, &cfg, &FarPuConfig::default()).unwrap();
        assert!(out.kept.is_empty() && out.dropped == 0);
    }

    #[test]
    fn distant_pu_reduction_keeps_label() {
        // binding PU 40 m from the SU, second PU ten times farther away
        let mut s = Scenario::empty(Region::default(), 2);
        s.pus.push(pu(0, 100.0, 100.0, 0.0));
        s.pus.push(pu(1, 100.0, 500.0, 0.0));
        s.sus.push(SecondaryUser { id: 0, loc: Location::new(140.0, 100.0) });
        let (m, cfg) = (world(), OracleConfig::default());
        let label = labeled(&s, &m, &cfg);
        assert_eq!(label.binding.unwrap().pu_id, 0);
        let far = FarPuConfig { d_far_m: 300.0, delta_db: 5.0, ..FarPuConfig::default() };
        let out = augment_far_pu(&s, &label, &m, &cfg, &far).unwrap();
        assert_eq!(out.kept.len(), far.per_sample);
        for synth in &out.kept {
            assert_eq!(synth.pus[0].tx_power, s.pus[0].tx_power);
            let cut = s.pus[1].tx_power.0 - synth.pus[1].tx_power.0;
            assert!(cut > 0.0 && cut <= 5.0);
        }
        assert!(out.drifts_db.iter().all(|d| *d < 0.5));
    }

    #[test]
    fn binding_pu_never_modified() {
        let mut s = Scenario::empty(Region::default(), 3);
        s.pus.push(pu(0, 100.0, 100.0, -10.0));
        s.pus.push(pu(1, 800.0, 800.0, -10.0));
        s.pus.push(pu(2, 100.0, 800.0, -10.0));
        s.sus.push(SecondaryUser { id: 0, loc: Location::new(130.0, 110.0) });
        let (m, cfg) = (world(), OracleConfig::default());
        let mut label = labeled(&s, &m, &cfg);
        label.binding = Some(Binding { pu_id: 2, pur_id: 2 });
        let far = FarPuConfig { d_far_m: 0.0, epsilon_db: 1e9, ..FarPuConfig::default() };
        let out = augment_far_pu(&s, &label, &m, &cfg, &far).unwrap();
        assert_eq!(out.kept.len(), far.per_sample);
        for synth in &out.kept {
            assert_eq!(synth.pus[2].tx_power, s.pus[2].tx_power);
            assert!(synth.pus[0].tx_power.0 < s.pus[0].tx_power.0);
        }
    }

    #[test]
    fn rotations_compose_and_preserve_label() {
        let mut s = Scenario::empty(Region::default(), 4);
        s.pus.push(pu(0, 123.0, 456.0, -3.0));
        s.pus.push(pu(1, 700.0, 220.0, -17.0));
        s.sus.push(SecondaryUser { id: 0, loc: Location::new(150.0, 400.0) });
        let mut r = s.clone();
        for _ in 0..4 {
            r = augment_rotate(&r, 90).unwrap();
        }
        for (a, b) in r.pus.iter().zip(&s.pus) {
            assert!(a.loc.distance(b.loc) < 1e-9);
        }
        let (m, cfg) = (world(), OracleConfig::default());
        let base = optimal_power(&s, &s.sus[0], &m, &cfg).decision.to_dbm().unwrap();
        for deg in [90, 180, 270] {
            let rs = augment_rotate(&s, deg).unwrap();
            let v = optimal_power(&rs, &rs.sus[0], &m, &cfg).decision.to_dbm().unwrap();
            assert!((v - base).abs() <= 1e-9, "{deg}: {v} vs {base}");
        }
        assert_eq!(augment_rotate(&s, 180).unwrap().pus[0].loc, Location::new(877.0, 544.0));
        assert!(augment_rotate(&s, 45).is_err());
        let mut wide = s.clone();
        wide.region = Region::new(2000.0, 1000.0, 10.0).unwrap();
        assert!(augment_rotate(&wide, 90).is_err());
    }

    #[test]
    fn idw_uniform_adds_sensors() {
        let mut s = Scenario::empty(Region::default(), 5);
        s.sensors = crate::dataset::sampler::sensor_grid(&s.region, 16).unwrap();
        let out = augment_idw_uniform(&s, 10, 4, IdwDomain::Dbm).unwrap();
        assert_eq!(out.sensors.len(), 26);
        assert_eq!(out, augment_idw_uniform(&s, 10, 4, IdwDomain::Dbm).unwrap());
    }
}
