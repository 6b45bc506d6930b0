//! Random scenario generation.

use std::f64::consts::TAU;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::model::{
    Location, PowerDbm, PrimaryUser, PuReceiver, Region, Scenario, SecondaryUser, SpectrumSensor,
};
use crate::oracle::{pu_only_sinr_db, sensor_readings, OracleConfig};
use crate::propagation::noise::derive_seed;
use crate::propagation::PathLoss;
use crate::{Error, Result};

/// Full layouts redrawn before giving up on a scenario.
const MAX_LAYOUTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Inclusive bounds on the number of PUs.
    pub n_pus: (u32, u32),
    pub pu_power_dbm: (f64, f64),
    pub purs_per_pu: (u32, u32),
    pub pur_radius_m: f64,
    pub n_sensors: u32,
    pub n_sus: u32,
    pub seed: u64,
    /// A PUR is only placed where its own PU clears `beta` plus this margin
    /// against the other PUs and noise.
    pub pur_service_margin_db: f64,
    /// Candidate positions tried per PUR before the layout is redrawn.
    pub max_pur_attempts: u32,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_pus: (10, 20),
            pu_power_dbm: (-30.0, 0.0),
            purs_per_pu: (5, 10),
            pur_radius_m: 50.0,
            n_sensors: 400,
            n_sus: 1,
            seed: 0,
            pur_service_margin_db: 0.0,
            max_pur_attempts: 2000,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.n_pus.0 > self.n_pus.1 || self.purs_per_pu.0 > self.purs_per_pu.1 {
            return bad(format!("empty count range in {self:?}"));
        }
        if self.purs_per_pu.0 == 0 {
            return bad("every PU needs at least one PUR".into());
        }
        let (lo, hi) = self.pu_power_dbm;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad(format!("PU power range {lo}..{hi}"));
        }
        if !(self.pur_radius_m > 0.0) {
            return bad(format!("pur_radius_m {}", self.pur_radius_m));
        }
        if sensor_side(self.n_sensors).is_none() {
            return bad(format!("n_sensors {} is not a perfect square", self.n_sensors));
        }
        if !self.pur_service_margin_db.is_finite() || self.max_pur_attempts == 0 {
            return bad("PUR placement settings".into());
        }
        Ok(())
    }
}

fn sensor_side(n: u32) -> Option<u32> {
    let side = (n as f64).sqrt().round() as u32;
    (side * side == n).then_some(side)
}

/// Sensors on a `side x side` grid, one per cell center, ids in row-major order.
pub fn sensor_grid(region: &Region, n_sensors: u32) -> Result<Vec<SpectrumSensor>> {
    let side = sensor_side(n_sensors)
        .ok_or_else(|| Error::InvalidInput(format!("{n_sensors} is not a perfect square")))?;
    let sx = region.width_m / side as f64;
    let sy = region.height_m / side as f64;
    let mut out = Vec::with_capacity(n_sensors as usize);
    for r in 0..side {
        for c in 0..side {
            out.push(SpectrumSensor {
                id: r * side + c,
                loc: Location::new((c as f64 + 0.5) * sx, (r as f64 + 0.5) * sy).snapped(),
                reading: PowerDbm(0.0),
            });
        }
    }
    Ok(out)
}

fn uniform_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

fn uniform_loc(rng: &mut ChaCha8Rng, region: &Region) -> Location {
    Location::new(
        rng.gen_range(0.0..region.width_m),
        rng.gen_range(0.0..region.height_m),
    )
    .snapped()
}

/// Scenario number `index` of the stream defined by `cfg.seed`.
pub fn sample_scenario<M: PathLoss + ?Sized>(
    cfg: &SamplerConfig,
    region: &Region,
    model: &M,
    oracle: &OracleConfig,
    index: u64,
) -> Result<Scenario> {
    cfg.validate()?;
    region.validate()?;
    let seed = derive_seed(cfg.seed, index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_sinr = oracle.beta_db + cfg.pur_service_margin_db;

    let mut pus = None;
    'layout: for _ in 0..MAX_LAYOUTS {
        let n = rng.gen_range(cfg.n_pus.0..=cfg.n_pus.1);
        let mut layout: Vec<PrimaryUser> = (0..n)
            .map(|id| PrimaryUser {
                id,
                loc: uniform_loc(&mut rng, region),
                tx_power: PowerDbm(uniform_in(&mut rng, cfg.pu_power_dbm.0, cfg.pu_power_dbm.1)),
                receivers: Vec::new(),
            })
            .collect();
        let mut next_pur = 0;
        for owner in 0..layout.len() {
            let k = rng.gen_range(cfg.purs_per_pu.0..=cfg.purs_per_pu.1);
            let center = layout[owner].loc;
            for _ in 0..k {
                let mut placed = None;
                for _ in 0..cfg.max_pur_attempts {
                    let r = cfg.pur_radius_m * rng.gen::<f64>().sqrt();
                    let theta = TAU * rng.gen::<f64>();
                    let loc = Location::new(center.x + r * theta.cos(), center.y + r * theta.sin()).snapped();
                    if region.contains(loc) && pu_only_sinr_db(&layout, owner, loc, model, oracle) >= min_sinr {
                        placed = Some(loc);
                        break;
                    }
                }
                let Some(loc) = placed else { continue 'layout };
                layout[owner].receivers.push(PuReceiver { id: next_pur, loc });
                next_pur += 1;
            }
        }
        pus = Some(layout);
        break;
    }
    let pus = pus.ok_or_else(|| {
        Error::InvalidInput(format!(
            "scenario {index}: no layout with serviceable PURs after {MAX_LAYOUTS} attempts"
        ))
    })?;

    let sus = (0..cfg.n_sus)
        .map(|id| SecondaryUser {
            id,
            loc: uniform_loc(&mut rng, region),
        })
        .collect();
    let mut scenario = Scenario {
        region: *region,
        pus,
        sensors: sensor_grid(region, cfg.n_sensors)?,
        sus,
        active_sus: Vec::new(),
        seed,
    };
    scenario.sensors = sensor_readings(&scenario, model, oracle);
    Ok(scenario)
}

/// Scenarios `first..first + count`, identical under every execution mode.
pub fn sample_scenarios<M: PathLoss + ?Sized>(
    cfg: &SamplerConfig,
    region: &Region,
    model: &M,
    oracle: &OracleConfig,
    first: u64,
    count: usize,
    exec: Exec,
) -> Result<Vec<Scenario>> {
    exec.map(0..count, |i| sample_scenario(cfg, region, model, oracle, first + i as u64))
        .into_iter()
        .collect()
}
