#![allow(dead_code)]

use rand::Rng;
use specalloc::{
    ActiveSu, Location, LogDistance, LogDistanceParams, OracleConfig, PathLoss, PowerDbm, PrimaryUser,
    PuReceiver, Region, Scenario, SecondaryUser,
};

pub fn exact_world(alpha: f64) -> LogDistance {
    let params = LogDistanceParams { alpha, ..LogDistanceParams::default().deterministic() };
    LogDistance::new(params, &Region::default()).unwrap()
}

pub fn uniform_loc<R: Rng>(rng: &mut R, region: &Region) -> Location {
    Location::new(rng.gen_range(0.0..region.width_m), rng.gen_range(0.0..region.height_m))
}

/// Up to `max_pus` PUs with up to `max_purs` receivers each, receivers within
/// 50 m of their PU, and one requesting SU.
pub fn small_scenario<R: Rng>(rng: &mut R, max_pus: usize, max_purs: usize) -> (Scenario, SecondaryUser) {
    let region = Region::default();
    let mut s = Scenario::empty(region, rng.gen());
    let mut pur_id = 0;
    for id in 0..rng.gen_range(1..=max_pus) {
        let loc = uniform_loc(rng, &region);
        let receivers = (0..rng.gen_range(1..=max_purs))
            .map(|_| {
                let r = rng.gen_range(1.0..50.0);
                let t = rng.gen_range(0.0..std::f64::consts::TAU);
                let at = Location::new(
                    (loc.x + r * t.cos()).clamp(0.0, region.width_m),
                    (loc.y + r * t.sin()).clamp(0.0, region.height_m),
                );
                pur_id += 1;
                PuReceiver { id: pur_id, loc: at }
            })
            .collect();
        s.pus.push(PrimaryUser {
            id: id as u32,
            loc,
            tx_power: PowerDbm(rng.gen_range(-30.0..0.0)),
            receivers,
        });
    }
    let su = SecondaryUser { id: 0, loc: uniform_loc(rng, &region) };
    s.sus.push(su);
    (s, su)
}

pub fn add_active_su<R: Rng>(rng: &mut R, s: &mut Scenario, power_dbm: f64) {
    let id = s.active_sus.len() as u32;
    let loc = uniform_loc(rng, &s.region);
    s.active_sus.push(ActiveSu { id, loc, power: PowerDbm(power_dbm) });
}

fn mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// SNR check written from the definition: every PUR's signal over the sum of
/// everything else it hears must reach beta.
pub fn snr_holds(s: &Scenario, extra: &[(Location, f64)], model: &dyn PathLoss, cfg: &OracleConfig) -> bool {
    let beta = mw(cfg.beta_db);
    s.pus.iter().all(|pu| {
        pu.receivers.iter().all(|pur| {
            let signal = mw(pu.tx_power.0 - model.loss_db(pu.loc, pur.loc));
            let mut noise = mw(cfg.noise_dbm);
            for other in s.pus.iter().filter(|o| o.id != pu.id) {
                noise += mw(other.tx_power.0 - model.loss_db(other.loc, pur.loc));
            }
            for a in &s.active_sus {
                noise += mw(a.power.0 - model.loss_db(a.loc, pur.loc));
            }
            for &(loc, p) in extra {
                noise += mw(p - model.loss_db(loc, pur.loc));
            }
            signal >= beta * noise
        })
    })
}

/// Highest power on the `step_db` grid above the denial floor that keeps SNR,
/// scanning down from the cap. `None` when no grid power is safe.
pub fn brute_force_grant(
    s: &Scenario,
    su: Location,
    model: &dyn PathLoss,
    cfg: &OracleConfig,
    step_db: f64,
) -> Option<f64> {
    let steps = ((cfg.max_su_power_dbm - cfg.denial_floor_dbm) / step_db).round() as i64;
    // Per-PUR allowance for SU power at the PUR, in mW, from the definition.
    let beta = mw(cfg.beta_db);
    let mut limits = Vec::new();
    for pu in &s.pus {
        for pur in &pu.receivers {
            let signal = mw(pu.tx_power.0 - model.loss_db(pu.loc, pur.loc));
            let mut noise = mw(cfg.noise_dbm);
            for other in s.pus.iter().filter(|o| o.id != pu.id) {
                noise += mw(other.tx_power.0 - model.loss_db(other.loc, pur.loc));
            }
            for a in &s.active_sus {
                noise += mw(a.power.0 - model.loss_db(a.loc, pur.loc));
            }
            limits.push((signal / beta - noise, model.loss_db(su, pur.loc)));
        }
    }
    (1..=steps).rev().map(|k| cfg.denial_floor_dbm + k as f64 * step_db).find(|&p| {
        let p = p.min(cfg.max_su_power_dbm);
        limits.iter().all(|&(room, loss)| mw(p - loss) <= room)
    })
    .map(|p| p.min(cfg.max_su_power_dbm))
}
