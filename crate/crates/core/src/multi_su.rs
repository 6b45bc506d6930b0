//! Power assignment for several SUs that request at the same time.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{dbm_to_mw, subarea_index, ActiveSu, Location, PowerDbm, Scenario, SecondaryUser};
use crate::oracle::{optimal_power, pur_link_states, AllocationDecision, LinkBudget, OracleConfig};
use crate::propagation::PathLoss;
use crate::{Error, Result};

pub const DEFAULT_THRESHOLD_DB: f64 = 0.1;

/// Search interval for one SU, in dBm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerRange {
    pub su_id: u32,
    pub lo_dbm: f64,
    pub hi_dbm: f64,
}

impl PowerRange {
    pub fn width(&self) -> f64 {
        self.hi_dbm - self.lo_dbm
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiAllocation {
    pub grants: Vec<(u32, AllocationDecision)>,
    pub channel: Option<usize>,
}

impl MultiAllocation {
    pub fn decision(&self, su_id: u32) -> Option<AllocationDecision> {
        self.grants.iter().find(|g| g.0 == su_id).map(|g| g.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryAllocOutcome {
    pub allocation: MultiAllocation,
    pub iterations: usize,
    /// The scenario violated SNR before any SU was admitted; all SUs denied.
    pub base_infeasible: bool,
}

/// Upper bound on Binary-Alloc iterations for `n` SUs.
pub fn iteration_bound(n: usize, cfg: &OracleConfig, threshold_db: f64) -> usize {
    let span = cfg.max_su_power_dbm - cfg.denial_floor_dbm;
    n * (span / threshold_db).log2().ceil().max(0.0) as usize
}

pub fn binary_alloc<M: PathLoss + ?Sized>(
    scenario: &Scenario,
    sus: &[SecondaryUser],
    model: &M,
    cfg: &OracleConfig,
    threshold_db: f64,
) -> Result<BinaryAllocOutcome> {
    binary_alloc_observed(scenario, sus, model, cfg, threshold_db, &mut |_| {})
}

/// Binary-Alloc with a hook that sees the ranges after initialization and
/// after every iteration.
///
/// Every SU starts with `[denial_floor, max_power]`. Each iteration takes the
/// widest range (lowest id on ties) and tests its midpoint with all other SUs
/// at their lower ends: feasible raises the lower end, infeasible lowers the
/// upper end. Stops when every range is narrower than `threshold_db`; the
/// grants are the lower ends, and a lower end still at the floor is a denial.
pub fn binary_alloc_observed<M: PathLoss + ?Sized>(
    scenario: &Scenario,
    sus: &[SecondaryUser],
    model: &M,
    cfg: &OracleConfig,
    threshold_db: f64,
    observer: &mut dyn FnMut(&[PowerRange]),
) -> Result<BinaryAllocOutcome> {
    if sus.is_empty() {
        return Err(Error::InvalidInput("binary_alloc needs at least one SU".into()));
    }
    if !(threshold_db > 0.0) {
        return Err(Error::InvalidInput(format!("threshold {threshold_db} dB")));
    }
    let floor = cfg.denial_floor_dbm;
    let states = pur_link_states(scenario, model, cfg);
    let sites: Vec<Location> = sus.iter().map(|s| s.loc).collect();
    let budget = LinkBudget::new(&states, &sites, model, cfg);

    let denied_all = |base_infeasible| BinaryAllocOutcome {
        allocation: MultiAllocation {
            grants: sus.iter().map(|s| (s.id, AllocationDecision::Denied)).collect(),
            channel: None,
        },
        iterations: 0,
        base_infeasible,
    };
    if !budget.feasible(&vec![0.0; sus.len()]) {
        return Ok(denied_all(true));
    }

    let level_mw = |dbm: f64| if dbm <= floor { 0.0 } else { dbm_to_mw(PowerDbm(dbm)) };
    let mut ranges: Vec<PowerRange> = sus
        .iter()
        .map(|s| PowerRange {
            su_id: s.id,
            lo_dbm: floor,
            hi_dbm: cfg.max_su_power_dbm,
        })
        .collect();
    let mut lo_mw = vec![0.0; sus.len()];
    observer(&ranges);

    let mut iterations = 0;
    loop {
        let pick = ranges
            .iter()
            .enumerate()
            .filter(|(_, r)| r.width() >= threshold_db)
            .max_by(|(_, a), (_, b)| {
                a.width()
                    .total_cmp(&b.width())
                    .then_with(|| b.su_id.cmp(&a.su_id))
            })
            .map(|(i, _)| i);
        let Some(i) = pick else { break };

        let mid = 0.5 * (ranges[i].lo_dbm + ranges[i].hi_dbm);
        let mut trial = lo_mw.clone();
        trial[i] = level_mw(mid);
        if budget.feasible(&trial) {
            ranges[i].lo_dbm = mid;
            lo_mw[i] = trial[i];
        } else {
            ranges[i].hi_dbm = mid;
        }
        iterations += 1;
        debug_assert!(budget.feasible(&lo_mw), "all-lower-bound allocation infeasible");
        observer(&ranges);
    }

    let grants = ranges
        .iter()
        .map(|r| {
            let d = if r.lo_dbm <= floor {
                AllocationDecision::Denied
            } else {
                AllocationDecision::Granted(PowerDbm(r.lo_dbm))
            };
            (r.su_id, d)
        })
        .collect();
    Ok(BinaryAllocOutcome {
        allocation: MultiAllocation {
            grants,
            channel: None,
        },
        iterations,
        base_infeasible: false,
    })
}

/// Orders SUs by the aggregate linear power of PUs and active SUs in their
/// subarea and its eight neighbours, quietest first, ties by id.
pub fn greedy_order(scenario: &Scenario, sus: &[SecondaryUser]) -> Result<Vec<SecondaryUser>> {
    let region = &scenario.region;
    let mut sources: Vec<((usize, usize), f64)> = Vec::new();
    for pu in &scenario.pus {
        sources.push((subarea_index(pu.loc, region)?, pu.tx_power.mw()));
    }
    for su in &scenario.active_sus {
        sources.push((subarea_index(su.loc, region)?, su.power.mw()));
    }
    let mut keyed = Vec::with_capacity(sus.len());
    for su in sus {
        let (row, col) = subarea_index(su.loc, region)?;
        let weight: f64 = sources
            .iter()
            .filter(|((r, c), _)| r.abs_diff(row) <= 1 && c.abs_diff(col) <= 1)
            .map(|(_, w)| w)
            .sum();
        keyed.push((weight_key(weight), *su));
    }
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
    Ok(keyed.into_iter().map(|(_, su)| su).collect())
}

/// Weights equal to within a micro-dB compare equal.
fn weight_key(mw: f64) -> i64 {
    if mw > 0.0 {
        (10.0 * mw.log10() * 1e6).round() as i64
    } else {
        i64::MIN
    }
}

/// Admits SUs one at a time, each at its single-SU optimum given the SUs
/// admitted before it.
pub fn sequential_alloc<M: PathLoss + ?Sized>(
    scenario: &Scenario,
    ordered_sus: &[SecondaryUser],
    model: &M,
    cfg: &OracleConfig,
) -> MultiAllocation {
    let mut world = scenario.clone();
    let mut grants = Vec::with_capacity(ordered_sus.len());
    for su in ordered_sus {
        let decision = optimal_power(&world, su, model, cfg).decision;
        if let AllocationDecision::Granted(power) = decision {
            world.active_sus.push(ActiveSu {
                id: su.id,
                loc: su.loc,
                power,
            });
        }
        grants.push((su.id, decision));
    }
    MultiAllocation {
        grants,
        channel: None,
    }
}

/// Seeded shuffle followed by round-robin dealing into `n_channels` sets.
pub fn partition_channels(
    sus: &[SecondaryUser],
    n_channels: usize,
    seed: u64,
) -> Result<Vec<Vec<SecondaryUser>>> {
    if n_channels == 0 {
        return Err(Error::InvalidInput("need at least one channel".into()));
    }
    if n_channels == 1 {
        return Ok(vec![sus.to_vec()]);
    }
    let mut shuffled = sus.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut sets = vec![Vec::new(); n_channels];
    for (i, su) in shuffled.into_iter().enumerate() {
        sets[i % n_channels].push(su);
    }
    Ok(sets)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MultiAlgo {
    Binary,
    Greedy,
}

/// Splits SUs over channels and allocates each channel independently.
/// Channels with no SUs are omitted.
pub fn allocate_channels<M: PathLoss + ?Sized>(
    scenario: &Scenario,
    sus: &[SecondaryUser],
    n_channels: usize,
    seed: u64,
    algo: MultiAlgo,
    model: &M,
    cfg: &OracleConfig,
    threshold_db: f64,
) -> Result<Vec<MultiAllocation>> {
    let mut out = Vec::new();
    for (channel, set) in partition_channels(sus, n_channels, seed)?.into_iter().enumerate() {
        if set.is_empty() {
            continue;
        }
        let mut alloc = match algo {
            MultiAlgo::Binary => binary_alloc(scenario, &set, model, cfg, threshold_db)?.allocation,
            MultiAlgo::Greedy => {
                let order = greedy_order(scenario, &set)?;
                sequential_alloc(scenario, &order, model, cfg)
            }
        };
        alloc.channel = Some(channel);
        out.push(alloc);
    }
    Ok(out)
}
