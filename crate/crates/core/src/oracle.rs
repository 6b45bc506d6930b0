//! Ground-truth allocation for a single requesting SU.
//!
//! For every PU receiver (PUR) `j` owned by PU `i` the received own signal is
//! `s_j = t_i * rho(l_i, l_j)` and `I_j` is the interference from the other
//! PUs, the already active SUs and noise. The SU at `l` may transmit at most
//!
//! ```text
//! Pi = min_j (s_j / beta - I_j) / rho(l, l_j)
//! ```
//!
//! all in linear units. A non-positive numerator at any PUR, or a result at or
//! below the denial floor, is a denial.

use serde::{Deserialize, Serialize};

use crate::model::{dbm_to_mw, mw_to_dbm, Location, PowerDbm, PrimaryUser, Scenario, SecondaryUser, SpectrumSensor};
use crate::propagation::PathLoss;
use crate::{Error, Result};

/// Relative slack on the SNR comparison so that a grant at exactly the
/// computed optimum is accepted despite rounding (about 4e-9 dB).
pub const FEASIBILITY_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub beta_db: f64,
    pub noise_dbm: f64,
    pub max_su_power_dbm: f64,
    pub denial_floor_dbm: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            beta_db: 10.0,
            noise_dbm: -120.0,
            max_su_power_dbm: 30.0,
            denial_floor_dbm: -100.0,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beta_db.is_finite()
            && self.noise_dbm.is_finite()
            && self.max_su_power_dbm > self.denial_floor_dbm
        {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("oracle config {self:?}")))
        }
    }

    pub fn beta_linear(&self) -> f64 {
        10f64.powf(self.beta_db / 10.0)
    }

    pub fn noise_mw(&self) -> f64 {
        dbm_to_mw(PowerDbm(self.noise_dbm))
    }
}

/// A power grant or an explicit refusal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AllocationDecision {
    Granted(PowerDbm),
    Denied,
}

impl AllocationDecision {
    pub fn power(self) -> Option<PowerDbm> {
        match self {
            AllocationDecision::Granted(p) => Some(p),
            AllocationDecision::Denied => None,
        }
    }

    pub fn is_granted(self) -> bool {
        matches!(self, AllocationDecision::Granted(_))
    }

    /// Linear power; a denial contributes nothing.
    pub fn mw(self) -> f64 {
        self.power().map_or(0.0, dbm_to_mw)
    }

    /// dBm value with denial mapped to `floor`.
    pub fn dbm_or(self, floor: f64) -> f64 {
        self.power().map_or(floor, |p| p.0)
    }

    pub fn from_dbm(value: Option<f64>) -> Self {
        value.map_or(AllocationDecision::Denied, |v| {
            AllocationDecision::Granted(PowerDbm(v))
        })
    }

    pub fn to_dbm(self) -> Option<f64> {
        self.power().map(|p| p.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurLinkState {
    pub pu_id: u32,
    pub pur_id: u32,
    pub loc: Location,
    pub s_j_dbm: f64,
    pub i_j_mw: f64,
}

impl PurLinkState {
    /// `s_j / beta - I_j` in mW.
    pub fn headroom_mw(&self, beta_linear: f64) -> f64 {
        dbm_to_mw(PowerDbm(self.s_j_dbm)) / beta_linear - self.i_j_mw
    }
}

/// The PUR whose constraint is tightest, and its PU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub pu_id: u32,
    pub pur_id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalPower {
    pub decision: AllocationDecision,
    pub binding: Option<Binding>,
}

pub fn pur_link_states<M: PathLoss + ?Sized>(
    scenario: &Scenario,
    model: &M,
    cfg: &OracleConfig,
) -> Vec<PurLinkState> {
    let noise = cfg.noise_mw();
    let mut states = Vec::with_capacity(scenario.pus.iter().map(|p| p.receivers.len()).sum());
    for (owner, pu) in scenario.pus.iter().enumerate() {
        for pur in &pu.receivers {
            let s_j_dbm = pu.tx_power.0 - model.loss_db(pu.loc, pur.loc);
            let from_pus: f64 = scenario
                .pus
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != owner)
                .map(|(_, other)| dbm_to_mw(PowerDbm(other.tx_power.0 - model.loss_db(other.loc, pur.loc))))
                .sum();
            let from_sus: f64 = scenario
                .active_sus
                .iter()
                .map(|su| dbm_to_mw(PowerDbm(su.power.0 - model.loss_db(su.loc, pur.loc))))
                .sum();
            states.push(PurLinkState {
                pu_id: pu.id,
                pur_id: pur.id,
                loc: pur.loc,
                s_j_dbm,
                i_j_mw: from_pus + from_sus + noise,
            });
        }
    }
    states
}

/// Applies the allocation rule to precomputed PUR states.
pub fn optimal_from_states<M: PathLoss + ?Sized>(
    states: &[PurLinkState],
    su: Location,
    model: &M,
    cfg: &OracleConfig,
) -> OptimalPower {
    let beta = cfg.beta_linear();
    let mut best: Option<(f64, &PurLinkState)> = None;
    let mut blocked = false;
    for st in states {
        let headroom = st.headroom_mw(beta);
        blocked |= headroom <= 0.0;
        let limit = headroom / model.gain(su, st.loc);
        if best.is_none_or(|(b, _)| limit < b) {
            best = Some((limit, st));
        }
    }
    let Some((limit_mw, st)) = best else {
        return OptimalPower {
            decision: AllocationDecision::Granted(PowerDbm(cfg.max_su_power_dbm)),
            binding: None,
        };
    };
    let binding = Some(Binding {
        pu_id: st.pu_id,
        pur_id: st.pur_id,
    });
    let decision = if blocked || limit_mw <= dbm_to_mw(PowerDbm(cfg.denial_floor_dbm)) {
        AllocationDecision::Denied
    } else {
        let dbm = mw_to_dbm(limit_mw).expect("positive limit").0;
        AllocationDecision::Granted(PowerDbm(dbm.min(cfg.max_su_power_dbm)))
    };
    OptimalPower { decision, binding }
}

/// Largest power `su` may transmit without pushing any PUR below `beta`.
pub fn optimal_power<M: PathLoss + ?Sized>(
    scenario: &Scenario,
    su: &SecondaryUser,
    model: &M,
    cfg: &OracleConfig,
) -> OptimalPower {
    let states = pur_link_states(scenario, model, cfg);
    optimal_from_states(&states, su.loc, model, cfg)
}

/// Aggregate received PU power plus noise at `loc`.
pub fn received_power<M: PathLoss + ?Sized>(
    scenario: &Scenario,
    loc: Location,
    model: &M,
    cfg: &OracleConfig,
) -> PowerDbm {
    let total: f64 = scenario
        .pus
        .iter()
        .map(|pu| dbm_to_mw(PowerDbm(pu.tx_power.0 - model.loss_db(pu.loc, loc))))
        .sum::<f64>()
        + cfg.noise_mw();
    mw_to_dbm(total).expect("noise keeps the sum positive")
}

/// Sensors with their readings recomputed from the PUs.
pub fn sensor_readings<M: PathLoss + ?Sized>(
    scenario: &Scenario,
    model: &M,
    cfg: &OracleConfig,
) -> Vec<SpectrumSensor> {
    scenario
        .sensors
        .iter()
        .map(|s| SpectrumSensor {
            reading: received_power(scenario, s.loc, model, cfg),
            ..*s
        })
        .collect()
}

/// SINR in dB at a receiver of PU `owner` given only PU transmissions and noise.
pub fn pu_only_sinr_db<M: PathLoss + ?Sized>(
    pus: &[PrimaryUser],
    owner: usize,
    loc: Location,
    model: &M,
    cfg: &OracleConfig,
) -> f64 {
    let mut signal = 0.0;
    let mut rest = cfg.noise_mw();
    for (k, pu) in pus.iter().enumerate() {
        let p = dbm_to_mw(PowerDbm(pu.tx_power.0 - model.loss_db(pu.loc, loc)));
        if k == owner {
            signal = p;
        } else {
            rest += p;
        }
    }
    10.0 * (signal / rest).log10()
}

/// Linear-domain SNR check over a fixed set of PURs and candidate SU sites.
#[derive(Debug, Clone)]
pub struct LinkBudget {
    /// `s_j / (beta (1 - tol))` per PUR.
    allowance_mw: Vec<f64>,
    interference_mw: Vec<f64>,
    /// `gains[k][j]`: gain from site `k` to PUR `j`.
    gains: Vec<Vec<f64>>,
}

impl LinkBudget {
    pub fn new<M: PathLoss + ?Sized>(
        states: &[PurLinkState],
        sites: &[Location],
        model: &M,
        cfg: &OracleConfig,
    ) -> Self {
        let threshold = cfg.beta_linear() * (1.0 - FEASIBILITY_REL_TOL);
        LinkBudget {
            allowance_mw: states
                .iter()
                .map(|s| dbm_to_mw(PowerDbm(s.s_j_dbm)) / threshold)
                .collect(),
            interference_mw: states.iter().map(|s| s.i_j_mw).collect(),
            gains: sites
                .iter()
                .map(|&site| states.iter().map(|s| model.gain(site, s.loc)).collect())
                .collect(),
        }
    }

    /// `powers_mw[k]` is the power at site `k`; zero for a denial.
    pub fn feasible(&self, powers_mw: &[f64]) -> bool {
        debug_assert_eq!(powers_mw.len(), self.gains.len());
        (0..self.allowance_mw.len()).all(|j| {
            let extra: f64 = self
                .gains
                .iter()
                .zip(powers_mw)
                .map(|(g, &p)| g[j] * p)
                .sum();
            self.interference_mw[j] + extra <= self.allowance_mw[j]
        })
    }
}

/// True iff every PUR keeps SNR at or above `beta` with the grants added.
pub fn check_feasible<M: PathLoss + ?Sized>(
    scenario: &Scenario,
    grants: &[(Location, AllocationDecision)],
    model: &M,
    cfg: &OracleConfig,
) -> bool {
    let states = pur_link_states(scenario, model, cfg);
    let sites: Vec<Location> = grants.iter().map(|g| g.0).collect();
    let powers: Vec<f64> = grants.iter().map(|g| g.1.mw()).collect();
    LinkBudget::new(&states, &sites, model, cfg).feasible(&powers)
}
