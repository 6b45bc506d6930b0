//! Scenario sampling, labeling, image encoding, augmentation and the on-disk
//! dataset format.

pub mod augment;
pub mod conservative;
pub mod idw;
pub mod image;
pub mod io;
pub mod pipeline;
pub mod sampler;

use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::model::Scenario;
use crate::oracle::{optimal_power, AllocationDecision, Binding, OracleConfig};
use crate::propagation::{LogDistance, PathLoss};
use crate::{Error, Result};

pub use augment::{AugmentConfig, FarPuConfig};
pub use conservative::ConservativeConfig;
pub use image::{encode_image, SampleImage, SheetConfig, TensorDims};
pub use io::{read_dataset, write_dataset, Manifest};
pub use sampler::{sample_scenario, sample_scenarios, SamplerConfig};

/// Ground truth for the requesting SU of one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelRow {
    pub sample_id: u64,
    pub optimal: AllocationDecision,
    pub binding: Option<Binding>,
    pub conservative: Option<AllocationDecision>,
}

/// One SU of a multi-SU allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSuRow {
    pub sample_id: u64,
    pub su_id: u32,
    pub x_m: f64,
    pub y_m: f64,
    pub granted_dbm: Option<f64>,
    pub channel: usize,
    pub algo: String,
}

/// A learner's or baseline's output for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub sample_id: u64,
    pub predicted_dbm: Option<f64>,
    pub algo: String,
}

impl PredictionRow {
    pub fn decision(&self) -> AllocationDecision {
        AllocationDecision::from_dbm(self.predicted_dbm)
    }
}

/// Everything stored in a dataset directory, held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub scenarios: Vec<Scenario>,
    pub labels: Vec<LabelRow>,
    pub images: Vec<SampleImage>,
    pub multisu: Vec<MultiSuRow>,
}

fn requesting_su(scenario: &Scenario, sample_id: u64) -> Result<&crate::model::SecondaryUser> {
    scenario
        .sus
        .first()
        .ok_or_else(|| Error::InvalidInput(format!("sample {sample_id} has no requesting SU")))
}

/// Exact label of the first requesting SU.
pub fn label_scenario<M: PathLoss + ?Sized>(
    scenario: &Scenario,
    sample_id: u64,
    model: &M,
    cfg: &OracleConfig,
) -> Result<LabelRow> {
    let su = requesting_su(scenario, sample_id)?;
    let o = optimal_power(scenario, su, model, cfg);
    Ok(LabelRow {
        sample_id,
        optimal: o.decision,
        binding: o.binding,
        conservative: None,
    })
}

/// Labels `scenarios`, numbering them from `first_id`, optionally with
/// conservative labels.
pub fn label_samples(
    scenarios: &[Scenario],
    first_id: u64,
    model: &LogDistance,
    cfg: &OracleConfig,
    conservative: Option<&ConservativeConfig>,
    exec: Exec,
) -> Result<Vec<LabelRow>> {
    exec.map(0..scenarios.len(), |i| {
        let s = &scenarios[i];
        let mut row = label_scenario(s, first_id + i as u64, model, cfg)?;
        if let Some(ccfg) = conservative {
            row.conservative = Some(conservative::conservative_label(s, row.optimal, model, cfg, ccfg)?);
        }
        Ok(row)
    })
    .into_iter()
    .collect()
}
