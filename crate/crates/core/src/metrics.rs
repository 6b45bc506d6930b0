//! Scoring of allocation predictions.
//!
//! Denials enter the error metrics at the denial floor: a denial scored
//! against a grant of `g` dBm is an error of `g - floor`, and a grant predicted
//! for a denied sample is a false positive by the same amount.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::MetricsConfig;
use crate::dataset::{LabelRow, MultiSuRow, PredictionRow};
use crate::model::{dbm_to_mw, Location, PowerDbm, Scenario};
use crate::oracle::{AllocationDecision, OracleConfig};
use crate::propagation::noise::derive_seed;
use crate::propagation::PathLoss;
use crate::{Error, Result};

const RATE_STREAM: u64 = 0x7A7E_0000;

/// A prediction counts as a false positive only when it exceeds the label by
/// more than this, so rounding noise between equivalent computations does not.
pub const FP_TOLERANCE_DB: f64 = 1e-9;

/// Prediction error against exact labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub n: usize,
    pub a_err_db: f64,
    pub a_fp_db: f64,
    pub fp_rate: f64,
}

/// One row of a report; metrics that do not apply are left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub algo: String,
    pub dataset: String,
    pub n: usize,
    pub a_err_db: Option<f64>,
    pub a_fp_db: Option<f64>,
    pub fp_rate: Option<f64>,
    pub fairness: Option<f64>,
    pub total_rate_bps: Option<f64>,
    pub total_power_w: Option<f64>,
}

impl EvalReport {
    pub fn from_score(algo: &str, dataset: &str, s: &Score) -> Self {
        EvalReport {
            algo: algo.into(),
            dataset: dataset.into(),
            n: s.n,
            a_err_db: Some(s.a_err_db),
            a_fp_db: Some(s.a_fp_db),
            fp_rate: Some(s.fp_rate),
            fairness: None,
            total_rate_bps: None,
            total_power_w: None,
        }
    }
}

/// Scores `(sample_id, prediction)` against `(sample_id, label)` pairs.
/// Every labeled sample needs exactly one prediction and vice versa.
pub fn score_pairs(
    predictions: &[(u64, AllocationDecision)],
    labels: &[(u64, AllocationDecision)],
    floor_dbm: f64,
) -> Result<Score> {
    let mut truth = BTreeMap::new();
    for &(id, y) in labels {
        if truth.insert(id, y).is_some() {
            return Err(Error::InvalidInput(format!("duplicate label for sample {id}")));
        }
    }
    let mut pred = HashMap::with_capacity(predictions.len());
    for &(id, p) in predictions {
        if pred.insert(id, p).is_some() {
            return Err(Error::InvalidInput(format!("duplicate prediction for sample {id}")));
        }
        if !truth.contains_key(&id) {
            return Err(Error::InvalidInput(format!("prediction for unlabeled sample {id}")));
        }
    }
    let n = truth.len();
    if n == 0 {
        return Ok(Score { n: 0, a_err_db: 0.0, a_fp_db: 0.0, fp_rate: 0.0 });
    }
    let (mut err, mut fp_mass, mut fp_count) = (0.0, 0.0, 0usize);
    // BTreeMap order fixes the summation order, so input order never matters.
    for (id, y) in &truth {
        let p = pred
            .get(id)
            .ok_or_else(|| Error::InvalidInput(format!("no prediction for sample {id}")))?;
        let y = y.dbm_or(floor_dbm).max(floor_dbm);
        let p = p.dbm_or(floor_dbm).max(floor_dbm);
        err += (p - y).abs();
        if p - y > FP_TOLERANCE_DB {
            fp_mass += p - y;
            fp_count += 1;
        }
    }
    let nf = n as f64;
    Ok(Score {
        n,
        a_err_db: err / nf,
        a_fp_db: fp_mass / nf,
        fp_rate: fp_count as f64 / nf,
    })
}

/// Scores prediction rows against the exact labels.
pub fn score(predictions: &[PredictionRow], labels: &[LabelRow], floor_dbm: f64) -> Result<Score> {
    let p: Vec<(u64, AllocationDecision)> = predictions.iter().map(|r| (r.sample_id, r.decision())).collect();
    let l: Vec<(u64, AllocationDecision)> = labels.iter().map(|r| (r.sample_id, r.optimal)).collect();
    score_pairs(&p, &l, floor_dbm)
}

/// Ratio of the largest to the smallest granted power, in linear units.
pub fn fairness(grants: &[AllocationDecision]) -> Result<f64> {
    let mw: Vec<f64> = grants.iter().filter(|g| g.is_granted()).map(|g| g.mw()).collect();
    if mw.is_empty() {
        return Err(Error::InvalidInput("fairness of an allocation with no grants".into()));
    }
    let max = mw.iter().copied().fold(f64::MIN, f64::max);
    let min = mw.iter().copied().fold(f64::MAX, f64::min);
    Ok(max / min)
}

pub fn shannon_rate(bandwidth_hz: f64, sinr_linear: f64) -> f64 {
    bandwidth_hz * (1.0 + sinr_linear).log2()
}

/// Sum of Shannon rates of the granted SUs, each to a receiver drawn
/// uniformly in a disk of `rx_radius_m` around it. Interference comes from
/// every PU and every other granted SU.
pub fn data_rate<M: PathLoss + ?Sized>(
    scenario: &Scenario,
    grants: &[(Location, AllocationDecision)],
    model: &M,
    cfg: &OracleConfig,
    bandwidth_hz: f64,
    rx_radius_m: f64,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = cfg.noise_mw();
    let mut total = 0.0;
    for (k, &(tx, decision)) in grants.iter().enumerate() {
        let r = rx_radius_m * rng.gen::<f64>().sqrt();
        let theta = TAU * rng.gen::<f64>();
        let Some(power) = decision.power() else { continue };
        let rx = Location::new(tx.x + r * theta.cos(), tx.y + r * theta.sin());
        let signal = dbm_to_mw(PowerDbm(power.0 - model.loss_db(tx, rx)));
        let mut interference = noise;
        for pu in &scenario.pus {
            interference += dbm_to_mw(PowerDbm(pu.tx_power.0 - model.loss_db(pu.loc, rx)));
        }
        for (m, &(other, d)) in grants.iter().enumerate() {
            if m != k {
                if let Some(p) = d.power() {
                    interference += dbm_to_mw(PowerDbm(p.0 - model.loss_db(other, rx)));
                }
            }
        }
        total += shannon_rate(bandwidth_hz, signal / interference);
    }
    total
}

pub fn total_power_w(grants: &[AllocationDecision]) -> f64 {
    grants.iter().map(|g| g.mw()).sum::<f64>() / 1000.0
}

/// Multi-SU report over `rows`: per-sample fairness, rate and power averaged
/// over samples. Channels are separate, so SUs interfere only within one.
pub fn multisu_report<M: PathLoss + ?Sized>(
    rows: &[MultiSuRow],
    scenarios: &[Scenario],
    model: &M,
    cfg: &OracleConfig,
    metrics: &MetricsConfig,
    algo: &str,
    dataset: &str,
) -> Result<EvalReport> {
    let mut by_sample: BTreeMap<u64, BTreeMap<usize, Vec<&MultiSuRow>>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.algo == algo) {
        by_sample.entry(r.sample_id).or_default().entry(r.channel).or_default().push(r);
    }
    let (mut fair_sum, mut fair_n, mut rate_sum, mut power_sum) = (0.0, 0usize, 0.0, 0.0);
    for (&sample, channels) in &by_sample {
        let scenario = scenarios
            .get(sample as usize)
            .ok_or_else(|| Error::InvalidInput(format!("multi-SU row for unknown sample {sample}")))?;
        let mut all = Vec::new();
        for (&channel, su_rows) in channels {
            let grants: Vec<(Location, AllocationDecision)> = su_rows
                .iter()
                .map(|r| (Location::new(r.x_m, r.y_m), AllocationDecision::from_dbm(r.granted_dbm)))
                .collect();
            let seed = derive_seed(scenario.seed, RATE_STREAM + channel as u64);
            rate_sum += data_rate(scenario, &grants, model, cfg, metrics.bandwidth_hz, metrics.rx_radius_m, seed);
            all.extend(grants.into_iter().map(|g| g.1));
        }
        power_sum += total_power_w(&all);
        if let Ok(f) = fairness(&all) {
            fair_sum += f;
            fair_n += 1;
        }
    }
    let n = by_sample.len();
    let mean = |s: f64, k: usize| (k > 0).then(|| s / k as f64);
    Ok(EvalReport {
        algo: algo.into(),
        dataset: dataset.into(),
        n,
        a_err_db: None,
        a_fp_db: None,
        fp_rate: None,
        fairness: mean(fair_sum, fair_n),
        total_rate_bps: mean(rate_sum, n),
        total_power_w: mean(power_sum, n),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Md,
}

impl ReportFormat {
    /// `.md` selects markdown; anything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("md") => ReportFormat::Md,
            _ => ReportFormat::Csv,
        }
    }
}

pub const REPORT_COLUMNS: [&str; 9] = [
    "algo",
    "dataset",
    "n",
    "a_err_db",
    "a_fp_db",
    "fp_rate",
    "fairness",
    "total_rate_bps",
    "total_power_w",
];

pub fn render_report(reports: &[EvalReport], format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            let io_err = |e: csv::Error| Error::Format(format!("report: {e}"));
            w.write_record(REPORT_COLUMNS).map_err(io_err)?;
            for r in reports {
                w.serialize(r).map_err(io_err)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Format(format!("report: {e}")))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        ReportFormat::Md => {
            let cell = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
            let mut out = String::new();
            let _ = writeln!(out, "| {} |", REPORT_COLUMNS.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(REPORT_COLUMNS.len()));
            for r in reports {
                let cells = [
                    r.algo.clone(),
                    r.dataset.clone(),
                    r.n.to_string(),
                    cell(r.a_err_db),
                    cell(r.a_fp_db),
                    cell(r.fp_rate),
                    cell(r.fairness),
                    cell(r.total_rate_bps),
                    cell(r.total_power_w),
                ];
                let _ = writeln!(out, "| {} |", cells.join(" | "));
            }
            Ok(out)
        }
    }
}

pub fn write_report(reports: &[EvalReport], path: &Path, format: ReportFormat) -> Result<()> {
    let text = render_report(reports, format)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
