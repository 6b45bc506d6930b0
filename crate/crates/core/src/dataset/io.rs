//! Dataset directory layout.
//!
//! ```text
//! manifest.json          configuration, counts, tensor shape, provenance
//! scenarios.jsonl        one scenario per line; line n is sample n
//! labels.csv             sample_id,optimal_dbm,binding_pu_id,binding_pur_id,conservative_dbm
//! multisu_labels.csv     sample_id,su_id,x_m,y_m,granted_dbm,channel,algo
//! images/sample_%08d.bin float32 little-endian, sheets x height x width
//! predictions.csv        sample_id,predicted_dbm,algo
//! ```
//!
//! A denial is an empty field. Floats are written in shortest round-trip
//! form, so reading a directory back reproduces every value bit for bit.
//! The manifest is written last; its counts are checked on load.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ConservativeConfig, Dataset, LabelRow, MultiSuRow, PredictionRow, SamplerConfig, SampleImage, SheetConfig, TensorDims};
use crate::model::{Region, Scenario};
use crate::oracle::{AllocationDecision, Binding, OracleConfig};
use crate::propagation::LogDistanceParams;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";
pub const SCENARIOS: &str = "scenarios.jsonl";
pub const LABELS: &str = "labels.csv";
pub const MULTISU_LABELS: &str = "multisu_labels.csv";
pub const PREDICTIONS: &str = "predictions.csv";
pub const IMAGES: &str = "images";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Counts {
    pub scenarios: u64,
    pub labels: u64,
    pub images: u64,
    pub multisu_rows: u64,
}

/// Where a synthetic sample came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub sample_id: u64,
    pub source_id: u64,
    /// `far_pu`, `rotate90`, `rotate180`, `rotate270` or `idw`.
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub seed: u64,
    pub region: Region,
    pub oracle: OracleConfig,
    pub propagation: LogDistanceParams,
    pub sampler: SamplerConfig,
    pub sheets: Option<SheetConfig>,
    pub conservative: Option<ConservativeConfig>,
    pub counts: Counts,
    pub tensor: Option<TensorDims>,
    /// Denied samples carry no numeric target and are left out of
    /// regression exports.
    pub regression_excludes_denied: bool,
    pub augmentation: Vec<Provenance>,
}

impl Manifest {
    pub fn new(
        seed: u64,
        region: Region,
        oracle: OracleConfig,
        propagation: LogDistanceParams,
        sampler: SamplerConfig,
    ) -> Self {
        Manifest {
            format_version: FORMAT_VERSION,
            seed,
            region,
            oracle,
            propagation,
            sampler,
            sheets: None,
            conservative: None,
            counts: Counts::default(),
            tensor: None,
            regression_excludes_denied: true,
            augmentation: Vec::new(),
        }
    }
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => {
            return Err(Error::Format(format!(
                "{}: format version {v}, this build reads {FORMAT_VERSION}",
                path.display()
            )))
        }
        None => return Err(Error::Format(format!("{}: no format_version", path.display()))),
    }
    serde_json::from_value(value).map_err(|e| Error::json(&path, e))
}

/// Writes through a temporary file so a crash never leaves a half manifest.
pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let path = dir.join(MANIFEST);
    let tmp = dir.join(".manifest.json.tmp");
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Error::json(&path, e))?;
    fs::write(&tmp, text + "\n").map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn write_scenarios(path: &Path, scenarios: &[Scenario]) -> Result<()> {
    let mut w = create(path)?;
    for s in scenarios {
        writeln!(w, "{}", s.to_json_line()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_scenarios(path: &Path) -> Result<Vec<Scenario>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let s = Scenario::from_json_line(&line)
            .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(s);
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRecord {
    sample_id: u64,
    optimal_dbm: Option<f64>,
    binding_pu_id: Option<u32>,
    binding_pur_id: Option<u32>,
    conservative_dbm: Option<f64>,
}

impl From<&LabelRow> for LabelRecord {
    fn from(r: &LabelRow) -> Self {
        LabelRecord {
            sample_id: r.sample_id,
            optimal_dbm: r.optimal.to_dbm(),
            binding_pu_id: r.binding.map(|b| b.pu_id),
            binding_pur_id: r.binding.map(|b| b.pur_id),
            conservative_dbm: r.conservative.and_then(|c| c.to_dbm()),
        }
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>, header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| Error::csv(path, e))).collect()
}

const LABEL_HEADER: [&str; 5] = ["sample_id", "optimal_dbm", "binding_pu_id", "binding_pur_id", "conservative_dbm"];

pub fn write_labels(path: &Path, labels: &[LabelRow]) -> Result<()> {
    write_csv(path, labels.iter().map(LabelRecord::from), &LABEL_HEADER)
}

/// An empty conservative field means a denial when `with_conservative` is set
/// and an absent label otherwise.
pub fn read_labels(path: &Path, with_conservative: bool) -> Result<Vec<LabelRow>> {
    let records: Vec<LabelRecord> = read_csv(path)?;
    records
        .into_iter()
        .map(|r| {
            let binding = match (r.binding_pu_id, r.binding_pur_id) {
                (Some(pu_id), Some(pur_id)) => Some(Binding { pu_id, pur_id }),
                (None, None) => None,
                _ => {
                    return Err(Error::Format(format!(
                        "{}: sample {} has half a binding",
                        path.display(),
                        r.sample_id
                    )))
                }
            };
            Ok(LabelRow {
                sample_id: r.sample_id,
                optimal: AllocationDecision::from_dbm(r.optimal_dbm),
                binding,
                conservative: with_conservative.then(|| AllocationDecision::from_dbm(r.conservative_dbm)),
            })
        })
        .collect()
}

const MULTISU_HEADER: [&str; 7] = ["sample_id", "su_id", "x_m", "y_m", "granted_dbm", "channel", "algo"];

pub fn write_multisu(path: &Path, rows: &[MultiSuRow]) -> Result<()> {
    write_csv(path, rows, &MULTISU_HEADER)
}

pub fn read_multisu(path: &Path) -> Result<Vec<MultiSuRow>> {
    read_csv(path)
}

const PREDICTION_HEADER: [&str; 3] = ["sample_id", "predicted_dbm", "algo"];

pub fn write_predictions(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    write_csv(path, rows, &PREDICTION_HEADER)
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    read_csv(path)
}

pub fn image_path(dir: &Path, sample_id: u64) -> PathBuf {
    dir.join(IMAGES).join(format!("sample_{sample_id:08}.bin"))
}

pub fn write_image(dir: &Path, image: &SampleImage) -> Result<()> {
    let path = image_path(dir, image.sample_id);
    fs::write(&path, image.to_le_bytes()).map_err(|e| Error::io(&path, e))
}

pub fn read_image(dir: &Path, sample_id: u64, dims: TensorDims) -> Result<SampleImage> {
    let path = image_path(dir, sample_id);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    SampleImage::from_le_bytes(sample_id, dims, &bytes)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn ensure_dirs(dir: &Path) -> Result<()> {
    let images = dir.join(IMAGES);
    fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))
}

fn check_count(what: &str, found: usize, expected: u64) -> Result<()> {
    if found as u64 == expected {
        Ok(())
    } else {
        Err(Error::Format(format!(
            "{what}: found {found} entries, manifest says {expected}"
        )))
    }
}

pub fn write_dataset(dir: &Path, ds: &Dataset) -> Result<()> {
    ensure_dirs(dir)?;
    let mut manifest = ds.manifest.clone();
    write_scenarios(&dir.join(SCENARIOS), &ds.scenarios)?;
    if !ds.labels.is_empty() || manifest.counts.labels > 0 {
        write_labels(&dir.join(LABELS), &ds.labels)?;
    }
    if !ds.multisu.is_empty() {
        write_multisu(&dir.join(MULTISU_LABELS), &ds.multisu)?;
    }
    for img in &ds.images {
        write_image(dir, img)?;
    }
    manifest.counts = Counts {
        scenarios: ds.scenarios.len() as u64,
        labels: ds.labels.len() as u64,
        images: ds.images.len() as u64,
        multisu_rows: ds.multisu.len() as u64,
    };
    if let Some(img) = ds.images.first() {
        manifest.tensor = Some(img.dims);
    }
    write_manifest(dir, &manifest)
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest = read_manifest(dir)?;
    let counts = manifest.counts;
    let scenarios = read_scenarios(&dir.join(SCENARIOS))?;
    check_count(SCENARIOS, scenarios.len(), counts.scenarios)?;
    let labels = if counts.labels > 0 {
        read_labels(&dir.join(LABELS), manifest.conservative.is_some())?
    } else {
        Vec::new()
    };
    check_count(LABELS, labels.len(), counts.labels)?;
    let multisu = if counts.multisu_rows > 0 {
        read_multisu(&dir.join(MULTISU_LABELS))?
    } else {
        Vec::new()
    };
    check_count(MULTISU_LABELS, multisu.len(), counts.multisu_rows)?;
    let mut images = Vec::new();
    if counts.images > 0 {
        let dims = manifest
            .tensor
            .ok_or_else(|| Error::Format("images present but no tensor shape in manifest".into()))?;
        for id in 0..counts.images {
            images.push(read_image(dir, id, dims)?);
        }
    }
    Ok(Dataset {
        manifest,
        scenarios,
        labels,
        images,
        multisu,
    })
}

/// Appends samples one at a time and writes the manifest on `finish`.
pub struct DatasetWriter {
    dir: PathBuf,
    scenarios: BufWriter<File>,
    labels: csv::Writer<File>,
    counts: Counts,
    dims: Option<TensorDims>,
}

impl DatasetWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        ensure_dirs(dir)?;
        let sp = dir.join(SCENARIOS);
        let lp = dir.join(LABELS);
        let mut labels = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(&lp)
            .map_err(|e| Error::csv(&lp, e))?;
        labels.write_record(LABEL_HEADER).map_err(|e| Error::csv(&lp, e))?;
        Ok(DatasetWriter {
            dir: dir.to_path_buf(),
            scenarios: create(&sp)?,
            labels,
            counts: Counts::default(),
            dims: None,
        })
    }

    /// Sample ids must arrive in order starting at zero.
    pub fn push(&mut self, scenario: &Scenario, label: &LabelRow, image: &SampleImage) -> Result<()> {
        let id = self.counts.scenarios;
        if label.sample_id != id || image.sample_id != id {
            return Err(Error::InvalidInput(format!(
                "expected sample {id}, got label {} and image {}",
                label.sample_id, image.sample_id
            )));
        }
        if *self.dims.get_or_insert(image.dims) != image.dims {
            return Err(Error::InvalidInput("image shape changed mid-stream".into()));
        }
        let sp = self.dir.join(SCENARIOS);
        writeln!(self.scenarios, "{}", scenario.to_json_line()).map_err(|e| Error::io(&sp, e))?;
        let lp = self.dir.join(LABELS);
        self.labels
            .serialize(LabelRecord::from(label))
            .map_err(|e| Error::csv(&lp, e))?;
        write_image(&self.dir, image)?;
        self.counts.scenarios += 1;
        self.counts.labels += 1;
        self.counts.images += 1;
        Ok(())
    }

    pub fn finish(mut self, mut manifest: Manifest) -> Result<Manifest> {
        let sp = self.dir.join(SCENARIOS);
        self.scenarios.flush().map_err(|e| Error::io(&sp, e))?;
        let lp = self.dir.join(LABELS);
        self.labels.flush().map_err(|e| Error::io(&lp, e))?;
        manifest.counts = self.counts;
        manifest.tensor = self.dims;
        write_manifest(&self.dir, &manifest)?;
        Ok(manifest)
    }
}
