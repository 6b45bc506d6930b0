//! Directory-level stages: each reads what earlier stages left in a dataset
//! directory, adds its own files and rewrites the manifest.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::augment::{augment_far_pu, augment_idw_uniform, augment_rotate};
use super::io::{self, Manifest, Provenance};
use super::{encode_image, label_samples, sample_scenarios, LabelRow, MultiSuRow, PredictionRow, SampleImage};
use crate::baselines::{ipb_allocate, lbt_allocate};
use crate::config::RunConfig;
use crate::exec::Exec;
use crate::model::{Location, Scenario, SecondaryUser};
use crate::multi_su::allocate_channels;
use crate::propagation::noise::derive_seed;
use crate::propagation::LogDistance;
use crate::{Error, Result};

/// Samples processed together by the chunked stages.
pub const CHUNK: usize = 256;

const MULTISU_SU_STREAM: u64 = 0x5_0000;
const MULTISU_CHANNEL_STREAM: u64 = 0x6_0000;

/// The propagation world a dataset was generated in.
pub fn world(manifest: &Manifest) -> Result<LogDistance> {
    LogDistance::new(manifest.propagation, &manifest.region)
}

fn remove_if_present(path: &Path) -> Result<()> {
    match fs::remove_file(path) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(Error::io(path, e)),
    }
}

/// Removes files a previous run may have left behind. Only names this
/// format owns are touched.
fn clear_outputs(dir: &Path) -> Result<()> {
    for name in [io::LABELS, io::MULTISU_LABELS, io::PREDICTIONS] {
        remove_if_present(&dir.join(name))?;
    }
    clear_images(dir)
}

fn clear_images(dir: &Path) -> Result<()> {
    let images = dir.join(io::IMAGES);
    let Ok(entries) = fs::read_dir(&images) else {
        return Ok(());
    };
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(&images, e))?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if name.starts_with("sample_") && name.ends_with(".bin") {
            remove_if_present(&entry.path())?;
        }
    }
    Ok(())
}

fn fresh_manifest(run: &RunConfig) -> Manifest {
    Manifest::new(run.seed, run.region, run.oracle, run.propagation, run.sampler)
}

/// `gen`: samples `count` scenarios.
pub fn generate(dir: &Path, run: &RunConfig, count: usize, exec: Exec) -> Result<Manifest> {
    run.validate()?;
    io::ensure_dirs(dir)?;
    clear_outputs(dir)?;
    let mut manifest = fresh_manifest(run);
    let model = world(&manifest)?;
    let scenarios = sample_scenarios(&run.sampler, &run.region, &model, &run.oracle, 0, count, exec)?;
    io::write_scenarios(&dir.join(io::SCENARIOS), &scenarios)?;
    manifest.counts.scenarios = scenarios.len() as u64;
    io::write_manifest(dir, &manifest)?;
    Ok(manifest)
}

/// `label`: exact and conservative labels for every scenario, in the world
/// recorded by `gen`.
pub fn label(dir: &Path, run: &RunConfig, exec: Exec) -> Result<Manifest> {
    run.conservative.validate()?;
    let mut manifest = io::read_manifest(dir)?;
    let scenarios = io::read_scenarios(&dir.join(io::SCENARIOS))?;
    let model = world(&manifest)?;
    let labels = label_samples(&scenarios, 0, &model, &manifest.oracle, Some(&run.conservative), exec)?;
    io::write_labels(&dir.join(io::LABELS), &labels)?;
    manifest.conservative = Some(run.conservative);
    manifest.counts.labels = labels.len() as u64;
    io::write_manifest(dir, &manifest)?;
    Ok(manifest)
}

fn encode_range(scenarios: &[Scenario], first: u64, run: &RunConfig, exec: Exec) -> Result<Vec<SampleImage>> {
    exec.map(0..scenarios.len(), |i| encode_image(&scenarios[i], &run.sheets, first + i as u64))
        .into_iter()
        .collect()
}

/// `encode`: one image per scenario.
pub fn encode(dir: &Path, run: &RunConfig, exec: Exec) -> Result<Manifest> {
    run.sheets.validate()?;
    let mut manifest = io::read_manifest(dir)?;
    let scenarios = io::read_scenarios(&dir.join(io::SCENARIOS))?;
    io::ensure_dirs(dir)?;
    clear_images(dir)?;
    for (c, chunk) in scenarios.chunks(CHUNK).enumerate() {
        for img in encode_range(chunk, (c * CHUNK) as u64, run, exec)? {
            io::write_image(dir, &img)?;
        }
    }
    manifest.sheets = Some(run.sheets);
    manifest.tensor = Some(run.sheets.dims());
    manifest.counts.images = scenarios.len() as u64;
    io::write_manifest(dir, &manifest)?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AugmentRequest {
    pub far_pu: bool,
    pub rotations: Vec<u32>,
    pub idw_new_sensors: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AugmentSummary {
    pub sources: u64,
    pub far_pu_generated: u64,
    pub far_pu_kept: u64,
    pub rotated: u64,
    pub idw: u64,
}

impl AugmentSummary {
    /// Share of far-PU synthetics that passed the drift check.
    pub fn far_pu_pass_rate(&self) -> Option<f64> {
        (self.far_pu_generated > 0).then(|| self.far_pu_kept as f64 / self.far_pu_generated as f64)
    }
}

struct Synthetic {
    scenario: Scenario,
    kind: String,
}

/// `augment`: appends synthetics of every original sample. Labels are copied
/// from the source; images are re-encoded when the dataset has them.
pub fn augment(dir: &Path, run: &RunConfig, req: &AugmentRequest, exec: Exec) -> Result<AugmentSummary> {
    let mut manifest = io::read_manifest(dir)?;
    if manifest.counts.labels != manifest.counts.scenarios {
        return Err(Error::InvalidInput("augment needs a labeled dataset".into()));
    }
    let mut scenarios = io::read_scenarios(&dir.join(io::SCENARIOS))?;
    let mut labels = io::read_labels(&dir.join(io::LABELS), manifest.conservative.is_some())?;
    let model = world(&manifest)?;
    let oracle = manifest.oracle;
    let aug = &run.augment;
    // Synthetics are derived from original samples only, never from earlier synthetics.
    let originals: Vec<u64> = {
        let synthetic: std::collections::HashSet<u64> =
            manifest.augmentation.iter().map(|p| p.sample_id).collect();
        (0..scenarios.len() as u64).filter(|id| !synthetic.contains(id)).collect()
    };

    let per_source = exec.map(0..originals.len(), |k| -> Result<(Vec<Synthetic>, u64)> {
        let id = originals[k] as usize;
        let (s, label) = (&scenarios[id], &labels[id]);
        let mut out = Vec::new();
        let mut generated = 0;
        if req.far_pu {
            let o = augment_far_pu(s, label, &model, &oracle, &aug.far_pu)?;
            generated = (o.kept.len() + o.dropped) as u64;
            out.extend(o.kept.into_iter().map(|scenario| Synthetic { scenario, kind: "far_pu".into() }));
        }
        for &deg in &req.rotations {
            out.push(Synthetic { scenario: augment_rotate(s, deg)?, kind: format!("rotate{deg}") });
        }
        if req.idw_new_sensors > 0 {
            let scenario = augment_idw_uniform(s, req.idw_new_sensors, aug.idw_neighbors, aug.idw_domain)?;
            out.push(Synthetic { scenario, kind: "idw".into() });
        }
        Ok((out, generated))
    });

    let mut summary = AugmentSummary { sources: originals.len() as u64, ..Default::default() };
    let mut new_scenarios = Vec::new();
    for (k, res) in per_source.into_iter().enumerate() {
        let (synths, generated) = res?;
        let source = originals[k];
        summary.far_pu_generated += generated;
        for syn in synths {
            match syn.kind.as_str() {
                "far_pu" => summary.far_pu_kept += 1,
                "idw" => summary.idw += 1,
                _ => summary.rotated += 1,
            }
            let sample_id = (scenarios.len() + new_scenarios.len()) as u64;
            labels.push(LabelRow { sample_id, ..labels[source as usize] });
            manifest.augmentation.push(Provenance { sample_id, source_id: source, kind: syn.kind });
            new_scenarios.push(syn.scenario);
        }
    }

    let first_new = scenarios.len() as u64;
    if manifest.counts.images > 0 {
        let sheets = manifest
            .sheets
            .ok_or_else(|| Error::Format("images present but no sheet config".into()))?;
        let encode_run = RunConfig { sheets, ..run.clone() };
        for (c, chunk) in new_scenarios.chunks(CHUNK).enumerate() {
            for img in encode_range(chunk, first_new + (c * CHUNK) as u64, &encode_run, exec)? {
                io::write_image(dir, &img)?;
            }
        }
        manifest.counts.images += new_scenarios.len() as u64;
    }
    scenarios.extend(new_scenarios);
    io::write_scenarios(&dir.join(io::SCENARIOS), &scenarios)?;
    io::write_labels(&dir.join(io::LABELS), &labels)?;
    manifest.counts.scenarios = scenarios.len() as u64;
    manifest.counts.labels = labels.len() as u64;
    io::write_manifest(dir, &manifest)?;
    Ok(summary)
}

/// `pretrain-gen`: scenario, exact label and image for `count` samples,
/// streamed to disk in chunks.
pub fn pretrain(dir: &Path, run: &RunConfig, count: usize, exec: Exec) -> Result<Manifest> {
    run.validate()?;
    io::ensure_dirs(dir)?;
    clear_outputs(dir)?;
    let mut manifest = fresh_manifest(run);
    manifest.sheets = Some(run.sheets);
    let model = world(&manifest)?;
    let mut writer = io::DatasetWriter::create(dir)?;
    let mut first = 0;
    while first < count {
        let n = CHUNK.min(count - first);
        let scenarios =
            sample_scenarios(&run.sampler, &run.region, &model, &run.oracle, first as u64, n, exec)?;
        let labels = label_samples(&scenarios, first as u64, &model, &run.oracle, None, exec)?;
        let images = encode_range(&scenarios, first as u64, run, exec)?;
        for i in 0..n {
            writer.push(&scenarios[i], &labels[i], &images[i])?;
        }
        first += n;
    }
    manifest = writer.finish(manifest)?;
    Ok(manifest)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineAlgo {
    Lbt,
    Ipb,
}

impl BaselineAlgo {
    pub fn name(self) -> &'static str {
        match self {
            BaselineAlgo::Lbt => "lbt",
            BaselineAlgo::Ipb => "ipb",
        }
    }
}

/// `baseline`: predictions of a classical allocator for every sample.
pub fn baseline(dir: &Path, run: &RunConfig, algo: BaselineAlgo, exec: Exec) -> Result<Vec<PredictionRow>> {
    let manifest = io::read_manifest(dir)?;
    let scenarios = io::read_scenarios(&dir.join(io::SCENARIOS))?;
    let model = world(&manifest)?;
    let oracle = manifest.oracle;
    exec.map(0..scenarios.len(), |i| {
        let s = &scenarios[i];
        let su = s
            .sus
            .first()
            .ok_or_else(|| Error::InvalidInput(format!("sample {i} has no requesting SU")))?;
        let decision = match algo {
            BaselineAlgo::Lbt => lbt_allocate(s, su, &model, &oracle, &run.lbt),
            BaselineAlgo::Ipb => ipb_allocate(s, su, &oracle, &run.ipb)?,
        };
        Ok(PredictionRow {
            sample_id: i as u64,
            predicted_dbm: decision.to_dbm(),
            algo: algo.name().into(),
        })
    })
    .into_iter()
    .collect()
}

/// SUs for a multi-SU run: drawn afresh when `n_sus > 0`, otherwise the
/// scenario's own.
pub fn multisu_sus(scenario: &Scenario, n_sus: u32) -> Vec<SecondaryUser> {
    if n_sus == 0 {
        return scenario.sus.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(scenario.seed, MULTISU_SU_STREAM));
    let r = &scenario.region;
    (0..n_sus)
        .map(|id| SecondaryUser {
            id,
            loc: Location::new(rng.gen_range(0.0..r.width_m), rng.gen_range(0.0..r.height_m)),
        })
        .collect()
}

/// `multisu`: allocates several SUs per scenario and writes
/// `multisu_labels.csv`.
pub fn multisu(dir: &Path, run: &RunConfig, exec: Exec) -> Result<Vec<MultiSuRow>> {
    let mut manifest = io::read_manifest(dir)?;
    let scenarios = io::read_scenarios(&dir.join(io::SCENARIOS))?;
    let model = world(&manifest)?;
    let oracle = manifest.oracle;
    let ms = run.multisu;
    let algo = match ms.algo {
        crate::multi_su::MultiAlgo::Binary => "binary",
        crate::multi_su::MultiAlgo::Greedy => "greedy",
    };
    let per_sample = exec.map(0..scenarios.len(), |i| -> Result<Vec<MultiSuRow>> {
        let s = &scenarios[i];
        let sus = multisu_sus(s, ms.n_sus);
        if sus.is_empty() {
            return Ok(Vec::new());
        }
        let seed = derive_seed(s.seed, MULTISU_CHANNEL_STREAM);
        let allocs = allocate_channels(s, &sus, ms.channels, seed, ms.algo, &model, &oracle, ms.threshold_db)?;
        let mut rows = Vec::with_capacity(sus.len());
        for alloc in allocs {
            for (su_id, decision) in alloc.grants {
                let loc = sus.iter().find(|u| u.id == su_id).expect("allocated SU exists").loc;
                rows.push(MultiSuRow {
                    sample_id: i as u64,
                    su_id,
                    x_m: loc.x,
                    y_m: loc.y,
                    granted_dbm: decision.to_dbm(),
                    channel: alloc.channel.unwrap_or(0),
                    algo: algo.into(),
                });
            }
        }
        Ok(rows)
    });
    let mut rows = Vec::new();
    for r in per_sample {
        rows.extend(r?);
    }
    io::write_multisu(&dir.join(io::MULTISU_LABELS), &rows)?;
    manifest.counts.multisu_rows = rows.len() as u64;
    io::write_manifest(dir, &manifest)?;
    Ok(rows)
}
