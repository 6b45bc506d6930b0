//! Image-sheet encoding of a scenario.
//!
//! Each transmitter becomes a disk whose center brightness and radius grow
//! with its power and whose intensity falls off as
//! `c * (1 - ln(1 + d) / ln(1 + r))` at `d` pixels from the center. Disks on
//! the same sheet add up. The last sheet always holds the SUs.

use serde::{Deserialize, Serialize};

use crate::model::{subarea_index, Location, Scenario};
use crate::{Error, Result};

/// Lowest center brightness, so weak transmitters stay visible.
pub const MIN_BRIGHTNESS: f64 = 0.05;

/// What fills the sheets before the SU sheet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SheetSetting {
    /// PU transmitters, one sheet per power band.
    #[default]
    Pu,
    /// Spectrum sensors, sheet chosen by subarea.
    Ss,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SheetConfig {
    pub n_pu_sheets: usize,
    pub sheet_width_db: f64,
    /// Bottom of the PU power range covered by the sheets.
    pub p_min_dbm: f64,
    pub image_px: usize,
    pub r_min_px: u32,
    pub r_max_px: u32,
    pub setting: SheetSetting,
    /// Reading range mapped onto brightness for sensor sheets.
    pub ss_min_dbm: f64,
    pub ss_max_dbm: f64,
}

impl Default for SheetConfig {
    fn default() -> Self {
        SheetConfig {
            n_pu_sheets: 6,
            sheet_width_db: 5.0,
            p_min_dbm: -30.0,
            image_px: 100,
            r_min_px: 2,
            r_max_px: 8,
            setting: SheetSetting::Pu,
            ss_min_dbm: -120.0,
            ss_max_dbm: -60.0,
        }
    }
}

impl SheetConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n_pu_sheets >= 1
            && (5.0..=10.0).contains(&self.sheet_width_db)
            && self.p_min_dbm.is_finite()
            && self.image_px >= 1
            && self.r_min_px >= 1
            && self.r_max_px >= self.r_min_px
            && self.ss_min_dbm < self.ss_max_dbm;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("sheet config {self:?}")))
        }
    }

    pub fn p_max_dbm(&self) -> f64 {
        self.p_min_dbm + self.n_pu_sheets as f64 * self.sheet_width_db
    }

    pub fn n_sheets(&self) -> usize {
        self.n_pu_sheets + 1
    }

    /// Band index for a PU power; out-of-range powers land on an edge sheet.
    pub fn pu_sheet(&self, power_dbm: f64) -> usize {
        let k = ((power_dbm - self.p_min_dbm) / self.sheet_width_db).floor();
        k.clamp(0.0, (self.n_pu_sheets - 1) as f64) as usize
    }

    pub fn dims(&self) -> TensorDims {
        TensorDims {
            sheets: self.n_sheets(),
            height: self.image_px,
            width: self.image_px,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorDims {
    pub sheets: usize,
    pub height: usize,
    pub width: usize,
}

impl TensorDims {
    pub fn len(&self) -> usize {
        self.sheets * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn byte_len(&self) -> usize {
        4 * self.len()
    }
}

/// Row-major `sheets x height x width` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleImage {
    pub sample_id: u64,
    pub dims: TensorDims,
    pub data: Vec<f32>,
}

impl SampleImage {
    pub fn zeros(sample_id: u64, dims: TensorDims) -> Self {
        SampleImage {
            sample_id,
            dims,
            data: vec![0.0; dims.len()],
        }
    }

    pub fn at(&self, sheet: usize, row: usize, col: usize) -> f32 {
        self.data[(sheet * self.dims.height + row) * self.dims.width + col]
    }

    pub fn sheet(&self, sheet: usize) -> &[f32] {
        let n = self.dims.height * self.dims.width;
        &self.data[sheet * n..(sheet + 1) * n]
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn from_le_bytes(sample_id: u64, dims: TensorDims, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != dims.byte_len() {
            return Err(Error::Format(format!(
                "image {sample_id}: {} bytes, expected {}",
                bytes.len(),
                dims.byte_len()
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(SampleImage { sample_id, dims, data })
    }

    /// Adds one disk to `sheet`, clipping at the image border.
    pub fn stamp(&mut self, sheet: usize, center: (usize, usize), radius: u32, brightness: f64) {
        let (h, w) = (self.dims.height as i64, self.dims.width as i64);
        let (cr, cc) = (center.0 as i64, center.1 as i64);
        let r = radius as i64;
        let log_r = (1.0 + radius as f64).ln();
        let base = sheet * self.dims.height * self.dims.width;
        for dr in -r..=r {
            let row = cr + dr;
            if row < 0 || row >= h {
                continue;
            }
            for dc in -r..=r {
                let col = cc + dc;
                if col < 0 || col >= w {
                    continue;
                }
                let d = ((dr * dr + dc * dc) as f64).sqrt();
                if d > radius as f64 {
                    continue;
                }
                let value = brightness * (1.0 - (1.0 + d).ln() / log_r);
                self.data[base + (row * w + col) as usize] += value.max(0.0) as f32;
            }
        }
    }
}

/// Fraction of `[lo, hi]` covered by `p`, clamped to `[0, 1]`.
fn fraction(p: f64, lo: f64, hi: f64) -> f64 {
    ((p - lo) / (hi - lo)).clamp(0.0, 1.0)
}

fn brightness(frac: f64) -> f64 {
    frac.max(MIN_BRIGHTNESS)
}

fn radius(frac: f64, cfg: &SheetConfig) -> u32 {
    (cfg.r_min_px as f64 + frac * (cfg.r_max_px - cfg.r_min_px) as f64).round() as u32
}

fn pixel(loc: Location, scenario: &Scenario, px: usize) -> (usize, usize) {
    let region = &scenario.region;
    let to = |v: f64, extent: f64| ((v / extent * px as f64).floor().max(0.0) as usize).min(px - 1);
    (to(loc.y, region.height_m), to(loc.x, region.width_m))
}

pub fn encode_image(scenario: &Scenario, cfg: &SheetConfig, sample_id: u64) -> Result<SampleImage> {
    cfg.validate()?;
    let mut img = SampleImage::zeros(sample_id, cfg.dims());
    let px = cfg.image_px;
    let (p_lo, p_hi) = (cfg.p_min_dbm, cfg.p_max_dbm());
    match cfg.setting {
        SheetSetting::Pu => {
            for pu in &scenario.pus {
                let frac = fraction(pu.tx_power.0, p_lo, p_hi);
                img.stamp(
                    cfg.pu_sheet(pu.tx_power.0),
                    pixel(pu.loc, scenario, px),
                    radius(frac, cfg),
                    brightness(frac),
                );
            }
        }
        SheetSetting::Ss => {
            for ss in &scenario.sensors {
                let (row, col) = subarea_index(ss.loc, &scenario.region)?;
                let frac = fraction(ss.reading.0, cfg.ss_min_dbm, cfg.ss_max_dbm);
                img.stamp(
                    (row + col) % cfg.n_pu_sheets,
                    pixel(ss.loc, scenario, px),
                    radius(frac, cfg),
                    brightness(frac),
                );
            }
        }
    }
    let su_sheet = cfg.n_pu_sheets;
    for su in &scenario.sus {
        img.stamp(su_sheet, pixel(su.loc, scenario, px), cfg.r_min_px, 1.0);
    }
    for su in &scenario.active_sus {
        let frac = fraction(su.power.0, p_lo, p_hi);
        img.stamp(su_sheet, pixel(su.loc, scenario, px), radius(frac, cfg), brightness(frac));
    }
    Ok(img)
}
