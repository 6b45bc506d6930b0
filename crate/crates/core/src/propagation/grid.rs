//! Externally computed path-loss rasters.
//!
//! On disk a raster is a JSON sidecar plus a little-endian float32 payload in
//! row-major order, one `rows x cols` plane per transmitter. Row `r` covers
//! `y` in `[r*h, (r+1)*h)`, column `c` covers `x` in `[c*w, (c+1)*w)`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LogDistance, PathLoss};
use crate::model::Location;
use crate::{Error, Result};

const GRID_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    format_version: u32,
    width_m: f64,
    height_m: f64,
    rows: usize,
    cols: usize,
    tx_locations: Vec<Location>,
    data_file: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPathLoss {
    pub width_m: f64,
    pub height_m: f64,
    pub rows: usize,
    pub cols: usize,
    pub tx_locations: Vec<Location>,
    /// `tx x rows x cols` losses in dB.
    pub data: Vec<f32>,
}

impl GridPathLoss {
    pub fn new(
        width_m: f64,
        height_m: f64,
        rows: usize,
        cols: usize,
        tx_locations: Vec<Location>,
        data: Vec<f32>,
    ) -> Result<Self> {
        if !(width_m > 0.0 && height_m > 0.0) || rows == 0 || cols == 0 {
            return Err(Error::Grid(format!(
                "bad raster geometry {width_m}x{height_m} m, {rows}x{cols} cells"
            )));
        }
        let expected = tx_locations.len() * rows * cols;
        if data.len() != expected {
            return Err(Error::Grid(format!(
                "raster holds {} values, expected {expected}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Grid(format!("invalid loss value {bad}")));
        }
        Ok(GridPathLoss {
            width_m,
            height_m,
            rows,
            cols,
            tx_locations,
            data,
        })
    }

    fn cell(&self, tx: usize, row: usize, col: usize) -> f64 {
        self.data[(tx * self.rows + row) * self.cols + col] as f64
    }

    /// Bilinear interpolation between cell centers; exact at a center and
    /// constant beyond the outermost centers.
    pub fn grid_loss(&self, tx_index: usize, rx: Location) -> Result<f64> {
        if tx_index >= self.tx_locations.len() {
            return Err(Error::Grid(format!("no transmitter {tx_index}")));
        }
        if !(0.0..=self.width_m).contains(&rx.x) || !(0.0..=self.height_m).contains(&rx.y) {
            return Err(Error::Grid(format!("({}, {}) outside raster", rx.x, rx.y)));
        }
        let axis = |v: f64, extent: f64, n: usize| -> (usize, usize, f64) {
            let f = (v / (extent / n as f64) - 0.5).clamp(0.0, (n - 1) as f64);
            let i0 = f.floor() as usize;
            let i1 = (i0 + 1).min(n - 1);
            (i0, i1, f - i0 as f64)
        };
        let (c0, c1, tx_) = axis(rx.x, self.width_m, self.cols);
        let (r0, r1, ty) = axis(rx.y, self.height_m, self.rows);
        let top = self.cell(tx_index, r0, c0) * (1.0 - tx_) + self.cell(tx_index, r0, c1) * tx_;
        let bottom = self.cell(tx_index, r1, c0) * (1.0 - tx_) + self.cell(tx_index, r1, c1) * tx_;
        Ok(top * (1.0 - ty) + bottom * ty)
    }

    /// Index of the transmitter at `loc`, within `tolerance_m`.
    pub fn tx_at(&self, loc: Location, tolerance_m: f64) -> Option<usize> {
        self.tx_locations
            .iter()
            .position(|t| t.distance(loc) <= tolerance_m)
    }
}

pub fn load_grid(sidecar_path: impl AsRef<Path>) -> Result<GridPathLoss> {
    let path = sidecar_path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let meta: Sidecar = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    if meta.format_version != GRID_FORMAT_VERSION {
        return Err(Error::Grid(format!(
            "unsupported raster version {}",
            meta.format_version
        )));
    }
    let data_path = path.with_file_name(&meta.data_file);
    let bytes = fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Grid(format!(
            "{}: {} bytes is not a whole number of float32 values",
            data_path.display(),
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    GridPathLoss::new(
        meta.width_m,
        meta.height_m,
        meta.rows,
        meta.cols,
        meta.tx_locations,
        data,
    )
}

/// Writes `grid` as `<sidecar_path>` plus a sibling `.bin` payload.
pub fn save_grid(grid: &GridPathLoss, sidecar_path: impl AsRef<Path>) -> Result<()> {
    let path = sidecar_path.as_ref();
    let data_path = path.with_extension("bin");
    let meta = Sidecar {
        format_version: GRID_FORMAT_VERSION,
        width_m: grid.width_m,
        height_m: grid.height_m,
        rows: grid.rows,
        cols: grid.cols,
        tx_locations: grid.tx_locations.clone(),
        data_file: data_path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("grid.bin")
            .to_string(),
    };
    let bytes: Vec<u8> = grid.data.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(&data_path, bytes).map_err(|e| Error::io(&data_path, e))?;
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::json(path, e))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Uses the raster for links touching one of its transmitters and the
/// fallback model for everything else.
#[derive(Debug, Clone)]
pub struct GridBacked {
    pub grid: GridPathLoss,
    pub fallback: LogDistance,
    pub snap_m: f64,
}

impl PathLoss for GridBacked {
    fn loss_db(&self, a: Location, b: Location) -> f64 {
        let raster = self
            .grid
            .tx_at(a, self.snap_m)
            .map(|i| (i, b))
            .or_else(|| self.grid.tx_at(b, self.snap_m).map(|i| (i, a)));
        raster
            .and_then(|(i, rx)| self.grid.grid_loss(i, rx).ok())
            .unwrap_or_else(|| self.fallback.loss_db(a, b))
    }
}
