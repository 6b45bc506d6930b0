//! Domain types and power arithmetic shared by every other module.
//!
//! Powers are stored in dBm at rest. Anything that adds signals together
//! converts to milliwatts first.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Rectangular deployment area with a quantization step.
///
/// `grid_cell_m` sets the subarea size used for greedy ordering, sensor sheet
/// placement and the quantization of the shadowing field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Region {
    pub width_m: f64,
    pub height_m: f64,
    pub grid_cell_m: f64,
}

impl Region {
    pub fn new(width_m: f64, height_m: f64, grid_cell_m: f64) -> Result<Self> {
        let region = Region {
            width_m,
            height_m,
            grid_cell_m,
        };
        region.validate()?;
        Ok(region)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.width_m.is_finite()
            && self.height_m.is_finite()
            && self.width_m > 0.0
            && self.height_m > 0.0
            && self.grid_cell_m > 0.0
            && self.grid_cell_m <= self.width_m.min(self.height_m);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "region {}x{} m with cell {} m",
                self.width_m, self.height_m, self.grid_cell_m
            )))
        }
    }

    pub fn contains(&self, loc: Location) -> bool {
        (0.0..=self.width_m).contains(&loc.x) && (0.0..=self.height_m).contains(&loc.y)
    }

    pub fn check(&self, loc: Location) -> Result<()> {
        if self.contains(loc) {
            Ok(())
        } else {
            Err(Error::OutOfRegion {
                x: loc.x,
                y: loc.y,
                width: self.width_m,
                height: self.height_m,
            })
        }
    }

    /// Number of subarea rows and columns.
    pub fn grid_dims(&self) -> (usize, usize) {
        (
            (self.height_m / self.grid_cell_m).ceil().max(1.0) as usize,
            (self.width_m / self.grid_cell_m).ceil().max(1.0) as usize,
        )
    }

    pub fn center(&self) -> Location {
        Location::new(self.width_m / 2.0, self.height_m / 2.0)
    }
}

impl Default for Region {
    fn default() -> Self {
        Region {
            width_m: 1000.0,
            height_m: 1000.0,
            grid_cell_m: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub const fn new(x: f64, y: f64) -> Self {
        Location { x, y }
    }

    pub fn distance(&self, other: Location) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Rounds both coordinates to a multiple of 2^-32 m. Inside a region
    /// narrower than 2^20 m, reflections and quarter turns of snapped points
    /// are exact in `f64`, so pairwise distances survive them bit for bit.
    pub fn snapped(self) -> Location {
        const SCALE: f64 = (1u64 << 32) as f64;
        Location::new((self.x * SCALE).round() / SCALE, (self.y * SCALE).round() / SCALE)
    }
}

/// Power level in decibel-milliwatts.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerDbm(pub f64);

impl PowerDbm {
    pub fn mw(self) -> f64 {
        dbm_to_mw(self)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for PowerDbm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} dBm", self.0)
    }
}

pub fn dbm_to_mw(p: PowerDbm) -> f64 {
    10f64.powf(p.0 / 10.0)
}

/// Converts a linear power to dBm. Zero and negative powers have no dBm value.
pub fn mw_to_dbm(mw: f64) -> Result<PowerDbm> {
    if mw > 0.0 && mw.is_finite() {
        Ok(PowerDbm(10.0 * mw.log10()))
    } else {
        Err(Error::NonPositivePower(mw))
    }
}

/// Subarea `(row, col)` holding `loc`. The far edges clamp into the last cell.
pub fn subarea_index(loc: Location, region: &Region) -> Result<(usize, usize)> {
    region.check(loc)?;
    let (rows, cols) = region.grid_dims();
    let row = ((loc.y / region.grid_cell_m).floor() as usize).min(rows - 1);
    let col = ((loc.x / region.grid_cell_m).floor() as usize).min(cols - 1);
    Ok((row, col))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PuReceiver {
    pub id: u32,
    #[serde(flatten)]
    pub loc: Location,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimaryUser {
    pub id: u32,
    #[serde(flatten)]
    pub loc: Location,
    #[serde(rename = "power_dbm")]
    pub tx_power: PowerDbm,
    #[serde(rename = "purs")]
    pub receivers: Vec<PuReceiver>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondaryUser {
    pub id: u32,
    #[serde(flatten)]
    pub loc: Location,
}

/// An SU already transmitting at a granted power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActiveSu {
    pub id: u32,
    #[serde(flatten)]
    pub loc: Location,
    #[serde(rename = "power_dbm")]
    pub power: PowerDbm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSensor {
    pub id: u32,
    #[serde(flatten)]
    pub loc: Location,
    #[serde(rename = "reading_dbm")]
    pub reading: PowerDbm,
}

/// One world snapshot. Serialized as a single JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub region: Region,
    pub pus: Vec<PrimaryUser>,
    pub sensors: Vec<SpectrumSensor>,
    pub sus: Vec<SecondaryUser>,
    pub active_sus: Vec<ActiveSu>,
    pub seed: u64,
}

impl Scenario {
    pub fn empty(region: Region, seed: u64) -> Self {
        Scenario {
            region,
            pus: Vec::new(),
            sensors: Vec::new(),
            sus: Vec::new(),
            active_sus: Vec::new(),
            seed,
        }
    }

    /// Checks region bounds, non-empty PUR lists and id uniqueness.
    pub fn validate(&self) -> Result<()> {
        self.region.validate()?;
        let mut pu_ids = HashSet::new();
        let mut pur_ids = HashSet::new();
        for pu in &self.pus {
            self.region.check(pu.loc)?;
            if !pu.tx_power.0.is_finite() {
                return Err(Error::InvalidInput(format!("PU {} power not finite", pu.id)));
            }
            if !pu_ids.insert(pu.id) {
                return Err(Error::InvalidInput(format!("duplicate PU id {}", pu.id)));
            }
            if pu.receivers.is_empty() {
                return Err(Error::InvalidInput(format!("PU {} has no receivers", pu.id)));
            }
            for pur in &pu.receivers {
                self.region.check(pur.loc)?;
                if !pur_ids.insert(pur.id) {
                    return Err(Error::InvalidInput(format!("duplicate PUR id {}", pur.id)));
                }
            }
        }
        let mut ids = HashSet::new();
        for s in &self.sensors {
            self.region.check(s.loc)?;
            if !ids.insert(s.id) {
                return Err(Error::InvalidInput(format!("duplicate sensor id {}", s.id)));
            }
        }
        ids.clear();
        for su in &self.sus {
            self.region.check(su.loc)?;
            if !ids.insert(su.id) {
                return Err(Error::InvalidInput(format!("duplicate SU id {}", su.id)));
            }
        }
        ids.clear();
        for su in &self.active_sus {
            self.region.check(su.loc)?;
            if !ids.insert(su.id) {
                return Err(Error::InvalidInput(format!("duplicate active SU id {}", su.id)));
            }
        }
        Ok(())
    }

    pub fn pu(&self, id: u32) -> Option<&PrimaryUser> {
        self.pus.iter().find(|pu| pu.id == id)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("scenario serialization is infallible")
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        serde_json::from_str(line).map_err(|e| Error::Format(format!("scenario line: {e}")))
    }
}
