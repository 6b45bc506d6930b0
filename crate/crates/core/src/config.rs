//! Run configuration read from a sectioned TOML file.
//!
//! Every section is optional and falls back to the defaults of its module.
//! Unknown keys are rejected and errors name the offending key path.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{IpbConfig, LbtConfig};
use crate::dataset::{AugmentConfig, ConservativeConfig, SamplerConfig, SheetConfig};
use crate::model::Region;
use crate::multi_su::{MultiAlgo, DEFAULT_THRESHOLD_DB};
use crate::oracle::OracleConfig;
use crate::propagation::LogDistanceParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiSuConfig {
    pub algo: MultiAlgo,
    /// SUs drawn per scenario; 0 uses the SUs already in the scenario.
    pub n_sus: u32,
    pub channels: usize,
    pub threshold_db: f64,
}

impl Default for MultiSuConfig {
    fn default() -> Self {
        MultiSuConfig {
            algo: MultiAlgo::Binary,
            n_sus: 10,
            channels: 1,
            threshold_db: DEFAULT_THRESHOLD_DB,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub bandwidth_hz: f64,
    pub rx_radius_m: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            bandwidth_hz: 1e6,
            rx_radius_m: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub region: Region,
    pub propagation: LogDistanceParams,
    pub oracle: OracleConfig,
    pub sampler: SamplerConfig,
    pub sheets: SheetConfig,
    pub conservative: ConservativeConfig,
    pub augment: AugmentConfig,
    pub lbt: LbtConfig,
    pub ipb: IpbConfig,
    pub multisu: MultiSuConfig,
    pub metrics: MetricsConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::parse(text).map_err(Error::InvalidInput)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|msg| Error::InvalidInput(format!("{}: {msg}", path.display())))
    }

    fn parse(text: &str) -> std::result::Result<Self, String> {
        let de = toml::Deserializer::new(text);
        let mut cfg: RunConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| {
                let path = e.path().to_string();
                format!("config key `{path}`: {}", e.into_inner().message())
            })?;
        cfg.set_seed(cfg.seed);
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    /// The global seed drives the sampler and the propagation field.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.sampler.seed = seed;
        self.propagation.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.region.validate()?;
        self.propagation.validate()?;
        self.oracle.validate()?;
        self.sampler.validate()?;
        self.sheets.validate()?;
        self.conservative.validate()?;
        if self.multisu.channels == 0 || !(self.multisu.threshold_db > 0.0) {
            return Err(Error::InvalidInput(format!("multisu section {:?}", self.multisu)));
        }
        if !(self.metrics.bandwidth_hz > 0.0 && self.metrics.rx_radius_m > 0.0) {
            return Err(Error::InvalidInput(format!("metrics section {:?}", self.metrics)));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}
