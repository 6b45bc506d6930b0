//! Deterministic shared-spectrum simulation and dataset toolkit.
//!
//! The crate computes ground-truth spectrum allocations for secondary users
//! (SUs) in an area shared with licensed primary users (PUs), produces labeled
//! image-sheet datasets for an external learner, implements the classical
//! baselines, and scores prediction files.
//!
//! Every stage is a pure function of its inputs and a 64-bit seed. Batch stages
//! go through [`exec::Exec`], which fans out over rayon when the `parallel`
//! feature is enabled and runs sequentially otherwise; both paths produce
//! identical output.

pub mod baselines;
pub mod config;
pub mod dataset;
mod error;
pub mod exec;
pub mod metrics;
pub mod model;
pub mod multi_su;
pub mod oracle;
pub mod propagation;

pub use error::{Error, Result};
pub use model::{
    dbm_to_mw, mw_to_dbm, subarea_index, ActiveSu, Location, PowerDbm, PrimaryUser, PuReceiver,
    Region, Scenario, SecondaryUser, SpectrumSensor,
};
pub use oracle::{AllocationDecision, OracleConfig};
pub use propagation::{LogDistance, LogDistanceParams, PathLoss};
