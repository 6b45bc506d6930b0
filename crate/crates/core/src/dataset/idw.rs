//! Log-distance inverse-distance weighting.
//!
//! The weight of a known point at distance `d` is `1 / log10(d)`. A point
//! within 1 m of the query has a non-positive log and is returned as is.

use serde::{Deserialize, Serialize};

use crate::model::{dbm_to_mw, mw_to_dbm, Location, PowerDbm, Scenario, SpectrumSensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdwDomain {
    /// Interpolate dBm values directly.
    #[default]
    Dbm,
    /// Interpolate milliwatts and convert back.
    Mw,
}

/// Indices of the `k` points nearest to `target`, closest first; equal
/// distances keep input order.
pub fn k_nearest(points: &[Location], target: Location, k: usize) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (p.distance(target), i))
        .collect();
    let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    let k = k.min(keyed.len());
    if k == 0 {
        return Vec::new();
    }
    if k < keyed.len() {
        keyed.select_nth_unstable_by(k - 1, order);
        keyed.truncate(k);
    }
    keyed.sort_unstable_by(order);
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// Weighted mean of the `k` nearest values. `points` must be non-empty.
pub fn idw_points(points: &[(Location, f64)], at: Location, k: usize) -> f64 {
    let locs: Vec<Location> = points.iter().map(|p| p.0).collect();
    let nearest = k_nearest(&locs, at, k.max(1));
    let mut num = 0.0;
    let mut den = 0.0;
    for &i in &nearest {
        let (loc, value) = points[i];
        let d = loc.distance(at);
        if d <= 1.0 {
            return value;
        }
        let w = 1.0 / d.log10();
        num += w * value;
        den += w;
    }
    num / den
}

/// Reading at `loc` interpolated from the `k` nearest sensors.
pub fn idw_interpolate(
    sensors: &[SpectrumSensor],
    loc: Location,
    k: usize,
    domain: IdwDomain,
) -> Result<PowerDbm> {
    if k == 0 || sensors.len() < k {
        return Err(Error::InvalidInput(format!(
            "IDW over {k} neighbours with {} sensors",
            sensors.len()
        )));
    }
    let points: Vec<(Location, f64)> = sensors
        .iter()
        .map(|s| {
            let v = match domain {
                IdwDomain::Dbm => s.reading.0,
                IdwDomain::Mw => dbm_to_mw(s.reading),
            };
            (s.loc, v)
        })
        .collect();
    let value = idw_points(&points, loc, k);
    match domain {
        IdwDomain::Dbm => Ok(PowerDbm(value)),
        IdwDomain::Mw => mw_to_dbm(value),
    }
}

/// Copy of `scenario` with interpolated sensors appended at `new_locs`.
/// Only the original sensors feed the interpolation.
pub fn augment_idw(
    scenario: &Scenario,
    new_locs: &[Location],
    k: usize,
    domain: IdwDomain,
) -> Result<Scenario> {
    let mut out = scenario.clone();
    let mut next_id = scenario.sensors.iter().map(|s| s.id + 1).max().unwrap_or(0);
    for &loc in new_locs {
        scenario.region.check(loc)?;
        let reading = idw_interpolate(&scenario.sensors, loc, k, domain)?;
        out.sensors.push(SpectrumSensor {
            id: next_id,
            loc,
            reading,
        });
        next_id += 1;
    }
    Ok(out)
}
