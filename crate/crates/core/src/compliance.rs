//! Regional exposure limits and exceedance reports.
//!
//! Limits are flat V/m values for the band; real ICNIRP reference levels
//! vary with frequency.

use serde::{Deserialize, Serialize, Serializer};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::field::HeatMap;
use crate::stats::CutProfile;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComplianceError {
    #[error("unknown region {region:?}; known regions: {}", known.join(", "))]
    UnknownRegion { region: String, known: Vec<String> },
    #[error("limit for {region:?} must be positive, got {limit}")]
    BadLimit { region: String, limit: f64 },
    #[error("no profiles given")]
    NoProfiles,
    #[error("field still exceeds {limit} V/m at the last sample ({distance} m) of profile {profile}")]
    BeyondProfile { profile: usize, distance: f64, limit: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LimitTable {
    pub entries: BTreeMap<String, f64>,
}

impl Default for LimitTable {
    fn default() -> Self {
        let entries = [("ICNIRP", 41.0), ("Italy", 6.0), ("Poland", 7.0)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        LimitTable { entries }
    }
}

impl LimitTable {
    pub fn new(entries: BTreeMap<String, f64>) -> Result<Self, ComplianceError> {
        if let Some((region, &limit)) = entries.iter().find(|(_, &v)| !(v > 0.0 && v.is_finite())) {
            return Err(ComplianceError::BadLimit { region: region.clone(), limit });
        }
        Ok(LimitTable { entries })
    }

    pub fn limit(&self, region: &str) -> Result<f64, ComplianceError> {
        self.entries.get(region).copied().ok_or_else(|| ComplianceError::UnknownRegion {
            region: region.to_string(),
            known: self.entries.keys().cloned().collect(),
        })
    }

    pub fn regions(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

fn margin_or_sentinel<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v < 0.0 {
        s.serialize_str("-inf")
    } else {
        s.serialize_str("inf")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplianceReport {
    pub region: String,
    pub limit: f64,
    pub exceed_count: usize,
    pub exceed_fraction: f64,
    /// `20·log10(max_field / limit)`; `-inf` for an all-zero map.
    #[serde(serialize_with = "margin_or_sentinel")]
    pub worst_margin_db: f64,
    pub exceedance_mask: Vec<bool>,
}

pub fn check(map: &HeatMap, region: &str, limits: &LimitTable) -> Result<ComplianceReport, ComplianceError> {
    let limit = limits.limit(region)?;
    let mask: Vec<bool> = map.values.iter().map(|&v| v > limit).collect();
    let exceed_count = mask.iter().filter(|&&e| e).count();
    let max = map.values.iter().copied().fold(0.0, f64::max);
    Ok(ComplianceReport {
        region: region.to_string(),
        limit,
        exceed_count,
        exceed_fraction: if mask.is_empty() { 0.0 } else { exceed_count as f64 / mask.len() as f64 },
        worst_margin_db: 20.0 * (max / limit).log10(),
        exceedance_mask: mask,
    })
}

/// Crossing distance between two samples, interpolating `ln E` against
/// `ln d` (exact for power laws) and falling back to linear interpolation
/// when a value is not strictly positive.
fn crossing(a: (f64, f64), b: (f64, f64), limit: f64) -> f64 {
    let (d0, e0) = a;
    let (d1, e1) = b;
    if d0 > 0.0 && d1 > 0.0 && e0 > 0.0 && e1 > 0.0 {
        let t = (e0.ln() - limit.ln()) / (e0.ln() - e1.ln());
        (d0.ln() + t * (d1.ln() - d0.ln())).exp()
    } else {
        let t = (e0 - limit) / (e0 - e1);
        d0 + t * (d1 - d0)
    }
}

/// Smallest distance beyond which every profile stays at or below the
/// limit. Returns 0 when nothing exceeds.
pub fn min_compliant_distance(
    profiles: &[CutProfile],
    region: &str,
    limits: &LimitTable,
) -> Result<f64, ComplianceError> {
    let limit = limits.limit(region)?;
    if profiles.is_empty() {
        return Err(ComplianceError::NoProfiles);
    }
    let mut worst: f64 = 0.0;
    for (pi, p) in profiles.iter().enumerate() {
        let Some(last) = p.samples.iter().rposition(|&(_, e)| e > limit) else {
            continue;
        };
        let Some(&next) = p.samples.get(last + 1) else {
            return Err(ComplianceError::BeyondProfile { profile: pi, distance: p.samples[last].0, limit });
        };
        worst = worst.max(crossing(p.samples[last], next, limit));
    }
    Ok(worst)
}
