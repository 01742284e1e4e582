//! Statistics over heat maps: averaging, cuts, decay fits and summaries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::HeatMap;
use crate::geometry::Point3;

const ON_GRID_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("no heat maps to average")]
    Empty,
    #[error("heat map {index} uses a different grid than the first map")]
    GridMismatch { index: usize },
    #[error("x = {x} is not a grid column; nearest columns are {nearest:?}")]
    OffGrid { x: f64, nearest: Vec<f64> },
    #[error("decay fit needs at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("decay fit needs strictly positive distance and field, sample {index} is ({distance}, {field})")]
    NonPositive { index: usize, distance: f64, field: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutAxis {
    XFixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutProfile {
    pub axis: CutAxis,
    pub fixed_value: f64,
    /// `(distance along y in m, field in V/m)`, ascending distance.
    pub samples: Vec<(f64, f64)>,
}

impl CutProfile {
    /// Keeps samples at distance `>= min_distance`.
    pub fn beyond(&self, min_distance: f64) -> CutProfile {
        CutProfile {
            axis: self.axis,
            fixed_value: self.fixed_value,
            samples: self.samples.iter().copied().filter(|&(d, _)| d >= min_distance).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub r_squared: f64,
    pub samples_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub max: f64,
    pub max_position: Point3,
    pub min: f64,
    pub mean: f64,
    pub p95: f64,
}

pub fn average_heatmaps(maps: &[HeatMap]) -> Result<HeatMap, StatsError> {
    let first = maps.first().ok_or(StatsError::Empty)?;
    if let Some(index) = maps.iter().position(|m| m.grid != first.grid || m.values.len() != first.values.len()) {
        return Err(StatsError::GridMismatch { index });
    }
    // Contributions are summed in sorted order so the result does not
    // depend on input order.
    let n = maps.len() as f64;
    let values = (0..first.values.len())
        .map(|i| {
            let mut col: Vec<f64> = maps.iter().map(|m| m.values[i]).collect();
            col.sort_by(f64::total_cmp);
            col.iter().sum::<f64>() / n
        })
        .collect();
    Ok(HeatMap { grid: first.grid.clone(), values, scenario_id: "average".to_string() })
}

pub fn extract_cut(map: &HeatMap, x: f64) -> Result<CutProfile, StatsError> {
    let columns = map.grid.x_values();
    if !columns.iter().any(|&c| (c - x).abs() <= ON_GRID_TOL) {
        let mut sorted = columns.clone();
        sorted.sort_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()).then(a.total_cmp(b)));
        let mut nearest: Vec<f64> = sorted.into_iter().take(2).collect();
        nearest.sort_by(f64::total_cmp);
        return Err(StatsError::OffGrid { x, nearest });
    }
    let mut samples: Vec<(f64, f64)> = map
        .grid
        .points
        .iter()
        .zip(&map.values)
        .filter(|(p, _)| (p.x - x).abs() <= ON_GRID_TOL)
        .map(|(p, &v)| (p.y, v))
        .collect();
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(CutProfile { axis: CutAxis::XFixed, fixed_value: x, samples })
}

/// Least-squares slope of `ln(field)` against `ln(distance)`.
pub fn fit_decay(profile: &CutProfile) -> Result<DecayFit, StatsError> {
    let s = &profile.samples;
    if s.len() < 3 {
        return Err(StatsError::TooFewSamples(s.len()));
    }
    if let Some(index) = s.iter().position(|&(d, f)| !(d > 0.0 && f > 0.0)) {
        let (distance, field) = s[index];
        return Err(StatsError::NonPositive { index, distance, field });
    }
    let xs: Vec<f64> = s.iter().map(|&(d, _)| d.ln()).collect();
    let ys: Vec<f64> = s.iter().map(|&(_, f)| f.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(DecayFit { exponent: slope, r_squared, samples_used: s.len() })
}

/// Nearest-rank percentile, `p` in `(0, 100]`.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Order statistics of a non-empty map. The first grid point wins a tie for
/// the maximum.
pub fn summary(map: &HeatMap) -> Summary {
    let (mut max, mut idx) = (f64::NEG_INFINITY, 0);
    for (i, &v) in map.values.iter().enumerate() {
        if v > max {
            max = v;
            idx = i;
        }
    }
    let mut sorted = map.values.clone();
    sorted.sort_by(f64::total_cmp);
    Summary {
        max,
        max_position: map.grid.points.get(idx).copied().unwrap_or_default(),
        min: sorted.first().copied().unwrap_or(f64::NAN),
        mean: map.values.iter().sum::<f64>() / map.values.len() as f64,
        p95: if sorted.is_empty() { f64::NAN } else { nearest_rank(&sorted, 95.0) },
    }
}
