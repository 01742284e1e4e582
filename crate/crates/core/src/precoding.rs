//! Zero-forcing precoding with per-UE maximum-ratio receive combining.
//!
//! Each UE collapses its antenna block `H_k` onto the dominant left singular
//! direction `c_k`, giving one effective row `g_k = c_kᴴ H_k`. The precoder
//! is the right pseudo-inverse of the stacked rows, with every column scaled
//! to an equal share of the total transmit power.

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::ChannelMatrix;
use crate::geometry::Scenario;
use crate::numerics::{hermitian, matmul, right_pseudo_inverse, ComplexMatrix, NumericsError};

pub const POWER_ITERATIONS: usize = 30;
pub const POWER_ITERATION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrecodingError {
    #[error("channel has {rows} rows but scenario needs {expected}")]
    Shape { rows: usize, expected: usize },
    #[error("UE {ue} has an all-zero channel block")]
    DegenerateChannel { ue: usize },
    #[error("ZF infeasible: UEs {first} and {second} are not separable (correlation {correlation:.6})")]
    Infeasible {
        first: usize,
        second: usize,
        correlation: f64,
        #[source]
        source: NumericsError,
    },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Unit-norm receive combiner of one UE.
pub type Combiner = Vec<Complex64>;

#[derive(Debug, Clone, PartialEq)]
pub struct PrecodingMatrix {
    /// Active elements × streams, in √W.
    pub w: ComplexMatrix,
    pub per_stream_power: f64,
}

impl PrecodingMatrix {
    pub fn streams(&self) -> usize {
        self.w.cols()
    }

    pub fn total_power(&self) -> f64 {
        self.w.frobenius_norm_sqr()
    }
}

fn check_rows(h: &ChannelMatrix, scenario: &Scenario) -> Result<(), PrecodingError> {
    let expected = scenario.total_ue_antennas();
    if h.h.rows() != expected || expected == 0 {
        return Err(PrecodingError::Shape { rows: h.h.rows(), expected });
    }
    Ok(())
}

fn normalize_phase(v: &mut [Complex64]) {
    // Largest entry made real positive; the first wins ties.
    let (idx, _) = v
        .iter()
        .enumerate()
        .fold((0, -1.0), |best, (i, z)| if z.norm() > best.1 { (i, z.norm()) } else { best });
    let phase = v[idx].conj() / v[idx].norm();
    for z in v.iter_mut() {
        *z *= phase;
    }
}

fn unit(v: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    (n > 0.0).then(|| v.iter().map(|z| z / n).collect())
}

/// Dominant eigenvector of `H_k H_kᴴ` by power iteration, started from the
/// Gram column with the largest norm.
fn dominant_direction(block: &ComplexMatrix) -> Option<Combiner> {
    let gram = matmul(block, &hermitian(block)).ok()?;
    let n = gram.rows();
    let start = (0..n)
        .map(|j| gram.column(j))
        .max_by(|a, b| {
            let na: f64 = a.iter().map(|z| z.norm_sqr()).sum();
            let nb: f64 = b.iter().map(|z| z.norm_sqr()).sum();
            na.partial_cmp(&nb).unwrap_or(std::cmp::Ordering::Equal)
        })?;
    let mut v = unit(&start)?;
    normalize_phase(&mut v);
    for _ in 0..POWER_ITERATIONS {
        let next: Vec<Complex64> = (0..n)
            .map(|i| gram.row(i).iter().zip(&v).map(|(a, b)| a * b).sum())
            .collect();
        let mut next = unit(&next)?;
        normalize_phase(&mut next);
        let delta: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        v = next;
        if delta <= POWER_ITERATION_TOL {
            break;
        }
    }
    Some(v)
}

pub fn combining_vectors(h_est: &ChannelMatrix, scenario: &Scenario) -> Result<Vec<Combiner>, PrecodingError> {
    check_rows(h_est, scenario)?;
    let a = scenario.antennas_per_ue;
    (0..scenario.num_ues())
        .map(|k| {
            let block = h_est.h.row_block(k * a, a);
            if block.frobenius_norm_sqr() == 0.0 {
                return Err(PrecodingError::DegenerateChannel { ue: k });
            }
            dominant_direction(&block).ok_or(PrecodingError::DegenerateChannel { ue: k })
        })
        .collect()
}

/// Stacks `g_k = c_kᴴ H_k` into a `|UEs| × N` matrix.
pub fn combined_channel(h: &ChannelMatrix, combiners: &[Combiner], antennas_per_ue: usize) -> Result<ComplexMatrix, PrecodingError> {
    let n = h.h.cols();
    let k = combiners.len();
    if h.h.rows() != k * antennas_per_ue {
        return Err(PrecodingError::Shape { rows: h.h.rows(), expected: k * antennas_per_ue });
    }
    let mut g = ComplexMatrix::zeros(k, n);
    for (u, c) in combiners.iter().enumerate() {
        if c.len() != antennas_per_ue {
            return Err(PrecodingError::Shape { rows: c.len(), expected: antennas_per_ue });
        }
        for (a, ca) in c.iter().enumerate() {
            let ca = ca.conj();
            for (t, h_rt) in h.h.row(u * antennas_per_ue + a).iter().enumerate() {
                g[(u, t)] += ca * h_rt;
            }
        }
    }
    Ok(g)
}

fn most_correlated_pair(g: &ComplexMatrix) -> (usize, usize, f64) {
    let mut best = (0, 0, 0.0);
    for i in 0..g.rows() {
        for j in i + 1..g.rows() {
            let (ri, rj) = (g.row(i), g.row(j));
            let dot: Complex64 = ri.iter().zip(rj).map(|(a, b)| a * b.conj()).sum();
            let ni: f64 = ri.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let nj: f64 = rj.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let corr = if ni > 0.0 && nj > 0.0 { dot.norm() / (ni * nj) } else { 1.0 };
            if corr > best.2 {
                best = (i, j, corr);
            }
        }
    }
    best
}

/// Zero-forcing precoder for an effective channel `G`.
///
/// Columns of `G⁺` are rescaled individually so each stream carries
/// `total_power / streams`; column scaling keeps `G·W` diagonal.
pub fn zf_from_effective(g: &ComplexMatrix, total_power: f64) -> Result<PrecodingMatrix, PrecodingError> {
    let w0 = right_pseudo_inverse(g).map_err(|source| {
        let (first, second, correlation) = most_correlated_pair(g);
        PrecodingError::Infeasible { first, second, correlation, source }
    })?;
    let streams = w0.cols();
    let per_stream_power = total_power / streams as f64;
    let mut w = w0;
    for s in 0..streams {
        let norm: f64 = (0..w.rows()).map(|t| w[(t, s)].norm_sqr()).sum::<f64>().sqrt();
        let scale = per_stream_power.sqrt() / norm;
        for t in 0..w.rows() {
            w[(t, s)] *= scale;
        }
    }
    Ok(PrecodingMatrix { w, per_stream_power })
}

pub fn zf_precoder(h_est: &ChannelMatrix, scenario: &Scenario) -> Result<PrecodingMatrix, PrecodingError> {
    let combiners = combining_vectors(h_est, scenario)?;
    zf_precoder_with(h_est, scenario, &combiners)
}

pub fn zf_precoder_with(
    h_est: &ChannelMatrix,
    scenario: &Scenario,
    combiners: &[Combiner],
) -> Result<PrecodingMatrix, PrecodingError> {
    check_rows(h_est, scenario)?;
    let g = combined_channel(h_est, combiners, scenario.antennas_per_ue)?;
    zf_from_effective(&g, scenario.total_tx_power)
}

/// `G_true · W`, the stream-to-UE gain matrix seen after combining.
pub fn effective_channel(
    h_true: &ChannelMatrix,
    w: &PrecodingMatrix,
    combiners: &[Combiner],
) -> Result<ComplexMatrix, PrecodingError> {
    let a = if combiners.is_empty() { 0 } else { h_true.h.rows() / combiners.len() };
    let g = combined_channel(h_true, combiners, a)?;
    Ok(matmul(&g, &w.w)?)
}

/// Largest off-diagonal magnitude divided by the smallest diagonal one.
pub fn interference_ratio(effective: &ComplexMatrix) -> f64 {
    let n = effective.rows().min(effective.cols());
    let min_diag = (0..n).map(|i| effective[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    let mut max_off: f64 = 0.0;
    for i in 0..effective.rows() {
        for j in 0..effective.cols() {
            if i != j {
                max_off = max_off.max(effective[(i, j)].norm());
            }
        }
    }
    max_off / min_diag
}
