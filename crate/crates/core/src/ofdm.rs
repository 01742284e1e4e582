//! OFDM/64-QAM link simulation and uncoded BER.
//!
//! The default path simulates each active subcarrier directly in the
//! frequency domain over a flat channel. The time-domain path builds real
//! OFDM symbols (IFFT, cyclic prefix, scalar channel, FFT) and is kept for
//! cross-checking; both observe the same per-subcarrier SNR.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelMatrix;
use crate::numerics::{matmul, ComplexMatrix};
use crate::precoding::{Combiner, PrecodingMatrix};

pub const BITS_PER_SYMBOL: usize = 6;
/// Instantaneous data bandwidth the active subcarriers must fit in.
pub const MAX_DATA_BANDWIDTH_HZ: f64 = 40e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OfdmError {
    #[error("bit sequence length {0} is not a multiple of 6")]
    BitLength(usize),
    #[error("invalid bit value {0}; bits must be 0 or 1")]
    BitValue(u8),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid OFDM configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimulationDomain {
    #[default]
    Frequency,
    Time,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OfdmConfig {
    pub subcarrier_spacing: f64,
    pub sample_rate: f64,
    pub fft_size: usize,
    pub active_subcarriers: usize,
    pub frame_samples: usize,
    pub cp_len: usize,
    /// Frames simulated per UE; one frame is `frame_samples` long.
    pub frames: usize,
    /// Receive SNR per UE antenna relative to a unit-power constellation at
    /// unit channel gain.
    pub noise_snr_db: f64,
    /// Derived per scenario from the run seed; not part of config files.
    #[serde(skip)]
    pub rng_seed: u64,
    pub domain: SimulationDomain,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        OfdmConfig {
            subcarrier_spacing: 15e3,
            sample_rate: 61.44e6,
            fft_size: 4096,
            active_subcarriers: 2664,
            frame_samples: 65536,
            cp_len: 288,
            frames: 5,
            noise_snr_db: 60.0,
            rng_seed: 0,
            domain: SimulationDomain::Frequency,
        }
    }
}

impl OfdmConfig {
    /// Arithmetic identity and bandwidth checks; each finding is one string.
    pub fn findings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.fft_size == 0 {
            out.push("fft_size must be positive".to_string());
            return out;
        }
        let spacing = self.sample_rate / self.fft_size as f64;
        if (spacing - self.subcarrier_spacing).abs() > 1e-9 * self.subcarrier_spacing.abs().max(1.0) {
            out.push(format!(
                "sample_rate / fft_size = {} Hz does not equal subcarrier_spacing {} Hz",
                spacing, self.subcarrier_spacing
            ));
        }
        if self.active_subcarriers as f64 * self.subcarrier_spacing > MAX_DATA_BANDWIDTH_HZ {
            out.push(format!(
                "{} active subcarriers x {} Hz exceed the 40 MHz data bandwidth",
                self.active_subcarriers, self.subcarrier_spacing
            ));
        }
        if self.active_subcarriers == 0 || !self.active_subcarriers.is_multiple_of(2) || self.active_subcarriers >= self.fft_size {
            out.push("active_subcarriers must be even, positive and below fft_size".to_string());
        }
        if self.symbols_per_frame() == 0 {
            out.push("frame_samples shorter than one OFDM symbol".to_string());
        }
        if self.frames == 0 {
            out.push("frames must be at least 1".to_string());
        }
        if self.noise_snr_db.is_nan() || self.noise_snr_db == f64::NEG_INFINITY {
            out.push("noise_snr_db must be a number or +inf".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<(), OfdmError> {
        match self.findings().into_iter().next() {
            Some(f) => Err(OfdmError::Config(f)),
            None => Ok(()),
        }
    }

    pub fn symbols_per_frame(&self) -> usize {
        self.frame_samples / (self.fft_size + self.cp_len)
    }

    pub fn bits_per_ue(&self) -> usize {
        self.frames * self.symbols_per_frame() * self.active_subcarriers * BITS_PER_SYMBOL
    }

    fn noise_sigma(&self) -> f64 {
        if self.noise_snr_db == f64::INFINITY {
            0.0
        } else {
            (10f64.powf(-self.noise_snr_db / 10.0) / 2.0).sqrt()
        }
    }

    /// FFT bin of the `i`-th active subcarrier; DC is left empty.
    fn bin(&self, i: usize) -> usize {
        let half = self.active_subcarriers / 2;
        if i < half {
            self.fft_size - half + i
        } else {
            i - half + 1
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerReport {
    pub scenario_id: String,
    pub per_ue_ber: Vec<f64>,
    pub per_ue_errors: Vec<u64>,
    /// Bits tested per UE.
    pub bits_tested: u64,
}

impl BerReport {
    pub fn mean_ber(&self) -> f64 {
        self.per_ue_ber.iter().sum::<f64>() / self.per_ue_ber.len().max(1) as f64
    }
}

const QAM_SCALE: f64 = 0.154_303_349_962_091_9; // 1/√42

/// Per-axis level for a 3-bit Gray label.
fn gray_level(label: u8) -> f64 {
    // Inverse Gray: position along the axis.
    let mut i = label;
    i ^= i >> 1;
    i ^= i >> 2;
    (2.0 * i as f64 - 7.0) * QAM_SCALE
}

fn level_label(v: f64) -> u8 {
    let i = ((v / QAM_SCALE + 7.0) / 2.0).round().clamp(0.0, 7.0) as u8;
    i ^ (i >> 1)
}

/// Symbol for a 6-bit label: high three bits on I, low three on Q.
pub fn qam64_point(label: u8) -> Complex64 {
    Complex64::new(gray_level((label >> 3) & 7), gray_level(label & 7))
}

pub fn qam64_label(symbol: Complex64) -> u8 {
    (level_label(symbol.re) << 3) | level_label(symbol.im)
}

/// Gray-mapped square 64-QAM with unit average energy.
pub fn map_64qam(bits: &[u8]) -> Result<Vec<Complex64>, OfdmError> {
    if !bits.len().is_multiple_of(BITS_PER_SYMBOL) {
        return Err(OfdmError::BitLength(bits.len()));
    }
    bits.chunks(BITS_PER_SYMBOL)
        .map(|chunk| {
            chunk.iter().try_fold(0u8, |acc, &b| match b {
                0 | 1 => Ok((acc << 1) | b),
                other => Err(OfdmError::BitValue(other)),
            })
        })
        .map(|label| label.map(qam64_point))
        .collect()
}

/// Hard-decision nearest-point demapping.
pub fn demap_64qam(symbols: &[Complex64]) -> Vec<u8> {
    let mut bits = Vec::with_capacity(symbols.len() * BITS_PER_SYMBOL);
    for &s in symbols {
        let label = qam64_label(s);
        for k in (0..BITS_PER_SYMBOL).rev() {
            bits.push((label >> k) & 1);
        }
    }
    bits
}

fn complex_gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * sigma, im * sigma)
}

/// Uncoded BER of 64-QAM over AWGN at the given Eb/N0.
pub fn simulate_awgn_ber(ebn0_db: f64, num_bits: usize, seed: u64) -> f64 {
    let symbols = num_bits.div_ceil(BITS_PER_SYMBOL);
    let ebn0 = 10f64.powf(ebn0_db / 10.0);
    let n0 = 1.0 / (BITS_PER_SYMBOL as f64 * ebn0);
    let sigma = (n0 / 2.0).sqrt();
    const CHUNK: usize = 1 << 14;
    let chunks = symbols.div_ceil(CHUNK);
    let errors: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = CHUNK.min(symbols - c * CHUNK);
            (0..n)
                .map(|_| {
                    let label: u8 = rng.random_range(0..64);
                    let y = qam64_point(label) + complex_gaussian(&mut rng, sigma);
                    (qam64_label(y) ^ label).count_ones() as u64
                })
                .sum::<u64>()
        })
        .sum();
    errors as f64 / (symbols * BITS_PER_SYMBOL) as f64
}

struct Link {
    streams: usize,
    antennas: usize,
    /// Per UE: antennas × streams gain `H_k W`.
    per_ue: Vec<ComplexMatrix>,
    /// Per UE: known equalizer gain `(G W)_kk`.
    diag: Vec<Complex64>,
    combiners: Vec<Combiner>,
}

fn build_link(precoder: &PrecodingMatrix, h_true: &ChannelMatrix, combiners: &[Combiner]) -> Result<Link, OfdmError> {
    let ues = combiners.len();
    let streams = precoder.streams();
    if ues == 0 || streams != ues {
        return Err(OfdmError::Shape(format!("{ues} combiners for {streams} streams")));
    }
    if !h_true.h.rows().is_multiple_of(ues) || h_true.h.cols() != precoder.w.rows() {
        return Err(OfdmError::Shape(format!(
            "channel {:?} vs precoder {:?}",
            h_true.h.shape(),
            precoder.w.shape()
        )));
    }
    let antennas = h_true.h.rows() / ues;
    if combiners.iter().any(|c| c.len() != antennas) {
        return Err(OfdmError::Shape("combiner length differs from antennas per UE".into()));
    }
    let hw = matmul(&h_true.h, &precoder.w).map_err(|e| OfdmError::Shape(e.to_string()))?;
    let per_ue: Vec<ComplexMatrix> = (0..ues).map(|k| hw.row_block(k * antennas, antennas)).collect();
    let diag = (0..ues)
        .map(|k| {
            (0..antennas)
                .map(|a| combiners[k][a].conj() * per_ue[k][(a, k)])
                .sum()
        })
        .collect();
    Ok(Link { streams, antennas, per_ue, diag, combiners: combiners.to_vec() })
}

/// Sends `cfg.frames` precoded frames and counts bit errors at every UE.
pub fn transmit_frame(
    scenario_id: &str,
    precoder: &PrecodingMatrix,
    h_true: &ChannelMatrix,
    combiners: &[Combiner],
    cfg: &OfdmConfig,
) -> Result<BerReport, OfdmError> {
    cfg.validate()?;
    let link = build_link(precoder, h_true, combiners)?;
    let chunks = cfg.frames * cfg.symbols_per_frame();
    let per_chunk: Vec<Vec<u64>> = match cfg.domain {
        SimulationDomain::Frequency => (0..chunks)
            .into_par_iter()
            .map(|c| frequency_chunk(&link, cfg, c as u64))
            .collect(),
        SimulationDomain::Time => {
            let mut planner = FftPlanner::<f64>::new();
            let fwd = planner.plan_fft_forward(cfg.fft_size);
            let inv = planner.plan_fft_inverse(cfg.fft_size);
            (0..chunks)
                .into_par_iter()
                .map(|c| time_chunk(&link, cfg, c as u64, fwd.as_ref(), inv.as_ref()))
                .collect()
        }
    };
    let mut errors = vec![0u64; link.streams];
    for chunk in per_chunk {
        for (e, c) in errors.iter_mut().zip(chunk) {
            *e += c;
        }
    }
    let bits = (chunks * cfg.active_subcarriers * BITS_PER_SYMBOL) as u64;
    Ok(BerReport {
        scenario_id: scenario_id.to_string(),
        per_ue_ber: errors.iter().map(|&e| e as f64 / bits as f64).collect(),
        per_ue_errors: errors,
        bits_tested: bits,
    })
}

fn chunk_rng(cfg: &OfdmConfig, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(chunk);
    rng
}

fn draw_labels(rng: &mut ChaCha8Rng, streams: usize, n: usize) -> Vec<Vec<u8>> {
    (0..streams)
        .map(|_| (0..n).map(|_| rng.random_range(0..64u8)).collect())
        .collect()
}

fn frequency_chunk(link: &Link, cfg: &OfdmConfig, chunk: u64) -> Vec<u64> {
    let mut rng = chunk_rng(cfg, chunk);
    let n = cfg.active_subcarriers;
    let labels = draw_labels(&mut rng, link.streams, n);
    let sigma = cfg.noise_sigma();
    let mut errors = vec![0u64; link.streams];
    for sc in 0..n {
        let s: Vec<Complex64> = labels.iter().map(|l| qam64_point(l[sc])).collect();
        for k in 0..link.streams {
            let mut y = Complex64::new(0.0, 0.0);
            for a in 0..link.antennas {
                let mut r = complex_gaussian(&mut rng, sigma);
                for (j, sj) in s.iter().enumerate() {
                    r += link.per_ue[k][(a, j)] * sj;
                }
                y += link.combiners[k][a].conj() * r;
            }
            let label = qam64_label(y / link.diag[k]);
            errors[k] += (label ^ labels[k][sc]).count_ones() as u64;
        }
    }
    errors
}

fn time_chunk(
    link: &Link,
    cfg: &OfdmConfig,
    chunk: u64,
    fwd: &dyn rustfft::Fft<f64>,
    inv: &dyn rustfft::Fft<f64>,
) -> Vec<u64> {
    let mut rng = chunk_rng(cfg, chunk);
    let n = cfg.active_subcarriers;
    let nfft = cfg.fft_size;
    let norm = 1.0 / (nfft as f64).sqrt();
    let labels = draw_labels(&mut rng, link.streams, n);
    let sigma = cfg.noise_sigma();

    // Per stream: cyclic-prefixed time-domain symbol.
    let tx: Vec<Vec<Complex64>> = labels
        .iter()
        .map(|l| {
            let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
            for (i, &label) in l.iter().enumerate() {
                buf[cfg.bin(i)] = qam64_point(label);
            }
            inv.process(&mut buf);
            for z in buf.iter_mut() {
                *z *= norm;
            }
            let mut sym = buf[nfft - cfg.cp_len..].to_vec();
            sym.extend_from_slice(&buf);
            sym
        })
        .collect();

    let len = nfft + cfg.cp_len;
    let mut errors = vec![0u64; link.streams];
    for k in 0..link.streams {
        let mut y = vec![Complex64::new(0.0, 0.0); len];
        for a in 0..link.antennas {
            let c = link.combiners[k][a].conj();
            for (t, yt) in y.iter_mut().enumerate() {
                let mut r = complex_gaussian(&mut rng, sigma);
                for (j, xj) in tx.iter().enumerate() {
                    r += link.per_ue[k][(a, j)] * xj[t];
                }
                *yt += c * r;
            }
        }
        let mut body = y[cfg.cp_len..].to_vec();
        fwd.process(&mut body);
        for (i, &sent) in labels[k].iter().enumerate() {
            let z = body[cfg.bin(i)] * norm / link.diag[k];
            errors[k] += (qam64_label(z) ^ sent).count_ones() as u64;
        }
    }
    errors
}
