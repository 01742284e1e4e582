//! Downlink propagation channel and pilot-based CSI estimation.
//!
//! Propagation is free-space line of sight, optionally with one first-order
//! image source per bounding surface of the room.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::geometry::{half_wavelength, ArrayGeometry, GeometryError, Point3, Room, Scenario};
use crate::numerics::ComplexMatrix;
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("transmitter and receiver coincide at ({x}, {y}, {z})")]
    Coincident { x: f64, y: f64, z: f64 },
    #[error("source at ({x}, {y}, {z}) is outside the room")]
    SourceOutsideRoom { x: f64, y: f64, z: f64 },
    #[error("unsupported image order {0}; only 0 and 1 are modelled")]
    UnsupportedOrder(usize),
    #[error("image-order-1 mode needs room wall reflection coefficients")]
    MissingReflections,
    #[error("invalid channel configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelMode {
    #[default]
    LosOnly,
    ImageOrder1,
}

/// Amplitude radiation pattern of a transmit element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementPattern {
    #[default]
    Isotropic,
    /// Broadside `√6·cos θ` in the front half-space, zero behind; the `√6`
    /// keeps the radiated power equal to the isotropic case.
    Cosine,
}

impl ElementPattern {
    /// Amplitude factor for a ray leaving along `dir` from an element whose
    /// boresight is `boresight` (unit vector).
    pub fn amplitude(&self, boresight: [f64; 3], dir: [f64; 3], dist: f64) -> f64 {
        match self {
            ElementPattern::Isotropic => 1.0,
            ElementPattern::Cosine => {
                let cos = (boresight[0] * dir[0] + boresight[1] * dir[1] + boresight[2] * dir[2]) / dist;
                if cos > 0.0 {
                    6f64.sqrt() * cos
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelModelConfig {
    pub mode: ChannelMode,
    pub carrier_frequency: f64,
    /// Pilot SNR of the CSI estimate; `+inf` means perfect CSI.
    pub csi_snr_db: f64,
    pub rng_seed: u64,
    pub pattern: ElementPattern,
    /// Subcarrier offset from the carrier at which the channel is evaluated.
    pub subcarrier_index: i64,
    pub subcarrier_spacing: f64,
}

impl Default for ChannelModelConfig {
    fn default() -> Self {
        ChannelModelConfig {
            mode: ChannelMode::LosOnly,
            carrier_frequency: crate::geometry::PAPER_CARRIER_HZ,
            csi_snr_db: 30.0,
            rng_seed: 0,
            pattern: ElementPattern::Isotropic,
            subcarrier_index: 0,
            subcarrier_spacing: 15e3,
        }
    }
}

impl ChannelModelConfig {
    pub fn frequency(&self) -> f64 {
        self.carrier_frequency + self.subcarrier_index as f64 * self.subcarrier_spacing
    }

    pub fn validate(&self, room: &Room) -> Result<(), ChannelError> {
        if !(self.carrier_frequency > 0.0) || !(self.frequency() > 0.0) {
            return Err(ChannelError::Invalid("carrier frequency must be positive".into()));
        }
        if self.csi_snr_db.is_nan() || self.csi_snr_db == f64::NEG_INFINITY {
            return Err(ChannelError::Invalid("csi_snr_db must be a number or +inf".into()));
        }
        if self.mode == ChannelMode::ImageOrder1 && room.wall_reflection.is_none() {
            return Err(ChannelError::MissingReflections);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    /// Rows: UE antennas (UE-major), columns: active transmit elements.
    pub h: ComplexMatrix,
    pub subcarrier_index: i64,
}

/// Free-space gain `(λ / 4πd)·exp(−j·2πd/λ)`.
pub fn los_gain(tx: &Point3, rx: &Point3, frequency: f64) -> Result<Complex64, ChannelError> {
    let d = tx.distance(rx);
    if d == 0.0 {
        return Err(ChannelError::Coincident { x: tx.x, y: tx.y, z: tx.z });
    }
    Ok(free_space_gain(d, frequency))
}

fn free_space_gain(d: f64, frequency: f64) -> Complex64 {
    let lambda = SPEED_OF_LIGHT / frequency;
    let k = 2.0 * PI / lambda;
    Complex64::from_polar(lambda / (4.0 * PI * d), -k * d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSource {
    pub position: Point3,
    pub coefficient: f64,
    /// Boresight of the mirrored element.
    pub boresight: [f64; 3],
}

pub const ARRAY_BORESIGHT: [f64; 3] = [0.0, 1.0, 0.0];

/// First-order images of `tx` in the four walls, floor and ceiling, in that
/// order: `x_min`, `x_max`, `y_min`, `y_max`, floor, ceiling.
pub fn image_sources(room: &Room, tx: &Point3, order: usize) -> Result<Vec<ImageSource>, ChannelError> {
    if order > 1 {
        return Err(ChannelError::UnsupportedOrder(order));
    }
    if !room.contains(tx) {
        return Err(ChannelError::SourceOutsideRoom { x: tx.x, y: tx.y, z: tx.z });
    }
    if order == 0 {
        return Ok(Vec::new());
    }
    let coeffs = room.wall_reflection.ok_or(ChannelError::MissingReflections)?;
    let (x0, x1) = room.x_bounds();
    let (y0, y1) = room.y_bounds();
    let [bx, by, bz] = ARRAY_BORESIGHT;
    Ok(vec![
        ImageSource {
            position: Point3::new(2.0 * x0 - tx.x, tx.y, tx.z),
            coefficient: coeffs.x_min,
            boresight: [-bx, by, bz],
        },
        ImageSource {
            position: Point3::new(2.0 * x1 - tx.x, tx.y, tx.z),
            coefficient: coeffs.x_max,
            boresight: [-bx, by, bz],
        },
        ImageSource {
            position: Point3::new(tx.x, 2.0 * y0 - tx.y, tx.z),
            coefficient: coeffs.y_min,
            boresight: [bx, -by, bz],
        },
        ImageSource {
            position: Point3::new(tx.x, 2.0 * y1 - tx.y, tx.z),
            coefficient: coeffs.y_max,
            boresight: [bx, -by, bz],
        },
        ImageSource {
            position: Point3::new(tx.x, tx.y, -tx.z),
            coefficient: coeffs.floor,
            boresight: [bx, by, -bz],
        },
        ImageSource {
            position: Point3::new(tx.x, tx.y, 2.0 * room.height_z - tx.z),
            coefficient: coeffs.ceiling,
            boresight: [bx, by, -bz],
        },
    ])
}

/// Propagation paths from an array element to a receiver point.
#[derive(Debug, Clone, Copy)]
pub struct PropagationModel<'a> {
    pub room: &'a Room,
    pub mode: ChannelMode,
    pub pattern: ElementPattern,
}

impl PropagationModel<'_> {
    /// Sums `weight(d) · pattern · coefficient` over the direct path and, in
    /// image mode, the six first-order reflections.
    pub fn sum_paths(
        &self,
        tx: &Point3,
        rx: &Point3,
        kernel: impl Fn(f64) -> Complex64,
    ) -> Result<Complex64, ChannelError> {
        let mut acc = self.single_path(tx, ARRAY_BORESIGHT, 1.0, rx, &kernel)?;
        if self.mode == ChannelMode::ImageOrder1 {
            for img in image_sources(self.room, tx, 1)? {
                if img.coefficient == 0.0 {
                    continue;
                }
                acc += self.single_path(&img.position, img.boresight, img.coefficient, rx, &kernel)?;
            }
        }
        Ok(acc)
    }

    fn single_path(
        &self,
        src: &Point3,
        boresight: [f64; 3],
        coefficient: f64,
        rx: &Point3,
        kernel: &impl Fn(f64) -> Complex64,
    ) -> Result<Complex64, ChannelError> {
        let d = src.distance(rx);
        if d == 0.0 {
            return Err(ChannelError::Coincident { x: src.x, y: src.y, z: src.z });
        }
        let dir = [rx.x - src.x, rx.y - src.y, rx.z - src.z];
        let amp = self.pattern.amplitude(boresight, dir, d) * coefficient;
        Ok(kernel(d) * amp)
    }
}

/// UE antenna height and spacing used for the receive clusters.
pub const UE_ANTENNA_HEIGHT: f64 = 1.5;

pub fn ue_antennas(scenario: &Scenario, frequency: f64) -> Vec<Point3> {
    let spacing = half_wavelength(frequency);
    (0..scenario.num_ues())
        .flat_map(|k| scenario.ue_antenna_positions(k, spacing, UE_ANTENNA_HEIGHT))
        .collect()
}

pub fn generate_channel(
    array: &ArrayGeometry,
    scenario: &Scenario,
    room: &Room,
    cfg: &ChannelModelConfig,
) -> Result<ChannelMatrix, ChannelError> {
    cfg.validate(room)?;
    scenario.validate(room)?;
    let frequency = cfg.frequency();
    let tx = array.active_positions();
    let rx = ue_antennas(scenario, cfg.carrier_frequency);
    let model = PropagationModel { room, mode: cfg.mode, pattern: cfg.pattern };
    let mut h = ComplexMatrix::zeros(rx.len(), tx.len());
    for (r, rp) in rx.iter().enumerate() {
        for (t, tp) in tx.iter().enumerate() {
            h[(r, t)] = model.sum_paths(tp, rp, |d| free_space_gain(d, frequency))?;
        }
    }
    Ok(ChannelMatrix { h, subcarrier_index: cfg.subcarrier_index })
}

/// Adds circularly-symmetric Gaussian estimation noise with per-entry
/// variance `mean(|H|²) / 10^(csi_snr_db/10)`.
pub fn estimate_csi(true_channel: &ChannelMatrix, cfg: &ChannelModelConfig) -> ChannelMatrix {
    if cfg.csi_snr_db == f64::INFINITY {
        return true_channel.clone();
    }
    let h = &true_channel.h;
    let n = (h.rows() * h.cols()).max(1) as f64;
    let signal = h.frobenius_norm_sqr() / n;
    let sigma = (signal / 10f64.powf(cfg.csi_snr_db / 10.0) / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let noisy = ComplexMatrix::from_fn(h.rows(), h.cols(), |i, j| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        h[(i, j)] + Complex64::new(re, im) * sigma
    });
    ChannelMatrix { h: noisy, subcarrier_index: true_channel.subcarrier_index }
}
