//! RMS E-field at probe positions and heat-map assembly.
//!
//! Within one stream the element contributions add coherently as spherical
//! waves (no plane-wave shortcut, the grid sits in the radiating near field
//! of the aperture). Streams carry independent data, so their powers add.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::channel::{ChannelError, ChannelMode, ElementPattern, PropagationModel};
use crate::geometry::{ArrayGeometry, Point3, ProbeGrid, Room};
use crate::precoding::PrecodingMatrix;
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error(transparent)]
    Propagation(#[from] ChannelError),
    #[error("received power must be non-negative, got {0} W")]
    NegativePower(f64),
    #[error("probe antenna gain must be positive, got {0}")]
    BadGain(f64),
    #[error("precoder has {rows} rows but the array has {active} active elements")]
    Shape { rows: usize, active: usize },
}

pub struct FieldConstants;

impl FieldConstants {
    /// Impedance of free space, Ω (CODATA 2018).
    pub const FREE_SPACE_IMPEDANCE: f64 = 376.730_313_668;
    pub const SPEED_OF_LIGHT: f64 = SPEED_OF_LIGHT;
}

/// Settings shared by every field evaluation of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldConfig {
    pub mode: ChannelMode,
    pub pattern: ElementPattern,
    pub frequency: f64,
    /// Multiplicative field calibration applied to heat-map values.
    pub calibration: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            mode: ChannelMode::LosOnly,
            pattern: ElementPattern::Isotropic,
            frequency: crate::geometry::PAPER_CARRIER_HZ,
            calibration: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatMap {
    pub grid: ProbeGrid,
    /// RMS field, V/m, one per grid point in grid order.
    pub values: Vec<f64>,
    pub scenario_id: String,
}

fn field_kernel(frequency: f64) -> impl Fn(f64) -> Complex64 {
    let k = 2.0 * PI * frequency / SPEED_OF_LIGHT;
    move |d| Complex64::from_polar(30f64.sqrt() / d, -k * d)
}

/// Field phasor of one element driven with `weight` √W, using the
/// isotropic far-field relation `|E| = √(30·P·G)/d`.
pub fn element_field(
    tx: &Point3,
    weight: Complex64,
    probe: &Point3,
    room: &Room,
    cfg: &FieldConfig,
) -> Result<Complex64, FieldError> {
    let model = PropagationModel { room, mode: cfg.mode, pattern: cfg.pattern };
    Ok(model.sum_paths(tx, probe, field_kernel(cfg.frequency))? * weight)
}

/// `√(Σ_s |Σ_t E_t(w[t][s])|²)` at `probe`.
pub fn superpose_fields(
    array: &ArrayGeometry,
    w: &PrecodingMatrix,
    probe: &Point3,
    room: &Room,
    cfg: &FieldConfig,
) -> Result<f64, FieldError> {
    let tx = array.active_positions();
    stream_fields(&tx, w, probe, room, cfg).map(|per_stream| per_stream.iter().map(|e| e.norm_sqr()).sum::<f64>().sqrt())
}

/// Coherent field phasor of each stream at `probe`.
pub fn stream_fields(
    tx: &[Point3],
    w: &PrecodingMatrix,
    probe: &Point3,
    room: &Room,
    cfg: &FieldConfig,
) -> Result<Vec<Complex64>, FieldError> {
    if w.w.rows() != tx.len() {
        return Err(FieldError::Shape { rows: w.w.rows(), active: tx.len() });
    }
    let model = PropagationModel { room, mode: cfg.mode, pattern: cfg.pattern };
    let kernel = field_kernel(cfg.frequency);
    let mut out = vec![Complex64::new(0.0, 0.0); w.streams()];
    for (t, tp) in tx.iter().enumerate() {
        let unit = model.sum_paths(tp, probe, &kernel)?;
        for (s, e) in out.iter_mut().enumerate() {
            *e += unit * w.w[(t, s)];
        }
    }
    Ok(out)
}

pub fn compute_heatmap(
    scenario_id: &str,
    array: &ArrayGeometry,
    room: &Room,
    precoder: &PrecodingMatrix,
    grid: &ProbeGrid,
    cfg: &FieldConfig,
) -> Result<HeatMap, FieldError> {
    let tx = array.active_positions();
    let values = grid
        .points
        .par_iter()
        .map(|p| {
            stream_fields(&tx, precoder, p, room, cfg)
                .map(|s| s.iter().map(|e| e.norm_sqr()).sum::<f64>().sqrt() * cfg.calibration)
        })
        .collect::<Result<Vec<f64>, FieldError>>()?;
    Ok(HeatMap { grid: grid.clone(), values, scenario_id: scenario_id.to_string() })
}

/// Incident field from power received on an aperture `A_eff = λ²G/4π`:
/// `E = √(P·η₀·4π / (λ²·G))`.
pub fn power_to_field(received_power: f64, frequency: f64, probe_antenna_gain: f64) -> Result<f64, FieldError> {
    if !(received_power >= 0.0) {
        return Err(FieldError::NegativePower(received_power));
    }
    if !(probe_antenna_gain > 0.0) {
        return Err(FieldError::BadGain(probe_antenna_gain));
    }
    let lambda = SPEED_OF_LIGHT / frequency;
    Ok((received_power * FieldConstants::FREE_SPACE_IMPEDANCE * 4.0 * PI / (lambda * lambda * probe_antenna_gain)).sqrt())
}

/// Inverse of [`power_to_field`].
pub fn field_to_power(field: f64, frequency: f64, probe_antenna_gain: f64) -> f64 {
    let lambda = SPEED_OF_LIGHT / frequency;
    let density = field * field / FieldConstants::FREE_SPACE_IMPEDANCE;
    density * lambda * lambda * probe_antenna_gain / (4.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_array, ActiveSelection, GridSpec, PAPER_CARRIER_HZ};
    use crate::numerics::ComplexMatrix;

    fn room() -> Room {
        Room::default()
    }

    #[test]
    fn one_watt_at_one_meter() {
        let e = element_field(
            &Point3::new(0.0, 0.0, 1.5),
            Complex64::new(1.0, 0.0),
            &Point3::new(0.0, 1.0, 1.5),
            &room(),
            &FieldConfig::default(),
        )
        .unwrap();
        assert!((e.norm() - 30f64.sqrt()).abs() < 1e-12);
        assert!((e.norm() - 5.477).abs() < 1e-3);
    }

    #[test]
    fn zero_weight_and_inverse_distance() {
        let tx = Point3::new(0.0, 0.0, 1.5);
        let cfg = FieldConfig::default();
        let zero = element_field(&tx, Complex64::new(0.0, 0.0), &Point3::new(0.0, 2.0, 1.5), &room(), &cfg).unwrap();
        assert_eq!(zero.norm(), 0.0);
        let one = Complex64::new(1.0, 0.0);
        let e1 = element_field(&tx, one, &Point3::new(0.0, 1.25, 1.5), &room(), &cfg).unwrap();
        let e2 = element_field(&tx, one, &Point3::new(0.0, 2.5, 1.5), &room(), &cfg).unwrap();
        assert_eq!(e1.norm() / e2.norm(), 2.0);
    }

    #[test]
    fn coincident_probe_errors() {
        let p = Point3::new(0.0, 1.0, 1.5);
        let err = element_field(&p, Complex64::new(1.0, 0.0), &p, &room(), &FieldConfig::default()).unwrap_err();
        assert!(matches!(err, FieldError::Propagation(ChannelError::Coincident { .. })));
    }

    fn single_element() -> ArrayGeometry {
        build_array(1, 1, 0.057, Point3::new(0.0, 0.0, 1.5), &ActiveSelection::All, PAPER_CARRIER_HZ).unwrap()
    }

    #[test]
    fn single_element_single_stream_reduces() {
        let w = PrecodingMatrix {
            w: ComplexMatrix::from_rows(&[vec![Complex64::new(0.0, 2.0)]]).unwrap(),
            per_stream_power: 4.0,
        };
        let probe = Point3::new(1.0, 3.0, 1.5);
        let cfg = FieldConfig::default();
        let e = superpose_fields(&single_element(), &w, &probe, &room(), &cfg).unwrap();
        let direct = element_field(&Point3::new(0.0, 0.0, 1.5), Complex64::new(0.0, 2.0), &probe, &room(), &cfg).unwrap();
        assert!((e - direct.norm()).abs() < 1e-15);
    }

    #[test]
    fn two_equal_streams_add_in_power() {
        let w = PrecodingMatrix {
            w: ComplexMatrix::from_rows(&[vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]]).unwrap(),
            per_stream_power: 1.0,
        };
        let probe = Point3::new(0.5, 2.0, 1.5);
        let cfg = FieldConfig::default();
        let e = superpose_fields(&single_element(), &w, &probe, &room(), &cfg).unwrap();
        let one = element_field(&Point3::new(0.0, 0.0, 1.5), Complex64::new(1.0, 0.0), &probe, &room(), &cfg).unwrap();
        assert!((e - one.norm() * 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn power_to_field_values() {
        assert_eq!(power_to_field(0.0, PAPER_CARRIER_HZ, 1.0).unwrap(), 0.0);
        assert!(matches!(power_to_field(-1.0, PAPER_CARRIER_HZ, 1.0), Err(FieldError::NegativePower(_))));
        // Hand evaluation: λ = 0.113989528 m, so E = sqrt(1e-6·376.730313668·4π/λ²).
        let e = power_to_field(1e-6, PAPER_CARRIER_HZ, 1.0).unwrap();
        assert!((e - 0.603_608_381).abs() < 1e-5, "{e}");
        for f in [0.01, 1.37, 3.09, 41.0] {
            let p = field_to_power(f, PAPER_CARRIER_HZ, 2.5);
            assert!((power_to_field(p, PAPER_CARRIER_HZ, 2.5).unwrap() - f).abs() <= 1e-12 * f);
        }
    }

    #[test]
    fn zero_precoder_gives_zero_map() {
        let array = build_array(16, 8, 0.057, Point3::new(0.0, 0.0, 1.5), &ActiveSelection::central_8x8(), PAPER_CARRIER_HZ)
            .unwrap();
        let grid = GridSpec::default().build(&room()).unwrap();
        let w = PrecodingMatrix { w: ComplexMatrix::zeros(64, 2), per_stream_power: 0.0 };
        let map = compute_heatmap("0", &array, &room(), &w, &grid, &FieldConfig::default()).unwrap();
        assert_eq!(map.values.len(), 56);
        assert!(map.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn precoder_row_mismatch_rejected() {
        let grid = GridSpec::default().build(&room()).unwrap();
        let w = PrecodingMatrix { w: ComplexMatrix::zeros(3, 1), per_stream_power: 0.0 };
        let err = compute_heatmap("0", &single_element(), &room(), &w, &grid, &FieldConfig::default()).unwrap_err();
        assert_eq!(err, FieldError::Shape { rows: 3, active: 1 });
    }
}
