//! Room, transmit array, UE placements and probe grid.
//!
//! Coordinates: the array centre sits at `x = 0, y = 0` with boresight along
//! `+y`; `z` is height above the floor.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::SPEED_OF_LIGHT;

pub const PAPER_CARRIER_HZ: f64 = 2.63e9;
pub const ANTENNAS_PER_UE: usize = 4;
pub const MAX_UES: usize = 8;

const COORD_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid geometry: {0}")]
    Invalid(String),
    #[error("{what} at ({x}, {y}, {z}) lies outside the room")]
    OutsideRoom { what: String, x: f64, y: f64, z: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Amplitude reflection coefficient of each bounding surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallReflections {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub floor: f64,
    pub ceiling: f64,
}

impl Default for WallReflections {
    fn default() -> Self {
        WallReflections {
            x_min: -0.6,
            x_max: -0.6,
            y_min: -0.6,
            y_max: -0.6,
            floor: -0.4,
            ceiling: -0.4,
        }
    }
}

impl WallReflections {
    pub fn zero() -> Self {
        WallReflections {
            x_min: 0.0,
            x_max: 0.0,
            y_min: 0.0,
            y_max: 0.0,
            floor: 0.0,
            ceiling: 0.0,
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.x_min, self.x_max, self.y_min, self.y_max, self.floor, self.ceiling]
    }
}

/// Rectangular room. The footprint spans `x ∈ [−width/2, width/2]` and
/// `y ∈ [back_wall_y, back_wall_y + length]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Room {
    pub length_y: f64,
    pub width_x: f64,
    pub height_z: f64,
    /// Position of the wall behind the array; the array plane is `y = 0`.
    pub back_wall_y: f64,
    pub wall_reflection: Option<WallReflections>,
}

impl Default for Room {
    fn default() -> Self {
        Room {
            length_y: 15.0,
            width_x: 7.5,
            height_z: 3.0,
            back_wall_y: -0.5,
            wall_reflection: Some(WallReflections::default()),
        }
    }
}

impl Room {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.length_y > 0.0 && self.width_x > 0.0 && self.height_z > 0.0) {
            return Err(GeometryError::Invalid("room dimensions must be positive".into()));
        }
        if let Some(r) = &self.wall_reflection {
            if r.as_array().iter().any(|c| !(c.abs() <= 1.0)) {
                return Err(GeometryError::Invalid(
                    "reflection coefficients must satisfy |r| <= 1".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn x_bounds(&self) -> (f64, f64) {
        (-self.width_x / 2.0, self.width_x / 2.0)
    }

    pub fn y_bounds(&self) -> (f64, f64) {
        (self.back_wall_y, self.back_wall_y + self.length_y)
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        let (x0, x1) = self.x_bounds();
        let (y0, y1) = self.y_bounds();
        x >= x0 - COORD_EPS && x <= x1 + COORD_EPS && y >= y0 - COORD_EPS && y <= y1 + COORD_EPS
    }

    pub fn contains(&self, p: &Point3) -> bool {
        self.contains_xy(p.x, p.y) && p.z >= -COORD_EPS && p.z <= self.height_z + COORD_EPS
    }
}

/// Which elements of the planar array radiate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "policy")]
pub enum ActiveSelection {
    All,
    /// Centred `rows × cols` sub-array.
    Central { rows: usize, cols: usize },
    /// Explicit element indices into the row-major element list.
    Indices { indices: Vec<usize> },
}

impl ActiveSelection {
    pub fn central_8x8() -> Self {
        ActiveSelection::Central { rows: 8, cols: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArrayGeometry {
    pub rows: usize,
    pub cols: usize,
    /// Row-major: index `r * cols + c`, `r` along `z`, `c` along `x`.
    pub element_positions: Vec<Point3>,
    pub active_mask: Vec<bool>,
    pub element_spacing: f64,
    pub carrier_frequency: f64,
}

impl ArrayGeometry {
    pub fn active_positions(&self) -> Vec<Point3> {
        self.element_positions
            .iter()
            .zip(&self.active_mask)
            .filter(|(_, &on)| on)
            .map(|(p, _)| *p)
            .collect()
    }

    pub fn active_count(&self) -> usize {
        self.active_mask.iter().filter(|&&on| on).count()
    }

    /// Largest side of the active aperture, counting one element pitch per
    /// element.
    pub fn active_aperture(&self) -> f64 {
        let pos = self.active_positions();
        if pos.is_empty() {
            return 0.0;
        }
        let span = |f: fn(&Point3) -> f64| {
            let (lo, hi) = pos
                .iter()
                .map(f)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            hi - lo + self.element_spacing
        };
        span(|p| p.x).max(span(|p| p.z))
    }

    /// Fraunhofer distance `2D²/λ` of the active aperture.
    pub fn far_field_distance(&self) -> f64 {
        let d = self.active_aperture();
        2.0 * d * d / (SPEED_OF_LIGHT / self.carrier_frequency)
    }
}

pub fn half_wavelength(frequency: f64) -> f64 {
    SPEED_OF_LIGHT / frequency / 2.0
}

pub fn build_array(
    rows: usize,
    cols: usize,
    spacing: f64,
    center: Point3,
    active: &ActiveSelection,
    carrier_frequency: f64,
) -> Result<ArrayGeometry, GeometryError> {
    if rows == 0 || cols == 0 {
        return Err(GeometryError::Invalid("array needs at least one row and column".into()));
    }
    if !(spacing > 0.0) {
        return Err(GeometryError::Invalid("element spacing must be positive".into()));
    }
    if !(carrier_frequency > 0.0) {
        return Err(GeometryError::Invalid("carrier frequency must be positive".into()));
    }
    let z_off = (rows as f64 - 1.0) / 2.0;
    let x_off = (cols as f64 - 1.0) / 2.0;
    let mut element_positions = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            element_positions.push(Point3::new(
                center.x + (c as f64 - x_off) * spacing,
                center.y,
                center.z + (r as f64 - z_off) * spacing,
            ));
        }
    }
    let n = rows * cols;
    let active_mask = match active {
        ActiveSelection::All => vec![true; n],
        ActiveSelection::Central { rows: ar, cols: ac } => {
            if *ar > rows || *ac > cols || ar * ac == 0 {
                return Err(GeometryError::Invalid(format!(
                    "active sub-array {ar}x{ac} does not fit in {rows}x{cols}"
                )));
            }
            let r0 = (rows - ar) / 2;
            let c0 = (cols - ac) / 2;
            (0..n)
                .map(|i| {
                    let (r, c) = (i / cols, i % cols);
                    (r0..r0 + ar).contains(&r) && (c0..c0 + ac).contains(&c)
                })
                .collect()
        }
        ActiveSelection::Indices { indices } => {
            if indices.len() > n {
                return Err(GeometryError::Invalid(format!(
                    "{} active elements requested but array has {n}",
                    indices.len()
                )));
            }
            let mut mask = vec![false; n];
            for &i in indices {
                if i >= n || mask[i] {
                    return Err(GeometryError::Invalid(format!("bad active element index {i}")));
                }
                mask[i] = true;
            }
            mask
        }
    };
    Ok(ArrayGeometry {
        rows,
        cols,
        element_positions,
        active_mask,
        element_spacing: spacing,
        carrier_frequency,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    /// `(x, y)` in meters.
    pub ue_positions: Vec<[f64; 2]>,
    pub antennas_per_ue: usize,
    pub total_tx_power: f64,
}

impl Scenario {
    pub fn new(id: impl Into<String>, ue_positions: Vec<[f64; 2]>, total_tx_power: f64) -> Self {
        Scenario {
            id: id.into(),
            ue_positions,
            antennas_per_ue: ANTENNAS_PER_UE,
            total_tx_power,
        }
    }

    pub fn num_ues(&self) -> usize {
        self.ue_positions.len()
    }

    pub fn total_ue_antennas(&self) -> usize {
        self.num_ues() * self.antennas_per_ue
    }

    pub fn validate(&self, room: &Room) -> Result<(), GeometryError> {
        if self.ue_positions.is_empty() || self.ue_positions.len() > MAX_UES {
            return Err(GeometryError::Invalid(format!(
                "scenario {} has {} UEs; expected 1..={MAX_UES}",
                self.id,
                self.ue_positions.len()
            )));
        }
        if self.antennas_per_ue == 0 {
            return Err(GeometryError::Invalid("antennas_per_ue must be >= 1".into()));
        }
        if !(self.total_tx_power > 0.0) {
            return Err(GeometryError::Invalid("total_tx_power must be positive".into()));
        }
        for &[x, y] in &self.ue_positions {
            if !room.contains_xy(x, y) {
                return Err(GeometryError::OutsideRoom {
                    what: format!("UE of scenario {}", self.id),
                    x,
                    y,
                    z: 0.0,
                });
            }
        }
        Ok(())
    }

    /// Antenna positions of UE `k`: a line of `antennas_per_ue` vertical
    /// dipoles spaced `spacing` along `x`, centred on the UE.
    pub fn ue_antenna_positions(&self, k: usize, spacing: f64, height: f64) -> Vec<Point3> {
        let [x, y] = self.ue_positions[k];
        let off = (self.antennas_per_ue as f64 - 1.0) / 2.0;
        (0..self.antennas_per_ue)
            .map(|a| Point3::new(x + (a as f64 - off) * spacing, y, height))
            .collect()
    }
}

/// The eight single- and multi-user test cases, ids `"1"`..`"8"`.
pub fn standard_scenarios() -> Vec<Scenario> {
    standard_scenarios_with_power(1.0)
}

pub fn standard_scenarios_with_power(total_tx_power: f64) -> Vec<Scenario> {
    let a = [0.0, 8.0];
    let b = [-3.0, 4.0];
    let c = [3.0, 2.0];
    let d = [0.0, 4.0];
    let layouts: [Vec<[f64; 2]>; 8] = [
        vec![a],
        vec![b],
        vec![c],
        vec![b, c],
        vec![a, d],
        vec![a, b],
        vec![a, c],
        vec![a, b, c],
    ];
    layouts
        .into_iter()
        .enumerate()
        .map(|(i, ues)| Scenario::new((i + 1).to_string(), ues, total_tx_power))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeGrid {
    /// Row-major: ascending `y`, then ascending `x`.
    pub points: Vec<Point3>,
    pub spacing: f64,
    pub probe_height: f64,
    pub nx: usize,
    pub ny: usize,
}

impl ProbeGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn x_values(&self) -> Vec<f64> {
        self.points.iter().take(self.nx).map(|p| p.x).collect()
    }

    pub fn y_values(&self) -> Vec<f64> {
        self.points.iter().step_by(self.nx.max(1)).map(|p| p.y).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub spacing: f64,
    pub height: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            x_min: -3.0,
            x_max: 3.0,
            y_min: 1.0,
            y_max: 8.0,
            spacing: 1.0,
            height: 1.5,
        }
    }
}

impl GridSpec {
    pub fn build(&self, room: &Room) -> Result<ProbeGrid, GeometryError> {
        build_grid(self.x_min, self.x_max, self.y_min, self.y_max, self.spacing, self.height, room)
    }
}

fn lattice(lo: f64, hi: f64, spacing: f64) -> Vec<f64> {
    let steps = ((hi - lo) / spacing + 1e-9).floor() as usize;
    (0..=steps).map(|i| lo + i as f64 * spacing).collect()
}

/// Regular lattice including both end points. A degenerate range
/// (`min == max`) yields a single column or row.
pub fn build_grid(
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    spacing: f64,
    height: f64,
    room: &Room,
) -> Result<ProbeGrid, GeometryError> {
    if !(x_max >= x_min && y_max >= y_min) {
        return Err(GeometryError::Invalid("grid bounds must satisfy min <= max".into()));
    }
    if !(spacing > 0.0) {
        return Err(GeometryError::Invalid("grid spacing must be positive".into()));
    }
    let xs = lattice(x_min, x_max, spacing);
    let ys = lattice(y_min, y_max, spacing);
    let mut points = Vec::with_capacity(xs.len() * ys.len());
    for &y in &ys {
        for &x in &xs {
            let p = Point3::new(x, y, height);
            if !room.contains(&p) {
                return Err(GeometryError::OutsideRoom {
                    what: "probe grid point".into(),
                    x,
                    y,
                    z: height,
                });
            }
            points.push(p);
        }
    }
    Ok(ProbeGrid {
        points,
        spacing,
        probe_height: height,
        nx: xs.len(),
        ny: ys.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_array_has_64_active_of_128() {
        let a = build_array(16, 8, 0.057, Point3::new(0.0, 0.0, 1.5), &ActiveSelection::central_8x8(), PAPER_CARRIER_HZ)
            .unwrap();
        assert_eq!(a.element_positions.len(), 128);
        assert_eq!(a.active_count(), 64);
        // Centred, so the active set is symmetric about x = 0 and z = 1.5.
        let act = a.active_positions();
        let mx: f64 = act.iter().map(|p| p.x).sum::<f64>() / 64.0;
        let mz: f64 = act.iter().map(|p| p.z).sum::<f64>() / 64.0;
        assert!(mx.abs() < 1e-12 && (mz - 1.5).abs() < 1e-12);
        assert!(act.iter().all(|p| p.y == 0.0));
    }

    #[test]
    fn single_element_at_center() {
        let a = build_array(1, 1, 0.057, Point3::default(), &ActiveSelection::All, PAPER_CARRIER_HZ).unwrap();
        assert_eq!(a.element_positions, vec![Point3::default()]);
    }

    #[test]
    fn two_by_two_neighbor_spacing() {
        let d = 0.1;
        let a = build_array(2, 2, d, Point3::default(), &ActiveSelection::All, PAPER_CARRIER_HZ).unwrap();
        let p = &a.element_positions;
        for (i, j) in [(0, 1), (2, 3), (0, 2), (1, 3)] {
            assert!((p[i].distance(&p[j]) - d).abs() < 1e-15);
        }
    }

    #[test]
    fn oversized_selection_rejected() {
        let sel = ActiveSelection::Central { rows: 9, cols: 8 };
        assert!(build_array(8, 8, 0.05, Point3::default(), &sel, PAPER_CARRIER_HZ).is_err());
        let sel = ActiveSelection::Indices { indices: (0..5).collect() };
        assert!(build_array(2, 2, 0.05, Point3::default(), &sel, PAPER_CARRIER_HZ).is_err());
    }

    #[test]
    fn eight_scenarios_with_four_antennas() {
        let s = standard_scenarios();
        assert_eq!(s.len(), 8);
        assert_eq!(s[0].ue_positions, vec![[0.0, 8.0]]);
        assert_eq!(s[7].ue_positions, vec![[0.0, 8.0], [-3.0, 4.0], [3.0, 2.0]]);
        assert!(s.iter().all(|sc| sc.antennas_per_ue == 4));
        let room = Room::default();
        for sc in &s {
            sc.validate(&room).unwrap();
            for &[x, y] in &sc.ue_positions {
                assert!(x.abs() <= 3.75 && (0.0..=15.0).contains(&y));
            }
        }
    }

    #[test]
    fn default_grid_is_7_by_8() {
        let g = GridSpec::default().build(&Room::default()).unwrap();
        assert_eq!(g.len(), 56);
        assert_eq!(g.x_values(), vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
        assert_eq!(g.y_values(), (1..=8).map(f64::from).collect::<Vec<_>>());
        // Row-major, y then x.
        assert_eq!(g.points[0], Point3::new(-3.0, 1.0, 1.5));
        assert_eq!(g.points[7], Point3::new(-3.0, 2.0, 1.5));
    }

    #[test]
    fn degenerate_grid_is_single_point() {
        let g = build_grid(0.0, 0.0, 0.0, 0.0, 1.0, 1.5, &Room::default()).unwrap();
        assert_eq!(g.points, vec![Point3::new(0.0, 0.0, 1.5)]);
    }

    #[test]
    fn grid_outside_room_rejected() {
        let err = build_grid(-5.0, 5.0, 1.0, 2.0, 1.0, 1.5, &Room::default()).unwrap_err();
        assert!(matches!(err, GeometryError::OutsideRoom { .. }));
    }

    #[test]
    fn far_field_of_8x8_subarray() {
        let f = PAPER_CARRIER_HZ;
        let a = build_array(16, 8, 0.057, Point3::new(0.0, 0.0, 1.5), &ActiveSelection::central_8x8(), f).unwrap();
        assert!((a.active_aperture() - 0.456).abs() < 1e-12);
        assert!((a.far_field_distance() - 3.65).abs() < 0.05);
    }
}
