use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::channel::{ChannelMode, ChannelModelConfig, ElementPattern};
use crate::compliance::LimitTable;
use crate::field::FieldConfig;
use crate::geometry::{
    build_array, half_wavelength, standard_scenarios_with_power, ActiveSelection, ArrayGeometry, GeometryError,
    GridSpec, Point3, Room, Scenario, ANTENNAS_PER_UE, PAPER_CARRIER_HZ,
};
use crate::ofdm::OfdmConfig;

use super::RunnerError;

/// The annotated defaults shipped with the crate.
pub const PAPER_DEFAULTS_TOML: &str = include_str!("../../configs/paper-defaults.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
    Svg,
    Ascii,
}

impl ExportFormat {
    pub fn all() -> Vec<ExportFormat> {
        vec![ExportFormat::Csv, ExportFormat::Json, ExportFormat::Svg, ExportFormat::Ascii]
    }

    pub fn parse(s: &str) -> Option<ExportFormat> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Some(ExportFormat::Csv),
            "json" => Some(ExportFormat::Json),
            "svg" => Some(ExportFormat::Svg),
            "ascii" | "txt" => Some(ExportFormat::Ascii),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArrayConfig {
    pub rows: usize,
    pub cols: usize,
    /// Element pitch in meters; defaults to half a wavelength.
    pub spacing_m: Option<f64>,
    pub center_m: [f64; 3],
    pub active: ActiveSelection,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        ArrayConfig {
            rows: 16,
            cols: 8,
            spacing_m: None,
            center_m: [0.0, 0.0, 1.5],
            active: ActiveSelection::central_8x8(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub mode: ChannelMode,
    pub pattern: ElementPattern,
    /// `inf` for perfect CSI.
    pub csi_snr_db: f64,
    pub subcarrier_index: i64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        let d = ChannelModelConfig::default();
        ChannelSection { mode: d.mode, pattern: d.pattern, csi_snr_db: d.csi_snr_db, subcarrier_index: d.subcarrier_index }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatsSection {
    /// x coordinate of the exported cut.
    pub cut_x_m: f64,
    /// Drop cut samples closer than the Fraunhofer distance before fitting.
    pub exclude_near_field: bool,
}

impl Default for StatsSection {
    fn default() -> Self {
        StatsSection { cut_x_m: 0.0, exclude_near_field: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderSection {
    /// Top of the linear colour scale, V/m.
    pub vmax_vpm: f64,
}

impl Default for RenderSection {
    fn default() -> Self {
        RenderSection { vmax_vpm: 41.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldSection {
    pub calibration: f64,
}

impl Default for FieldSection {
    fn default() -> Self {
        FieldSection { calibration: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomScenario {
    pub id: String,
    pub ue_positions: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub workers: usize,
    pub output_dir: PathBuf,
    pub formats: Vec<ExportFormat>,
    /// Scenario ids to run; empty selects every standard and custom one.
    pub scenarios: Vec<String>,
    pub custom_scenarios: Vec<CustomScenario>,
    pub total_tx_power_w: f64,
    pub carrier_frequency_hz: f64,
    pub room: Room,
    pub array: ArrayConfig,
    pub channel: ChannelSection,
    pub ofdm: OfdmConfig,
    pub grid: GridSpec,
    pub field: FieldSection,
    pub stats: StatsSection,
    pub render: RenderSection,
    pub limits: LimitTable,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: Some(2019),
            workers: 4,
            output_dir: PathBuf::from("out"),
            formats: ExportFormat::all(),
            scenarios: Vec::new(),
            custom_scenarios: Vec::new(),
            total_tx_power_w: 1.0,
            carrier_frequency_hz: PAPER_CARRIER_HZ,
            room: Room::default(),
            array: ArrayConfig::default(),
            channel: ChannelSection::default(),
            ofdm: OfdmConfig::default(),
            grid: GridSpec::default(),
            field: FieldSection::default(),
            stats: StatsSection::default(),
            render: RenderSection::default(),
            limits: LimitTable::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, RunnerError> {
        toml::from_str(s).map_err(|e| RunnerError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunnerError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            RunnerError::Config(msg) => RunnerError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn paper_defaults() -> Self {
        Self::from_toml_str(PAPER_DEFAULTS_TOML).expect("shipped defaults parse")
    }

    pub fn element_spacing(&self) -> f64 {
        self.array.spacing_m.unwrap_or_else(|| half_wavelength(self.carrier_frequency_hz))
    }

    pub fn build_array(&self) -> Result<ArrayGeometry, GeometryError> {
        let [x, y, z] = self.array.center_m;
        build_array(
            self.array.rows,
            self.array.cols,
            self.element_spacing(),
            Point3::new(x, y, z),
            &self.array.active,
            self.carrier_frequency_hz,
        )
    }

    /// Standard scenarios followed by custom ones, all at the configured
    /// transmit power.
    pub fn all_scenarios(&self) -> Vec<Scenario> {
        let mut all = standard_scenarios_with_power(self.total_tx_power_w);
        all.extend(self.custom_scenarios.iter().map(|c| Scenario {
            id: c.id.clone(),
            ue_positions: c.ue_positions.clone(),
            antennas_per_ue: ANTENNAS_PER_UE,
            total_tx_power: self.total_tx_power_w,
        }));
        all
    }

    /// Scenarios selected for the run, in selection order.
    pub fn selected_scenarios(&self) -> Result<Vec<Scenario>, RunnerError> {
        let all = self.all_scenarios();
        if self.scenarios.is_empty() {
            return Ok(all);
        }
        self.scenarios
            .iter()
            .map(|id| {
                all.iter()
                    .find(|s| &s.id == id)
                    .cloned()
                    .ok_or_else(|| RunnerError::Config(format!("scenarios: unknown scenario id {id:?}")))
            })
            .collect()
    }

    pub fn channel_config(&self, rng_seed: u64) -> ChannelModelConfig {
        ChannelModelConfig {
            mode: self.channel.mode,
            carrier_frequency: self.carrier_frequency_hz,
            csi_snr_db: self.channel.csi_snr_db,
            rng_seed,
            pattern: self.channel.pattern,
            subcarrier_index: self.channel.subcarrier_index,
            subcarrier_spacing: self.ofdm.subcarrier_spacing,
        }
    }

    pub fn ofdm_config(&self, rng_seed: u64) -> OfdmConfig {
        OfdmConfig { rng_seed, ..self.ofdm.clone() }
    }

    pub fn field_config(&self) -> FieldConfig {
        FieldConfig {
            mode: self.channel.mode,
            pattern: self.channel.pattern,
            frequency: self.carrier_frequency_hz,
            calibration: self.field.calibration,
        }
    }
}
