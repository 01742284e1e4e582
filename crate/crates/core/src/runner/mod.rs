//! Orchestration of the full measurement procedure and artifact output.
//!
//! For each scenario: ground-truth channel, CSI estimate, ZF precoder,
//! OFDM frame BER and heat map. Then the cross-scenario products: averaged
//! map, cut at the configured `x`, decay fits, summaries and compliance
//! reports. Everything is computed before the first file is written, and
//! the manifest is written last.

pub mod config;
pub mod export;
pub mod render;

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::channel::{estimate_csi, generate_channel};
use crate::compliance::{check, min_compliant_distance, ComplianceError, ComplianceReport};
use crate::field::{compute_heatmap, HeatMap};
use crate::geometry::{Room, Scenario};
use crate::ofdm::{transmit_frame, BerReport};
use crate::precoding::{combining_vectors, effective_channel, interference_ratio, zf_precoder_with, PrecodingMatrix};
use crate::stats::{average_heatmaps, extract_cut, fit_decay, summary, CutProfile, DecayFit, Summary};

pub use config::{ExportFormat, RunConfig};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("validation failed with {} finding(s): {}", .0.len(), .0.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("; "))]
    Validation(Vec<Finding>),
    #[error("scenario {scenario}: {source}")]
    Scenario {
        scenario: String,
        #[source]
        source: Box<crate::Error>,
    },
    #[error("I/O error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    /// Dotted path of the offending config field.
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Finding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn finding(path: impl Into<String>, message: impl Into<String>) -> Finding {
    Finding { path: path.into(), message: message.into() }
}

/// Checks a config without running it.
pub fn validate(cfg: &RunConfig) -> Vec<Finding> {
    let mut out = Vec::new();
    if cfg.seed.is_none() {
        out.push(finding("seed", "seed must be set"));
    }
    if cfg.workers == 0 {
        out.push(finding("workers", "must be at least 1"));
    }
    if cfg.formats.is_empty() {
        out.push(finding("formats", "at least one export format is required"));
    }
    if !(cfg.total_tx_power_w > 0.0 && cfg.total_tx_power_w.is_finite()) {
        out.push(finding("total_tx_power_w", "must be positive"));
    }
    if !(cfg.carrier_frequency_hz > 0.0) {
        out.push(finding("carrier_frequency_hz", "must be positive"));
    }
    if let Err(e) = cfg.room.validate() {
        out.push(finding("room", e.to_string()));
    }
    let array = match cfg.build_array() {
        Ok(a) => {
            for (i, p) in a.element_positions.iter().enumerate() {
                if !cfg.room.contains(p) {
                    out.push(finding(format!("array.element[{i}]"), "element lies outside the room"));
                    break;
                }
            }
            Some(a)
        }
        Err(e) => {
            out.push(finding("array", e.to_string()));
            None
        }
    };
    if let Err(e) = cfg.channel_config(0).validate(&cfg.room) {
        out.push(finding("channel", e.to_string()));
    }
    for f in cfg.ofdm.findings() {
        out.push(finding("ofdm", f));
    }
    match cfg.grid.build(&cfg.room) {
        Ok(grid) => {
            if let Some(a) = &array {
                if grid.points.iter().any(|p| a.element_positions.iter().any(|e| e == p)) {
                    out.push(finding("grid", "a probe point coincides with a transmit element"));
                }
            }
            if !grid.x_values().iter().any(|&x| (x - cfg.stats.cut_x_m).abs() <= 1e-9) {
                out.push(finding("stats.cut_x_m", "cut x is not a grid column"));
            }
        }
        Err(e) => out.push(finding("grid", e.to_string())),
    }
    if !(cfg.field.calibration > 0.0 && cfg.field.calibration.is_finite()) {
        out.push(finding("field.calibration", "must be positive"));
    }
    if !(cfg.render.vmax_vpm > 0.0) {
        out.push(finding("render.vmax_vpm", "must be positive"));
    }
    for (region, &limit) in &cfg.limits.entries {
        if !(limit > 0.0 && limit.is_finite()) {
            out.push(finding(format!("limits.{region}"), "limit must be positive"));
        }
    }
    let all = cfg.all_scenarios();
    for (i, id) in cfg.scenarios.iter().enumerate() {
        if !all.iter().any(|s| &s.id == id) {
            out.push(finding(format!("scenarios[{i}]"), format!("unknown scenario id {id:?}")));
        }
    }
    for (i, custom) in cfg.custom_scenarios.iter().enumerate() {
        if all.iter().filter(|s| s.id == custom.id).count() > 1 {
            out.push(finding(format!("custom_scenarios[{i}].id"), format!("duplicate scenario id {:?}", custom.id)));
        }
    }
    for (si, s) in all.iter().enumerate() {
        let path = if si < 8 { format!("scenario {}", s.id) } else { format!("custom_scenarios[{}]", si - 8) };
        if s.ue_positions.is_empty() || s.ue_positions.len() > crate::geometry::MAX_UES {
            out.push(finding(format!("{path}.ue_positions"), "needs between 1 and 8 UEs"));
        }
        for (k, &[x, y]) in s.ue_positions.iter().enumerate() {
            if !cfg.room.contains_xy(x, y) {
                out.push(finding(
                    format!("{path}.ue_positions[{k}]"),
                    format!("UE at ({x}, {y}) is outside the room"),
                ));
            }
        }
    }
    out
}

/// Per-scenario seed, stable under scenario selection and ordering.
pub fn derive_seed(seed: u64, scenario_id: &str, stream: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(scenario_id.as_bytes());
    h.update([0]);
    h.update(stream.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub ber: BerReport,
    /// Max off-diagonal over min diagonal of the true effective channel.
    pub interference_ratio: f64,
    pub effective_gain: Vec<f64>,
    #[serde(skip)]
    pub precoder: PrecodingMatrix,
    #[serde(skip)]
    pub heatmap: HeatMap,
}

pub fn simulate_scenario(cfg: &RunConfig, scenario: &Scenario, seed: u64) -> Result<ScenarioResult, crate::Error> {
    let array = cfg.build_array()?;
    let grid = cfg.grid.build(&cfg.room)?;
    simulate_scenario_with(cfg, scenario, seed, &array, &grid, &cfg.room)
}

/// Heat map of one scenario with the precoder a run would use, skipping
/// the OFDM stage.
pub fn scenario_heatmap(cfg: &RunConfig, scenario: &Scenario, seed: u64) -> Result<HeatMap, crate::Error> {
    let array = cfg.build_array()?;
    let grid = cfg.grid.build(&cfg.room)?;
    let precoder = scenario_precoder(cfg, scenario, seed, &array)?;
    Ok(compute_heatmap(&scenario.id, &array, &cfg.room, &precoder, &grid, &cfg.field_config())?)
}

fn scenario_precoder(
    cfg: &RunConfig,
    scenario: &Scenario,
    seed: u64,
    array: &crate::geometry::ArrayGeometry,
) -> Result<PrecodingMatrix, crate::Error> {
    let ch_cfg = cfg.channel_config(derive_seed(seed, &scenario.id, "csi"));
    let h_est = estimate_csi(&generate_channel(array, scenario, &cfg.room, &ch_cfg)?, &ch_cfg);
    let combiners = combining_vectors(&h_est, scenario)?;
    Ok(zf_precoder_with(&h_est, scenario, &combiners)?)
}

fn simulate_scenario_with(
    cfg: &RunConfig,
    scenario: &Scenario,
    seed: u64,
    array: &crate::geometry::ArrayGeometry,
    grid: &crate::geometry::ProbeGrid,
    room: &Room,
) -> Result<ScenarioResult, crate::Error> {
    let ch_cfg = cfg.channel_config(derive_seed(seed, &scenario.id, "csi"));
    let h_true = generate_channel(array, scenario, room, &ch_cfg)?;
    let h_est = estimate_csi(&h_true, &ch_cfg);
    let combiners = combining_vectors(&h_est, scenario)?;
    let precoder = zf_precoder_with(&h_est, scenario, &combiners)?;
    let eff = effective_channel(&h_true, &precoder, &combiners)?;
    let ber = transmit_frame(&scenario.id, &precoder, &h_true, &combiners, &cfg.ofdm_config(derive_seed(seed, &scenario.id, "ofdm")))?;
    let heatmap = compute_heatmap(&scenario.id, array, room, &precoder, grid, &cfg.field_config())?;
    Ok(ScenarioResult {
        scenario: scenario.clone(),
        interference_ratio: interference_ratio(&eff),
        effective_gain: (0..eff.rows()).map(|i| eff[(i, i)].norm()).collect(),
        ber,
        precoder,
        heatmap,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MapStats {
    pub map: String,
    pub summary: Summary,
    pub decay: Option<DecayFit>,
    pub decay_error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionCompliance {
    pub region: String,
    pub limit_vpm: f64,
    pub average: ComplianceReport,
    pub scenarios: Vec<ComplianceReport>,
    /// Exclusion distance along the cut over all scenario cuts, or the
    /// reason it could not be established.
    pub exclusion_distance_m: Option<f64>,
    pub exclusion_note: Option<String>,
}

/// Everything a run produces, before serialization.
#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub scenarios: Vec<ScenarioResult>,
    pub average: HeatMap,
    pub cuts: Vec<CutProfile>,
    pub average_cut: CutProfile,
    pub stats: Vec<MapStats>,
    pub compliance: Vec<RegionCompliance>,
    pub far_field_distance_m: f64,
}

fn map_stats(name: &str, map: &HeatMap, cut: &CutProfile, min_distance: f64) -> MapStats {
    let fit = fit_decay(&cut.beyond(min_distance));
    MapStats {
        map: name.to_string(),
        summary: summary(map),
        decay_error: fit.as_ref().err().map(|e| e.to_string()),
        decay: fit.ok(),
    }
}

/// Computes all run products in memory.
pub fn simulate(cfg: &RunConfig) -> Result<RunOutputs, RunnerError> {
    let findings = validate(cfg);
    if !findings.is_empty() {
        return Err(RunnerError::Validation(findings));
    }
    let seed = cfg.seed.expect("validated");
    let scenarios = cfg.selected_scenarios()?;
    let wrap = |scenario: &str, e: crate::Error| RunnerError::Scenario { scenario: scenario.to_string(), source: Box::new(e) };
    let array = cfg.build_array().map_err(|e| wrap("-", e.into()))?;
    let grid = cfg.grid.build(&cfg.room).map_err(|e| wrap("-", e.into()))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| RunnerError::Config(format!("workers: {e}")))?;
    let results: Vec<Result<ScenarioResult, RunnerError>> = pool.install(|| {
        use rayon::prelude::*;
        scenarios
            .par_iter()
            .map(|s| simulate_scenario_with(cfg, s, seed, &array, &grid, &cfg.room).map_err(|e| wrap(&s.id, e)))
            .collect()
    });
    let results: Vec<ScenarioResult> = results.into_iter().collect::<Result<_, _>>()?;

    let maps: Vec<HeatMap> = results.iter().map(|r| r.heatmap.clone()).collect();
    let average = average_heatmaps(&maps).map_err(|e| wrap("average", e.into()))?;
    let cut_x = cfg.stats.cut_x_m;
    let cuts: Vec<CutProfile> = maps
        .iter()
        .map(|m| extract_cut(m, cut_x).map_err(|e| wrap(&m.scenario_id, e.into())))
        .collect::<Result<_, _>>()?;
    let average_cut = extract_cut(&average, cut_x).map_err(|e| wrap("average", e.into()))?;

    let far_field = array.far_field_distance();
    let min_d = if cfg.stats.exclude_near_field { far_field } else { 0.0 };
    let mut stats: Vec<MapStats> = results
        .iter()
        .zip(&cuts)
        .map(|(r, c)| map_stats(&r.scenario.id, &r.heatmap, c, min_d))
        .collect();
    stats.push(map_stats("average", &average, &average_cut, min_d));

    let mut compliance = Vec::new();
    for region in cfg.limits.regions() {
        let to_err = |e: ComplianceError| wrap("compliance", e.into());
        let avg = check(&average, region, &cfg.limits).map_err(to_err)?;
        let per = maps
            .iter()
            .map(|m| check(m, region, &cfg.limits))
            .collect::<Result<Vec<_>, _>>()
            .map_err(to_err)?;
        let (exclusion_distance_m, exclusion_note) = match min_compliant_distance(&cuts, region, &cfg.limits) {
            Ok(d) => (Some(d), None),
            Err(e @ ComplianceError::BeyondProfile { .. }) => (None, Some(e.to_string())),
            Err(e) => return Err(to_err(e)),
        };
        compliance.push(RegionCompliance {
            region: region.to_string(),
            limit_vpm: avg.limit,
            average: avg,
            scenarios: per,
            exclusion_distance_m,
            exclusion_note,
        });
    }

    Ok(RunOutputs { scenarios: results, average, cuts, average_cut, stats, compliance, far_field_distance_m: far_field })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    #[serde(rename = "type")]
    pub kind: String,
    pub sha256: String,
    pub scenario: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub artifacts: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Artifact {
    path: String,
    kind: &'static str,
    scenario: Option<String>,
    content: String,
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("artifact serializes");
    s.push('\n');
    s
}

fn map_artifacts(out: &mut Vec<Artifact>, cfg: &RunConfig, map: &HeatMap, stem: &str, scenario: Option<&str>) {
    let sc = scenario.map(str::to_string);
    let vmax = cfg.render.vmax_vpm;
    for fmt in &cfg.formats {
        let (ext, content) = match fmt {
            ExportFormat::Csv => ("csv", export::heatmap_csv(map)),
            ExportFormat::Json => ("json", json(map)),
            ExportFormat::Svg => ("svg", render::render_svg(map, vmax)),
            ExportFormat::Ascii => ("txt", render::render_ascii(map, vmax)),
        };
        out.push(Artifact { path: format!("heatmaps/{stem}.{ext}"), kind: "heatmap", scenario: sc.clone(), content });
    }
}

#[derive(Serialize)]
struct BerJson<'a> {
    scenario: &'a str,
    reports: &'a BerReport,
    interference_ratio: f64,
    effective_gain: &'a [f64],
}

fn artifacts(cfg: &RunConfig, o: &RunOutputs) -> Vec<Artifact> {
    let mut out = Vec::new();
    let has = |f: ExportFormat| cfg.formats.contains(&f);
    for r in &o.scenarios {
        map_artifacts(&mut out, cfg, &r.heatmap, &format!("scenario_{}", r.scenario.id), Some(&r.scenario.id));
    }
    map_artifacts(&mut out, cfg, &o.average, "average", None);

    let bers: Vec<BerReport> = o.scenarios.iter().map(|r| r.ber.clone()).collect();
    if has(ExportFormat::Csv) {
        out.push(Artifact { path: "ber.csv".into(), kind: "ber", scenario: None, content: export::ber_csv(&bers) });
        let cut_name = export::fmt_sig9(cfg.stats.cut_x_m);
        for (r, c) in o.scenarios.iter().zip(&o.cuts) {
            out.push(Artifact {
                path: format!("cuts/scenario_{}_x{cut_name}.csv", r.scenario.id),
                kind: "cut",
                scenario: Some(r.scenario.id.clone()),
                content: export::cut_csv(c),
            });
        }
        out.push(Artifact {
            path: format!("cuts/average_x{cut_name}.csv"),
            kind: "cut",
            scenario: None,
            content: export::cut_csv(&o.average_cut),
        });
    }
    if has(ExportFormat::Json) {
        let ber_json: Vec<BerJson> = o
            .scenarios
            .iter()
            .map(|r| BerJson {
                scenario: &r.scenario.id,
                reports: &r.ber,
                interference_ratio: r.interference_ratio,
                effective_gain: &r.effective_gain,
            })
            .collect();
        out.push(Artifact { path: "ber.json".into(), kind: "ber", scenario: None, content: json(&ber_json) });
    }
    // Statistics and compliance are JSON-only products; always written.
    #[derive(Serialize)]
    struct StatsJson<'a> {
        far_field_distance_m: f64,
        near_field_excluded: bool,
        maps: &'a [MapStats],
    }
    out.push(Artifact {
        path: "stats.json".into(),
        kind: "stats",
        scenario: None,
        content: json(&StatsJson {
            far_field_distance_m: o.far_field_distance_m,
            near_field_excluded: cfg.stats.exclude_near_field,
            maps: &o.stats,
        }),
    });
    for c in &o.compliance {
        out.push(Artifact {
            path: format!("compliance/{}.json", c.region),
            kind: "compliance",
            scenario: None,
            content: json(c),
        });
    }
    out
}

/// Runs the configured scenarios and writes all artifacts plus a manifest
/// into `out_dir`.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<Manifest, RunnerError> {
    let outputs = simulate(cfg)?;
    write_outputs(cfg, &outputs, out_dir)
}

pub fn write_outputs(cfg: &RunConfig, outputs: &RunOutputs, out_dir: &Path) -> Result<Manifest, RunnerError> {
    let io = |p: &Path, e: std::io::Error| RunnerError::Io(format!("{}: {e}", p.display()));
    let arts = artifacts(cfg, outputs);
    let mut entries = Vec::with_capacity(arts.len());
    for a in arts {
        let path: PathBuf = out_dir.join(&a.path);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
        }
        std::fs::write(&path, a.content.as_bytes()).map_err(|e| io(&path, e))?;
        entries.push(ManifestEntry {
            path: a.path,
            kind: a.kind.to_string(),
            sha256: sha256_hex(a.content.as_bytes()),
            scenario: a.scenario,
        });
    }
    let manifest = Manifest { seed: cfg.seed.expect("validated"), artifacts: entries };
    let mpath = out_dir.join(MANIFEST_FILE);
    std::fs::write(&mpath, json(&manifest)).map_err(|e| io(&mpath, e))?;
    Ok(manifest)
}

/// Re-hashes every manifest entry under `dir`; returns paths that differ.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>, RunnerError> {
    let mpath = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&mpath).map_err(|e| RunnerError::Io(format!("{}: {e}", mpath.display())))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| RunnerError::Config(e.to_string()))?;
    let mut bad = Vec::new();
    for a in &manifest.artifacts {
        match std::fs::read(dir.join(&a.path)) {
            Ok(bytes) if sha256_hex(&bytes) == a.sha256 => {}
            _ => bad.push(a.path.clone()),
        }
    }
    Ok(bad)
}

/// Re-renders every heat-map CSV found in `input` (a file or directory).
pub fn render_csv(input: &Path, out_dir: &Path, formats: &[ExportFormat], vmax: f64, probe_height: f64) -> Result<Vec<PathBuf>, RunnerError> {
    let io = |p: &Path, e: std::io::Error| RunnerError::Io(format!("{}: {e}", p.display()));
    let mut files: Vec<PathBuf> = if input.is_dir() {
        std::fs::read_dir(input)
            .map_err(|e| io(input, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect()
    } else {
        vec![input.to_path_buf()]
    };
    files.sort();
    std::fs::create_dir_all(out_dir).map_err(|e| io(out_dir, e))?;
    let mut written = Vec::new();
    for f in files {
        let text = std::fs::read_to_string(&f).map_err(|e| io(&f, e))?;
        if !text.starts_with(export::HEATMAP_CSV_HEADER) {
            continue;
        }
        let stem = f.file_stem().and_then(|s| s.to_str()).unwrap_or("heatmap").to_string();
        let id = stem.strip_prefix("scenario_").unwrap_or(&stem).to_string();
        let map = export::parse_heatmap_csv(&text, &id, probe_height)?;
        for fmt in formats {
            let (ext, content) = match fmt {
                ExportFormat::Svg => ("svg", render::render_svg(&map, vmax)),
                ExportFormat::Ascii => ("txt", render::render_ascii(&map, vmax)),
                ExportFormat::Json => ("json", json(&map)),
                ExportFormat::Csv => continue,
            };
            let p = out_dir.join(format!("{stem}.{ext}"));
            std::fs::write(&p, content).map_err(|e| io(&p, e))?;
            written.push(p);
        }
    }
    Ok(written)
}
