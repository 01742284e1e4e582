use std::path::Path;

use mmimo_emf::channel::{estimate_csi, generate_channel};
use mmimo_emf::ofdm::transmit_frame;
use mmimo_emf::precoding::{combining_vectors, effective_channel, interference_ratio, zf_precoder_with};
use mmimo_emf::runner::{self, config::CustomScenario, simulate, verify_manifest, RunConfig, RunnerError};

fn quick() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.ofdm.frames = 1;
    cfg
}

#[test]
fn default_run_writes_the_expected_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick();
    let manifest = runner::run(&cfg, dir.path()).unwrap();
    let count = |kind: &str, ext: &str| manifest.artifacts.iter().filter(|a| a.kind == kind && a.path.ends_with(ext)).count();
    assert_eq!(count("heatmap", ".csv"), 9);
    assert_eq!(manifest.artifacts.iter().filter(|a| a.kind == "heatmap" && a.scenario.is_some() && a.path.ends_with(".csv")).count(), 8);
    assert_eq!(count("ber", ".csv"), 1);
    assert_eq!(count("compliance", ".json"), 3);
    assert!(dir.path().join("heatmaps/average.svg").exists());
    assert!(dir.path().join("cuts/average_x0.csv").exists());

    let csv = std::fs::read_to_string(dir.path().join("heatmaps/scenario_1.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x_m,y_m,e_vpm"));
    assert_eq!(lines.next().unwrap().split(',').take(2).collect::<Vec<_>>(), ["-3", "1"]);
    assert_eq!(csv.lines().count(), 57);
    let ber = std::fs::read_to_string(dir.path().join("ber.csv")).unwrap();
    assert!(ber.starts_with("scenario,ue,ber,bits\n1,1,"));
    assert_eq!(ber.lines().count(), 1 + 1 + 1 + 1 + 2 * 4 + 3);

    assert!(verify_manifest(dir.path()).unwrap().is_empty());
    let mut on_disk = Vec::new();
    collect(dir.path(), dir.path(), &mut on_disk);
    on_disk.retain(|p| p != "manifest.json");
    on_disk.sort();
    let mut listed: Vec<String> = manifest.artifacts.iter().map(|a| a.path.clone()).collect();
    listed.sort();
    assert_eq!(on_disk, listed);

    std::fs::write(dir.path().join("ber.csv"), "tampered").unwrap();
    assert_eq!(verify_manifest(dir.path()).unwrap(), vec!["ber.csv".to_string()]);
}

fn collect(root: &Path, dir: &Path, out: &mut Vec<String>) {
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            collect(root, &p, out);
        } else {
            out.push(p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/"));
        }
    }
}

#[test]
fn single_scenario_average_is_its_map() {
    let cfg = RunConfig { scenarios: vec!["1".into()], ..quick() };
    let out = simulate(&cfg).unwrap();
    assert_eq!(out.scenarios.len(), 1);
    assert_eq!(out.average.values, out.scenarios[0].heatmap.values);
}

#[test]
fn validation_examples() {
    assert!(runner::validate(&RunConfig::default()).is_empty());

    let cfg = RunConfig { custom_scenarios: vec![CustomScenario { id: "far".into(), ue_positions: vec![[10.0, 4.0]] }], ..RunConfig::default() };
    let f = runner::validate(&cfg);
    assert_eq!(f.len(), 1);
    assert!(f[0].path.contains("ue_positions[0]") && f[0].message.contains("outside the room"), "{f:?}");

    let mut cfg = RunConfig::default();
    cfg.ofdm.fft_size = 2048;
    let f = runner::validate(&cfg);
    assert!(f.iter().any(|x| x.path == "ofdm" && x.message.contains("30000")), "{f:?}");

    let cfg = RunConfig { seed: None, scenarios: vec!["9".into()], ..RunConfig::default() };
    let paths: Vec<String> = runner::validate(&cfg).into_iter().map(|f| f.path).collect();
    assert!(paths.contains(&"seed".to_string()) && paths.contains(&"scenarios[0]".to_string()), "{paths:?}");
    assert!(matches!(runner::run(&cfg, Path::new("/nonexistent/never")), Err(RunnerError::Validation(_))));
}

#[test]
fn failed_run_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut cfg = RunConfig { custom_scenarios: vec![CustomScenario { id: "same".into(), ue_positions: vec![[0.0, 5.0], [0.0, 5.0]] }], ..quick() };
    // Two UEs on one spot are inseparable once CSI noise cannot mask it.
    cfg.channel.csi_snr_db = f64::INFINITY;
    let err = runner::run(&cfg, &out).unwrap_err();
    assert!(matches!(err, RunnerError::Scenario { ref scenario, .. } if scenario == "same"), "{err}");
    assert!(err.to_string().contains("ZF infeasible"), "{err}");
    assert!(!out.exists());
}

#[test]
fn config_round_trips_through_toml() {
    let mut cfg = RunConfig::default();
    cfg.custom_scenarios.push(CustomScenario { id: "c1".into(), ue_positions: vec![[1.0, 6.0], [-2.0, 3.0]] });
    cfg.channel.csi_snr_db = f64::INFINITY;
    let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
    assert_eq!(back, cfg);
    assert!(RunConfig::from_toml_str("unknown_key = 1").is_err());
}

#[test]
fn seed_changes_ber_but_not_maps() {
    let a = simulate(&RunConfig { scenarios: vec!["8".into()], ..quick() }).unwrap();
    let b = simulate(&RunConfig { seed: Some(7), scenarios: vec!["8".into()], ..quick() }).unwrap();
    assert_ne!(a.scenarios[0].ber.per_ue_errors, b.scenarios[0].ber.per_ue_errors);
    let rel: f64 = a.average.values.iter().zip(&b.average.values).map(|(x, y)| (x - y).abs() / x).fold(0.0, f64::max);
    assert!(rel < 0.05, "{rel}");
}

#[test]
fn ber_is_monotone_in_snr() {
    let cfg = quick();
    let array = cfg.build_array().unwrap();
    let s = &cfg.all_scenarios()[7];
    let ch = cfg.channel_config(5);
    let h = generate_channel(&array, s, &cfg.room, &ch).unwrap();
    let est = estimate_csi(&h, &ch);
    let c = combining_vectors(&est, s).unwrap();
    let w = zf_precoder_with(&est, s, &c).unwrap();
    let mut last = f64::INFINITY;
    for snr in [52.0, 55.0, 58.0, 61.0, 64.0] {
        let o = mmimo_emf::ofdm::OfdmConfig { noise_snr_db: snr, rng_seed: 9, frames: 5, ..cfg.ofdm.clone() };
        assert!(o.bits_per_ue() >= 1_000_000);
        let r = transmit_frame("8", &w, &h, &c, &o).unwrap();
        let m = r.mean_ber();
        assert!(m <= last, "BER rose to {m} at {snr} dB");
        last = m;
    }
}

#[test]
fn fewer_users_get_more_gain() {
    let cfg = RunConfig::default();
    let array = cfg.build_array().unwrap();
    let all = cfg.all_scenarios();
    for seed in 0..10 {
        let ch = cfg.channel_config(seed);
        let gain = |idx: usize| {
            let s = &all[idx];
            let h = generate_channel(&array, s, &cfg.room, &ch).unwrap();
            let est = estimate_csi(&h, &ch);
            let c = combining_vectors(&est, s).unwrap();
            let w = zf_precoder_with(&est, s, &c).unwrap();
            effective_channel(&h, &w, &c).unwrap()[(0, 0)].norm()
        };
        assert!(gain(0) >= gain(7), "seed {seed}");
    }
}

#[test]
fn more_users_raise_the_interference_floor() {
    let cfg = RunConfig::default();
    let array = cfg.build_array().unwrap();
    let all = cfg.all_scenarios();
    let mut floor = [0.0f64; 3];
    let seeds = 20;
    for seed in 0..seeds {
        let ch = cfg.channel_config(100 + seed);
        for (slot, idx) in [(0, 0), (1, 5), (2, 7)] {
            let s = &all[idx];
            let h = generate_channel(&array, s, &cfg.room, &ch).unwrap();
            let est = estimate_csi(&h, &ch);
            let c = combining_vectors(&est, s).unwrap();
            let w = zf_precoder_with(&est, s, &c).unwrap();
            floor[slot] += interference_ratio(&effective_channel(&h, &w, &c).unwrap()) / seeds as f64;
        }
    }
    assert!(floor[0] <= floor[1] && floor[1] <= floor[2], "{floor:?}");
}
