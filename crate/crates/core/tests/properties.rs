use num_complex::Complex64;
use proptest::prelude::*;

use mmimo_emf::channel::{generate_channel, los_gain, ChannelMode, ElementPattern};
use mmimo_emf::compliance::{check, min_compliant_distance, LimitTable};
use mmimo_emf::field::{compute_heatmap, FieldConfig, HeatMap};
use mmimo_emf::geometry::{GridSpec, Point3, Room, Scenario, PAPER_CARRIER_HZ};
use mmimo_emf::numerics::{hermitian, matmul, right_pseudo_inverse, solve, ComplexMatrix};
use mmimo_emf::precoding::{combining_vectors, zf_precoder_with, PrecodingMatrix};
use mmimo_emf::runner::RunConfig;
use mmimo_emf::stats::{average_heatmaps, extract_cut, fit_decay, summary, CutAxis, CutProfile};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), rows * cols)
        .prop_map(move |v| ComplexMatrix::from_row_major(rows, cols, v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect()).unwrap())
}

fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
    a.sub(b).unwrap().frobenius_norm() <= tol * (1.0 + b.frobenius_norm())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matmul_is_associative(a in matrix(3, 4), b in matrix(4, 5), c in matrix(5, 2)) {
        let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
        let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
        prop_assert!(close(&left, &right, 1e-13));
    }

    #[test]
    fn hermitian_reverses_products(a in matrix(3, 6), b in matrix(6, 4)) {
        let lhs = hermitian(&matmul(&a, &b).unwrap());
        let rhs = matmul(&hermitian(&b), &hermitian(&a)).unwrap();
        prop_assert_eq!(hermitian(&hermitian(&a)), a);
        prop_assert!(close(&lhs, &rhs, 1e-14));
    }

    #[test]
    fn solve_residual_is_small(a in matrix(6, 6), b in matrix(6, 2)) {
        let shifted = ComplexMatrix::from_fn(6, 6, |i, j| a[(i, j)] + if i == j { Complex64::new(4.0, 0.0) } else { Complex64::new(0.0, 0.0) });
        let x = solve(&shifted, &b).unwrap();
        let r = matmul(&shifted, &x).unwrap().sub(&b).unwrap().frobenius_norm();
        prop_assert!(r <= 1e-10 * b.frobenius_norm());
    }

    #[test]
    fn pinv_is_a_right_inverse(rows in 1usize..=8, extra in 0usize..=24, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let cols = rows + extra;
        let h = ComplexMatrix::from_fn(rows, cols, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let p = right_pseudo_inverse(&h).unwrap();
        let r = matmul(&h, &p).unwrap().sub(&ComplexMatrix::identity(rows)).unwrap().frobenius_norm();
        prop_assert!(r <= 1e-9);
    }

    #[test]
    fn los_gain_is_reciprocal(ax in -3.0f64..3.0, ay in 0.5f64..10.0, bx in -3.0f64..3.0, by in 0.5f64..10.0) {
        let a = Point3::new(ax, ay, 1.5);
        let b = Point3::new(bx, by, 1.0);
        prop_assert_eq!(los_gain(&a, &b, PAPER_CARRIER_HZ).unwrap(), los_gain(&b, &a, PAPER_CARRIER_HZ).unwrap());
    }

    #[test]
    fn fit_decay_recovers_power_laws(p in 0.2f64..3.0, scale in 0.01f64..100.0) {
        let samples = (1..=8).map(|d| (d as f64, scale * (d as f64).powf(-p))).collect();
        let fit = fit_decay(&CutProfile { axis: CutAxis::XFixed, fixed_value: 0.0, samples }).unwrap();
        prop_assert!((fit.exponent + p).abs() <= 1e-9);
    }

    #[test]
    fn compliance_is_monotone_in_the_limit(values in prop::collection::vec(0.0f64..50.0, 56), lo in 0.5f64..20.0, step in 0.0f64..30.0) {
        let grid = GridSpec::default().build(&Room::default()).unwrap();
        let map = HeatMap { grid, values, scenario_id: "p".into() };
        let mut t = LimitTable::default();
        t.entries.insert("lo".into(), lo);
        t.entries.insert("hi".into(), lo + step);
        let a = check(&map, "lo", &t).unwrap();
        let b = check(&map, "hi", &t).unwrap();
        prop_assert!(b.exceed_count <= a.exceed_count);
        prop_assert_eq!(a.exceed_fraction, a.exceed_count as f64 / 56.0);
        prop_assert_eq!(a.exceed_count, a.exceedance_mask.iter().filter(|&&m| m).count());
        prop_assert_eq!(a.worst_margin_db <= 0.0, a.exceed_count == 0);
        let cut = extract_cut(&map, 0.0).unwrap();
        if let (Ok(da), Ok(db)) = (min_compliant_distance(std::slice::from_ref(&cut), "lo", &t), min_compliant_distance(std::slice::from_ref(&cut), "hi", &t)) {
            prop_assert!(db <= da);
        }
        let s = summary(&map);
        prop_assert!(s.max >= s.p95 && s.p95 >= s.mean && s.mean >= s.min);
    }

    #[test]
    fn averaging_commutes_with_cuts(a in prop::collection::vec(0.0f64..10.0, 56), b in prop::collection::vec(0.0f64..10.0, 56), c in prop::collection::vec(0.0f64..10.0, 56)) {
        let grid = GridSpec::default().build(&Room::default()).unwrap();
        let maps: Vec<HeatMap> = [a, b, c].into_iter().map(|values| HeatMap { grid: grid.clone(), values, scenario_id: "p".into() }).collect();
        let avg = average_heatmaps(&maps).unwrap();
        let shuffled = vec![maps[2].clone(), maps[0].clone(), maps[1].clone()];
        prop_assert_eq!(&average_heatmaps(&shuffled).unwrap().values, &avg.values);
        let cut = extract_cut(&avg, 1.0).unwrap();
        let per: Vec<CutProfile> = maps.iter().map(|m| extract_cut(m, 1.0).unwrap()).collect();
        for (k, &(y, v)) in cut.samples.iter().enumerate() {
            let mut col: Vec<f64> = per.iter().map(|p| p.samples[k].1).collect();
            col.sort_by(f64::total_cmp);
            prop_assert_eq!(per[0].samples[k].0, y);
            prop_assert_eq!(col.iter().sum::<f64>() / 3.0, v);
        }
    }
}

fn field_cfg() -> FieldConfig {
    FieldConfig { mode: ChannelMode::LosOnly, pattern: ElementPattern::Isotropic, frequency: PAPER_CARRIER_HZ, calibration: 1.0 }
}

fn precoder_for(cfg: &RunConfig, scenario: &Scenario) -> PrecodingMatrix {
    let array = cfg.build_array().unwrap();
    let h = generate_channel(&array, scenario, &cfg.room, &cfg.channel_config(0)).unwrap();
    let c = combining_vectors(&h, scenario).unwrap();
    zf_precoder_with(&h, scenario, &c).unwrap()
}

#[test]
fn heatmap_is_linear_in_the_weights() {
    let cfg = RunConfig::default();
    let array = cfg.build_array().unwrap();
    let grid = cfg.grid.build(&cfg.room).unwrap();
    let s = &cfg.all_scenarios()[7];
    let w = precoder_for(&cfg, s);
    let base = compute_heatmap("8", &array, &cfg.room, &w, &grid, &field_cfg()).unwrap();
    for a in [0.5, 2.0, 4.0] {
        let scaled = PrecodingMatrix { w: w.w.scale(Complex64::new(a, 0.0)), per_stream_power: w.per_stream_power * a * a };
        let m = compute_heatmap("8", &array, &cfg.room, &scaled, &grid, &field_cfg()).unwrap();
        for (x, y) in m.values.iter().zip(&base.values) {
            assert!((x - a * y).abs() <= 1e-14 * x.abs());
        }
    }
}

#[test]
fn mirrored_scenario_mirrors_the_map() {
    let cfg = RunConfig::default();
    let array = cfg.build_array().unwrap();
    let grid = cfg.grid.build(&cfg.room).unwrap();
    for s in cfg.all_scenarios() {
        let mirrored = Scenario { ue_positions: s.ue_positions.iter().map(|&[x, y]| [-x, y]).collect(), ..s.clone() };
        let a = compute_heatmap("a", &array, &cfg.room, &precoder_for(&cfg, &s), &grid, &field_cfg()).unwrap();
        let b = compute_heatmap("b", &array, &cfg.room, &precoder_for(&cfg, &mirrored), &grid, &field_cfg()).unwrap();
        for (i, p) in grid.points.iter().enumerate() {
            let j = grid.points.iter().position(|q| (q.x + p.x).abs() < 1e-9 && (q.y - p.y).abs() < 1e-9).unwrap();
            assert!((a.values[i] - b.values[j]).abs() <= 1e-9 * a.values[i], "scenario {}", s.id);
        }
    }
}

#[test]
fn stream_powers_add() {
    let cfg = RunConfig::default();
    let array = cfg.build_array().unwrap();
    let grid = cfg.grid.build(&cfg.room).unwrap();
    let s = &cfg.all_scenarios()[3];
    let w = precoder_for(&cfg, s);
    let both = compute_heatmap("4", &array, &cfg.room, &w, &grid, &field_cfg()).unwrap();
    let single: Vec<HeatMap> = (0..2)
        .map(|k| {
            let col = ComplexMatrix::from_fn(w.w.rows(), 1, |t, _| w.w[(t, k)]);
            let p = PrecodingMatrix { w: col, per_stream_power: w.per_stream_power };
            compute_heatmap("4", &array, &cfg.room, &p, &grid, &field_cfg()).unwrap()
        })
        .collect();
    for i in 0..grid.len() {
        let sum = single[0].values[i].powi(2) + single[1].values[i].powi(2);
        assert!((both.values[i].powi(2) - sum).abs() <= 1e-12 * sum);
    }
}

#[test]
fn boresight_decay_beyond_twice_the_far_field() {
    let cfg = RunConfig::default();
    let array = cfg.build_array().unwrap();
    let far = array.far_field_distance();
    let grid = GridSpec { x_min: 0.0, x_max: 0.0, y_min: 1.0, y_max: 14.5, spacing: 0.5, height: 1.5 }.build(&cfg.room).unwrap();
    let w = precoder_for(&cfg, &cfg.all_scenarios()[0]);
    let map = compute_heatmap("1", &array, &cfg.room, &w, &grid, &field_cfg()).unwrap();
    let cut = extract_cut(&map, 0.0).unwrap().beyond(2.0 * far);
    let fit = fit_decay(&cut).unwrap();
    assert!(cut.samples.len() >= 10);
    assert!((fit.exponent + 1.0).abs() <= 0.02, "{}", fit.exponent);
}

#[test]
fn image_mode_with_zero_reflections_matches_los() {
    let mut cfg = RunConfig::default();
    cfg.room.wall_reflection = Some(mmimo_emf::geometry::WallReflections::zero());
    let array = cfg.build_array().unwrap();
    let s = &cfg.all_scenarios()[7];
    let los = generate_channel(&array, s, &cfg.room, &cfg.channel_config(0)).unwrap();
    cfg.channel.mode = ChannelMode::ImageOrder1;
    let img = generate_channel(&array, s, &cfg.room, &cfg.channel_config(0)).unwrap();
    assert_eq!(los, img);
}
