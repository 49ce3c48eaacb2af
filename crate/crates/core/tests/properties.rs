mod common;

use ivmono::simulation::{binary_grid, replication_seed, warp_speed_mc, DgpId, DgpSpec, McConfig};
use ivmono::{
    bootstrap_draw, bootstrap_statistic, build_moment_table, contact_set, enumerate_adjacent_pairs, run_test,
    ts_statistic, validate_dataset, CellPair, Dataset, Direction, InstrumentGrid, TestConfig, XiMeasure,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn validated(rows: &[common::Row], config: &TestConfig) -> ivmono::ValidatedData {
    validate_dataset(common::to_dataset(rows), &binary_grid(), config).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pair_count_matches_formula(sizes in prop::collection::vec(2usize..5, 1..4)) {
        let supports: Vec<Vec<i64>> = sizes.iter().map(|&k| (0..k as i64).collect()).collect();
        let grid = InstrumentGrid::new(supports, vec![Direction::Ascending; sizes.len()]).unwrap();
        let expected: usize = (0..sizes.len())
            .map(|l| (sizes[l] - 1) * sizes.iter().enumerate().filter(|(m, _)| *m != l).map(|(_, k)| k).product::<usize>())
            .sum();
        prop_assert_eq!(enumerate_adjacent_pairs(&grid).len(), expected);
    }

    #[test]
    fn reversing_a_direction_swaps_its_pairs(sizes in prop::collection::vec(2usize..4, 1..4), flip in 0usize..3) {
        let flip = flip % sizes.len();
        let supports: Vec<Vec<i64>> = sizes.iter().map(|&k| (0..k as i64).collect()).collect();
        let asc = InstrumentGrid::new(supports.clone(), vec![Direction::Ascending; sizes.len()]).unwrap();
        let mut dirs = vec![Direction::Ascending; sizes.len()];
        dirs[flip] = Direction::Descending;
        let mixed = InstrumentGrid::new(supports, dirs).unwrap();
        let expected: Vec<CellPair> = enumerate_adjacent_pairs(&asc)
            .into_iter()
            .map(|p| if p.dim == flip { CellPair { lower: p.upper, upper: p.lower, ..p } } else { p })
            .collect();
        prop_assert_eq!(enumerate_adjacent_pairs(&mixed), expected);
    }

    #[test]
    fn validation_ignores_row_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = common::random_rows(&mut rng, 4, 30);
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut rng);
        let config = TestConfig::default();
        let (a, b) = (validated(&rows, &config), validated(&shuffled, &config));
        prop_assert_eq!(a.counts, b.counts);
        prop_assert_eq!(a.treatment, b.treatment);
        prop_assert_eq!(a.pairs, b.pairs);
    }

    #[test]
    fn duplicating_the_sample_keeps_moments_and_doubles_tn(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = common::random_rows(&mut rng, 4, 30);
        let doubled: Vec<_> = rows.iter().chain(&rows).copied().collect();
        let config = TestConfig::default();
        let a = build_moment_table(&validated(&rows, &config)).unwrap();
        let b = build_moment_table(&validated(&doubled, &config)).unwrap();
        prop_assert_eq!(a.len(), b.len());
        prop_assert!((b.t_n - 2.0 * a.t_n).abs() <= 1e-12 * b.t_n);
        for id in 0..a.len() {
            prop_assert_eq!(a.phi_hat[id], b.phi_hat[id]);
            prop_assert!((a.sigma_hat[id] - b.sigma_hat[id]).abs() <= 1e-12 * a.sigma_hat[id].max(1e-3));
        }
    }

    #[test]
    fn sup_with_small_xi_is_never_below_large_xi(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = common::random_rows(&mut rng, 4, 40);
        let table = build_moment_table(&validated(&rows, &TestConfig::default())).unwrap();
        let profile = ts_statistic(&table, &XiMeasure::standard_grid()).unwrap();
        for w in profile.sups.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
        prop_assert!(profile.sups.iter().all(|s| *s >= 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bootstrap_statistic_matches_oracle(seed in any::<u64>(), tau in 0.0f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = common::random_rows(&mut rng, 6, 12);
        let data = validated(&rows, &TestConfig::default());
        let table = build_moment_table(&data).unwrap();
        let contact = contact_set(&table, tau, 1e-10);
        let nu = XiMeasure::standard_grid();
        let resample = loop {
            let r = bootstrap_draw(&data.dataset, &mut rng);
            let r_rows = common::from_dataset(&r);
            if common::CELLS.iter().all(|c| r_rows.iter().any(|x| &x.2 == c)) {
                break r;
            }
        };
        let engine = bootstrap_statistic(&resample, &table, &contact, &nu).unwrap();
        let oracle = common::brute_bootstrap(&rows, &common::from_dataset(&resample), &nu, tau, 1e-10);
        prop_assert!((engine - oracle).abs() <= 1e-12, "engine {} oracle {}", engine, oracle);
    }

    #[test]
    fn critical_value_is_monotone_in_tau(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = common::random_rows(&mut rng, 10, 60);
        let data = validated(&rows, &TestConfig::default());
        let mut last = f64::NEG_INFINITY;
        let mut last_reject = true;
        for tau in [0.0, 0.5, 1.0, 2.0, 4.0, f64::INFINITY] {
            let config = TestConfig { tau_n: tau, n_bootstrap: 40, seed, ..TestConfig::default() };
            let r = run_test(&data, &config).unwrap();
            prop_assert!(r.critical_value >= last);
            prop_assert!(last_reject || !r.reject);
            prop_assert!(r.p_value >= 1.0 / 41.0 && r.p_value <= 1.0);
            last = r.critical_value;
            last_reject = r.reject;
        }
    }
}

#[test]
fn bootstrap_from_dataset_matches_internal_replication() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..50u64 {
        let rows = common::random_rows(&mut rng, 20, 80);
        let config = TestConfig { n_bootstrap: 1, seed: case, tau_n: 2.0, ..TestConfig::default() };
        let data = validated(&rows, &config);
        let mut draw_rng = ChaCha8Rng::seed_from_u64(case);
        draw_rng.set_stream(0);
        let resample = bootstrap_draw(&data.dataset, &mut draw_rng);
        let table = build_moment_table(&data).unwrap();
        let contact = contact_set(&table, config.tau_n, config.xi0);
        let Ok(stat) = bootstrap_statistic(&resample, &table, &contact, &config.xi_measure) else {
            continue; // first draw left a cell empty; the engine would redraw
        };
        let result = run_test(&data, &config).unwrap();
        assert_eq!(result.critical_value, stat, "case {case}");
    }
}

#[test]
fn warp_speed_with_one_replication_matches_single_draw_test() {
    let master = 31;
    let spec = DgpSpec::new(DgpId::Null, 400, 0.5).unwrap();
    let config = McConfig { seed: master, taus: vec![2.0], ..McConfig::default() };
    let report = warp_speed_mc(&spec, &config, 1).unwrap();
    assert_eq!(report.dataset_redraws, 0);

    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(0);
    let sample: Dataset = spec.generate(&mut rng);
    let test_config = TestConfig { n_bootstrap: 1, seed: replication_seed(master, 0), ..TestConfig::default() };
    let data = validate_dataset(sample, &binary_grid(), &test_config).unwrap();
    for (j, nu) in config.measures.iter().enumerate() {
        let r = run_test(&data, &TestConfig { xi_measure: nu.clone(), ..test_config.clone() }).unwrap();
        assert_eq!(report.ts[0][j], r.ts, "{nu}");
        assert_eq!(report.boot[0][j], r.critical_value, "{nu}");
        assert_eq!(report.contact_sizes[0][0], r.contact_set_size);
    }
}

#[test]
fn null_and_power_samples_have_binary_instruments() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for id in DgpId::ALL {
        let spec = DgpSpec::new(id, 500, 0.5).unwrap();
        let sample = spec.generate(&mut rng);
        assert_eq!(sample.len(), 500);
        for i in 0..sample.len() {
            assert!(sample.z(i).iter().all(|&z| z == 0 || z == 1));
            assert!([0.0, 1.0, 2.0].contains(&sample.d()[i]));
        }
    }
}
