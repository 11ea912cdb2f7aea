use fabisearch::data::{load_matrix, read_binary_matrix, rescale, save_matrix, write_binary_matrix, TableFormat};
use fabisearch::simulate::{block_covariance, simulate_dataset, SimulationSpec};
use fabisearch::{Error, TimeSeriesMatrix};
use ndarray::{array, Array2, Axis};
use proptest::prelude::*;

fn correlation(y: &Array2<f64>) -> Array2<f64> {
    let n = y.nrows() as f64;
    let mean = y.mean_axis(Axis(0)).unwrap();
    let c = y - &mean;
    let cov = c.t().dot(&c) / (n - 1.0);
    let sd = cov.diag().mapv(f64::sqrt);
    Array2::from_shape_fn(cov.dim(), |(i, j)| cov[[i, j]] / (sd[i] * sd[j]))
}

#[test]
fn simulated_correlation_matches_design() {
    let spec = SimulationSpec {
        p: 10,
        t: 20_000,
        master_seed: 5,
        ..SimulationSpec::default()
    };
    let sim = simulate_dataset(&spec).unwrap();
    let target = block_covariance(&sim.truth.labels[0], spec.within_corr, spec.between_corr);
    let got = correlation(&sim.data.values().to_owned());
    for ((i, j), &want) in target.indexed_iter() {
        assert!((got[[i, j]] - want).abs() < 0.02, "({i},{j}): {} vs {want}", got[[i, j]]);
    }
}

#[test]
fn reshuffle_draws_new_labels_per_regime() {
    let spec = SimulationSpec {
        p: 40,
        t: 300,
        changepoints: vec![100, 200],
        master_seed: 9,
        ..SimulationSpec::default()
    };
    let sim = simulate_dataset(&spec).unwrap();
    assert_eq!(sim.truth.labels.len(), 3);
    for l in &sim.truth.labels {
        assert_eq!(l.iter().filter(|&&c| c == 0).count(), 20);
    }
    assert_ne!(sim.truth.labels[0], sim.truth.labels[1]);
    let fixed = simulate_dataset(&SimulationSpec {
        reshuffle: false,
        ..spec.clone()
    })
    .unwrap();
    assert!(fixed.truth.labels.windows(2).all(|w| w[0] == w[1]));
    assert!(sim.data.values().iter().all(|&v| v > 0.0));
}

#[test]
fn simulation_is_seeded() {
    let spec = SimulationSpec {
        p: 12,
        t: 80,
        changepoints: vec![40],
        master_seed: 17,
        ..SimulationSpec::default()
    };
    let a = simulate_dataset(&spec).unwrap();
    let b = simulate_dataset(&spec).unwrap();
    assert_eq!(a.data, b.data);
    let c = simulate_dataset(&SimulationSpec { master_seed: 18, ..spec }).unwrap();
    assert_ne!(a.data, c.data);
}

#[test]
fn invalid_specs_are_rejected() {
    let base = SimulationSpec::default();
    for bad in [
        SimulationSpec { changepoints: vec![300], ..base.clone() },
        SimulationSpec { changepoints: vec![50, 50], ..base.clone() },
        SimulationSpec { clusters: 0, ..base.clone() },
        SimulationSpec { within_corr: 1.0, ..base.clone() },
        SimulationSpec { p: 1, ..base.clone() },
    ] {
        assert!(matches!(simulate_dataset(&bad), Err(Error::Spec(_))), "{bad:?}");
    }
}

#[test]
fn rescale_targets_mean_and_spread() {
    let raw = array![[-1.0, 0.5], [1.0, -0.5], [0.0, 0.0], [0.0, 0.0]];
    let m = rescale(raw, 100.0, 2.0).unwrap();
    let means = m.values().mean_axis(Axis(0)).unwrap();
    assert!(means.iter().all(|&v| (v - 100.0).abs() < 1e-9));
    let ok = array![[99.0, 101.0], [103.0, 97.0], [98.0, 102.0]];
    assert_eq!(rescale(ok.clone(), 100.0, 2.0).unwrap().values(), ok.view());
}

#[test]
fn tsv_round_trip_with_labels() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("y.tsv");
    let m = TimeSeriesMatrix::new(array![[1.25, 3.0], [2.0, 1e-3]])
        .unwrap()
        .with_labels(vec!["roi 1".into(), "roi 2".into()])
        .unwrap();
    save_matrix(&path, &m, TableFormat::Tsv).unwrap();
    let back = load_matrix(&path, TableFormat::from_path(&path), true).unwrap();
    assert_eq!(back.values(), m.values());
    assert_eq!(back.labels(), m.labels());
}

#[test]
fn binary_matrix_rejects_other_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.csv");
    std::fs::write(&path, "0,1\n2,0\n").unwrap();
    assert!(read_binary_matrix(&path).is_err());
    std::fs::write(&path, "0,1,0\n1,0,0\n").unwrap();
    assert!(read_binary_matrix(&path).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn csv_round_trip_is_exact(rows in 2usize..12, cols in 2usize..8, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let values = Array2::from_shape_fn((rows, cols), |_| rng.random_range(1e-6..1e6));
        let m = TimeSeriesMatrix::new(values).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        save_matrix(&path, &m, TableFormat::Csv).unwrap();
        prop_assert_eq!(load_matrix(&path, TableFormat::Csv, false).unwrap(), m);
    }

    #[test]
    fn binary_round_trip(bits in prop::collection::vec(0u8..=1, 1..64)) {
        let n = (bits.len() as f64).sqrt() as usize;
        let a = Array2::from_shape_vec((n, n), bits[..n * n].to_vec()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        write_binary_matrix(&path, a.view()).unwrap();
        prop_assert_eq!(read_binary_matrix(&path).unwrap(), a);
    }
}
