use fabisearch::network::{
    adjacency_from_clustering, adjacency_from_threshold, consensus_matrix, est_net, segments, ConsensusMatrix,
    LambdaSpec,
};
use fabisearch::nmf::{cluster_assign, fit_single, NmfConfig};
use fabisearch::seed;
use fabisearch::TimeSeriesMatrix;
use ndarray::Array2;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{best_two_partition, random_positive};

fn config(nruns: usize, master_seed: u64) -> NmfConfig {
    NmfConfig {
        nruns,
        master_seed,
        ..NmfConfig::default()
    }
}

/// Symmetric consensus with two planted blocks: 0.9 ± 0.05 inside, 0.1 ± 0.05 across.
fn planted_consensus(p: usize, seed: u64) -> (ConsensusMatrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = (0..p).map(|i| usize::from(i >= p / 2)).collect();
    labels.shuffle(&mut rng);
    let mut c = Array2::<f64>::eye(p);
    for i in 0..p {
        for j in i + 1..p {
            let centre = if labels[i] == labels[j] { 0.9 } else { 0.1 };
            let v = centre + rng.random_range(-0.05..0.05);
            c[[i, j]] = v;
            c[[j, i]] = v;
        }
    }
    (ConsensusMatrix::from_values(c, 1).unwrap(), labels)
}

#[test]
fn consensus_invariants_on_random_segments() {
    for s in 0..50u64 {
        let t = 10 + (s % 5) as usize * 5;
        let p = 5 + (s % 6) as usize;
        let y = random_positive(t, p, 1000 + s, 1.0, 30.0);
        let nruns = 5;
        let c = consensus_matrix(y.view(), 2, &config(nruns, s)).unwrap();
        assert_eq!(c.nruns_used, nruns);
        for i in 0..p {
            assert_eq!(c.values[[i, i]], 1.0);
            for j in 0..p {
                let v = c.values[[i, j]];
                assert_eq!(v, c.values[[j, i]]);
                assert!((0.0..=1.0).contains(&v));
                let scaled = v * nruns as f64;
                assert!((scaled - scaled.round()).abs() < 1e-12, "{v} is not a multiple of 1/{nruns}");
            }
        }
    }
}

#[test]
fn single_run_consensus_is_its_co_membership() {
    let y = random_positive(20, 7, 4, 1.0, 10.0);
    let cfg = config(1, 31);
    let c = consensus_matrix(y.view(), 3, &cfg).unwrap();
    let fit = fit_single(y.view(), 3, seed::run_seed(31, 0), &cfg).unwrap();
    let labels = cluster_assign(fit.h.view()).unwrap();
    for i in 0..7 {
        for j in 0..7 {
            assert_eq!(c.values[[i, j]], f64::from(u8::from(labels[i] == labels[j])));
        }
    }
}

#[test]
fn clustering_matches_exhaustive_partition_oracle() {
    for s in 0..20u64 {
        let (c, labels) = planted_consensus(12, s);
        let a = adjacency_from_clustering(&c, 2).unwrap();
        assert_eq!(a.values, best_two_partition(&c.values), "seed {s}");
        let planted = Array2::from_shape_fn((12, 12), |(i, j)| u8::from(i != j && labels[i] == labels[j]));
        assert_eq!(a.values, planted);
    }
}

#[test]
fn clustering_extremes() {
    let (c, _) = planted_consensus(12, 3);
    assert_eq!(adjacency_from_clustering(&c, 12).unwrap().edge_count(), 0);
    assert_eq!(adjacency_from_clustering(&c, 1).unwrap().edge_count(), 12 * 11 / 2);
    assert!(adjacency_from_clustering(&c, 13).is_err());
    assert!(adjacency_from_clustering(&c, 0).is_err());
}

#[test]
fn threshold_examples() {
    let id = ConsensusMatrix::from_values(Array2::eye(4), 1).unwrap();
    assert_eq!(adjacency_from_threshold(&id, 0.5).unwrap().edge_count(), 0);
    let mut v = Array2::<f64>::eye(2);
    v[[0, 1]] = 0.41;
    v[[1, 0]] = 0.41;
    let c = ConsensusMatrix::from_values(v, 100).unwrap();
    assert_eq!(adjacency_from_threshold(&c, 0.40).unwrap().edges(), vec![(0, 1)]);
    assert_eq!(adjacency_from_threshold(&c, 0.41).unwrap().edge_count(), 0);
}

#[test]
fn est_net_segments_follow_change_points() {
    let y = TimeSeriesMatrix::new(random_positive(197, 8, 197, 1.0, 20.0)).unwrap();
    let nets = est_net(&y, &LambdaSpec::Clusters(2), Some(2), &config(3, 1), &[35, 70]).unwrap();
    let bounds: Vec<_> = nets.iter().map(|n| (n.start, n.end)).collect();
    assert_eq!(bounds, vec![(1, 35), (36, 70), (71, 197)]);
    assert!(nets.iter().all(|n| n.adjacency.len() == 1 && n.consensus.n_nodes() == 8));
}

#[test]
fn est_net_fans_out_over_lambda_vector() {
    let y = TimeSeriesMatrix::new(random_positive(60, 6, 8, 1.0, 20.0)).unwrap();
    let lambdas: Vec<f64> = (1..=99).map(|k| k as f64 / 100.0).collect();
    let nets = est_net(&y, &LambdaSpec::Thresholds(lambdas), Some(2), &config(4, 2), &[30]).unwrap();
    assert_eq!(nets.len(), 2);
    for n in &nets {
        assert_eq!(n.adjacency.len(), 99);
        for w in n.adjacency.windows(2) {
            assert!(w[1].edge_count() <= w[0].edge_count());
        }
    }
    let single = est_net(&y, &LambdaSpec::Clusters(2), Some(2), &config(4, 2), &[]).unwrap();
    assert_eq!(single.len(), 1);
    assert_eq!((single[0].start, single[0].end), (1, 60));
}

#[test]
fn segment_bounds_are_validated() {
    assert!(segments(100, &[50, 40]).is_err());
    assert!(segments(100, &[100]).is_err());
    assert!(segments(100, &[0]).is_err());
}

fn consensus_strategy() -> impl Strategy<Value = ConsensusMatrix> {
    (2usize..10, 1usize..20).prop_flat_map(|(p, nruns)| {
        prop::collection::vec(0..=nruns, p * (p - 1) / 2).prop_map(move |upper| {
            let mut v = Array2::<f64>::eye(p);
            let mut it = upper.into_iter();
            for i in 0..p {
                for j in i + 1..p {
                    let c = it.next().unwrap() as f64 / nruns as f64;
                    v[[i, j]] = c;
                    v[[j, i]] = c;
                }
            }
            ConsensusMatrix::from_values(v, nruns).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn thresholds_nest(c in consensus_strategy(), a in 0.01f64..0.99, b in 0.01f64..0.99) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let loose = adjacency_from_threshold(&c, lo).unwrap();
        let tight = adjacency_from_threshold(&c, hi).unwrap();
        for (t, l) in tight.values.iter().zip(loose.values.iter()) {
            prop_assert!(t <= l);
        }
    }

    #[test]
    fn adjacency_is_symmetric_without_loops(c in consensus_strategy(), lambda in 0.01f64..0.99) {
        let a = adjacency_from_threshold(&c, lambda).unwrap();
        prop_assert_eq!(&a.values, &a.values.t());
        prop_assert!(a.values.diag().iter().all(|&d| d == 0));
    }

    #[test]
    fn clustering_gives_k_disjoint_cliques(c in consensus_strategy(), k in 1usize..10) {
        let p = c.n_nodes();
        let k = k.min(p);
        let a = adjacency_from_clustering(&c, k).unwrap();
        // Same-group relation must be an equivalence with exactly k classes.
        let same = |i: usize, j: usize| i == j || a.values[[i, j]] == 1;
        let mut reps: Vec<usize> = Vec::new();
        for i in 0..p {
            if !reps.iter().any(|&r| same(r, i)) {
                reps.push(i);
            }
            for j in 0..p {
                for l in 0..p {
                    if same(i, j) && same(j, l) {
                        prop_assert!(same(i, l));
                    }
                }
            }
        }
        prop_assert_eq!(reps.len(), k);
    }

    #[test]
    fn segments_tile_the_series(t in 2usize..500, cuts in prop::collection::btree_set(1usize..499, 0..6)) {
        let cps: Vec<usize> = cuts.into_iter().filter(|&c| c < t).collect();
        let segs = segments(t, &cps);
        // Segments of one time point are rejected; otherwise they tile 1..=T.
        let mut bounds = vec![0];
        bounds.extend(&cps);
        bounds.push(t);
        if bounds.windows(2).any(|w| w[1] - w[0] < 2) {
            prop_assert!(segs.is_err());
        } else {
            let segs = segs.unwrap();
            prop_assert_eq!(segs.len(), cps.len() + 1);
            prop_assert_eq!(segs[0].0, 1);
            prop_assert_eq!(segs.last().unwrap().1, t);
            for w in segs.windows(2) {
                prop_assert_eq!(w[0].1 + 1, w[1].0);
            }
        }
    }
}
