//! Alternating minimization properties of the continuous clustering solver.

mod common;

use asrc::graph::{learn_graph, symmetrize_normalize, WeightedEdge};
use asrc::metrics::same_partition;
use asrc::numerics::SeededRng;
use asrc::rcc::{extract_clusters, rcc_run, update_l, RccConfig};
use common::rcc_fixtures;
use ndarray::Array2;
use rand::Rng;

#[test]
fn objective_never_increases_with_frozen_weights() {
    for seed in 0..20u64 {
        let v = rcc_fixtures::monotonicity_violation(seed);
        assert!(v <= 1e-9, "seed {seed}: objective rose by {v:.3e}");
    }
}

#[test]
fn balancing_identity_after_every_refresh() {
    for seed in 0..20u64 {
        let e = rcc_fixtures::balancing_error(seed);
        assert!(e <= 1e-6, "seed {seed}: relative error {e:.3e}");
    }
}

#[test]
fn edge_weights_stay_in_unit_interval() {
    let mut rng = common::rng(7);
    for seed in 0..50u64 {
        let (z, edges) = rcc_fixtures::instance(200 + seed);
        let alpha = 10f64.powf(rng.random_range(-4.0..3.0));
        let l = update_l(&z.view(), &edges, alpha);
        assert_eq!(l.len(), edges.len());
        for (e, &v) in edges.iter().zip(&l) {
            assert!(v > 0.0 && v <= 1.0, "edge ({}, {}): {v}", e.i, e.j);
        }
    }
    // Coincident endpoints give exactly one.
    let z = Array2::zeros((2, 3));
    let edge = WeightedEdge { i: 0, j: 1, weight: 1.0 };
    assert_eq!(update_l(&z.view(), &[edge], 0.5), vec![1.0]);
}

#[test]
fn extraction_does_not_depend_on_sample_order() {
    for seed in 0..30u64 {
        let mut rng = common::rng(300 + seed);
        let n = rng.random_range(5..80);
        let d = rng.random_range(1..6);
        let u = common::uniform(n, d, &mut rng) * 4.0;
        let delta = rng.random_range(0.2..1.5);
        let (_, edges) = rcc_fixtures::instance(seed);
        let edges: Vec<WeightedEdge> = edges.into_iter().filter(|e| e.i < n && e.j < n).collect();
        let base = extract_clusters(&u.view(), &edges, delta);

        let perm = common::permutation(n, &mut rng);
        let mut inverse = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let permuted = Array2::from_shape_fn((n, d), |(i, c)| u[[perm[i], c]]);
        let permuted_edges: Vec<WeightedEdge> = edges
            .iter()
            .map(|e| WeightedEdge {
                i: inverse[e.i],
                j: inverse[e.j],
                weight: e.weight,
            })
            .collect();
        let other = extract_clusters(&permuted.view(), &permuted_edges, delta);
        let back: Vec<usize> = (0..n).map(|i| other.labels()[inverse[i]]).collect();
        assert!(same_partition(base.labels(), &back), "seed {seed}");

        // Brute force over all pairs.
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                x = p[x];
            }
            x
        }
        for i in 0..n {
            for j in i + 1..n {
                let sq: f64 = (0..d).map(|c| (u[[i, c]] - u[[j, c]]).powi(2)).sum();
                if sq < delta * delta {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let brute: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
        assert!(same_partition(base.labels(), &brute), "seed {seed}");
    }
}

#[test]
fn separated_groups_are_recovered() {
    let mut rng = common::rng(11);
    let mut z = common::gaussian(90, 2, &mut rng) * 0.3;
    let truth: Vec<usize> = (0..90).map(|i| i / 30).collect();
    for i in 0..90 {
        z[[i, 0]] += 20.0 * truth[i] as f64;
    }
    let sym = symmetrize_normalize(&learn_graph(&z.view(), 8)).expect("graph");
    let (clusters, state) = rcc_run(&z.view(), sym.rcc_edges(), &RccConfig::default(), &SeededRng::new(1)).expect("rcc");
    assert!(state.sweeps > 0);
    assert!(same_partition(clusters.labels(), &truth), "{:?}", clusters.sizes());
}
