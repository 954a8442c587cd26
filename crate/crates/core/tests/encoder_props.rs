//! Encoder, decoder and contrastive loss properties.

mod common;

use asrc::contrastive::{info_nce_debiased, NegativeMask};
use asrc::encoder::{
    decode_distribution, encode, gae_loss, train, Architecture, EncoderParams, LossWeights, OptimizerState,
    PropagatedViews, TrainOptions,
};
use asrc::graph::{learn_graph, symmetrize_normalize};
use asrc::numerics::SparseSymOperator;
use asrc::DataMatrix;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;

fn embedding(n: usize, d: usize, scale: f64, seed: u64) -> DataMatrix {
    let mut rng = common::rng(seed);
    common::gaussian(n, d, &mut rng) * scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decoder_rows_are_distributions(n in 1usize..40, d in 1usize..6, scale in 1e-3f64..1e3, seed in any::<u64>()) {
        let z = embedding(n, d, scale, seed);
        let p = decode_distribution(&z.view());
        for row in p.rows() {
            prop_assert!((row.sum() - 1.0).abs() <= 1e-12);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn kl_term_is_nonnegative(n in 2usize..40, d in 1usize..6, scale in 1e-3f64..1e2, seed in any::<u64>()) {
        let z = embedding(n, d, scale, seed);
        let k = 1 + (seed as usize) % (n - 1).max(1);
        let other = embedding(n, d, 1.0, seed ^ 0x5a5a);
        let p = learn_graph(&other.view(), k.min(n - 1).max(1));
        let loss = gae_loss(&p, &z.view(), 1.0);
        prop_assert!(loss.kl >= -1e-12, "{}", loss.kl);
    }
}

#[test]
fn moving_average_of_training_loss_does_not_increase() {
    for seed in 0..10u64 {
        let mut rng = common::rng(seed);
        let n = rng.random_range(12..=40);
        let x1 = common::uniform(n, 4, &mut rng);
        let x2 = &x1 + &(common::gaussian(n, 4, &mut rng) * 0.02);
        let p = learn_graph(&x1.view(), 4);
        let sym = symmetrize_normalize(&p).expect("graph");
        let arch = Architecture::parse("d-16-4", 4).expect("architecture");
        let mut params = EncoderParams::init(arch, &mut rng);
        let mut state = OptimizerState::new(&params, 1e-3);
        let views = PropagatedViews::new(&x1.view(), &x2.view(), sym.normalized()).expect("views");
        let weights = LossWeights {
            lambda2: 1.0,
            beta: if seed % 2 == 0 { 1.0 } else { 0.0 },
            tau: 0.5,
        };
        let opts = TrainOptions {
            max_steps: 50,
            rel_tol: 0.0,
            patience: usize::MAX,
        };
        let trace = train(&mut params, &mut state, &views, sym.normalized(), &p, weights, &NegativeMask::singletons(), opts)
            .expect("train");
        assert_eq!(trace.len(), 50);
        let avg: Vec<f64> = trace.windows(10).map(|w| w.iter().sum::<f64>() / 10.0).collect();
        for (t, w) in avg.windows(2).enumerate() {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs(), "seed {seed} window {t}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn encoding_commutes_with_node_permutation() {
    for seed in 0..10u64 {
        let mut rng = common::rng(50 + seed);
        let n = rng.random_range(5..=30);
        let x = common::uniform(n, 3, &mut rng);
        let sym = symmetrize_normalize(&learn_graph(&x.view(), 3)).expect("graph");
        let a = sym.normalized().to_dense();
        let params = EncoderParams::init(Architecture::parse("d-8-2", 3).expect("architecture"), &mut rng);
        let z = encode(&x.view(), sym.normalized(), &params).expect("encode");

        let perm = common::permutation(n, &mut rng);
        let xp = Array2::from_shape_fn((n, 3), |(i, c)| x[[perm[i], c]]);
        let mut entries = Vec::new();
        for i in 0..n {
            for j in i..n {
                let v = a[[perm[i], perm[j]]];
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        let ap = SparseSymOperator::from_entries(n, &entries);
        let zp = encode(&xp.view(), &ap, &params).expect("encode");
        for i in 0..n {
            for c in 0..2 {
                assert!((zp[[i, c]] - z[[perm[i], c]]).abs() <= 1e-12, "seed {seed}");
            }
        }
    }
}

#[test]
fn excluding_same_cluster_negatives_never_raises_the_loss() {
    for seed in 0..200u64 {
        let mut rng = common::rng(100 + seed);
        let n = rng.random_range(2..=30);
        let z1 = common::gaussian(n, 3, &mut rng);
        let z2 = &z1 + &(common::gaussian(n, 3, &mut rng) * rng.random_range(0.0..1.0));
        let tau = rng.random_range(0.1..2.0);
        let labels = common::random_labels(n, rng.random_range(1..=n), &mut rng);
        let plain = info_nce_debiased(&z1.view(), &z2.view(), &NegativeMask::singletons(), tau).unwrap();
        let guided = info_nce_debiased(&z1.view(), &z2.view(), &NegativeMask::from_clusters(&labels), tau).unwrap();
        assert!(guided <= plain + 1e-12, "seed {seed}: {guided} > {plain}");
    }
}

/// Random orthogonal matrix from Gram-Schmidt on a Gaussian.
fn random_rotation(d: usize, rng: &mut rand_chacha::ChaCha8Rng) -> DataMatrix {
    let mut q = common::gaussian(d, d, rng);
    for c in 0..d {
        for prev in 0..c {
            let dot = q.column(c).dot(&q.column(prev));
            let p = q.column(prev).to_owned();
            q.column_mut(c).scaled_add(-dot, &p);
        }
        let norm = q.column(c).dot(&q.column(c)).sqrt();
        q.column_mut(c).mapv_inplace(|v| v / norm);
    }
    q
}

#[test]
fn contrastive_loss_ignores_rotation_and_scale() {
    for seed in 0..50u64 {
        let mut rng = common::rng(400 + seed);
        let n = rng.random_range(2..=30);
        let d = rng.random_range(1..=6);
        let z1 = common::gaussian(n, d, &mut rng);
        let z2 = &z1 + &(common::gaussian(n, d, &mut rng) * 0.5);
        let mask = if seed % 2 == 0 {
            NegativeMask::singletons()
        } else {
            NegativeMask::from_clusters(&common::random_labels(n, 3, &mut rng))
        };
        let tau = rng.random_range(0.2..2.0);
        let base = info_nce_debiased(&z1.view(), &z2.view(), &mask, tau).unwrap();

        let q = random_rotation(d, &mut rng);
        let rotated = info_nce_debiased(&z1.dot(&q).view(), &z2.dot(&q).view(), &mask, tau).unwrap();
        assert!((rotated - base).abs() <= 1e-9, "seed {seed}: rotation {rotated} vs {base}");

        let s = 10f64.powf(rng.random_range(-1.0..2.0));
        let scaled = info_nce_debiased(&(&z1 * s).view(), &(&z2 * s).view(), &mask, tau).unwrap();
        assert!((scaled - base).abs() <= 1e-9, "seed {seed}: scale {scaled} vs {base}");
    }
}
