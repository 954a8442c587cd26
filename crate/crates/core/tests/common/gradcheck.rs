//! Finite-difference checks of the analytic gradients.

use asrc::encoder::{asrc_loss_and_grad, Architecture, EncoderParams, LossWeights};
use asrc::graph::{learn_graph, symmetrize_normalize, SparseRowGraph, SymGraph};
use asrc::DataMatrix;
use ndarray::Array2;
use rand::Rng;

pub const H: f64 = 1e-5;
pub const MAX_REL: f64 = 1e-4;

/// Entrywise `|a − f| / max(|a|, |f|, 1e-3 · max|f|)`; the floor keeps
/// entries that are zero up to rounding from dominating.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (1e-3 * scale).max(1e-10);
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, f)| (a - f).abs() / a.abs().max(f.abs()).max(floor))
        .fold(0.0, f64::max)
}

pub fn central<F: FnMut(&mut Array2<f64>, usize, f64) -> f64>(len: usize, target: &mut Array2<f64>, mut eval: F) -> Vec<f64> {
    (0..len)
        .map(|idx| {
            let plus = eval(target, idx, H);
            let minus = eval(target, idx, -H);
            (plus - minus) / (2.0 * H)
        })
        .collect()
}

pub struct Instance {
    pub x1: DataMatrix,
    pub x2: DataMatrix,
    pub p: SparseRowGraph,
    pub sym: SymGraph,
    pub params: EncoderParams,
    pub weights: LossWeights,
    pub clusters: Option<Vec<usize>>,
}

/// Smallest |pre-activation| of the first layer; finite differences are only
/// valid away from the rectifier kink.
fn kink_margin(inst: &Instance, params: &EncoderParams) -> f64 {
    let a = inst.sym.normalized();
    [&inst.x1, &inst.x2]
        .iter()
        .map(|x| {
            a.apply(&x.view())
                .dot(&params.theta1)
                .iter()
                .fold(f64::INFINITY, |m, v| m.min(v.abs()))
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn instance(seed: u64) -> Instance {
    let mut rng = super::rng(seed);
    loop {
        let n = rng.random_range(6..=32);
        let d = rng.random_range(2..=5);
        let x1 = super::uniform(n, d, &mut rng);
        let noise = super::gaussian(n, d, &mut rng) * 0.05;
        let x2 = &x1 + &noise;
        let k = rng.random_range(2..=4.min(n - 1));
        let p = learn_graph(&x1.view(), k);
        let sym = symmetrize_normalize(&p).expect("graph");
        let arch = Architecture::parse(&format!("d-{}-{}", rng.random_range(3..=8), rng.random_range(2..=4)), d)
            .expect("architecture");
        let params = EncoderParams::init(arch, &mut rng);
        let params = EncoderParams {
            theta1: params.theta1 * 3.0,
            theta2: params.theta2 * 3.0,
        };
        let weights = LossWeights {
            lambda2: rng.random_range(0.1..4.0),
            beta: if seed % 4 == 0 { 0.0 } else { rng.random_range(0.5..5.0) },
            tau: rng.random_range(0.3..2.0),
        };
        let clusters = (seed % 2 == 1).then(|| super::random_labels(n, 3, &mut rng));
        let inst = Instance {
            x1,
            x2,
            p,
            sym,
            params,
            weights,
            clusters,
        };
        if kink_margin(&inst, &inst.params) > 100.0 * H {
            return inst;
        }
    }
}

pub fn loss(inst: &Instance, params: &EncoderParams) -> f64 {
    asrc_loss_and_grad(
        &inst.x1.view(),
        &inst.x2.view(),
        inst.sym.normalized(),
        params,
        &inst.p,
        inst.weights,
        inst.clusters.as_deref(),
    )
    .expect("loss")
    .0
    .total
}

/// Worst relative error between the analytic and central-difference
/// parameter gradients of the combined objective on instance `seed`.
pub fn asrc_gradient_error(seed: u64) -> f64 {
    let inst = instance(seed);
    let (_, grads) = asrc_loss_and_grad(
        &inst.x1.view(),
        &inst.x2.view(),
        inst.sym.normalized(),
        &inst.params,
        &inst.p,
        inst.weights,
        inst.clusters.as_deref(),
    )
    .expect("gradient");

    let mut analytic = grads.theta1.iter().copied().collect::<Vec<_>>();
    analytic.extend(grads.theta2.iter().copied());

    let mut numeric = Vec::new();
    for layer in 0..2 {
        let mut params = inst.params.clone();
        let len = if layer == 0 { params.theta1.len() } else { params.theta2.len() };
        let mut target = if layer == 0 { params.theta1.clone() } else { params.theta2.clone() };
        numeric.extend(central(len, &mut target, |t, idx, h| {
            let cols = t.ncols();
            let saved = t[[idx / cols, idx % cols]];
            t[[idx / cols, idx % cols]] = saved + h;
            if layer == 0 {
                params.theta1.assign(t);
            } else {
                params.theta2.assign(t);
            }
            let value = loss(&inst, &params);
            t[[idx / cols, idx % cols]] = saved;
            value
        }));
    }
    max_rel_error(&analytic, &numeric)
}
