//! Random instances and exact checks for the continuous clustering solver.

use asrc::graph::{learn_graph, symmetrize_normalize, WeightedEdge};
use asrc::numerics::{CgOptions, SeededRng};
use asrc::rcc::{anneal_alpha, rcc_objective, RccConfig, RccState};
use asrc::DataMatrix;
use ndarray::Array2;
use rand::Rng;

pub fn instance(seed: u64) -> (DataMatrix, Vec<WeightedEdge>) {
    let mut rng = super::rng(seed);
    let n = rng.random_range(10..=60);
    let d = rng.random_range(2..=6);
    let mut z = super::gaussian(n, d, &mut rng);
    // A few loose groups so that some edges get long.
    for i in 0..n {
        let shift = (i % 3) as f64 * 4.0;
        z[[i, 0]] += shift;
    }
    let k = rng.random_range(2..=6.min(n - 1));
    let sym = symmetrize_normalize(&learn_graph(&z.view(), k)).expect("graph");
    (z, sym.rcc_edges().to_vec())
}

/// Largest objective increase over 50 sweeps at frozen `λ₁` and `α`.
pub fn monotonicity_violation(seed: u64) -> f64 {
    let cg = CgOptions {
        tol: 1e-13,
        max_iter: 100_000,
    };
    let (z, edges) = instance(seed);
    let cfg = RccConfig::default();
    let mut state = RccState::init(&z.view(), &edges, &cfg, &SeededRng::new(seed)).expect("init");
    // Freeze α somewhere in the annealing range instead of at its start.
    state.alpha = anneal_alpha(anneal_alpha(state.alpha, state.delta), state.delta);
    let mut prev = rcc_objective(&state.u.view(), &state.l, &z.view(), &edges, state.lambda1, state.alpha);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        state.sweep(&z.view(), &edges, cg).expect("sweep");
        let f = rcc_objective(&state.u.view(), &state.l, &z.view(), &edges, state.lambda1, state.alpha);
        worst = worst.max(f - prev);
        prev = f;
    }
    worst
}

fn dense_edge_operator(n: usize, edges: &[WeightedEdge], l: &[f64]) -> DataMatrix {
    let mut m = Array2::zeros((n, n));
    for (e, &li) in edges.iter().zip(l) {
        let v = e.weight * li;
        m[[e.i, e.i]] += v;
        m[[e.j, e.j]] += v;
        m[[e.i, e.j]] -= v;
        m[[e.j, e.i]] -= v;
    }
    m
}

/// Worst `|λ₁‖M‖ − ‖Z‖| / ‖Z‖` at initialization and after each of six
/// refreshes, with both norms from dense eigenvalues.
pub fn balancing_error(seed: u64) -> f64 {
    let (z, edges) = instance(100 + seed);
    let n = z.nrows();
    let cfg = RccConfig::default();
    let mut state = RccState::init(&z.view(), &edges, &cfg, &SeededRng::new(seed)).expect("init");
    let z_norm = super::dense_spectral_norm(&z);
    let error = |state: &RccState| {
        let m = dense_edge_operator(n, &edges, &state.l);
        let m_norm = super::jacobi_eigenvalues(&m).into_iter().fold(0.0f64, |a, v| a.max(v.abs()));
        (state.lambda1 * m_norm - z_norm).abs() / z_norm
    };
    let mut worst = error(&state);
    for sweep in 1..=6 * cfg.interval {
        state.sweep(&z.view(), &edges, cfg.cg).expect("sweep");
        if sweep % cfg.interval == 0 {
            state.refresh_lambda1(&edges, cfg.power).expect("refresh");
            worst = worst.max(error(&state));
            state.alpha = anneal_alpha(state.alpha, state.delta);
        }
    }
    worst
}
