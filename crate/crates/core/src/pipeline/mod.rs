//! End-to-end runs.
//!
//! The full method alternates graph learning and encoder training over a
//! growing sparsity schedule, then clusters the final embedding with robust
//! continuous clustering on the learned edges. Later rounds retrain with
//! contrastive negatives restricted to other clusters and cluster again.

pub mod config;
pub mod io;
pub mod synth;

pub use config::{parse_config, parse_config_str, PipelineConfig, Variant};
pub use io::{load_labels, load_matrix, normalize_minmax, write_csv, write_labels, write_raw_f64, MatrixFormat};
pub use synth::{gen_blobs, gen_two_moons};

use std::time::Instant;

use ndarray::ArrayView2;
use serde::Serialize;

use crate::contrastive::{augment_gaussian, AugmentConfig, NegativeMask};
use crate::encoder::{
    train, Architecture, EncoderParams, LossWeights, OptimizerState, PropagatedViews, TrainOptions,
};
use crate::error::{AsrcError, Result};
use crate::graph::{learn_graph, symmetrize_normalize, SparseRowGraph, SparsitySchedule, SymGraph};
use crate::metrics::{adjusted_mutual_info, adjusted_rand_index, contingency, kmeans_pp, ClusterAssignment};
use crate::numerics::{pca_reduce, DataMatrix, SeededRng, Stream};
use crate::rcc::{mutual_knn_graph, rcc_run, RccConfig};

/// Fraction of samples whose assignment may change before feedback rounds stop.
const FEEDBACK_STOP: f64 = 0.01;

/// Wall time per phase, in seconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timings {
    pub preprocess: f64,
    pub graph: f64,
    pub training: f64,
    pub clustering: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub assignments: ClusterAssignment,
    /// Fractions in `[-1, 1]`; the JSON document reports percentages.
    pub ami: Option<f64>,
    pub ari: Option<f64>,
    pub loss_trace: Vec<f64>,
    pub timings: Timings,
    pub config: PipelineConfig,
    pub seed: u64,
    /// Training/clustering rounds actually run.
    pub rounds_run: usize,
    /// Sparsity of the graph handed to clustering.
    pub final_k: Option<usize>,
    pub rcc_sweeps: Option<usize>,
    /// Embedding handed to clustering.
    pub embedding: DataMatrix,
    /// Learned graph whose edges were handed to clustering; `None` for
    /// k-means and for plain RCC on a mutual kNN graph.
    pub graph: Option<SparseRowGraph>,
}

/// Serialized form of a [`RunResult`].
#[derive(Debug, Serialize)]
pub struct ResultDocument<'a> {
    pub variant: Variant,
    pub seed: u64,
    pub n_samples: usize,
    pub n_clusters: usize,
    pub assignments: &'a [usize],
    /// Percent.
    pub ami: Option<f64>,
    /// Percent.
    pub ari: Option<f64>,
    pub rounds: usize,
    pub final_k: Option<usize>,
    pub rcc_sweeps: Option<usize>,
    pub loss_trace: &'a [f64],
    pub config: &'a PipelineConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<&'a Timings>,
}

impl RunResult {
    pub fn n_clusters(&self) -> usize {
        self.assignments.n_clusters()
    }

    /// Fill in AMI and ARI against reference labels.
    pub fn score(&mut self, truth: &[usize]) -> Result<()> {
        self.ami = Some(adjusted_mutual_info(self.assignments.labels(), truth)?);
        self.ari = Some(adjusted_rand_index(self.assignments.labels(), truth)?);
        Ok(())
    }

    pub fn document(&self, with_timings: bool) -> ResultDocument<'_> {
        ResultDocument {
            variant: self.config.variant,
            seed: self.seed,
            n_samples: self.assignments.len(),
            n_clusters: self.n_clusters(),
            assignments: self.assignments.labels(),
            ami: self.ami.map(|v| 100.0 * v),
            ari: self.ari.map(|v| 100.0 * v),
            rounds: self.rounds_run,
            final_k: self.final_k,
            rcc_sweeps: self.rcc_sweeps,
            loss_trace: &self.loss_trace,
            config: &self.config,
            timings: with_timings.then_some(&self.timings),
        }
    }

    /// Pretty JSON. Timings are left out unless asked for, so that repeated
    /// runs serialize identically.
    pub fn to_json(&self, with_timings: bool) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.document(with_timings))?)
    }
}

/// Share of samples outside the best one-to-one overlap of two assignments.
pub fn assignment_change(old: &[usize], new: &[usize]) -> Result<f64> {
    let t = contingency(old, new)?;
    if t.n == 0 {
        return Ok(0.0);
    }
    let by_rows: u64 = t.counts.iter().map(|r| r.iter().copied().max().unwrap_or(0)).sum();
    let by_cols: u64 = (0..t.col_sums.len())
        .map(|v| t.counts.iter().map(|r| r[v]).max().unwrap_or(0))
        .sum();
    Ok((t.n - by_rows.min(by_cols)) as f64 / t.n as f64)
}

struct Clock {
    start: Instant,
}

impl Clock {
    fn start() -> Self {
        Self { start: Instant::now() }
    }

    fn lap(&mut self, slot: &mut f64) {
        let now = Instant::now();
        *slot += (now - self.start).as_secs_f64();
        self.start = now;
    }
}

/// Normalization and optional PCA.
fn preprocess(x: &ArrayView2<'_, f64>, cfg: &PipelineConfig) -> Result<DataMatrix> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(AsrcError::Dimension(format!("empty data matrix {:?}", x.dim())));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(AsrcError::InvalidArgument("data contains non-finite values".into()));
    }
    let mut data = if cfg.normalize { normalize_minmax(x) } else { x.to_owned() };
    if cfg.pca_components > 0 {
        let r = cfg.pca_components.min(data.nrows().min(data.ncols()));
        let mut rng = SeededRng::new(cfg.seed).stream(Stream::Pca);
        data = pca_reduce(&data.view(), r, &mut rng)?.scores;
    }
    Ok(data)
}

/// Per-variant switches for the shared training loop.
#[derive(Debug, Clone, Copy)]
struct Plan {
    t2: usize,
    resync: bool,
    augment: bool,
    beta: f64,
    rounds: usize,
    feedback: bool,
}

/// Encoder, optimizer and the graph currently trained against.
struct Trainer {
    x1: DataMatrix,
    x2: DataMatrix,
    params: EncoderParams,
    opt: OptimizerState,
    weights: LossWeights,
    train_opts: TrainOptions,
    p: SparseRowGraph,
    sym: SymGraph,
    views: PropagatedViews,
    /// Embedding `p` was learned from, if it came from the encoder.
    source: Option<DataMatrix>,
    trace: Vec<f64>,
}

impl Trainer {
    fn new(x1: DataMatrix, x2: DataMatrix, cfg: &PipelineConfig, plan: &Plan, k: usize) -> Result<Self> {
        let arch = Architecture::parse(&cfg.structure, x1.ncols())?;
        let params = EncoderParams::init(arch, &mut SeededRng::new(cfg.seed).stream(Stream::EncoderInit));
        let opt = OptimizerState::new(&params, cfg.eta);
        let p = learn_graph(&x1.view(), k);
        let sym = symmetrize_normalize(&p)?;
        let views = PropagatedViews::new(&x1.view(), &x2.view(), sym.normalized())?;
        Ok(Self {
            x1,
            x2,
            params,
            opt,
            weights: LossWeights {
                lambda2: cfg.lambda2,
                beta: plan.beta,
                tau: cfg.tau,
            },
            train_opts: TrainOptions {
                max_steps: cfg.inner_steps,
                ..TrainOptions::default()
            },
            p,
            sym,
            views,
            source: None,
            trace: Vec::new(),
        })
    }

    fn embed(&self) -> DataMatrix {
        self.views.embed(self.sym.normalized(), &self.params).2
    }

    fn set_graph(&mut self, z: DataMatrix, k: usize) -> Result<()> {
        self.p = learn_graph(&z.view(), k);
        self.sym = symmetrize_normalize(&self.p)?;
        self.views = PropagatedViews::new(&self.x1.view(), &self.x2.view(), self.sym.normalized())?;
        self.source = Some(z);
        Ok(())
    }

    fn train(&mut self, mask: &NegativeMask) -> Result<()> {
        let steps = train(
            &mut self.params,
            &mut self.opt,
            &self.views,
            self.sym.normalized(),
            &self.p,
            self.weights,
            mask,
            self.train_opts,
        )?;
        self.trace.extend(steps);
        Ok(())
    }

    /// Embedding to cluster: the one the current graph came from, when the
    /// graph was re-synced after training.
    fn clustering_input(&self) -> DataMatrix {
        self.source.clone().unwrap_or_else(|| self.embed())
    }
}

fn rcc_config(cfg: &PipelineConfig) -> RccConfig {
    RccConfig {
        max_sweeps: cfg.t3,
        interval: cfg.t,
        delta: cfg.delta,
        ..RccConfig::default()
    }
}

fn plan_for(cfg: &PipelineConfig) -> Plan {
    let full = Plan {
        t2: cfg.t2,
        resync: true,
        augment: true,
        beta: cfg.beta,
        rounds: cfg.rounds,
        feedback: true,
    };
    match cfg.variant {
        Variant::Asrc | Variant::Rcc => full,
        Variant::Asrc1 => Plan {
            t2: 1,
            resync: false,
            rounds: 1,
            feedback: false,
            ..full
        },
        Variant::Asrc2 => Plan {
            rounds: 1,
            feedback: false,
            ..full
        },
        Variant::Adagae => Plan {
            t2: 1,
            resync: false,
            augment: false,
            beta: 0.0,
            rounds: 1,
            feedback: false,
        },
    }
}

/// Graph schedule and encoder training; returns the trainer holding the
/// final graph and embedding.
fn learn_representation(
    data: DataMatrix,
    cfg: &PipelineConfig,
    plan: &Plan,
    timings: &mut Timings,
    clock: &mut Clock,
) -> Result<(Trainer, usize)> {
    let n = data.nrows();
    let mut schedule = SparsitySchedule::new(cfg.k0, cfg.s, cfg.t1, n)?;
    let x2 = if plan.augment {
        let aug = AugmentConfig {
            noise_std: cfg.noise_std,
            rng: SeededRng::new(cfg.seed),
        };
        augment_gaussian(&data.view(), &aug)?
    } else {
        data.clone()
    };
    let mut trainer = Trainer::new(data, x2, cfg, plan, schedule.k)?;
    clock.lap(&mut timings.graph);
    let singletons = NegativeMask::singletons();
    let mut k = schedule.k;
    while !schedule.is_done() {
        k = schedule.k;
        if schedule.round > 0 {
            let z = trainer.clustering_input();
            trainer.set_graph(z, k)?;
            clock.lap(&mut timings.graph);
        }
        for _ in 0..plan.t2 {
            trainer.train(&singletons)?;
            clock.lap(&mut timings.training);
            if plan.resync {
                let z = trainer.embed();
                trainer.set_graph(z, k)?;
                clock.lap(&mut timings.graph);
            }
        }
        schedule = schedule.advance();
    }
    Ok((trainer, k))
}

fn finish(
    assignments: ClusterAssignment,
    trace: Vec<f64>,
    cfg: &PipelineConfig,
    rounds_run: usize,
    final_k: Option<usize>,
    rcc_sweeps: Option<usize>,
    embedding: DataMatrix,
    graph: Option<SparseRowGraph>,
    timings: Timings,
) -> RunResult {
    RunResult {
        assignments,
        ami: None,
        ari: None,
        loss_trace: trace,
        timings,
        config: cfg.clone(),
        seed: cfg.seed,
        rounds_run,
        final_k,
        rcc_sweeps,
        embedding,
        graph,
    }
}

fn run_graph_variants(x: &ArrayView2<'_, f64>, cfg: &PipelineConfig) -> Result<RunResult> {
    cfg.validate()?;
    let started = Instant::now();
    let mut timings = Timings::default();
    let mut clock = Clock::start();
    let plan = plan_for(cfg);
    let data = preprocess(x, cfg)?;
    clock.lap(&mut timings.preprocess);

    let (mut trainer, k) = learn_representation(data, cfg, &plan, &mut timings, &mut clock)?;
    let rng = SeededRng::new(cfg.seed);

    if cfg.variant == Variant::Adagae {
        let c = cfg.n_clusters.ok_or(AsrcError::MissingClusterCount)?;
        let z = trainer.embed();
        let assignments = kmeans_pp(&z.view(), c, &rng, 10)?;
        clock.lap(&mut timings.clustering);
        timings.total = started.elapsed().as_secs_f64();
        return Ok(finish(assignments, trainer.trace, cfg, 1, Some(k), None, z, None, timings));
    }

    let rcc_cfg = rcc_config(cfg);
    let mut z = trainer.clustering_input();
    let (mut assignments, state) = rcc_run(&z.view(), trainer.sym.rcc_edges(), &rcc_cfg, &rng)?;
    let mut sweeps = state.sweeps;
    clock.lap(&mut timings.clustering);
    let mut rounds_run = 1;

    while plan.feedback && rounds_run < plan.rounds {
        let mask = NegativeMask::from_clusters(assignments.labels());
        for _ in 0..plan.t2 {
            trainer.train(&mask)?;
            clock.lap(&mut timings.training);
            let fresh = trainer.embed();
            trainer.set_graph(fresh, k)?;
            clock.lap(&mut timings.graph);
        }
        z = trainer.clustering_input();
        let (next, state) = rcc_run(&z.view(), trainer.sym.rcc_edges(), &rcc_cfg, &rng)?;
        clock.lap(&mut timings.clustering);
        rounds_run += 1;
        sweeps = state.sweeps;
        let change = assignment_change(assignments.labels(), next.labels())?;
        assignments = next;
        if change < FEEDBACK_STOP {
            break;
        }
    }
    timings.total = started.elapsed().as_secs_f64();
    let graph = Some(trainer.p.clone());
    Ok(finish(assignments, trainer.trace, cfg, rounds_run, Some(k), Some(sweeps), z, graph, timings))
}

/// The full method, whatever `cfg.variant` says.
pub fn run_asrc(x: &ArrayView2<'_, f64>, cfg: &PipelineConfig) -> Result<RunResult> {
    let cfg = PipelineConfig {
        variant: Variant::Asrc,
        ..cfg.clone()
    };
    run_graph_variants(x, &cfg)
}

/// Run the method selected by `cfg.variant`.
pub fn run_variant(x: &ArrayView2<'_, f64>, cfg: &PipelineConfig) -> Result<RunResult> {
    if cfg.variant != Variant::Rcc {
        return run_graph_variants(x, cfg);
    }
    cfg.validate()?;
    let started = Instant::now();
    let mut timings = Timings::default();
    let mut clock = Clock::start();
    let data = preprocess(x, cfg)?;
    clock.lap(&mut timings.preprocess);
    let n = data.nrows();
    if n < 2 {
        return Err(AsrcError::Dimension("clustering needs at least 2 samples".into()));
    }
    let knn = mutual_knn_graph(&data.view(), cfg.knn_k.min(n - 1), cfg.metric)?;
    clock.lap(&mut timings.graph);
    let (assignments, state) = rcc_run(&data.view(), &knn.edges, &rcc_config(cfg), &SeededRng::new(cfg.seed))?;
    clock.lap(&mut timings.clustering);
    timings.total = started.elapsed().as_secs_f64();
    Ok(finish(assignments, Vec::new(), cfg, 1, None, Some(state.sweeps), data, None, timings))
}
