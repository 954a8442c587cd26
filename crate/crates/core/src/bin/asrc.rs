//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or input error, 2 configuration error,
//! 3 numerical failure. `ASRC_THREADS` sets the worker count.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use asrc::metrics::{adjusted_mutual_info, adjusted_rand_index, ClusterAssignment};
use asrc::pipeline::{
    gen_blobs, gen_two_moons, load_labels, load_matrix, parse_config, run_variant, write_csv, write_labels,
    write_raw_f64, MatrixFormat, Variant,
};
use asrc::{AsrcError, DataMatrix};

#[derive(Parser)]
#[command(name = "asrc", version, about = "Graph-embedding clustering with robust continuous clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a data matrix.
    Run(RunArgs),
    /// Write a synthetic dataset and its labels.
    Synth {
        #[command(subcommand)]
        kind: SynthKind,
    },
    /// Score predicted labels against reference labels.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        labels: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    data: PathBuf,
    /// Reference labels, one integer per line; adds AMI and ARI to the result.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    seed: Option<u64>,
    /// Result JSON path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: MatrixFormat,
    /// The CSV file starts with a header line.
    #[arg(long)]
    header: bool,
    /// Include wall-clock timings in the result.
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct SynthOut {
    /// Data file.
    #[arg(long)]
    out: PathBuf,
    /// Label file.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value = "csv")]
    format: MatrixFormat,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum SynthKind {
    Moons {
        #[arg(long, default_value_t = 300)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[command(flatten)]
        io: SynthOut,
    },
    Blobs {
        #[arg(long, default_value_t = 400)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        clusters: usize,
        #[arg(long, default_value_t = 10.0)]
        separation: f64,
        #[arg(long, default_value_t = 1.0)]
        spread: f64,
        #[command(flatten)]
        io: SynthOut,
    },
}

fn reference_labels(path: &Path, n: usize) -> Result<Vec<usize>, AsrcError> {
    let raw = load_labels(path)?;
    if raw.len() != n {
        return Err(AsrcError::LengthMismatch(raw.len(), n));
    }
    Ok(ClusterAssignment::from_labels(&raw).into_labels())
}

fn run(args: RunArgs) -> Result<(), AsrcError> {
    let mut cfg = parse_config(&args.config)?;
    if let Some(v) = args.variant {
        cfg.variant = v;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let x = load_matrix(&args.data, args.format, args.header)?;
    let truth = args
        .labels
        .as_deref()
        .map(|p| reference_labels(p, x.nrows()))
        .transpose()?;
    let mut result = run_variant(&x.view(), &cfg)?;
    if let Some(t) = truth {
        result.score(&t)?;
    }
    let json = result.to_json(args.timings)?;
    match args.out {
        Some(path) => std::fs::write(path, json + "\n")?,
        None => println!("{json}"),
    }
    Ok(())
}

fn write_dataset(x: &DataMatrix, labels: &[usize], io: &SynthOut) -> Result<(), AsrcError> {
    match io.format {
        MatrixFormat::Csv => write_csv(&io.out, &x.view())?,
        MatrixFormat::RawF64 => write_raw_f64(&io.out, &x.view())?,
    }
    write_labels(&io.labels, labels)
}

fn synth(kind: SynthKind) -> Result<(), AsrcError> {
    match kind {
        SynthKind::Moons { n, noise, io } => {
            if n < 4 || !(noise >= 0.0) {
                return Err(AsrcError::InvalidArgument("moons need n >= 4 and noise >= 0".into()));
            }
            let (x, y) = gen_two_moons(n, noise, io.seed);
            write_dataset(&x, &y, &io)
        }
        SynthKind::Blobs {
            n,
            clusters,
            separation,
            spread,
            io,
        } => {
            if n < 4 || clusters == 0 || clusters > n || !(spread >= 0.0) || !(separation >= 0.0) {
                return Err(AsrcError::InvalidArgument(
                    "blobs need n >= 4, 1 <= clusters <= n and non-negative spread and separation".into(),
                ));
            }
            let (x, y) = gen_blobs(n, clusters, separation, spread, io.seed);
            write_dataset(&x, &y, &io)
        }
    }
}

fn eval(pred: &Path, labels: &Path) -> Result<(), AsrcError> {
    let p = ClusterAssignment::from_labels(&load_labels(pred)?).into_labels();
    let t = reference_labels(labels, p.len())?;
    let ami = 100.0 * adjusted_mutual_info(&p, &t)?;
    let ari = 100.0 * adjusted_rand_index(&p, &t)?;
    println!("{}", serde_json::json!({ "ami": ami, "ari": ari }));
    Ok(())
}

fn configure_threads() -> Result<(), AsrcError> {
    let Ok(value) = std::env::var("ASRC_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .map_err(|_| AsrcError::InvalidArgument(format!("ASRC_THREADS must be a count, got `{value}`")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| AsrcError::InvalidArgument(e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn exit_code(err: &AsrcError) -> u8 {
    if matches!(err, AsrcError::Config(_) | AsrcError::MissingClusterCount) {
        2
    } else if err.is_numerical() {
        3
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|()| match cli.command {
        Command::Run(args) => run(args),
        Command::Synth { kind } => synth(kind),
        Command::Eval { pred, labels } => eval(&pred, &labels),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
