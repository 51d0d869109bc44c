//! `mondrian`: experiment drivers for Mondrian random features. Every
//! command writes a CSV table to `--output` (or stdout) and a short summary
//! to stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser)]
#[command(name = "mondrian", version, about = "Mondrian random features and kernel-width sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct Common {
    /// Number of Mondrian trees M.
    #[arg(long = "trees", default_value_t = 50)]
    pub trees: usize,
    /// Ridge regularization δ² (also the forest's γ²).
    #[arg(long = "ridge-delta2", default_value_t = 1e-4)]
    pub delta2: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exact,
    Sgd,
    Bayes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Fourier,
    Binning,
}

#[derive(Args, Clone, Debug)]
pub struct SgdArgs {
    /// Initial SGD step size.
    #[arg(long = "sgd-eta0", default_value_t = 0.1)]
    pub eta0: f64,
    /// Step-size decay horizon in steps; defaults to the training set size.
    #[arg(long = "sgd-t0")]
    pub t0: Option<f64>,
    /// SGD epochs per decade of lifetime between cuts.
    #[arg(long = "epochs-per-decade", default_value_t = 1.0)]
    pub epochs_per_decade: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a dataset from a Gaussian process with a Laplace kernel.
    GenSynthetic {
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long = "n-val", default_value_t = 200)]
        n_val: usize,
        #[arg(long = "n-test", default_value_t = 0)]
        n_test: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Ground-truth kernel lifetime.
        #[arg(long, default_value_t = 10.0)]
        lifetime: f64,
        /// Noise standard deviation σ.
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory receiving train.csv, validation.csv and test.csv.
        #[arg(long)]
        output: PathBuf,
    },
    /// Maximum kernel approximation error over all pairs of uniform points.
    ApproxError {
        /// Comma-separated list of tree counts.
        #[arg(long = "trees", value_delimiter = ',', default_value = "1,2,5,10,20,50,100,200,400")]
        trees: Vec<usize>,
        #[arg(long, default_value_t = 10.0)]
        lifetime: f64,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Evaluate every lifetime in [0, Λ] in one pass, or search a baseline.
    Sweep {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        validation: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long = "terminal-lifetime", default_value_t = 100.0)]
        terminal_lifetime: f64,
        #[arg(long, value_enum, default_value_t = Mode::Exact)]
        mode: Mode,
        /// Search the lifetime of a baseline feature map instead.
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
        /// Number of Fourier features, or binning repetitions.
        #[arg(long, default_value_t = 1000)]
        features: usize,
        /// First lifetime tried by the baseline search.
        #[arg(long = "start-lifetime", default_value_t = 1.0)]
        start_lifetime: f64,
        #[arg(long = "max-expansions", default_value_t = 10)]
        max_expansions: usize,
        #[arg(long, default_value_t = 3)]
        refinements: usize,
        /// Append a wall-clock column (not deterministic).
        #[arg(long)]
        timing: bool,
        #[command(flatten)]
        sgd: SgdArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Learn from the points of a dataset one at a time.
    Online {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long, default_value_t = 10.0)]
        lifetime: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Kernel ridge regression against a Mondrian forest on the same trees.
    CompareForest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long = "terminal-lifetime", default_value_t = 100.0)]
        terminal_lifetime: f64,
        /// Report only these lifetimes instead of every cut event.
        #[arg(long, value_delimiter = ',')]
        lifetimes: Option<Vec<f64>>,
        /// Write weight histograms of both models to this CSV.
        #[arg(long)]
        histogram: Option<PathBuf>,
        /// Lifetime of the histograms; by default the first event time at
        /// which every tree has at least two cuts.
        #[arg(long)]
        lifetime: Option<f64>,
        #[arg(long, default_value_t = 101)]
        bins: usize,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenSynthetic {
            n,
            n_val,
            n_test,
            dim,
            lifetime,
            noise,
            seed,
            output,
        } => commands::gen_synthetic(n, n_val, n_test, dim, lifetime, noise, seed, &output),
        Command::ApproxError {
            trees,
            lifetime,
            n,
            dim,
            repeats,
            seed,
            output,
        } => commands::approx_error(&trees, lifetime, n, dim, repeats, seed, output.as_deref()),
        Command::Sweep {
            input,
            validation,
            test,
            terminal_lifetime,
            mode,
            baseline,
            features,
            start_lifetime,
            max_expansions,
            refinements,
            timing,
            sgd,
            common,
        } => match baseline {
            Some(b) => commands::baseline_search(
                &input,
                validation.as_deref(),
                b,
                features,
                start_lifetime,
                max_expansions,
                refinements,
                timing,
                &common,
            ),
            None => commands::sweep(
                &input,
                validation.as_deref(),
                test.as_deref(),
                terminal_lifetime,
                mode,
                &sgd,
                timing,
                &common,
            ),
        },
        Command::Online {
            input,
            test,
            lifetime,
            common,
        } => commands::online(&input, test.as_deref(), lifetime, &common),
        Command::CompareForest {
            input,
            test,
            terminal_lifetime,
            lifetimes,
            histogram,
            lifetime,
            bins,
            common,
        } => commands::compare_forest(
            &input,
            &test,
            terminal_lifetime,
            lifetimes.as_deref(),
            histogram.as_deref(),
            lifetime,
            bins,
            &common,
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}
