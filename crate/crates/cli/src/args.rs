use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "binrep", version, about = "Latent-class scoring and classification of replicated binary tests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Input CSV (`id,n,s[,status]` or wide `id,x1,...[,status]`).
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Seed, required by every stochastic path.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = MethodArg::Average)]
    pub method: MethodArg,
    /// `default`, `misguided`, or a JSON file with a_T, b_T, a_FP, b_FP, a_FN, b_FN.
    #[arg(long, global = true, default_value = "default")]
    pub prior: String,
    #[arg(long, global = true)]
    pub vl: Option<String>,
    #[arg(long, global = true)]
    pub vu: Option<String>,
    /// Loss table `a,b,c,d`.
    #[arg(long, global = true)]
    pub loss: Option<String>,
    #[arg(long, global = true)]
    pub chains: Option<usize>,
    /// Sweeps per chain, burn-in included.
    #[arg(long, global = true)]
    pub iters: Option<usize>,
    #[arg(long, global = true)]
    pub burnin: Option<usize>,
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Sufficient)]
    pub format: FormatArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Average,
    Median,
    Map,
    Bayes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Sufficient,
    Wide,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-individual scores as `id,n,s,score`.
    Score {
        /// JSON file for fitted parameters of MAP and Bayes runs.
        #[arg(long)]
        sidecar: Option<PathBuf>,
    },
    /// Three-way decisions as `id,score,decision`.
    Classify {
        #[arg(long)]
        sidecar: Option<PathBuf>,
    },
    /// Prevalence and error-rate estimates as JSON.
    Estimate,
    /// Predictive score and decision for a new individual.
    Predict(PredictArgs),
    /// Synthetic dataset with known status.
    Simulate(SimulateArgs),
    /// Simulation experiments.
    Experiment {
        #[command(subcommand)]
        mode: ExperimentMode,
    },
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Every `(n, s)` with `s <= n <= nmax`.
    #[arg(long)]
    pub table: bool,
    #[arg(long, default_value_t = 6)]
    pub nmax: u32,
    #[arg(long, required_unless_present = "table")]
    pub n: Option<u32>,
    #[arg(long, required_unless_present = "table")]
    pub s: Option<u32>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 0.4)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub p: f64,
    #[arg(long, default_value_t = 0.05)]
    pub q: f64,
    #[arg(long, default_value_t = 200)]
    pub individuals: usize,
    /// Replicates per individual: `k` or `lo:hi`.
    #[arg(long, default_value = "2:6")]
    pub n: String,
    /// Reader-study table in wide format instead.
    #[arg(long)]
    pub mammography: bool,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.1)]
    pub p: f64,
    #[arg(long, default_value_t = 0.05)]
    pub q: f64,
    #[arg(long, default_value_t = 200)]
    pub individuals: usize,
    #[arg(long, default_value = "2:6")]
    pub n: String,
    /// Per-repetition records CSV.
    #[arg(long)]
    pub records: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ExperimentMode {
    /// Prevalence bias over a grid of true prevalences.
    Bias {
        #[command(flatten)]
        common: ExperimentArgs,
        /// Grid `lo:hi:step`.
        #[arg(long, default_value = "0.05:0.5:0.05")]
        theta: String,
    },
    /// Classification risk over a grid of indecision costs.
    Risk {
        #[command(flatten)]
        common: ExperimentArgs,
        #[arg(long, default_value_t = 0.4)]
        theta: f64,
        /// Grid `lo:hi:step` of decimal costs in (0, 1/2].
        #[arg(long, default_value = "0.10:0.50:0.02")]
        a: String,
    },
    /// Held-out prediction risk on simulated reader studies.
    Mammography {
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = 4)]
        radiologists: usize,
        #[arg(long, default_value_t = 15)]
        test_size: usize,
        #[arg(long)]
        records: Option<PathBuf>,
    },
}
