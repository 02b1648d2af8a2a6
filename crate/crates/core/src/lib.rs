//! Inference of binary latent states from noisy binary technical replicates.
//!
//! Each individual `i` carries `n_i` exchangeable binary replicates of which
//! `s_i` are positive. Given the latent state `T_i`, replicates are positive
//! with probability `1 - q` (when `T_i = 1`) or `p` (when `T_i = 0`). The crate
//! provides average, median, MAP and Bayesian scores, three-way
//! classification with an indecision response, prevalence and error-rate
//! estimation, prediction for new individuals and a simulation harness.

pub mod coeffs;
pub mod data;
pub mod decision;
pub mod error;
pub mod estimation;
pub mod exec;
pub mod mcmc;
pub mod prediction;
pub mod scoring;
pub mod simulation;
pub mod special;
pub mod stats;

pub use data::{
    latent_oracle_estimates, load_csv, read_csv, reduce_to_sufficient, CsvFormat, IndividualRecord,
    ModelParams, PointEstimates, RawReplicateTable, ReplicateDataset,
};
pub use decision::{
    classify, confusion_table, empirical_risk, optimal_thresholds, sensitivity_specificity, Classification,
    ConfusionTable, Decision, LossSpec, OptimalThresholds, RiskMode, ThresholdPair,
};
pub use error::{Error, Result};
pub use estimation::{estimate, EstimateSet};
pub use exec::Execution;
pub use mcmc::{gibbs_run, summarize, GibbsConfig, PosteriorSample, PosteriorSummary, PriorSpec};
pub use prediction::{predict_bayes, predict_plugin, prediction_table, PredictionTable, Predictor};
pub use scoring::{em_fit, score_average, score_likelihood, score_map, score_median, EmConfig, EmFitResult, ScoreMethod, ScoreVector};
pub use simulation::{simulate_dataset, simulate_mammography, MammoConfig, NDist, SimConfig};
