//! Synthetic datasets and the experiment runners built on them.

pub mod experiment;
pub mod mammography;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::data::{IndividualRecord, ReplicateDataset};
use crate::error::{Error, Result};
use crate::exec::stream_rng;

pub use experiment::{
    run_bias_experiment, run_mammography_experiment, run_risk_experiment, BiasExperiment, MammoExperiment, MethodSettings,
    RiskExperiment,
};
pub use mammography::{simulate_mammography, MammoConfig, MissingCells};

/// Largest replicate count the generator accepts.
pub const MAX_REPLICATES: u32 = 200;

/// Distribution of the per-individual replicate count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NDist {
    Fixed(u32),
    /// Uniform over `lo..=hi`.
    Uniform { lo: u32, hi: u32 },
}

impl NDist {
    fn bounds(self) -> (u32, u32) {
        match self {
            NDist::Fixed(n) => (n, n),
            NDist::Uniform { lo, hi } => (lo, hi),
        }
    }

    fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> u32 {
        match self {
            NDist::Fixed(n) => n,
            NDist::Uniform { lo, hi } => rng.random_range(lo..=hi),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub theta: f64,
    pub p: f64,
    pub q: f64,
    /// Number of individuals.
    pub n: usize,
    pub n_dist: NDist,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Domain(format!("prevalence {} not in [0, 1]", self.theta)));
        }
        for (name, v) in [("p", self.p), ("q", self.q)] {
            if !(0.0..0.5).contains(&v) {
                return Err(Error::Domain(format!("{name} = {v} not in [0, 1/2)")));
            }
        }
        if self.n == 0 {
            return Err(Error::Argument("at least one individual is required".into()));
        }
        let (lo, hi) = self.n_dist.bounds();
        if lo < 1 || hi > MAX_REPLICATES || lo > hi {
            return Err(Error::Argument(format!(
                "replicate range {lo}..={hi} must lie within 1..={MAX_REPLICATES}"
            )));
        }
        Ok(())
    }
}

/// Draws a dataset with known status from `rng`.
pub fn simulate_with_rng<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Result<ReplicateDataset> {
    cfg.validate()?;
    let records = (0..cfg.n)
        .map(|i| {
            let t = rng.random::<f64>() < cfg.theta;
            let n = cfg.n_dist.sample(rng);
            let prob = if t { 1.0 - cfg.q } else { cfg.p };
            let s = Binomial::new(u64::from(n), prob)
                .map_err(|e| Error::Numerical(format!("binomial({n}, {prob}): {e}")))?
                .sample(rng) as u32;
            IndividualRecord::new(format!("i{}", i + 1), n, s, Some(t))
        })
        .collect::<Result<Vec<_>>>()?;
    ReplicateDataset::new(records)
}

/// `T_i ~ Ber(theta)`, `n_i ~ n_dist`, `S_i ~ Bin(n_i, T_i (1 - q) + (1 - T_i) p)`.
pub fn simulate_dataset(cfg: &SimConfig) -> Result<ReplicateDataset> {
    simulate_with_rng(cfg, &mut stream_rng(cfg.seed, 0))
}
