//! Prevalence and error-rate estimates from scores or from the posterior.

use serde::{Deserialize, Serialize};

use crate::data::{weighted_rates, PointEstimates, ReplicateDataset};
use crate::error::{Error, Result};
use crate::mcmc::{CredibleInterval, PosteriorSummary};
use crate::scoring::{ScoreMethod, ScoreVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CredibleSet {
    pub level: f64,
    pub theta: CredibleInterval,
    pub p: CredibleInterval,
    pub q: CredibleInterval,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateSet {
    pub method: ScoreMethod,
    pub theta_hat: f64,
    pub p_hat: f64,
    pub q_hat: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<CredibleSet>,
}

impl EstimateSet {
    /// Posterior means with their credible intervals.
    pub fn from_posterior(summary: &PosteriorSummary) -> Self {
        Self {
            method: ScoreMethod::Bayes,
            theta_hat: summary.mean_theta,
            p_hat: summary.mean_p,
            q_hat: summary.mean_q,
            ci: Some(CredibleSet { level: summary.level, theta: summary.ci_theta, p: summary.ci_p, q: summary.ci_q }),
        }
    }

    pub fn point(&self) -> PointEstimates {
        PointEstimates { theta: self.theta_hat, p: self.p_hat, q: self.q_hat }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Score-weighted estimates for per-individual values `y` in `[0, 1]`.
pub fn estimate_from_values(data: &ReplicateDataset, y: &[f64], method: ScoreMethod) -> Result<EstimateSet> {
    if y.len() != data.len() {
        return Err(Error::Argument(format!("{} scores for {} individuals", y.len(), data.len())));
    }
    if let Some(v) = y.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain(format!("score {v} outside [0, 1]")));
    }
    let est = weighted_rates(data, y)?;
    Ok(EstimateSet { method, theta_hat: est.theta, p_hat: est.p, q_hat: est.q, ci: None })
}

/// Estimates from average, median, likelihood or MAP scores. Bayesian
/// estimates come from [`EstimateSet::from_posterior`].
pub fn estimate(data: &ReplicateDataset, scores: &ScoreVector) -> Result<EstimateSet> {
    if scores.method() == ScoreMethod::Bayes {
        return Err(Error::Argument(
            "Bayesian estimates are posterior means; build them from the posterior summary".into(),
        ));
    }
    estimate_from_values(data, scores.scores(), scores.method())
}
