//! Per-individual scores and the penalized EM fit behind the MAP score.

use num_rational::Ratio;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::data::{ModelParams, PointEstimates, ReplicateDataset};
use crate::error::{Error, Result};
use crate::exec::{stream_rng, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMethod {
    Average,
    Median,
    /// Likelihood score at user-supplied parameters.
    Likelihood,
    Map,
    Bayes,
}

impl ScoreMethod {
    pub fn name(self) -> &'static str {
        match self {
            ScoreMethod::Average => "average",
            ScoreMethod::Median => "median",
            ScoreMethod::Likelihood => "likelihood",
            ScoreMethod::Map => "map",
            ScoreMethod::Bayes => "bayes",
        }
    }
}

/// Scores in `[0, 1]` aligned with dataset order.
///
/// Average and median scores also carry their exact rational values so that
/// threshold comparisons at rational cut points are exact.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    method: ScoreMethod,
    scores: Vec<f64>,
    exact: Option<Vec<Ratio<i64>>>,
}

impl ScoreVector {
    pub fn new(method: ScoreMethod, scores: Vec<f64>) -> Result<Self> {
        if let Some((i, y)) = scores.iter().enumerate().find(|(_, y)| !(0.0..=1.0).contains(*y)) {
            return Err(Error::Domain(format!("score {i} = {y} outside [0, 1]")));
        }
        Ok(Self { method, scores, exact: None })
    }

    /// Scores given as exact rationals in `[0, 1]`.
    pub fn from_exact(method: ScoreMethod, exact: Vec<Ratio<i64>>) -> Self {
        let scores = exact.iter().map(|r| *r.numer() as f64 / *r.denom() as f64).collect();
        Self { method, scores, exact: Some(exact) }
    }

    pub fn method(&self) -> ScoreMethod {
        self.method
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn exact(&self) -> Option<&[Ratio<i64>]> {
        self.exact.as_deref()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

pub fn score_average(data: &ReplicateDataset) -> ScoreVector {
    let exact = data
        .records()
        .iter()
        .map(|r| Ratio::new(i64::from(r.s), i64::from(r.n)))
        .collect();
    ScoreVector::from_exact(ScoreMethod::Average, exact)
}

/// Median of the replicates, 1/2 on ties.
pub fn median_value(n: u32, s: u32) -> Ratio<i64> {
    match (2 * s).cmp(&n) {
        std::cmp::Ordering::Greater => Ratio::from_integer(1),
        std::cmp::Ordering::Equal => Ratio::new(1, 2),
        std::cmp::Ordering::Less => Ratio::from_integer(0),
    }
}

pub fn score_median(data: &ReplicateDataset) -> ScoreVector {
    let exact = data.records().iter().map(|r| median_value(r.n, r.s)).collect();
    ScoreVector::from_exact(ScoreMethod::Median, exact)
}

/// `x ln y` with the convention `0 ln 0 = 0`.
fn xlny(x: f64, ln_y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * ln_y
    }
}

/// Precomputed logarithms of `(theta, p, q)` for repeated score evaluation.
///
/// Any values in `[0, 1]` are accepted; callers enforce the domain they need.
#[derive(Debug, Clone, Copy)]
pub struct LikelihoodTerms {
    ln_theta: f64,
    ln_one_minus_theta: f64,
    ln_p: f64,
    ln_one_minus_p: f64,
    ln_q: f64,
    ln_one_minus_q: f64,
}

impl LikelihoodTerms {
    pub fn new(theta: f64, p: f64, q: f64) -> Self {
        Self {
            ln_theta: theta.ln(),
            ln_one_minus_theta: (-theta).ln_1p(),
            ln_p: p.ln(),
            ln_one_minus_p: (-p).ln_1p(),
            ln_q: q.ln(),
            ln_one_minus_q: (-q).ln_1p(),
        }
    }

    /// Log joint weights `(ln P(S = s, T = 1), ln P(S = s, T = 0))` without
    /// the binomial coefficient.
    #[inline]
    pub fn ln_components(&self, n: u32, s: u32) -> (f64, f64) {
        let (s, f) = (f64::from(s), f64::from(n - s));
        (
            self.ln_theta + xlny(s, self.ln_one_minus_q) + xlny(f, self.ln_q),
            self.ln_one_minus_theta + xlny(s, self.ln_p) + xlny(f, self.ln_one_minus_p),
        )
    }

    /// `P(T = 1 | S = s)`.
    #[inline]
    pub fn score(&self, n: u32, s: u32) -> f64 {
        let (pos, neg) = self.ln_components(n, s);
        if pos == f64::NEG_INFINITY {
            return 0.0;
        }
        1.0 / (1.0 + (neg - pos).exp())
    }

    /// `ln [theta (1-q)^s q^(n-s) + (1-theta) p^s (1-p)^(n-s)]`.
    #[inline]
    pub fn ln_marginal(&self, n: u32, s: u32) -> f64 {
        let (pos, neg) = self.ln_components(n, s);
        log_add_exp(pos, neg)
    }
}

pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Likelihood score for one `(n, s)` at fixed parameters.
pub fn likelihood_score(n: u32, s: u32, params: &ModelParams) -> f64 {
    LikelihoodTerms::new(params.theta, params.p, params.q).score(n, s)
}

pub fn score_likelihood(data: &ReplicateDataset, params: &ModelParams) -> ScoreVector {
    let terms = LikelihoodTerms::new(params.theta, params.p, params.q);
    ScoreVector {
        method: ScoreMethod::Likelihood,
        scores: data.records().iter().map(|r| terms.score(r.n, r.s)).collect(),
        exact: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// Relative change of the penalized log-posterior that ends a restart.
    pub tol: f64,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self { restarts: 20, max_iters: 500, tol: 1e-9, seed: 0, exec: Execution::default() }
    }
}

/// One EM trajectory from a given initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct EmRun {
    pub params: PointEstimates,
    pub log_posterior: f64,
    pub responsibilities: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Penalized log-posterior after every M-step.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmFitResult {
    /// MAP parameters, labelled so that `p + q < 1`.
    pub params: PointEstimates,
    pub log_posterior: f64,
    pub responsibilities: Vec<f64>,
    pub restarts_used: usize,
    pub best_restart: usize,
    pub converged: Vec<bool>,
    pub iterations: Vec<usize>,
}

impl EmFitResult {
    pub fn model_params(&self) -> Result<ModelParams> {
        self.params.to_params()
    }
}

/// Penalized log-posterior: Beta(2, 2) penalties on `p` and `q`, flat on `theta`.
pub fn penalized_log_posterior(data: &ReplicateDataset, theta: f64, p: f64, q: f64) -> f64 {
    let terms = LikelihoodTerms::new(theta, p, q);
    let penalty = p.ln() + (-p).ln_1p() + q.ln() + (-q).ln_1p();
    penalty + data.records().iter().map(|r| terms.ln_marginal(r.n, r.s)).sum::<f64>()
}

fn m_step(data: &ReplicateDataset, y: &[f64]) -> (f64, f64, f64) {
    let (mut sum_y, mut fp_num, mut fp_den, mut fn_num, mut fn_den) = (0.0, 1.0, 2.0, 1.0, 2.0);
    for (r, &yi) in data.records().iter().zip(y) {
        let (n, s) = (f64::from(r.n), f64::from(r.s));
        sum_y += yi;
        fp_num += s * (1.0 - yi);
        fp_den += n * (1.0 - yi);
        fn_num += (n - s) * yi;
        fn_den += n * yi;
    }
    (sum_y / data.len() as f64, fp_num / fp_den, fn_num / fn_den)
}

/// Runs EM (M-step first) from responsibilities `init`.
///
/// After every M-step the labelling with `p + q < 1` is enforced by the
/// symmetry `(theta, p, q, y) -> (1 - theta, 1 - q, 1 - p, 1 - y)`, which
/// leaves the objective unchanged.
pub fn em_from_responsibilities(
    data: &ReplicateDataset,
    init: &[f64],
    max_iters: usize,
    tol: f64,
) -> Result<EmRun> {
    if init.len() != data.len() {
        return Err(Error::Argument(format!(
            "{} initial responsibilities for {} individuals",
            init.len(),
            data.len()
        )));
    }
    if max_iters == 0 {
        return Err(Error::Argument("max_iters must be positive".into()));
    }
    let mut y = init.to_vec();
    let mut history = Vec::new();
    let mut converged = false;
    let mut params = (0.0, 0.0, 0.0);
    let mut previous: Option<f64> = None;

    for _ in 0..max_iters {
        let (mut theta, mut p, mut q) = m_step(data, &y);
        if p + q > 1.0 {
            (theta, p, q) = (1.0 - theta, 1.0 - q, 1.0 - p);
            y.iter_mut().for_each(|v| *v = 1.0 - *v);
        }
        params = (theta, p, q);
        let lp = penalized_log_posterior(data, theta, p, q);
        if !lp.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite log-posterior at theta = {theta}, p = {p}, q = {q}"
            )));
        }
        history.push(lp);

        let terms = LikelihoodTerms::new(theta, p, q);
        for (yi, r) in y.iter_mut().zip(data.records()) {
            *yi = terms.score(r.n, r.s);
        }

        if let Some(prev) = previous {
            if (lp - prev).abs() <= tol * prev.abs() {
                converged = true;
                break;
            }
        }
        previous = Some(lp);
    }

    let (theta, p, q) = params;
    Ok(EmRun {
        params: PointEstimates { theta, p, q },
        log_posterior: *history.last().expect("at least one iteration"),
        responsibilities: y,
        converged,
        iterations: history.len(),
        history,
    })
}

/// Initial responsibilities `y_i ~ Beta(s_i + 1/2, n_i - s_i + 1/2)` for restart `restart`.
pub fn em_initial_responsibilities(data: &ReplicateDataset, seed: u64, restart: usize) -> Vec<f64> {
    let mut rng = stream_rng(seed, restart as u64);
    data.records()
        .iter()
        .map(|r| {
            let beta = Beta::new(f64::from(r.s) + 0.5, f64::from(r.n - r.s) + 0.5)
                .expect("positive shape parameters");
            beta.sample(&mut rng)
        })
        .collect()
}

/// Multi-restart MAP fit; keeps the restart with the highest penalized
/// log-posterior (lowest index on ties).
pub fn em_fit(data: &ReplicateDataset, cfg: &EmConfig) -> Result<EmFitResult> {
    if cfg.restarts < 1 {
        return Err(Error::Argument("at least one EM restart is required".into()));
    }
    let runs = cfg.exec.map_indexed(cfg.restarts, |r| {
        let init = em_initial_responsibilities(data, cfg.seed, r);
        em_from_responsibilities(data, &init, cfg.max_iters, cfg.tol)
            .map_err(|e| Error::Numerical(format!("EM restart {r}: {e}")))
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let mut best = 0;
    for (r, run) in runs.iter().enumerate().skip(1) {
        if run.log_posterior > runs[best].log_posterior {
            best = r;
        }
    }
    let converged = runs.iter().map(|r| r.converged).collect();
    let iterations = runs.iter().map(|r| r.iterations).collect();
    let winner = runs.into_iter().nth(best).expect("best index in range");
    Ok(EmFitResult {
        params: winner.params,
        log_posterior: winner.log_posterior,
        responsibilities: winner.responsibilities,
        restarts_used: cfg.restarts,
        best_restart: best,
        converged,
        iterations,
    })
}

/// Likelihood scores at the fitted MAP parameters.
pub fn score_map(data: &ReplicateDataset, fit: &EmFitResult) -> Result<ScoreVector> {
    if fit.responsibilities.len() != data.len() {
        return Err(Error::Argument("EM fit was produced from a different dataset".into()));
    }
    let PointEstimates { theta, p, q } = fit.params;
    let terms = LikelihoodTerms::new(theta, p, q);
    Ok(ScoreVector {
        method: ScoreMethod::Map,
        scores: data.records().iter().map(|r| terms.score(r.n, r.s)).collect(),
        exact: None,
    })
}
