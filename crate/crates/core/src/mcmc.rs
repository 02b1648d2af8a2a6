//! Gibbs sampler for the Bayesian replicate model.
//!
//! Priors: `theta ~ Beta(a_T, b_T)`, `p ~ Beta(a_FP, b_FP)` and
//! `q ~ Beta(a_FN, b_FN)`, both truncated to `(0, 1/2)`. Given the latent
//! states every parameter block is conjugate, so a systematic scan over
//! `T`, `theta`, `p`, `q` samples the exact posterior.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::data::ReplicateDataset;
use crate::error::{Error, Result};
use crate::exec::{stream_rng, Execution};
use crate::scoring::{LikelihoodTerms, ScoreMethod, ScoreVector};
use crate::special::sample_truncated_beta;
use crate::stats::{quantile_sorted, split_rhat};

/// R-hat above which a warning is logged.
pub const RHAT_WARN: f64 = 1.05;

/// Chain `c` draws from RNG stream `CHAIN_STREAM_BASE + c`.
const CHAIN_STREAM_BASE: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    #[serde(rename = "a_T", alias = "a_t")]
    pub a_t: f64,
    #[serde(rename = "b_T", alias = "b_t")]
    pub b_t: f64,
    #[serde(rename = "a_FP", alias = "a_fp")]
    pub a_fp: f64,
    #[serde(rename = "b_FP", alias = "b_fp")]
    pub b_fp: f64,
    #[serde(rename = "a_FN", alias = "a_fn")]
    pub a_fn: f64,
    #[serde(rename = "b_FN", alias = "b_fn")]
    pub b_fn: f64,
}

impl PriorSpec {
    pub fn new(a_t: f64, b_t: f64, a_fp: f64, b_fp: f64, a_fn: f64, b_fn: f64) -> Result<Self> {
        Self { a_t, b_t, a_fp, b_fp, a_fn, b_fn }.validated()
    }

    /// `a_T = b_T = 1/2`, all error-rate hyperparameters 2.
    pub fn default_prior() -> Self {
        Self { a_t: 0.5, b_t: 0.5, a_fp: 2.0, b_fp: 2.0, a_fn: 2.0, b_fn: 2.0 }
    }

    /// Error-rate priors concentrated at 1/2.
    pub fn misguided() -> Self {
        Self { a_t: 0.5, b_t: 0.5, a_fp: 50.0, b_fp: 50.0, a_fn: 50.0, b_fn: 50.0 }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str::<Self>(s)?.validated()
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_json_str(&text)
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.a_t, self.b_t, self.a_fp, self.b_fp, self.a_fn, self.b_fn]
    }

    fn validated(self) -> Result<Self> {
        if self.as_array().iter().all(|&h| h > 0.0 && h.is_finite()) {
            Ok(self)
        } else {
            Err(Error::Domain(format!("prior hyperparameters must be positive, got {:?}", self.as_array())))
        }
    }
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self::default_prior()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub chains: usize,
    /// Sweeps per chain, burn-in included.
    pub iters: usize,
    pub burnin: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self { chains: 4, iters: 5000, burnin: 1000, seed: 0, exec: Execution::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamDraw {
    pub theta: f64,
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub seed: u64,
    pub chains: usize,
    pub iters: usize,
    pub burnin: usize,
}

/// Retained draws of all chains, concatenated in chain order.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSample {
    meta: ChainMeta,
    n_individuals: usize,
    params: Vec<ParamDraw>,
    /// Latent states, `draw * n_individuals + i`.
    states: Vec<u8>,
}

impl PosteriorSample {
    /// Assembles a sample from explicit draws; `states` is row-major by draw.
    pub fn from_parts(meta: ChainMeta, n_individuals: usize, params: Vec<ParamDraw>, states: Vec<u8>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::Argument("posterior sample has no draws".into()));
        }
        if states.len() != params.len() * n_individuals {
            return Err(Error::Argument(format!(
                "{} latent states for {} draws of {} individuals",
                states.len(),
                params.len(),
                n_individuals
            )));
        }
        if meta.chains == 0 || !params.len().is_multiple_of(meta.chains) {
            return Err(Error::Argument("draw count is not a multiple of the chain count".into()));
        }
        if let Some(d) = params
            .iter()
            .find(|d| !(d.theta >= 0.0 && d.theta <= 1.0 && d.p > 0.0 && d.p < 0.5 && d.q > 0.0 && d.q < 0.5))
        {
            return Err(Error::Domain(format!("draw outside the parameter domain: {d:?}")));
        }
        if states.iter().any(|&t| t > 1) {
            return Err(Error::Domain("latent states must be 0 or 1".into()));
        }
        Ok(Self { meta, n_individuals, params, states })
    }

    pub fn meta(&self) -> ChainMeta {
        self.meta
    }

    pub fn n_individuals(&self) -> usize {
        self.n_individuals
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn params(&self) -> &[ParamDraw] {
        &self.params
    }

    pub fn draws_per_chain(&self) -> usize {
        self.params.len() / self.meta.chains
    }

    /// Latent-state vector of draw `h`.
    pub fn states(&self, h: usize) -> &[u8] {
        &self.states[h * self.n_individuals..(h + 1) * self.n_individuals]
    }

    /// Draws of one scalar, split by chain.
    pub fn chain_traces(&self, f: impl Fn(&ParamDraw) -> f64) -> Vec<Vec<f64>> {
        self.params.chunks(self.draws_per_chain()).map(|c| c.iter().map(&f).collect()).collect()
    }

    /// Largest split R-hat over `(theta, p, q)`, when chains are long enough.
    pub fn max_split_rhat(&self) -> Option<f64> {
        let extractors: [fn(&ParamDraw) -> f64; 3] = [|d| d.theta, |d| d.p, |d| d.q];
        extractors
            .iter()
            .filter_map(|f| {
                let traces = self.chain_traces(f);
                let refs: Vec<&[f64]> = traces.iter().map(Vec::as_slice).collect();
                split_rhat(&refs)
            })
            .reduce(f64::max)
    }

    /// Writes `chain,iter,theta,p,q`; `iter` counts sweeps from 0 including burn-in.
    pub fn write_draws_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["chain", "iter", "theta", "p", "q"])?;
        let per_chain = self.draws_per_chain();
        let offset = self.meta.iters.saturating_sub(per_chain);
        for (k, d) in self.params.iter().enumerate() {
            w.write_record([
                (k / per_chain).to_string(),
                (offset + k % per_chain).to_string(),
                d.theta.to_string(),
                d.p.to_string(),
                d.q.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

struct ChainOutput {
    params: Vec<ParamDraw>,
    states: Vec<u8>,
}

fn truncated(rng: &mut impl Rng, a: f64, b: f64, name: &str) -> Result<f64> {
    sample_truncated_beta(rng, a, b, 0.5).map_err(|e| Error::Numerical(format!("sampling {name}: {e}")))
}

fn run_chain(data: &ReplicateDataset, prior: &PriorSpec, cfg: &GibbsConfig, chain: usize) -> Result<ChainOutput> {
    let mut rng = stream_rng(cfg.seed, CHAIN_STREAM_BASE + chain as u64);
    let records = data.records();
    let big_n = records.len();
    let keep = cfg.iters - cfg.burnin;

    let beta = |a: f64, b: f64| Beta::new(a, b).map_err(|e| Error::Numerical(format!("Beta({a}, {b}): {e}")));
    let mut theta = beta(prior.a_t, prior.b_t)?.sample(&mut rng);
    let mut p = truncated(&mut rng, prior.a_fp, prior.b_fp, "p")?;
    let mut q = truncated(&mut rng, prior.a_fn, prior.b_fn, "q")?;

    let mut t = vec![0u8; big_n];
    let mut out = ChainOutput { params: Vec::with_capacity(keep), states: Vec::with_capacity(keep * big_n) };

    for iter in 0..cfg.iters {
        let terms = LikelihoodTerms::new(theta, p, q);
        let (mut sum_t, mut s0, mut f0, mut s1, mut f1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (ti, r) in t.iter_mut().zip(records) {
            let y = terms.score(r.n, r.s);
            let u: f64 = rng.random();
            let (s, f) = (f64::from(r.s), f64::from(r.n - r.s));
            if u < y {
                *ti = 1;
                sum_t += 1.0;
                s1 += s;
                f1 += f;
            } else {
                *ti = 0;
                s0 += s;
                f0 += f;
            }
        }
        theta = beta(prior.a_t + sum_t, prior.b_t + big_n as f64 - sum_t)?.sample(&mut rng);
        p = truncated(&mut rng, prior.a_fp + s0, prior.b_fp + f0, "p")?;
        q = truncated(&mut rng, prior.a_fn + f1, prior.b_fn + s1, "q")?;

        if iter >= cfg.burnin {
            out.params.push(ParamDraw { theta, p, q });
            out.states.extend_from_slice(&t);
        }
    }
    Ok(out)
}

/// Runs `cfg.chains` independent chains and concatenates their retained draws.
pub fn gibbs_run(data: &ReplicateDataset, prior: &PriorSpec, cfg: &GibbsConfig) -> Result<PosteriorSample> {
    if cfg.chains == 0 {
        return Err(Error::Argument("at least one chain is required".into()));
    }
    if cfg.iters <= cfg.burnin {
        return Err(Error::Argument(format!(
            "iterations ({}) must exceed burn-in ({})",
            cfg.iters, cfg.burnin
        )));
    }
    let prior = prior.validated()?;
    let outputs = cfg.exec.map_indexed(cfg.chains, |c| run_chain(data, &prior, cfg, c));

    let keep = cfg.iters - cfg.burnin;
    let mut params = Vec::with_capacity(keep * cfg.chains);
    let mut states = Vec::with_capacity(keep * cfg.chains * data.len());
    for out in outputs {
        let out = out?;
        params.extend(out.params);
        states.extend(out.states);
    }
    let sample = PosteriorSample {
        meta: ChainMeta { seed: cfg.seed, chains: cfg.chains, iters: cfg.iters, burnin: cfg.burnin },
        n_individuals: data.len(),
        params,
        states,
    };
    if let Some(rhat) = sample.max_split_rhat() {
        if rhat > RHAT_WARN {
            log::warn!("split R-hat {rhat:.3} exceeds {RHAT_WARN}; chains may not have mixed");
        }
    }
    Ok(sample)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CredibleInterval {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub level: f64,
    pub mean_theta: f64,
    pub mean_p: f64,
    pub mean_q: f64,
    pub ci_theta: CredibleInterval,
    pub ci_p: CredibleInterval,
    pub ci_q: CredibleInterval,
    /// Posterior probability of `T_i = 1` per individual.
    pub bayes_scores: ScoreVector,
    pub max_rhat: Option<f64>,
}

fn mean_and_interval(values: Vec<f64>, level: f64) -> (f64, CredibleInterval) {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut sorted = values;
    sorted.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let ci = CredibleInterval { lower: quantile_sorted(&sorted, tail), upper: quantile_sorted(&sorted, 1.0 - tail) };
    (mean, ci)
}

/// Posterior means, equal-tailed credible intervals at `level`, and Bayesian scores.
pub fn summarize(sample: &PosteriorSample, level: f64) -> Result<PosteriorSummary> {
    if sample.is_empty() {
        return Err(Error::Argument("cannot summarize an empty posterior sample".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Argument(format!("credible level {level} not in (0, 1)")));
    }
    let (mean_theta, ci_theta) = mean_and_interval(sample.params.iter().map(|d| d.theta).collect(), level);
    let (mean_p, ci_p) = mean_and_interval(sample.params.iter().map(|d| d.p).collect(), level);
    let (mean_q, ci_q) = mean_and_interval(sample.params.iter().map(|d| d.q).collect(), level);

    let mut counts = vec![0u64; sample.n_individuals];
    for draw in sample.states.chunks(sample.n_individuals.max(1)) {
        for (c, &t) in counts.iter_mut().zip(draw) {
            *c += u64::from(t);
        }
    }
    let h = sample.len() as f64;
    let bayes_scores = ScoreVector::new(ScoreMethod::Bayes, counts.iter().map(|&c| c as f64 / h).collect())?;

    Ok(PosteriorSummary {
        level,
        mean_theta,
        mean_p,
        mean_q,
        ci_theta,
        ci_p,
        ci_q,
        bayes_scores,
        max_rhat: sample.max_split_rhat(),
    })
}
