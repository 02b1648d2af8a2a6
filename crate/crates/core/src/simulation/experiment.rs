//! Monte-Carlo experiments: prevalence bias, classification risk across
//! decision costs, and prediction risk on simulated reader studies.
//!
//! Repetitions run as independent tasks whose seeds are derived from the
//! experiment seed and the task indices, so results do not depend on the
//! execution mode.

use std::io::Write;

use num_rational::Ratio;
use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use super::mammography::{simulate_mammography, MammoConfig};
use super::{simulate_with_rng, SimConfig};
use crate::data::{reduce_to_sufficient, PointEstimates, ReplicateDataset};
use crate::decision::{classify, Decision, Rational, ThresholdPair};
use crate::error::{Error, Result};
use crate::estimation::estimate;
use crate::exec::{derive_seed, stream_rng, Execution};
use crate::mcmc::{gibbs_run, summarize, GibbsConfig, PosteriorSample, PriorSpec};
use crate::scoring::{em_fit, score_average, score_map, score_median, EmConfig, LikelihoodTerms, ScoreMethod, ScoreVector};
use crate::stats::band;

const TAG_DATA: u64 = 0;
const TAG_EM: u64 = 1;
const TAG_GIBBS: u64 = 2;
const TAG_SPLIT: u64 = 3;

/// Fitting controls shared by all experiments. Seeds and execution modes
/// inside are overridden per task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodSettings {
    pub em: EmConfig,
    pub gibbs: GibbsConfig,
    pub prior: PriorSpec,
}

impl Default for MethodSettings {
    fn default() -> Self {
        Self {
            em: EmConfig { exec: Execution::Sequential, ..EmConfig::default() },
            gibbs: GibbsConfig { chains: 2, iters: 2000, burnin: 500, seed: 0, exec: Execution::Sequential },
            prior: PriorSpec::default_prior(),
        }
    }
}

pub fn default_methods() -> Vec<ScoreMethod> {
    vec![ScoreMethod::Average, ScoreMethod::Median, ScoreMethod::Map, ScoreMethod::Bayes]
}

struct MethodFit {
    scores: ScoreVector,
    theta_hat: f64,
    estimates: Option<PointEstimates>,
    sample: Option<PosteriorSample>,
}

impl MethodFit {
    fn predict(&self, n: u32, s: u32) -> Result<f64> {
        if let Some(sample) = &self.sample {
            return crate::prediction::predict_bayes(n, s, sample);
        }
        let e = self
            .estimates
            .ok_or_else(|| Error::Numerical("plug-in estimates undefined for this dataset".into()))?;
        Ok(LikelihoodTerms::new(e.theta, e.p, e.q).score(n, s))
    }
}

fn fit_method(data: &ReplicateDataset, method: ScoreMethod, settings: &MethodSettings, seed_path: &[u64]) -> Result<MethodFit> {
    let mean = |s: &ScoreVector| crate::stats::mean(s.scores());
    match method {
        ScoreMethod::Average | ScoreMethod::Median => {
            let scores = if method == ScoreMethod::Average { score_average(data) } else { score_median(data) };
            let estimates = estimate(data, &scores).ok().map(|e| e.point());
            Ok(MethodFit { theta_hat: mean(&scores), scores, estimates, sample: None })
        }
        ScoreMethod::Map => {
            let em = EmConfig { seed: derive_seed(TAG_EM, seed_path), exec: Execution::Sequential, ..settings.em };
            let fit = em_fit(data, &em)?;
            let scores = score_map(data, &fit)?;
            Ok(MethodFit { theta_hat: mean(&scores), scores, estimates: Some(fit.params), sample: None })
        }
        ScoreMethod::Bayes => {
            let gibbs = GibbsConfig { seed: derive_seed(TAG_GIBBS, seed_path), exec: Execution::Sequential, ..settings.gibbs };
            let sample = gibbs_run(data, &settings.prior, &gibbs)?;
            let summary = summarize(&sample, 0.95)?;
            Ok(MethodFit { theta_hat: summary.mean_theta, scores: summary.bayes_scores, estimates: None, sample: Some(sample) })
        }
        ScoreMethod::Likelihood => Err(Error::Argument("experiments take average, median, map or bayes".into())),
    }
}

/// Median and 0.4 / 0.6 quantiles of one (grid point, method) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryRow {
    pub key: f64,
    pub method: ScoreMethod,
    pub median: f64,
    pub q40: f64,
    pub q60: f64,
}

fn summarize_cells(keys: &[f64], methods: &[ScoreMethod], value: impl Fn(usize, ScoreMethod) -> Vec<f64>) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for (k, &key) in keys.iter().enumerate() {
        for &m in methods {
            let b = band(&value(k, m));
            rows.push(SummaryRow { key, method: m, median: b.median, q40: b.q40, q60: b.q60 });
        }
    }
    rows
}

fn write_summary<W: Write>(rows: &[SummaryRow], key_name: &str, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([key_name, "method", "median", "q40", "q60"])?;
    for r in rows {
        w.write_record([r.key.to_string(), r.method.name().into(), r.median.to_string(), r.q40.to_string(), r.q60.to_string()])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

fn check_reps(reps: usize, methods: &[ScoreMethod]) -> Result<()> {
    if reps == 0 {
        return Err(Error::Argument("at least one repetition is required".into()));
    }
    if methods.is_empty() {
        return Err(Error::Argument("no methods selected".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasExperiment {
    pub theta_grid: Vec<f64>,
    pub reps: usize,
    /// Simulation settings; `theta` and `seed` are replaced per task.
    pub base: SimConfig,
    pub methods: Vec<ScoreMethod>,
    pub settings: MethodSettings,
    pub seed: u64,
    pub exec: Execution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasRecord {
    pub theta: f64,
    pub method: ScoreMethod,
    pub rep: usize,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasResult {
    pub experiment: BiasExperiment,
    pub records: Vec<BiasRecord>,
}

impl BiasResult {
    fn cell(&self, k: usize, m: ScoreMethod) -> Vec<f64> {
        let reps = self.experiment.reps;
        let per_theta = reps * self.experiment.methods.len();
        self.records[k * per_theta..(k + 1) * per_theta]
            .iter()
            .filter(|r| r.method == m)
            .map(|r| r.estimate - r.theta)
            .collect()
    }

    /// Bias `theta_hat - theta` bands per `(theta, method)`.
    pub fn summary(&self) -> Vec<SummaryRow> {
        summarize_cells(&self.experiment.theta_grid, &self.experiment.methods, |k, m| self.cell(k, m))
    }

    /// Writes `theta,method,rep,estimate`.
    pub fn write_records_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["theta", "method", "rep", "estimate"])?;
        for r in &self.records {
            w.write_record([r.theta.to_string(), r.method.name().into(), r.rep.to_string(), r.estimate.to_string()])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    /// Writes `theta,method,median,q40,q60` of the bias.
    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_summary(&self.summary(), "theta", writer)
    }
}

/// Prevalence estimates over a grid of true prevalences.
pub fn run_bias_experiment(exp: &BiasExperiment) -> Result<BiasResult> {
    check_reps(exp.reps, &exp.methods)?;
    if exp.theta_grid.is_empty() {
        return Err(Error::Argument("empty prevalence grid".into()));
    }
    let jobs = exp.theta_grid.len() * exp.reps;
    let results = exp.exec.map_indexed(jobs, |job| {
        let (k, rep) = (job / exp.reps, job % exp.reps);
        let theta = exp.theta_grid[k];
        let path = [exp.seed, k as u64, rep as u64];
        let cfg = SimConfig { theta, ..exp.base };
        let data = simulate_with_rng(&cfg, &mut stream_rng(derive_seed(TAG_DATA, &path), 0))?;
        exp.methods
            .iter()
            .map(|&method| {
                let fit = fit_method(&data, method, &exp.settings, &path)?;
                Ok(BiasRecord { theta, method, rep, estimate: fit.theta_hat })
            })
            .collect::<Result<Vec<_>>>()
    });
    let mut records = Vec::with_capacity(jobs * exp.methods.len());
    for r in results {
        records.extend(r?);
    }
    Ok(BiasResult { experiment: exp.clone(), records })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskExperiment {
    /// Indecision costs; thresholds are `(a, 1 - a)`.
    pub a_grid: Vec<Rational>,
    pub reps: usize,
    /// Simulation settings; `seed` is replaced per repetition.
    pub base: SimConfig,
    pub methods: Vec<ScoreMethod>,
    pub settings: MethodSettings,
    pub seed: u64,
    pub exec: Execution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskRecord {
    pub a: Rational,
    pub method: ScoreMethod,
    pub rep: usize,
    /// Mean loss per individual.
    pub risk: f64,
    pub indecisive: usize,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskResult {
    pub experiment: RiskExperiment,
    /// Ordered by repetition, then method, then `a`.
    pub records: Vec<RiskRecord>,
}

impl RiskResult {
    pub fn a_values(&self) -> Vec<f64> {
        self.experiment.a_grid.iter().map(|a| *a.numer() as f64 / *a.denom() as f64).collect()
    }

    /// Records of one repetition and method, in grid order.
    pub fn curve(&self, rep: usize, method: ScoreMethod) -> &[RiskRecord] {
        let g = self.experiment.a_grid.len();
        let m = self.experiment.methods.iter().position(|&x| x == method).expect("method in experiment");
        let start = (rep * self.experiment.methods.len() + m) * g;
        &self.records[start..start + g]
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        summarize_cells(&self.a_values(), &self.experiment.methods, |k, m| {
            (0..self.experiment.reps).map(|rep| self.curve(rep, m)[k].risk).collect()
        })
    }

    /// Writes `a,method,rep,risk`.
    pub fn write_records_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["a", "method", "rep", "risk"])?;
        for r in &self.records {
            let a = *r.a.numer() as f64 / *r.a.denom() as f64;
            w.write_record([a.to_string(), r.method.name().into(), r.rep.to_string(), r.risk.to_string()])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    /// Writes `a,method,median,q40,q60`.
    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_summary(&self.summary(), "a", writer)
    }
}

/// Mean symmetric-loss risk of each method over a grid of indecision costs.
/// Each repetition simulates one dataset shared by the whole grid.
pub fn run_risk_experiment(exp: &RiskExperiment) -> Result<RiskResult> {
    check_reps(exp.reps, &exp.methods)?;
    let half = Ratio::new(1, 2);
    if exp.a_grid.is_empty() || exp.a_grid.iter().any(|a| *a <= Ratio::from_integer(0) || *a > half) {
        return Err(Error::Argument("indecision costs must lie in (0, 1/2]".into()));
    }
    let thresholds = exp.a_grid.iter().map(|&a| ThresholdPair::symmetric(a)).collect::<Result<Vec<_>>>()?;
    let results = exp.exec.map_indexed(exp.reps, |rep| -> Result<_> {
        let path = [exp.seed, rep as u64];
        let data = simulate_with_rng(&exp.base, &mut stream_rng(derive_seed(TAG_DATA, &path), 0))?;
        let truth = data.truth()?;
        let n = truth.len() as f64;
        let mut out = Vec::with_capacity(exp.methods.len() * thresholds.len());
        for &method in &exp.methods {
            let fit = fit_method(&data, method, &exp.settings, &path)?;
            for (&a, t) in exp.a_grid.iter().zip(&thresholds) {
                let c = classify(&fit.scores, t);
                let indecisive = c.decisions.iter().filter(|&&d| d == Decision::Half).count();
                let errors = c
                    .decisions
                    .iter()
                    .zip(&truth)
                    .filter(|(&d, &t)| (d == Decision::One && !t) || (d == Decision::Zero && t))
                    .count();
                let a_f = *a.numer() as f64 / *a.denom() as f64;
                let risk = (a_f * indecisive as f64 + errors as f64) / n;
                out.push(RiskRecord { a, method, rep, risk, indecisive, errors });
            }
        }
        Ok(out)
    });
    let mut records = Vec::new();
    for r in results {
        records.extend(r?);
    }
    Ok(RiskResult { experiment: exp.clone(), records })
}

/// `k / 100` for `k` in `lo..=hi` stepping by `step`.
pub fn percent_grid(lo: i64, hi: i64, step: usize) -> Vec<Rational> {
    (lo..=hi).step_by(step).map(|k| Ratio::new(k, 100)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MammoExperiment {
    /// Reader-study settings; `seed` is replaced per repetition.
    pub mammo: MammoConfig,
    pub reps: usize,
    /// Radiologists kept per simulated dataset.
    pub radiologists: usize,
    /// Patients held out for prediction.
    pub test_size: usize,
    pub a_grid: Vec<Rational>,
    pub methods: Vec<ScoreMethod>,
    pub settings: MethodSettings,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for MammoExperiment {
    fn default() -> Self {
        Self {
            mammo: MammoConfig::default(),
            reps: 100,
            radiologists: 4,
            test_size: 15,
            a_grid: percent_grid(15, 45, 5),
            methods: default_methods(),
            settings: MethodSettings::default(),
            seed: 0,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MammoRiskRecord {
    pub rep: usize,
    pub method: ScoreMethod,
    /// Mean held-out loss summed over the cost grid.
    pub risk_sum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MammoPredictionRecord {
    pub rep: usize,
    pub method: ScoreMethod,
    pub s: u32,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MammoResult {
    pub experiment: MammoExperiment,
    /// Ordered by repetition, then method.
    pub risks: Vec<MammoRiskRecord>,
    pub predictions: Vec<MammoPredictionRecord>,
}

impl MammoResult {
    pub fn risk(&self, rep: usize, method: ScoreMethod) -> f64 {
        let m = self.experiment.methods.iter().position(|&x| x == method).expect("method in experiment");
        self.risks[rep * self.experiment.methods.len() + m].risk_sum
    }

    /// Writes `rep,method,risk`.
    pub fn write_risks_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["rep", "method", "risk"])?;
        for r in &self.risks {
            w.write_record([r.rep.to_string(), r.method.name().into(), r.risk_sum.to_string()])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    /// Writes `rep,method,s,score` for a new patient read by every kept radiologist.
    pub fn write_predictions_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["rep", "method", "s", "score"])?;
        for r in &self.predictions {
            w.write_record([r.rep.to_string(), r.method.name().into(), r.s.to_string(), r.score.to_string()])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    /// Writes `method,median,q40,q60` of the summed risk.
    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["method", "median", "q40", "q60"])?;
        for &m in &self.experiment.methods {
            let b = band(&(0..self.experiment.reps).map(|rep| self.risk(rep, m)).collect::<Vec<_>>());
            w.write_record([m.name().into(), b.median.to_string(), b.q40.to_string(), b.q60.to_string()])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

/// Simulates reader studies, keeps a few radiologists, fits every method on
/// a training split and scores the held-out patients.
pub fn run_mammography_experiment(exp: &MammoExperiment) -> Result<MammoResult> {
    check_reps(exp.reps, &exp.methods)?;
    let n_rad = exp.mammo.radiologist_ids.len();
    if exp.radiologists == 0 || exp.radiologists > n_rad {
        return Err(Error::Argument(format!("cannot keep {} of {n_rad} radiologists", exp.radiologists)));
    }
    if exp.test_size == 0 || exp.test_size >= exp.mammo.n_patients() {
        return Err(Error::Argument(format!("test size {} leaves no training data", exp.test_size)));
    }
    let thresholds = exp.a_grid.iter().map(|&a| ThresholdPair::symmetric(a)).collect::<Result<Vec<_>>>()?;
    let k = exp.radiologists as u32;

    let results = exp.exec.map_indexed(exp.reps, |rep| -> Result<_> {
        let path = [exp.seed, rep as u64];
        let cfg = MammoConfig { seed: derive_seed(TAG_DATA, &path), ..exp.mammo.clone() };
        let raw = simulate_mammography(&cfg)?;
        let mut rng = stream_rng(derive_seed(TAG_SPLIT, &path), 0);
        let mut cols = index::sample(&mut rng, n_rad, exp.radiologists).into_vec();
        cols.sort_unstable();
        let data = reduce_to_sufficient(&raw.select_columns(&cols)?)?;
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng);
        let (test_idx, train_idx) = order.split_at(exp.test_size);
        let train = data.subset(train_idx)?;
        let test = data.subset(test_idx)?;
        let truth = test.truth()?;

        let mut risks = Vec::new();
        let mut predictions = Vec::new();
        for &method in &exp.methods {
            let fit = fit_method(&train, method, &exp.settings, &path)?;
            let scores = test.records().iter().map(|r| fit.predict(r.n, r.s)).collect::<Result<Vec<_>>>()?;
            let mut risk_sum = 0.0;
            for (t, loss_a) in thresholds.iter().zip(&exp.a_grid) {
                let a = *loss_a.numer() as f64 / *loss_a.denom() as f64;
                let total: f64 = scores
                    .iter()
                    .zip(&truth)
                    .map(|(&y, &truth)| match (t.decide(y), truth) {
                        (Decision::Half, _) => a,
                        (Decision::One, false) | (Decision::Zero, true) => 1.0,
                        _ => 0.0,
                    })
                    .sum();
                risk_sum += total / truth.len() as f64;
            }
            risks.push(MammoRiskRecord { rep, method, risk_sum });
            for s in 0..=k {
                predictions.push(MammoPredictionRecord { rep, method, s, score: fit.predict(k, s)? });
            }
        }
        Ok((risks, predictions))
    });

    let mut risks = Vec::new();
    let mut predictions = Vec::new();
    for r in results {
        let (a, b) = r?;
        risks.extend(a);
        predictions.extend(b);
    }
    Ok(MammoResult { experiment: exp.clone(), risks, predictions })
}
