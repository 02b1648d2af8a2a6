//! Predictive scores and decisions for a new individual with `n` replicates
//! of which `s` are positive.

use std::io::Write;

use crate::data::ModelParams;
use crate::decision::{Decision, ThresholdPair};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::mcmc::PosteriorSample;
use crate::scoring::LikelihoodTerms;

fn check_counts(n: u32, s: u32) -> Result<()> {
    if s > n {
        return Err(Error::Argument(format!("s = {s} exceeds n = {n}")));
    }
    Ok(())
}

/// Likelihood score at plug-in estimates.
pub fn predict_plugin(n: u32, s: u32, params: &ModelParams) -> Result<f64> {
    check_counts(n, s)?;
    Ok(LikelihoodTerms::new(params.theta, params.p, params.q).score(n, s))
}

/// Likelihood score averaged over posterior draws.
pub fn predict_bayes(n: u32, s: u32, sample: &PosteriorSample) -> Result<f64> {
    check_counts(n, s)?;
    if sample.is_empty() {
        return Err(Error::Argument("empty posterior sample".into()));
    }
    let total: f64 = sample
        .params()
        .iter()
        .map(|d| LikelihoodTerms::new(d.theta, d.p, d.q).score(n, s))
        .sum();
    Ok(total / sample.len() as f64)
}

#[derive(Debug, Clone, Copy)]
pub enum Predictor<'a> {
    Plugin(ModelParams),
    Bayes(&'a PosteriorSample),
}

impl Predictor<'_> {
    pub fn score(&self, n: u32, s: u32) -> Result<f64> {
        match self {
            Predictor::Plugin(params) => predict_plugin(n, s, params),
            Predictor::Bayes(sample) => predict_bayes(n, s, sample),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRow {
    pub n: u32,
    pub s: u32,
    pub score: f64,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    pub rows: Vec<PredictionRow>,
}

impl PredictionTable {
    /// Writes `n,s,score,decision`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "s", "score", "decision"])?;
        for r in &self.rows {
            w.write_record([r.n.to_string(), r.s.to_string(), r.score.to_string(), r.decision.to_string()])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

/// Every `(n, s)` with `0 <= s <= n <= n_max`, scored and classified.
pub fn prediction_table(n_max: u32, predictor: &Predictor<'_>, thresholds: &ThresholdPair, exec: Execution) -> Result<PredictionTable> {
    if n_max < 1 {
        return Err(Error::Argument("n_max must be at least 1".into()));
    }
    let cells: Vec<(u32, u32)> = (0..=n_max).flat_map(|n| (0..=n).map(move |s| (n, s))).collect();
    let rows = exec
        .map_indexed(cells.len(), |k| {
            let (n, s) = cells[k];
            let score = predictor.score(n, s)?;
            Ok(PredictionRow { n, s, score, decision: thresholds.decide(score) })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(PredictionTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::{ChainMeta, ParamDraw};
    use approx::assert_abs_diff_eq;

    #[test]
    fn plugin_examples() {
        let sym = ModelParams::new(0.5, 0.1, 0.1).unwrap();
        assert_abs_diff_eq!(predict_plugin(4, 2, &sym).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(predict_plugin(3, 3, &sym).unwrap(), 0.998630, epsilon = 1e-6);
        assert!(predict_plugin(3, 4, &sym).is_err());
        let p = ModelParams::new(0.3, 0.2, 0.1).unwrap();
        let ys: Vec<f64> = (0..=4).map(|s| predict_plugin(4, s, &p).unwrap()).collect();
        assert!(ys.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn single_draw_bayes_equals_plugin() {
        let meta = ChainMeta { seed: 0, chains: 1, iters: 1, burnin: 0 };
        let sample = PosteriorSample::from_parts(meta, 0, vec![ParamDraw { theta: 0.3, p: 0.2, q: 0.1 }], vec![]).unwrap();
        let params = ModelParams::new(0.3, 0.2, 0.1).unwrap();
        for s in 0..=5 {
            assert_eq!(predict_bayes(5, s, &sample).unwrap(), predict_plugin(5, s, &params).unwrap());
        }
    }

    #[test]
    fn table_shape_and_monotone_rows() {
        let params = ModelParams::new(0.4, 0.15, 0.1).unwrap();
        let t = ThresholdPair::parse("0.45", "0.55").unwrap();
        let table = prediction_table(6, &Predictor::Plugin(params), &t, Execution::Sequential).unwrap();
        assert_eq!(table.rows.len(), 28);
        for n in 0..=6 {
            let row: Vec<&PredictionRow> = table.rows.iter().filter(|r| r.n == n).collect();
            assert!(row.windows(2).all(|w| w[1].decision >= w[0].decision && w[1].score > w[0].score));
        }
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("n,s,score,decision\n0,0,"));
    }

    #[test]
    fn near_noiseless_table_follows_median_rule() {
        let params = ModelParams::new(0.5, 1e-9, 1e-9).unwrap();
        let t = ThresholdPair::parse("0.45", "0.55").unwrap();
        let table = prediction_table(5, &Predictor::Plugin(params), &t, Execution::Parallel).unwrap();
        for r in &table.rows {
            let expected = match (2 * r.s).cmp(&r.n) {
                std::cmp::Ordering::Less => Decision::Zero,
                std::cmp::Ordering::Equal => Decision::Half,
                std::cmp::Ordering::Greater => Decision::One,
            };
            assert_eq!(r.decision, expected, "n={} s={}", r.n, r.s);
        }
    }
}
