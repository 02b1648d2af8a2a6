//! Reader-study generator: patients as rows, radiologists as columns.
//!
//! Negatives come first, then positives. For radiologist `j` exactly
//! `round(n_negative * p_j)` negatives are read as positive and
//! `round(n_positive * q_j)` positives as negative. The flipped patients are
//! drawn one after another without replacement, each with probability
//! proportional to its weight among those not yet drawn.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::RawReplicateTable;
use crate::error::{Error, Result};
use crate::exec::stream_rng;

/// Unread exams for one radiologist.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingCells {
    pub radiologist: String,
    pub positives: usize,
    pub negatives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MammoConfig {
    pub n_negative: usize,
    pub n_positive: usize,
    pub radiologist_ids: Vec<String>,
    pub fp_rates: Vec<f64>,
    pub fn_rates: Vec<f64>,
    /// One positive weight per patient.
    pub weights: Vec<f64>,
    pub missing: Vec<MissingCells>,
    pub seed: u64,
}

pub const DEFAULT_RADIOLOGISTS: usize = 110;
pub const DEFAULT_FP_RATE: f64 = 0.22;
pub const DEFAULT_FN_RATE: f64 = 0.13;

impl Default for MammoConfig {
    fn default() -> Self {
        let mut ids: Vec<String> = ["1201", "7714", "9007"].iter().map(|s| s.to_string()).collect();
        ids.extend((1..=DEFAULT_RADIOLOGISTS - 3).map(|k| (1000 + k).to_string()));
        let missing = vec![
            MissingCells { radiologist: "1201".into(), positives: 1, negatives: 0 },
            MissingCells { radiologist: "7714".into(), positives: 3, negatives: 5 },
            MissingCells { radiologist: "9007".into(), positives: 0, negatives: 1 },
        ];
        Self {
            n_negative: 84,
            n_positive: 64,
            radiologist_ids: ids,
            fp_rates: vec![DEFAULT_FP_RATE; DEFAULT_RADIOLOGISTS],
            fn_rates: vec![DEFAULT_FN_RATE; DEFAULT_RADIOLOGISTS],
            weights: vec![1.0; 148],
            missing,
            seed: 0,
        }
    }
}

impl MammoConfig {
    pub fn n_patients(&self) -> usize {
        self.n_negative + self.n_positive
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.radiologist_ids.len();
        if j == 0 || self.fp_rates.len() != j || self.fn_rates.len() != j {
            return Err(Error::Argument(format!(
                "{} radiologists but {} false-positivity and {} false-negativity rates",
                j,
                self.fp_rates.len(),
                self.fn_rates.len()
            )));
        }
        if self.n_patients() == 0 || self.weights.len() != self.n_patients() {
            return Err(Error::Argument(format!(
                "{} weights for {} patients",
                self.weights.len(),
                self.n_patients()
            )));
        }
        if let Some((i, w)) = self.weights.iter().enumerate().find(|(_, w)| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::Domain(format!("weight of patient {} is {w}; weights must be positive", i + 1)));
        }
        if let Some(r) = self.fp_rates.iter().chain(&self.fn_rates).find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::Domain(format!("error rate {r} not in [0, 1]")));
        }
        for m in &self.missing {
            if !self.radiologist_ids.contains(&m.radiologist) {
                return Err(Error::Argument(format!("missing cells for unknown radiologist {}", m.radiologist)));
            }
        }
        Ok(())
    }
}

/// `floor(x + 1/2)`.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Indices of `amount` draws from `candidates`, successive and proportional
/// to the weights of the candidates not yet drawn.
fn weighted_draws<R: Rng + ?Sized>(rng: &mut R, candidates: &[usize], weights: &[f64], amount: usize) -> Result<Vec<usize>> {
    if amount == 0 {
        return Ok(Vec::new());
    }
    let picked = index::sample_weighted(rng, candidates.len(), |k| weights[candidates[k]], amount)
        .map_err(|e| Error::Numerical(format!("weighted sampling: {e}")))?;
    Ok(picked.into_iter().map(|k| candidates[k]).collect())
}

fn place_column<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &MammoConfig,
    column: &mut [Option<bool>],
    j: usize,
) -> Result<()> {
    let id = &cfg.radiologist_ids[j];
    let negatives: Vec<usize> = (0..cfg.n_negative).collect();
    let positives: Vec<usize> = (cfg.n_negative..cfg.n_patients()).collect();

    let (miss_pos, miss_neg) = cfg
        .missing
        .iter()
        .filter(|m| &m.radiologist == id)
        .fold((0, 0), |(p, n), m| (p + m.positives, n + m.negatives));
    let mut observed = Vec::with_capacity(2);
    for (class, missing) in [(&negatives, miss_neg), (&positives, miss_pos)] {
        if missing > class.len() {
            return Err(Error::Argument(format!("radiologist {id}: {missing} missing cells exceed class size {}", class.len())));
        }
        let drop: Vec<usize> = index::sample(rng, class.len(), missing).into_iter().map(|k| class[k]).collect();
        for &i in &drop {
            column[i] = None;
        }
        observed.push(class.iter().copied().filter(|i| column[*i].is_some()).collect::<Vec<_>>());
    }

    let flips = [
        (round_half_up(cfg.n_negative as f64 * cfg.fp_rates[j]), true),
        (round_half_up(cfg.n_positive as f64 * cfg.fn_rates[j]), false),
    ];
    for (cells, (count, value)) in observed.iter().zip(flips) {
        if count > cells.len() {
            return Err(Error::Argument(format!(
                "radiologist {id}: {count} flips exceed the {} observed exams of the class",
                cells.len()
            )));
        }
        for i in weighted_draws(rng, cells, &cfg.weights, count)? {
            column[i] = Some(value);
        }
    }
    Ok(())
}

pub fn simulate_mammography_with_rng<R: Rng + ?Sized>(cfg: &MammoConfig, rng: &mut R) -> Result<RawReplicateTable> {
    cfg.validate()?;
    let n = cfg.n_patients();
    let status: Vec<Option<bool>> = (0..n).map(|i| Some(i >= cfg.n_negative)).collect();
    let mut columns: Vec<Vec<Option<bool>>> = Vec::with_capacity(cfg.radiologist_ids.len());
    for j in 0..cfg.radiologist_ids.len() {
        let mut column = status.clone();
        place_column(rng, cfg, &mut column, j)?;
        columns.push(column);
    }
    let cells: Vec<Vec<Option<bool>>> = (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
    let ids = (1..=n).map(|i| format!("m{i:03}")).collect();
    RawReplicateTable::new(ids, cfg.radiologist_ids.clone(), cells, status)
}

/// Simulated reader study with known status (0 for the first `n_negative`
/// patients, 1 after).
pub fn simulate_mammography(cfg: &MammoConfig) -> Result<RawReplicateTable> {
    simulate_mammography_with_rng(cfg, &mut stream_rng(cfg.seed, 0))
}
