//! Loss tables, optimal thresholds and the three-way classifier.
//!
//! The classifier maps a score `y` to 0 when `y < v_L`, to 1 when `y > v_U`
//! and to the indecision response 1/2 otherwise.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::coeffs::SimpleScore;
use crate::data::ModelParams;
use crate::error::{Error, Result};
use crate::scoring::{median_value, ScoreMethod, ScoreVector};
use crate::special::{binomial_ln_pmf, sum_ascending};

pub type Rational = Ratio<i64>;

fn ratio_to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Parses a plain decimal (`"0.45"`, `"2"`, `"-1.5"`) into an exact ratio.
pub fn parse_decimal_ratio(s: &str) -> Option<Rational> {
    let s = s.trim();
    let (neg, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) || frac.len() > 15 {
        return None;
    }
    let denom = 10i64.checked_pow(frac.len() as u32)?;
    let int_val: i64 = if int.is_empty() { 0 } else { int.parse().ok()? };
    let frac_val: i64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
    let numer = int_val.checked_mul(denom)?.checked_add(frac_val)?;
    Some(Ratio::new(if neg { -numer } else { numer }, denom))
}

/// Costs of the non-trivial (truth, decision) pairs; correct decisions cost 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    /// Truth 0, decision 1/2.
    pub a: f64,
    /// Truth 0, decision 1.
    pub b: f64,
    /// Truth 1, decision 0.
    pub c: f64,
    /// Truth 1, decision 1/2.
    pub d: f64,
    #[serde(skip)]
    exact: Option<[Rational; 4]>,
}

impl LossSpec {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        if ![a, b, c, d].iter().all(|&x| x > 0.0 && x.is_finite()) {
            return Err(Error::Domain(format!("loss entries must be positive, got ({a}, {b}, {c}, {d})")));
        }
        Ok(Self { a, b, c, d, exact: None })
    }

    pub fn from_ratios(a: Rational, b: Rational, c: Rational, d: Rational) -> Result<Self> {
        let mut loss = Self::new(ratio_to_f64(a), ratio_to_f64(b), ratio_to_f64(c), ratio_to_f64(d))?;
        loss.exact = Some([a, b, c, d]);
        Ok(loss)
    }

    /// Unit cost for wrong decisions, `a` for indecision.
    pub fn symmetric(a: Rational) -> Result<Self> {
        let one = Ratio::from_integer(1);
        Self::from_ratios(a, one, one, a)
    }

    pub fn exact(&self) -> Option<[Rational; 4]> {
        self.exact
    }

    /// `loss(truth, decision)`.
    pub fn cost(&self, truth: bool, decision: Decision) -> f64 {
        match (truth, decision) {
            (false, Decision::Zero) | (true, Decision::One) => 0.0,
            (false, Decision::Half) => self.a,
            (false, Decision::One) => self.b,
            (true, Decision::Zero) => self.c,
            (true, Decision::Half) => self.d,
        }
    }
}

impl FromStr for LossSpec {
    type Err = Error;

    /// Parses `a,b,c,d`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::Argument(format!("loss must be a,b,c,d; got {s:?}")));
        }
        let exact: Option<Vec<Rational>> = parts.iter().map(|p| parse_decimal_ratio(p)).collect();
        match exact {
            Some(r) => Self::from_ratios(r[0], r[1], r[2], r[3]),
            None => {
                let v = parts
                    .iter()
                    .map(|p| p.parse::<f64>().map_err(|_| Error::Argument(format!("bad loss entry {p:?}"))))
                    .collect::<Result<Vec<_>>>()?;
                Self::new(v[0], v[1], v[2], v[3])
            }
        }
    }
}

/// Classification thresholds `v_L <= v_U` inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPair {
    pub v_l: f64,
    pub v_u: f64,
    #[serde(skip)]
    exact: Option<(Rational, Rational)>,
}

impl ThresholdPair {
    pub fn new(v_l: f64, v_u: f64) -> Result<Self> {
        if !(v_l > 0.0 && v_l <= v_u && v_u < 1.0) {
            return Err(Error::Domain(format!("thresholds must satisfy 0 < v_L <= v_U < 1, got ({v_l}, {v_u})")));
        }
        Ok(Self { v_l, v_u, exact: None })
    }

    pub fn from_ratios(v_l: Rational, v_u: Rational) -> Result<Self> {
        let mut pair = Self::new(ratio_to_f64(v_l), ratio_to_f64(v_u))?;
        pair.exact = Some((v_l, v_u));
        Ok(pair)
    }

    /// Parses decimal strings, keeping their exact values.
    pub fn parse(v_l: &str, v_u: &str) -> Result<Self> {
        match (parse_decimal_ratio(v_l), parse_decimal_ratio(v_u)) {
            (Some(l), Some(u)) => Self::from_ratios(l, u),
            _ => {
                let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::Argument(format!("bad threshold {s:?}")));
                Self::new(parse(v_l)?, parse(v_u)?)
            }
        }
    }

    /// Thresholds `(a, 1 - a)` of the symmetric loss.
    pub fn symmetric(a: Rational) -> Result<Self> {
        Self::from_ratios(a, Ratio::from_integer(1) - a)
    }

    pub fn exact(&self) -> Option<(Rational, Rational)> {
        self.exact
    }

    /// `v_L <= 1/2 <= v_U`.
    pub fn satisfies_h3(&self) -> bool {
        match self.exact {
            Some((l, u)) => l <= Ratio::new(1, 2) && Ratio::new(1, 2) <= u,
            None => self.v_l <= 0.5 && 0.5 <= self.v_u,
        }
    }

    pub fn decide(&self, y: f64) -> Decision {
        if y < self.v_l {
            Decision::Zero
        } else if y > self.v_u {
            Decision::One
        } else {
            Decision::Half
        }
    }

    /// Exact decision when both the score and the thresholds are rational.
    pub fn decide_exact(&self, y: Rational) -> Decision {
        match self.exact {
            Some((l, u)) => {
                if y < l {
                    Decision::Zero
                } else if y > u {
                    Decision::One
                } else {
                    Decision::Half
                }
            }
            None => self.decide(ratio_to_f64(y)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Decision {
    Zero,
    Half,
    One,
}

impl Decision {
    pub fn value(self) -> f64 {
        match self {
            Decision::Zero => 0.0,
            Decision::Half => 0.5,
            Decision::One => 1.0,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Zero => "0",
            Decision::Half => "0.5",
            Decision::One => "1",
        })
    }
}

/// Result of the threshold optimisation for a loss table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimalThresholds {
    Indecision(ThresholdPair),
    /// The indecision response is never optimal; decide 1 above `cutoff`.
    NoIndecision { cutoff: f64 },
}

impl OptimalThresholds {
    /// Thresholds to classify with; the degenerate pair `(cutoff, cutoff)`
    /// when indecision is never optimal.
    pub fn thresholds(&self) -> Result<ThresholdPair> {
        match *self {
            OptimalThresholds::Indecision(t) => Ok(t),
            OptimalThresholds::NoIndecision { cutoff } => ThresholdPair::new(cutoff, cutoff),
        }
    }
}

/// Bayes-optimal thresholds for posterior probability `y` of `T = 1`.
///
/// The risks of the three responses are `c y`, `b (1 - y)` and
/// `a + (d - a) y`; indecision is optimal somewhere iff
/// `bc/(b+c) > a + (d-a) b/(b+c)` and `-b < d - a < c`.
pub fn optimal_thresholds(loss: &LossSpec) -> Result<OptimalThresholds> {
    if let Some([a, b, c, d]) = loss.exact {
        let bc = b + c;
        let valid = b * c / bc > a + (d - a) * b / bc && -b < d - a && d - a < c;
        return if valid {
            Ok(OptimalThresholds::Indecision(ThresholdPair::from_ratios(a / (c - (d - a)), (b - a) / ((d - a) + b))?))
        } else {
            Ok(OptimalThresholds::NoIndecision { cutoff: ratio_to_f64(b / bc) })
        };
    }
    let LossSpec { a, b, c, d, .. } = *loss;
    let bc = b + c;
    let valid = b * c / bc > a + (d - a) * b / bc && -b < d - a && d - a < c;
    if valid {
        Ok(OptimalThresholds::Indecision(ThresholdPair::new(a / (c - (d - a)), (b - a) / ((d - a) + b))?))
    } else {
        Ok(OptimalThresholds::NoIndecision { cutoff: b / bc })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub decisions: Vec<Decision>,
    pub method: ScoreMethod,
    pub thresholds: ThresholdPair,
}

/// Applies the three-way rule to every score, exactly when scores and
/// thresholds both carry rational values.
pub fn classify(scores: &ScoreVector, thresholds: &ThresholdPair) -> Classification {
    let decisions = match scores.exact() {
        Some(exact) if thresholds.exact().is_some() => exact.iter().map(|&y| thresholds.decide_exact(y)).collect(),
        _ => scores.scores().iter().map(|&y| thresholds.decide(y)).collect(),
    };
    Classification { decisions, method: scores.method(), thresholds: *thresholds }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskMode {
    #[default]
    Total,
    Mean,
}

fn check_truth_len(c: &Classification, truth: &[bool]) -> Result<()> {
    if c.decisions.len() != truth.len() {
        return Err(Error::Argument(format!(
            "{} decisions but {} known states",
            c.decisions.len(),
            truth.len()
        )));
    }
    Ok(())
}

/// Summed (or averaged) loss against known states.
pub fn empirical_risk(classification: &Classification, truth: &[bool], loss: &LossSpec, mode: RiskMode) -> Result<f64> {
    check_truth_len(classification, truth)?;
    let total: f64 = classification.decisions.iter().zip(truth).map(|(&dec, &t)| loss.cost(t, dec)).sum();
    Ok(match mode {
        RiskMode::Total => total,
        RiskMode::Mean => total / truth.len() as f64,
    })
}

/// Counts indexed by `[truth][decision]`, decisions ordered 0, 1/2, 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionTable {
    pub counts: [[usize; 3]; 2],
}

impl ConfusionTable {
    pub fn get(&self, truth: bool, decision: Decision) -> usize {
        self.counts[usize::from(truth)][decision.index()]
    }

    /// Writes `truth,decided_0,decided_half,decided_1`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["truth", "decided_0", "decided_half", "decided_1"])?;
        for (t, row) in self.counts.iter().enumerate() {
            w.write_record([t.to_string(), row[0].to_string(), row[1].to_string(), row[2].to_string()])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

pub fn confusion_table(classification: &Classification, truth: &[bool]) -> Result<ConfusionTable> {
    check_truth_len(classification, truth)?;
    let mut table = ConfusionTable::default();
    for (&dec, &t) in classification.decisions.iter().zip(truth) {
        table.counts[usize::from(t)][dec.index()] += 1;
    }
    Ok(table)
}

/// Exact `(P(decision = 1 | T = 1), P(decision = 0 | T = 0))` for an
/// individual with `n` replicates classified from its average or median score.
pub fn sensitivity_specificity(
    params: &ModelParams,
    n: u32,
    thresholds: &ThresholdPair,
    method: SimpleScore,
) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::Argument("n must be at least 1".into()));
    }
    let decision = |s: u32| {
        let y = match method {
            SimpleScore::Average => Ratio::new(i64::from(s), i64::from(n)),
            SimpleScore::Median => median_value(n, s),
        };
        thresholds.decide_exact(y)
    };
    let mass = |a: f64, target: Decision| {
        sum_ascending((0..=n).filter(|&s| decision(s) == target).map(|s| binomial_ln_pmf(n, s, a).exp()).collect())
    };
    Ok((mass(1.0 - params.q, Decision::One), mass(params.p, Decision::Zero)))
}

/// Half-width of the threshold window around 1/2 inside which average and
/// median classifications agree for all `n_i <= n0`.
pub fn delta0(n0: u32) -> Result<f64> {
    match n0 {
        0 => Err(Error::Argument("n0 must be at least 1".into())),
        1 | 2 => Ok(0.5),
        n if n % 2 == 1 => Ok(1.0 / (2.0 * f64::from(n))),
        n => Ok(1.0 / (2.0 * f64::from(n - 1))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ReplicateDataset;
    use crate::scoring::{score_average, score_median};
    use approx::assert_abs_diff_eq;

    fn r(n: i64, d: i64) -> Rational {
        Ratio::new(n, d)
    }

    #[test]
    fn decimal_parsing() {
        assert_eq!(parse_decimal_ratio("0.45"), Some(r(9, 20)));
        assert_eq!(parse_decimal_ratio("2"), Some(r(2, 1)));
        assert_eq!(parse_decimal_ratio(".5"), Some(r(1, 2)));
        assert_eq!(parse_decimal_ratio("-1.25"), Some(r(-5, 4)));
        assert_eq!(parse_decimal_ratio("1e-3"), None);
        assert_eq!(parse_decimal_ratio(""), None);
    }

    #[test]
    fn symmetric_loss_thresholds() {
        let loss: LossSpec = "0.45,1,1,0.45".parse().unwrap();
        let OptimalThresholds::Indecision(t) = optimal_thresholds(&loss).unwrap() else { panic!() };
        assert_eq!(t.exact(), Some((r(9, 20), r(11, 20))));
        assert_abs_diff_eq!(t.v_l, 0.45);
        assert_abs_diff_eq!(t.v_u, 0.55);

        let loss = LossSpec::symmetric(r(3, 5)).unwrap();
        assert_eq!(optimal_thresholds(&loss).unwrap(), OptimalThresholds::NoIndecision { cutoff: 0.5 });
    }

    #[test]
    fn asymmetric_loss_thresholds() {
        let loss = LossSpec::new(0.2, 2.0, 1.0, 0.2).unwrap();
        let OptimalThresholds::Indecision(t) = optimal_thresholds(&loss).unwrap() else { panic!() };
        assert_abs_diff_eq!(t.v_l, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(t.v_u, 0.9, epsilon = 1e-15);
        assert!(!t.satisfies_h3() || t.v_l <= 0.5);
    }

    #[test]
    fn classify_boundaries_and_median_identity() {
        let d = ReplicateDataset::from_counts(&[(6, 4), (4, 2), (20, 9), (5, 1)]).unwrap();
        let t = ThresholdPair::parse("0.45", "0.55").unwrap();
        let avg = classify(&score_average(&d), &t);
        assert_eq!(avg.decisions, vec![Decision::One, Decision::Half, Decision::Half, Decision::Zero]);
        let med = classify(&score_median(&d), &t);
        let values: Vec<f64> = med.decisions.iter().map(|x| x.value()).collect();
        assert_eq!(values, score_median(&d).scores());
    }

    #[test]
    fn exact_comparison_at_coincident_threshold() {
        // 0.3 is not representable; 3/10 must still be "inside" [0.3, 0.7].
        let d = ReplicateDataset::from_counts(&[(10, 3), (10, 7)]).unwrap();
        let t = ThresholdPair::parse("0.3", "0.7").unwrap();
        assert_eq!(classify(&score_average(&d), &t).decisions, vec![Decision::Half, Decision::Half]);
    }

    #[test]
    fn risk_and_confusion() {
        let t = ThresholdPair::parse("0.45", "0.55").unwrap();
        let c = Classification {
            decisions: vec![Decision::Zero, Decision::Half, Decision::One, Decision::Zero, Decision::Half],
            method: ScoreMethod::Average,
            thresholds: t,
        };
        let truth = [false, false, false, true, true];
        let loss = LossSpec::symmetric(r(9, 20)).unwrap();
        assert_abs_diff_eq!(empirical_risk(&c, &truth, &loss, RiskMode::Total).unwrap(), 0.45 + 1.0 + 1.0 + 0.45);
        assert_abs_diff_eq!(empirical_risk(&c, &truth, &loss, RiskMode::Mean).unwrap(), 2.9 / 5.0);
        let table = confusion_table(&c, &truth).unwrap();
        assert_eq!(table.counts, [[1, 1, 1], [1, 1, 0]]);
        assert!(empirical_risk(&c, &truth[..2], &loss, RiskMode::Total).is_err());

        let correct = Classification { decisions: vec![Decision::One], method: ScoreMethod::Median, thresholds: t };
        assert_eq!(empirical_risk(&correct, &[true], &loss, RiskMode::Total).unwrap(), 0.0);
        assert_eq!(confusion_table(&correct, &[true]).unwrap().counts, [[0, 0, 0], [0, 0, 1]]);
    }

    #[test]
    fn sensitivity_examples() {
        let params = ModelParams::new(0.4, 0.1, 0.05).unwrap();
        let t = ThresholdPair::parse("0.3", "0.7").unwrap();
        let (sens_m, spec_m) = sensitivity_specificity(&params, 5, &t, SimpleScore::Median).unwrap();
        let (sens_a, spec_a) = sensitivity_specificity(&params, 5, &t, SimpleScore::Average).unwrap();
        // P(Bin(5, 0.95) >= 3) and P(Bin(5, 0.95) >= 4)
        let pmf = |k: u32| crate::special::binomial_ln_pmf(5, k, 0.95).exp();
        assert_abs_diff_eq!(sens_m, pmf(3) + pmf(4) + pmf(5), epsilon = 1e-14);
        assert_abs_diff_eq!(sens_a, pmf(4) + pmf(5), epsilon = 1e-14);
        assert!(sens_m >= sens_a && spec_m >= spec_a);

        let half = ThresholdPair::parse("0.5", "0.5").unwrap();
        for n in 1..8 {
            assert_eq!(
                sensitivity_specificity(&params, n, &half, SimpleScore::Median).unwrap(),
                sensitivity_specificity(&params, n, &half, SimpleScore::Average).unwrap()
            );
        }
        let (s1, _) = sensitivity_specificity(&params, 1, &t, SimpleScore::Average).unwrap();
        assert_abs_diff_eq!(s1, 0.95, epsilon = 1e-15);
    }

    #[test]
    fn delta0_values() {
        assert_eq!(delta0(5).unwrap(), 0.1);
        assert_eq!(delta0(6).unwrap(), 0.1);
        assert!(delta0(0).is_err());
    }
}
