//! Exact binomial tail coefficients and the closed-form moments of the
//! average- and median-based scores and prevalence estimators.
//!
//! For `Z ~ Bin(k, a)`:
//!
//! ```text
//! u(k, a) = P(Z > k/2)      v(k, a) = P(Z = k/2)
//! delta(k, a) = u + v/2     gamma(k, a) = u(1-u) + v(1-v)/4 - u v
//! ```
//!
//! `delta` is the mean and `gamma` the variance of the median of `k`
//! Bernoulli(`a`) replicates (ties scored 1/2).

use serde::{Deserialize, Serialize};

use crate::data::{ModelParams, ReplicateDataset};
use crate::error::{Error, Result};
use crate::special::{binomial_ln_pmf, sum_ascending};

/// The two scores whose moments are available in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimpleScore {
    Average,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaGamma {
    pub u: f64,
    pub v: f64,
    pub delta: f64,
    pub gamma: f64,
}

pub fn delta_gamma(k: u32, a: f64) -> Result<DeltaGamma> {
    if k == 0 {
        return Err(Error::Domain("delta/gamma need k >= 1".into()));
    }
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Domain(format!("delta/gamma need a in (0, 1), got {a}")));
    }
    // s > k/2  <=>  2s > k
    let upper: Vec<f64> = (0..=k)
        .filter(|&s| 2 * s > k)
        .map(|s| binomial_ln_pmf(k, s, a).exp())
        .collect();
    let u = sum_ascending(upper);
    let v = if k.is_multiple_of(2) { binomial_ln_pmf(k, k / 2, a).exp() } else { 0.0 };
    Ok(DeltaGamma {
        u,
        v,
        delta: u + v / 2.0,
        gamma: u * (1.0 - u) + v * (1.0 - v) / 4.0 - u * v,
    })
}

/// Shorthand for `delta_gamma(k, a).delta`.
pub fn delta(k: u32, a: f64) -> Result<f64> {
    delta_gamma(k, a).map(|dg| dg.delta)
}

/// Averages of `delta(n_i, .)` and `gamma(n_i, .)` over a dataset's replicate counts.
#[derive(Debug, Clone)]
pub struct DatasetCoefficients {
    ns: Vec<u32>,
}

impl DatasetCoefficients {
    pub fn new(ns: Vec<u32>) -> Result<Self> {
        if ns.is_empty() || ns.contains(&0) {
            return Err(Error::Validation("replicate counts must be non-empty and positive".into()));
        }
        Ok(Self { ns })
    }

    pub fn from_dataset(data: &ReplicateDataset) -> Self {
        Self { ns: data.ns() }
    }

    pub fn ns(&self) -> &[u32] {
        &self.ns
    }

    pub fn delta_bar(&self, a: f64) -> Result<f64> {
        self.mean_of(|n| delta_gamma(n, a).map(|dg| dg.delta))
    }

    pub fn gamma_bar(&self, a: f64) -> Result<f64> {
        self.mean_of(|n| delta_gamma(n, a).map(|dg| dg.gamma))
    }

    /// Harmonic mean of the replicate counts.
    pub fn n_tilde(&self) -> f64 {
        let inv: f64 = self.ns.iter().map(|&n| 1.0 / f64::from(n)).sum();
        self.ns.len() as f64 / inv
    }

    fn mean_of(&self, f: impl Fn(u32) -> Result<f64>) -> Result<f64> {
        let mut total = 0.0;
        for &n in &self.ns {
            total += f(n)?;
        }
        Ok(total / self.ns.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreMoments {
    pub mean_given_t0: f64,
    pub mean_given_t1: f64,
    pub var_given_t0: f64,
    pub var_given_t1: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Conditional and marginal moments of one individual's score with `n` replicates.
pub fn score_moments(params: &ModelParams, n: u32, method: SimpleScore) -> Result<ScoreMoments> {
    if n == 0 {
        return Err(Error::Domain("score moments need n >= 1".into()));
    }
    let ModelParams { theta, p, q } = *params;
    let (m0, m1, v0, v1) = match method {
        SimpleScore::Average => {
            let nf = f64::from(n);
            (p, 1.0 - q, p * (1.0 - p) / nf, q * (1.0 - q) / nf)
        }
        SimpleScore::Median => {
            let neg = delta_gamma(n, p)?;
            let pos = delta_gamma(n, 1.0 - q)?;
            (neg.delta, pos.delta, neg.gamma, pos.gamma)
        }
    };
    Ok(ScoreMoments {
        mean_given_t0: m0,
        mean_given_t1: m1,
        var_given_t0: v0,
        var_given_t1: v1,
        mean: theta * m1 + (1.0 - theta) * m0,
        variance: theta * (1.0 - theta) * (m1 - m0).powi(2) + theta * v1 + (1.0 - theta) * v0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrevalenceMoments {
    pub expected_value: f64,
    pub bias: f64,
    pub variance: f64,
}

/// Mean, bias and variance of the score-average prevalence estimator for a
/// fixed vector of replicate counts.
///
/// The variance is the exact variance of a mean of independent scores,
/// `N^-2 * sum_i var(Y_i)`. For the average score this reduces to
/// `(theta(1-theta)(1-p-q)^2 + theta q(1-q)/n~ + (1-theta) p(1-p)/n~) / N`.
pub fn prevalence_moments(params: &ModelParams, ns: &[u32], method: SimpleScore) -> Result<PrevalenceMoments> {
    if ns.is_empty() {
        return Err(Error::Validation("no replicate counts".into()));
    }
    let mut mean = 0.0;
    let mut var = 0.0;
    for &n in ns {
        let m = score_moments(params, n, method)?;
        mean += m.mean;
        var += m.variance;
    }
    let big_n = ns.len() as f64;
    let expected_value = mean / big_n;
    Ok(PrevalenceMoments {
        expected_value,
        bias: expected_value - params.theta,
        variance: var / (big_n * big_n),
    })
}

/// Prevalence bias of the average-score estimator, `p - theta (p + q)`.
pub fn average_bias(theta: f64, p: f64, q: f64) -> f64 {
    p - theta * (p + q)
}

/// Prevalence bias of the median-score estimator,
/// `delta_bar(p) - theta (delta_bar(p) + delta_bar(q))`.
pub fn median_bias(theta: f64, delta_bar_p: f64, delta_bar_q: f64) -> f64 {
    delta_bar_p - theta * (delta_bar_p + delta_bar_q)
}

/// Range of prevalences where the average-based estimator is at least as
/// accurate (in absolute bias) as the median-based one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DominanceInterval {
    /// All counts are at most 2: both estimators have the same bias everywhere.
    Equal,
    /// Closed interval `[lower, upper]` inside `[0, 1]`, containing `p / (p + q)`.
    Interval { lower: f64, upper: f64 },
}

impl DominanceInterval {
    pub fn length(&self) -> f64 {
        match self {
            DominanceInterval::Equal => 1.0,
            DominanceInterval::Interval { lower, upper } => upper - lower,
        }
    }
}

/// Locates the interval `J` on a grid, refining each end by bisection to `1e-10`.
pub fn bias_dominance_interval(p: f64, q: f64, ns: &[u32], grid_step: f64) -> Result<DominanceInterval> {
    if !(p > 0.0 && p < 0.5 && q > 0.0 && q < 0.5) {
        return Err(Error::Domain(format!("rates ({p}, {q}) must lie in (0, 1/2)")));
    }
    if !(grid_step > 0.0 && grid_step < 1.0) {
        return Err(Error::Argument(format!("grid step {grid_step} must lie in (0, 1)")));
    }
    let coeffs = DatasetCoefficients::new(ns.to_vec())?;
    if ns.iter().all(|&n| n <= 2) {
        return Ok(DominanceInterval::Equal);
    }
    let (dp, dq) = (coeffs.delta_bar(p)?, coeffs.delta_bar(q)?);
    // inside J  <=>  |bias_A| <= |bias_M|
    let margin = |theta: f64| median_bias(theta, dp, dq).abs() - average_bias(theta, p, q).abs();
    let inside = |theta: f64| margin(theta) >= 0.0;

    let centre = p / (p + q);
    let refine = |mut inner: f64, mut outer: f64| {
        while (outer - inner).abs() > 1e-10 {
            let mid = 0.5 * (inner + outer);
            if inside(mid) {
                inner = mid;
            } else {
                outer = mid;
            }
        }
        inner
    };

    let mut lower = 0.0;
    let mut theta = centre;
    loop {
        let next = (theta - grid_step).max(0.0);
        if !inside(next) {
            lower = refine(theta, next);
            break;
        }
        if next == 0.0 {
            break;
        }
        theta = next;
    }
    let mut upper = 1.0;
    theta = centre;
    loop {
        let next = (theta + grid_step).min(1.0);
        if !inside(next) {
            upper = refine(theta, next);
            break;
        }
        if next == 1.0 {
            break;
        }
        theta = next;
    }
    Ok(DominanceInterval::Interval { lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn delta_examples() {
        assert_abs_diff_eq!(delta(1, 0.3).unwrap(), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(delta(2, 0.3).unwrap(), 0.3, epsilon = 1e-15);
        // P(Bin(3, 0.1) >= 2) = 3 * 0.01 * 0.9 + 0.001
        assert_abs_diff_eq!(delta(3, 0.1).unwrap(), 0.028, epsilon = 1e-15);
        assert_eq!(delta_gamma(5, 0.4).unwrap().v, 0.0);
        assert!(delta_gamma(3, 1.0).is_err());
        assert!(delta_gamma(0, 0.5).is_err());
    }

    #[test]
    fn gamma_is_enumerated_variance() {
        for k in 1..=12u32 {
            for a in [0.05, 0.3, 0.5, 0.81] {
                // Y = 1{S > k/2} + 1/2 1{S = k/2}, enumerated over the pmf.
                let (mut m1, mut m2) = (0.0, 0.0);
                for s in 0..=k {
                    let pr = binomial_ln_pmf(k, s, a).exp();
                    let y = if 2 * s > k { 1.0 } else if 2 * s == k { 0.5 } else { 0.0 };
                    m1 += pr * y;
                    m2 += pr * y * y;
                }
                let dg = delta_gamma(k, a).unwrap();
                assert_abs_diff_eq!(dg.delta, m1, epsilon = 1e-13);
                assert_abs_diff_eq!(dg.gamma, m2 - m1 * m1, epsilon = 1e-13);
                assert!(dg.gamma >= 0.0);
            }
        }
    }

    #[test]
    fn moments_examples() {
        let params = ModelParams::new(0.4, 0.1, 0.05).unwrap();
        let a = score_moments(&params, 4, SimpleScore::Average).unwrap();
        assert_abs_diff_eq!(a.mean, 0.44, epsilon = 1e-15);
        let m = score_moments(&params, 3, SimpleScore::Median).unwrap();
        assert_abs_diff_eq!(m.mean, 0.4 * 0.99275 + 0.6 * 0.028, epsilon = 1e-14);
        let (a1, m1) = (
            score_moments(&params, 1, SimpleScore::Average).unwrap(),
            score_moments(&params, 1, SimpleScore::Median).unwrap(),
        );
        assert_abs_diff_eq!(a1.mean, m1.mean, epsilon = 1e-15);
        assert_abs_diff_eq!(a1.variance, m1.variance, epsilon = 1e-15);
    }

    #[test]
    fn prevalence_examples() {
        let params = ModelParams::new(0.4, 0.1, 0.05).unwrap();
        for ns in [vec![1u32; 5], vec![2, 3, 6], vec![9; 4]] {
            let a = prevalence_moments(&params, &ns, SimpleScore::Average).unwrap();
            assert_abs_diff_eq!(a.bias, 0.04, epsilon = 1e-15);
        }
        let ones = [1u32; 7];
        let a = prevalence_moments(&params, &ones, SimpleScore::Average).unwrap();
        let m = prevalence_moments(&params, &ones, SimpleScore::Median).unwrap();
        assert_abs_diff_eq!(a.bias, m.bias, epsilon = 1e-15);
        let m3 = prevalence_moments(&params, &[3, 3, 3], SimpleScore::Median).unwrap();
        assert_abs_diff_eq!(m3.expected_value, 0.4139, epsilon = 1e-12);
        assert_abs_diff_eq!(m3.bias, 0.0139, epsilon = 1e-12);
    }

    #[test]
    fn harmonic_mean_bounds() {
        let c = DatasetCoefficients::new(vec![2, 3, 6]).unwrap();
        assert_abs_diff_eq!(c.n_tilde(), 3.0, epsilon = 1e-14);
        assert!(DatasetCoefficients::new(vec![]).is_err());
    }

    /// Closed-form roots of `bias_M = bias_A` and `bias_M = -bias_A`.
    fn closed_form_interval(p: f64, q: f64, ns: &[u32]) -> (f64, f64) {
        let c = DatasetCoefficients::new(ns.to_vec()).unwrap();
        let (dp, dq) = (c.delta_bar(p).unwrap(), c.delta_bar(q).unwrap());
        let same = (dp - p) / (dp + dq - p - q);
        let opposite = (dp + p) / (dp + dq + p + q);
        let (lo, hi) = if same < opposite { (same, opposite) } else { (opposite, same) };
        (lo.max(0.0), hi.min(1.0))
    }

    #[test]
    fn interval_matches_closed_form() {
        for (p, q) in [(0.1, 0.05), (0.2, 0.3), (0.45, 0.02)] {
            for ns in [vec![3u32], vec![5], vec![2, 3, 4, 5, 6], vec![25]] {
                let j = bias_dominance_interval(p, q, &ns, 0.01).unwrap();
                let (lo, hi) = closed_form_interval(p, q, &ns);
                match j {
                    DominanceInterval::Interval { lower, upper } => {
                        assert_abs_diff_eq!(lower, lo, epsilon = 1e-9);
                        assert_abs_diff_eq!(upper, hi, epsilon = 1e-9);
                        let centre = p / (p + q);
                        assert!(lower <= centre && centre <= upper);
                    }
                    DominanceInterval::Equal => panic!("unexpected equality"),
                }
            }
        }
    }

    #[test]
    fn interval_special_cases() {
        assert_eq!(bias_dominance_interval(0.1, 0.2, &[1, 2, 2], 0.01).unwrap(), DominanceInterval::Equal);
        match bias_dominance_interval(0.2, 0.2, &[3, 5], 0.01).unwrap() {
            DominanceInterval::Interval { lower, upper } => {
                assert!(lower <= 0.5 && 0.5 <= upper);
                assert!(upper - lower < 1e-9);
            }
            DominanceInterval::Equal => panic!(),
        }
        let j3 = bias_dominance_interval(0.1, 0.05, &[3; 10], 0.01).unwrap();
        let j5 = bias_dominance_interval(0.1, 0.05, &[5; 10], 0.01).unwrap();
        assert!(j5.length() < j3.length());
    }
}
