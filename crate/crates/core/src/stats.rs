//! Small descriptive statistics shared by summaries and experiments.

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with denominator `len - 1`.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(xs: &[f64], prob: f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, prob)
}

/// Median and the 0.4 / 0.6 quantiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub median: f64,
    pub q40: f64,
    pub q60: f64,
}

pub fn band(xs: &[f64]) -> Band {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    Band {
        median: quantile_sorted(&sorted, 0.5),
        q40: quantile_sorted(&sorted, 0.4),
        q60: quantile_sorted(&sorted, 0.6),
    }
}

/// Standard error of the mean of concatenated chains by non-overlapping
/// batch means, `batches` per chain.
pub fn batch_means_se(chains: &[&[f64]], batches: usize) -> f64 {
    let mut means = Vec::new();
    for chain in chains {
        let size = chain.len() / batches;
        if size == 0 {
            continue;
        }
        for b in 0..batches {
            means.push(mean(&chain[b * size..(b + 1) * size]));
        }
    }
    (sample_variance(&means) / means.len() as f64).sqrt()
}

/// Split potential scale reduction over equal-length chains.
pub fn split_rhat(chains: &[&[f64]]) -> Option<f64> {
    let len = chains.iter().map(|c| c.len()).min()? / 2;
    if len < 2 {
        return None;
    }
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| [&c[..len], &c[len..2 * len]])
        .collect();
    let m = halves.len() as f64;
    let n = len as f64;
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let grand = mean(&means);
    let b = n / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = mean(&halves.iter().map(|h| sample_variance(h)).collect::<Vec<_>>());
    if w == 0.0 {
        return Some(if b == 0.0 { 1.0 } else { f64::INFINITY });
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    Some((var_plus / w).sqrt())
}
