//! Special functions: binomial log-pmf, the regularized incomplete beta
//! function in log space, and inverse-CDF sampling of a Beta law truncated
//! to `(0, upper)`.

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const CF_MAX_ITER: usize = 20_000;
const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;

/// Smallest truncated mass accepted by [`sample_truncated_beta`].
pub const MIN_TRUNCATED_MASS: f64 = 1e-300;

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `ln C(k, s)`.
pub fn ln_choose(k: u32, s: u32) -> f64 {
    debug_assert!(s <= k);
    let (k, s) = (f64::from(k), f64::from(s));
    ln_gamma(k + 1.0) - ln_gamma(s + 1.0) - ln_gamma(k - s + 1.0)
}

/// `ln P(Bin(k, a) = s)` for `a` in `(0, 1)`.
pub fn binomial_ln_pmf(k: u32, s: u32, a: f64) -> f64 {
    ln_choose(k, s) + f64::from(s) * a.ln() + f64::from(k - s) * (-a).ln_1p()
}

/// Exact binomial pmf vector `P(Bin(k, a) = s)`, `s = 0..=k`.
pub fn binomial_pmf(k: u32, a: f64) -> Vec<f64> {
    (0..=k).map(|s| binomial_ln_pmf(k, s, a).exp()).collect()
}

/// Sums non-negative terms in increasing order of magnitude.
pub fn sum_ascending(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

pub fn beta_ln_pdf(a: f64, b: f64, x: f64) -> f64 {
    (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta(a, b)
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            return Ok(h);
        }
    }
    Err(Error::Numerical(format!(
        "incomplete beta continued fraction did not converge (a = {a}, b = {b}, x = {x})"
    )))
}

/// `ln I_x(a, b)`, accurate deep into the lower tail.
pub fn ln_beta_inc(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Domain(format!("beta shape parameters must be positive, got ({a}, {b})")));
    }
    if x.is_nan() {
        return Err(Error::Domain("incomplete beta evaluated at NaN".into()));
    }
    if x <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if x >= 1.0 {
        return Ok(0.0);
    }
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(ln_front - a.ln() + beta_cf(a, b, x)?.ln())
    } else {
        let upper = (ln_front - b.ln()).exp() * beta_cf(b, a, 1.0 - x)?;
        Ok((-upper).ln_1p())
    }
}

/// `I_x(a, b)`.
pub fn beta_inc(a: f64, b: f64, x: f64) -> Result<f64> {
    ln_beta_inc(a, b, x).map(f64::exp)
}

/// Solves `ln I_x(a, b) = ln_target` for `x` in `(0, upper)`.
///
/// Safeguarded Newton iteration on `z = ln x`; the lower tail of the Beta
/// CDF is close to a power law, so `ln I` is nearly linear in `z` there.
pub fn beta_inc_inv_ln(a: f64, b: f64, ln_target: f64, upper: f64) -> Result<f64> {
    let z_hi_bound = upper.ln();
    let mut z_lo = f64::NEG_INFINITY;
    let mut z_hi = z_hi_bound;

    // Power-law guess, valid when the target sits in the lower tail.
    let guess = (ln_target + a.ln() + ln_beta(a, b)) / a;
    let mut z = if guess.is_finite() { guess.min(z_hi_bound - 1e-12) } else { z_hi_bound - 1.0 };

    for _ in 0..400 {
        let x = z.exp();
        let ln_i = ln_beta_inc(a, b, x)?;
        let g = ln_i - ln_target;
        if g.abs() < 1e-14 {
            return Ok(x);
        }
        if g > 0.0 {
            z_hi = z;
        } else {
            z_lo = z;
        }
        let slope = (z + beta_ln_pdf(a, b, x) - ln_i).exp();
        let mut next = z - g / slope;
        if !next.is_finite() || next <= z_lo || next >= z_hi {
            next = if z_lo.is_finite() {
                0.5 * (z_lo + z_hi)
            } else {
                z_hi - 2.0 * (1.0 + (z_hi - z).abs())
            };
        }
        if (next - z).abs() < 1e-15 * (1.0 + z.abs()) {
            return Ok(next.exp());
        }
        z = next;
    }
    Err(Error::Numerical(format!(
        "inverse incomplete beta failed to converge (a = {a}, b = {b}, ln target = {ln_target})"
    )))
}

/// Draws from `Beta(a, b)` conditioned on `x < upper` by inverting the CDF:
/// `U ~ Uniform(0, F(upper))`, return `F^{-1}(U)`.
pub fn sample_truncated_beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64, upper: f64) -> Result<f64> {
    let ln_mass = ln_beta_inc(a, b, upper)?;
    if ln_mass < MIN_TRUNCATED_MASS.ln() {
        return Err(Error::Numerical(format!(
            "Beta({a}, {b}) has mass below {MIN_TRUNCATED_MASS:e} under {upper}"
        )));
    }
    // Open interval: u in (0, 1).
    let u: f64 = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    let x = beta_inc_inv_ln(a, b, u.ln() + ln_mass, upper)?;
    Ok(x.min(upper * (1.0 - f64::EPSILON)))
}
