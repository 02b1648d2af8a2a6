//! Independent reference computations shared by integration tests.
//!
//! The posterior oracle integrates the joint density directly: for every
//! latent configuration the integrand factorises over `theta`, `p` and `q`,
//! and each axis is integrated by Gauss-Legendre quadrature after the
//! substitution `x = L sin^2(phi)`, which removes the endpoint singularities
//! of Beta kernels with shape 1/2.

#![allow(dead_code)]

use binrep::mcmc::PriorSpec;

pub const NODES: usize = 200;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp;
        loop {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Points `x_k` in `(0, upper)` and log quadrature weights (Jacobian included)
/// for integrating `x^(alpha-1) (1-x)^(beta-1)` over `(0, upper)`.
pub struct Axis {
    pub x: Vec<f64>,
    /// Normalised weights of the kernel at `x`.
    pub w: Vec<f64>,
    pub ln_integral: f64,
}

impl Axis {
    pub fn new(alpha: f64, beta: f64, upper: f64) -> Self {
        let (t, w) = gauss_legendre(NODES);
        let half_pi = std::f64::consts::FRAC_PI_2;
        let mut xs = Vec::with_capacity(NODES);
        let mut lw = Vec::with_capacity(NODES);
        for (&tk, &wk) in t.iter().zip(&w) {
            let phi = half_pi * (tk + 1.0) / 2.0;
            let (s, c) = phi.sin_cos();
            let x = upper * s * s;
            let jac = 2.0 * upper * s * c * half_pi / 2.0;
            xs.push(x);
            lw.push(wk.ln() + jac.ln() + (alpha - 1.0) * x.ln() + (beta - 1.0) * (-x).ln_1p());
        }
        let m = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = lw.iter().map(|l| (l - m).exp()).sum();
        let w = lw.iter().map(|l| (l - m).exp() / total).collect();
        Self { x: xs, w, ln_integral: m + total.ln() }
    }

    pub fn mean(&self) -> f64 {
        self.x.iter().zip(&self.w).map(|(x, w)| x * w).sum()
    }
}

struct Config {
    ln_weight: f64,
    theta: Axis,
    p: Axis,
    q: Axis,
    states: Vec<bool>,
}

fn configurations(counts: &[(u32, u32)], prior: &PriorSpec) -> Vec<Config> {
    let big_n = counts.len();
    (0..1u32 << big_n)
        .map(|mask| {
            let states: Vec<bool> = (0..big_n).map(|i| mask >> i & 1 == 1).collect();
            let (mut k, mut s0, mut f0, mut s1, mut f1) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (&(n, s), &t) in counts.iter().zip(&states) {
                let (s, f) = (f64::from(s), f64::from(n - s));
                if t {
                    k += 1.0;
                    s1 += s;
                    f1 += f;
                } else {
                    s0 += s;
                    f0 += f;
                }
            }
            let theta = Axis::new(prior.a_t + k, prior.b_t + big_n as f64 - k, 1.0);
            let p = Axis::new(prior.a_fp + s0, prior.b_fp + f0, 0.5);
            let q = Axis::new(prior.a_fn + f1, prior.b_fn + s1, 0.5);
            Config { ln_weight: theta.ln_integral + p.ln_integral + q.ln_integral, theta, p, q, states }
        })
        .collect()
}

fn normalised(configs: &[Config]) -> Vec<f64> {
    let m = configs.iter().map(|c| c.ln_weight).fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = configs.iter().map(|c| (c.ln_weight - m).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|r| r / total).collect()
}

#[derive(Debug, Clone)]
pub struct PosteriorOracle {
    pub mean_theta: f64,
    pub mean_p: f64,
    pub mean_q: f64,
    pub bayes_scores: Vec<f64>,
}

pub fn posterior_oracle(counts: &[(u32, u32)], prior: &PriorSpec) -> PosteriorOracle {
    let configs = configurations(counts, prior);
    let w = normalised(&configs);
    let mut out = PosteriorOracle { mean_theta: 0.0, mean_p: 0.0, mean_q: 0.0, bayes_scores: vec![0.0; counts.len()] };
    for (c, &wc) in configs.iter().zip(&w) {
        out.mean_theta += wc * c.theta.mean();
        out.mean_p += wc * c.p.mean();
        out.mean_q += wc * c.q.mean();
        for (y, &t) in out.bayes_scores.iter_mut().zip(&c.states) {
            if t {
                *y += wc;
            }
        }
    }
    out
}

/// Posterior expectation of the likelihood score of a new `(n, s)`.
pub fn predictive_oracle(counts: &[(u32, u32)], prior: &PriorSpec, n: u32, s: u32) -> f64 {
    let configs = configurations(counts, prior);
    let w = normalised(&configs);
    let (s, f) = (f64::from(s), f64::from(n - s));
    let mut total = 0.0;
    for (c, &wc) in configs.iter().zip(&w) {
        // A(q) = (1-q)^s q^f, B(p) = p^s (1-p)^f
        let a: Vec<f64> = c.q.x.iter().map(|q| (1.0 - q).powf(s) * q.powf(f)).collect();
        let b: Vec<f64> = c.p.x.iter().map(|p| p.powf(s) * (1.0 - p).powf(f)).collect();
        let mut e = 0.0;
        for (&th, &wt) in c.theta.x.iter().zip(&c.theta.w) {
            let mut inner = 0.0;
            for (&bp, &wp) in b.iter().zip(&c.p.w) {
                for (&aq, &wq) in a.iter().zip(&c.q.w) {
                    let num = th * aq;
                    inner += wp * wq * num / (num + (1.0 - th) * bp);
                }
            }
            e += wt * inner;
        }
        total += wc * e;
    }
    total
}

/// Fixed battery of tiny datasets (N <= 3, n <= 4).
pub fn tiny_battery() -> Vec<Vec<(u32, u32)>> {
    vec![
        vec![(3, 0), (3, 3)],
        vec![(4, 2), (4, 2)],
        vec![(1, 1), (2, 0), (4, 4)],
        vec![(4, 1), (3, 3), (2, 1)],
        vec![(2, 2), (2, 2), (2, 0)],
        vec![(4, 0), (4, 0), (4, 4)],
        vec![(3, 1), (3, 2)],
        vec![(1, 0), (1, 1), (1, 1)],
        vec![(4, 3)],
        vec![(4, 4), (4, 3), (3, 0)],
        vec![(2, 1), (3, 0), (4, 2)],
        vec![(4, 1), (4, 1), (4, 3)],
    ]
}
