//! Direct simulation of preferential-attachment trees.
//!
//! Trees are grown by the discrete recursion with a Fenwick index over
//! `f(children)`, so each insertion costs `O(log n)`. Randomness comes from
//! [`SimRng`] (ChaCha8) seeded per tree; Monte Carlo replica `i` uses seed
//! `seed_base + i`, which makes results independent of the thread count.

mod fenwick;
mod oracle;
mod tree;

pub use fenwick::Fenwick;
pub use oracle::{exact_expected_depth, ORACLE_MAX_N};
pub use tree::{grow, rng, SimRng, TreeState};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attach::AttachmentFunction;
use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;
use crate::series::{self, Policy, TruncationConfig};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub n: usize,
    pub reps: usize,
    pub mean_d_over_logn: f64,
    pub stderr_d: f64,
    pub mean_h_over_logn: f64,
    pub stderr_h: f64,
    pub seed_base: u64,
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = pairwise_sum(xs) / k;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// `reps` independent trees of size `n`; means and standard errors of
/// `D_n/log n` and `H_n/log n`.
pub fn monte_carlo(f: &AttachmentFunction, n: usize, reps: usize, seed_base: u64) -> Result<SimSummary> {
    if n < 2 {
        return Err(Error::domain(format!("monte_carlo needs n ≥ 2, got {n}")));
    }
    if reps < 1 {
        return Err(Error::domain("monte_carlo needs reps ≥ 1"));
    }
    let runs: Vec<(usize, usize)> = (0..reps as u64)
        .into_par_iter()
        .map(|i| grow(f, n, seed_base.wrapping_add(i)).map(|t| (t.insertion_depth(), t.height())))
        .collect::<Result<_>>()?;
    let ln = (n as f64).ln();
    let d: Vec<f64> = runs.iter().map(|r| r.0 as f64 / ln).collect();
    let h: Vec<f64> = runs.iter().map(|r| r.1 as f64 / ln).collect();
    let (md, sd) = mean_and_stderr(&d);
    let (mh, sh) = mean_and_stderr(&h);
    Ok(SimSummary {
        n,
        reps,
        mean_d_over_logn: md,
        stderr_d: sd,
        mean_h_over_logn: mh,
        stderr_h: sh,
        seed_base,
    })
}

/// Empirical law of `N` with `P(N = n) = A_n(λ)/m(λ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootLawSample {
    pub lambda: f64,
    pub count: usize,
    /// `counts[n - 1]` draws of `N = n`, for `n` up to the table length.
    pub counts: Vec<u64>,
    /// Draws beyond the table.
    pub overflow: u64,
    /// `P(N = n)` for the same range.
    pub probabilities: Vec<f64>,
    /// Probability mass assigned to the overflow bucket.
    pub overflow_probability: f64,
}

impl RootLawSample {
    /// Sample mean, counting overflow draws at the first index past the
    /// table.
    pub fn mean(&self) -> f64 {
        let mut s = 0.0;
        for (i, &c) in self.counts.iter().enumerate() {
            s += (i + 1) as f64 * c as f64;
        }
        s += (self.counts.len() + 1) as f64 * self.overflow as f64;
        s / self.count as f64
    }

    /// `(mean, standard error)` of the sample.
    pub fn mean_stderr(&self) -> (f64, f64) {
        let mean = self.mean();
        let mut ss = 0.0;
        for (i, &c) in self.counts.iter().enumerate() {
            let x = (i + 1) as f64 - mean;
            ss += x * x * c as f64;
        }
        let k = self.count as f64;
        (mean, (ss / (k - 1.0).max(1.0) / k).sqrt())
    }
}

/// Inverse-CDF sampling of the root law from the truncated `A_n` table; the
/// closed-off tail is a single overflow bucket.
pub fn sample_root_law(
    f: &AttachmentFunction,
    lambda: f64,
    count: usize,
    seed: u64,
    cfg: &TruncationConfig,
) -> Result<RootLawSample> {
    let policy = Policy {
        tail_frac: cfg.rel_tol,
        cap: crate::grd::PROFILE_CAP,
    };
    let wp = series::build(f, lambda, cfg, policy)?;
    let n = wp.n_terms();
    let m = wp.m().value;
    let probabilities: Vec<f64> = (1..=n).map(|k| wp.a(k) / m).collect();
    let mut cdf = Vec::with_capacity(n);
    let mut acc = crate::numeric::Sum::new();
    for &p in &probabilities {
        acc.add(p);
        cdf.push(acc.value());
    }
    let overflow_probability = wp.tail_mass() / m;
    let last = 1.0 - overflow_probability;

    let mut rng = rng(seed);
    let mut counts = vec![0u64; n];
    let mut overflow = 0;
    for _ in 0..count {
        let u: f64 = rng.gen();
        if u >= last {
            overflow += 1;
            continue;
        }
        let i = cdf.partition_point(|&c| c <= u).min(n - 1);
        counts[i] += 1;
    }
    Ok(RootLawSample {
        lambda,
        count,
        counts,
        overflow,
        probabilities,
        overflow_probability,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> AttachmentFunction {
        s.parse().unwrap()
    }

    #[test]
    fn summary_is_thread_independent() {
        let f = p("power:0.5");
        let a = monte_carlo(&f, 300, 16, 5).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| monte_carlo(&f, 300, 16, 5)).unwrap();
        assert_eq!(a, b);
        assert!(a.stderr_d >= 0.0 && a.stderr_h >= 0.0);
        assert!(monte_carlo(&f, 1, 5, 0).is_err());
        assert!(monte_carlo(&f, 10, 0, 0).is_err());
    }

    #[test]
    fn geometric_root_law() {
        let cfg = TruncationConfig::default();
        let s = sample_root_law(&p("const:1"), 1.0, 200_000, 1, &cfg).unwrap();
        assert!(s.overflow_probability < 1e-9);
        assert_eq!(s.overflow, 0);
        let (mean, se) = s.mean_stderr();
        assert!((mean - 2.0).abs() < 4.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn affine_root_law_first_atom() {
        let cfg = TruncationConfig::default();
        let s = sample_root_law(&p("affine:1"), 3.0, 10, 1, &cfg).unwrap();
        assert!((s.probabilities[0] - 0.5).abs() < 1e-12);
    }
}
