//! Per-index tables under the root law `P(N = n) = A_n(λ)/m(λ)`.
//!
//! The conditional quantities are computed by scale-free backward
//! recursions so that nothing underflows when `A_n` does:
//!
//! ```text
//! t_k = r_k / A_{k+1} = 1 + π_{k+1} t_{k+1},   π_k = f(k)/(f(k)+λ)
//! q_k = 1/t_k = P(N = k+1 | N > k)
//! V_k = c_k + (1 - q_k) V_{k+1}                (= W_k / r_k)
//! X_k = Σ_{n>k} A_n H_n / A_{k+1} = H_{k+1} + π_{k+1} X_{k+1}
//! ```
//!
//! `s_k + V_k` and `X_k / t_k` are two independent routes to
//! `E[S | N > k]`.

use serde::Serialize;

use crate::attach::AttachmentFunction;
use crate::error::Result;
use crate::numeric::Sum;
use crate::series::{self, Policy, TruncationConfig};

/// Longest table kept for profile sums; the tail closure covers the rest.
pub const PROFILE_CAP: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// `w_k = α_k r_k` for the gauged `f*` at `λ = 1`.
    DepthGauged,
    /// `w_k = λ c_k T_k` at a general `λ`.
    HeightTilted,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileTable {
    pub mode: Mode,
    pub lambda: f64,
    /// `m(λ)` of the function the table was built from.
    pub m: f64,
    /// `1/(φ(k)+λ)`: `α_k` in depth mode, `c_k` in height mode.
    pub alpha: Vec<f64>,
    /// `r_k = Σ_{n>k} A_n`.
    pub r: Vec<f64>,
    /// `T_k = r_k/m = P(N > k)`.
    pub t: Vec<f64>,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    /// `s_k = Σ_{j<k} α_j`.
    pub s: Vec<f64>,
    /// `C_k = s_k + W_k/r_k = E[S | N > k]`.
    pub cond_mean: Vec<f64>,
    /// `E[S | N > k]` through the direct suffix sums.
    pub cond_mean_direct: Vec<f64>,
    /// `W_k/r_k = E[Σ_{j=k}^{N-1} c_j | N > k]`.
    pub remaining: Vec<f64>,
    /// Exit hazard `q_k = 1 - T_{k+1}/T_k`.
    pub q: Vec<f64>,
    /// `d_k = 1/λ - c_k`.
    pub d: Vec<f64>,
    /// `M_k = E[S | N > k] - E[S]`.
    pub shift: Vec<f64>,
    /// `M̃_k = M_k - d_k`.
    pub shift_tilde: Vec<f64>,
    /// Truncation index of the underlying series.
    pub n_terms: usize,
    tail_weight: f64,
    tail_decay: f64,
}

impl ProfileTable {
    /// Builds the table for `phi` at `lambda`. `log_h` gives `log h(k)` and
    /// `a_prime` the gauge shift, so `b_k = log_h(k) + a_prime`.
    pub(crate) fn build(
        phi: &AttachmentFunction,
        lambda: f64,
        mode: Mode,
        log_h: impl Fn(u64) -> Result<f64>,
        a_prime: f64,
        k_cap: Option<usize>,
        cfg: &TruncationConfig,
    ) -> Result<ProfileTable> {
        let cap = k_cap.unwrap_or(PROFILE_CAP).clamp(8, PROFILE_CAP);
        let policy = Policy {
            tail_frac: cfg.rel_tol,
            cap,
        };
        let wp = series::build(phi, lambda, cfg, policy)?;
        let n = wp.n_terms();
        let fv = wp.f_values();
        let closure = wp.closure();
        let m = wp.m().value;
        let norm = match mode {
            Mode::DepthGauged => 1.0,
            Mode::HeightTilted => lambda / m,
        };

        let alpha: Vec<f64> = fv[..=n].iter().map(|&x| 1.0 / (x + lambda)).collect();
        let r = wp.tails(n);
        let t: Vec<f64> = r.iter().map(|&x| x / m).collect();
        let w: Vec<f64> = alpha.iter().zip(&r).map(|(a, r)| norm * a * r).collect();
        let b = (0..=n)
            .map(|k| Ok(log_h(k as u64)? + a_prime))
            .collect::<Result<Vec<f64>>>()?;

        let mut s = vec![0.0; n + 1];
        let mut acc = Sum::new();
        for k in 0..n {
            acc.add(alpha[k]);
            s[k + 1] = acc.value();
        }
        acc.add(alpha[n]);
        let h_m = acc.value();

        let pi = |k: usize| fv[k] / (fv[k] + lambda);
        let mass_ratio = closure.mass_ratio(lambda);
        let excess_ratio = closure.excess_ratio(lambda);

        let mut ratio = vec![0.0; n + 1];
        let mut remaining = vec![0.0; n + 1];
        let mut x = vec![0.0; n + 1];
        ratio[n] = mass_ratio;
        remaining[n] = alpha[n] + excess_ratio;
        x[n] = mass_ratio * (h_m + excess_ratio);
        for k in (0..n).rev() {
            let p = pi(k + 1);
            ratio[k] = 1.0 + p * ratio[k + 1];
            remaining[k] = alpha[k] + p * ratio[k + 1] / ratio[k] * remaining[k + 1];
            x[k] = s[k + 1] + p * x[k + 1];
        }
        let q: Vec<f64> = ratio.iter().map(|&v| 1.0 / v).collect();
        let cond_mean: Vec<f64> = s.iter().zip(&remaining).map(|(a, b)| a + b).collect();
        let cond_mean_direct: Vec<f64> = x.iter().zip(&ratio).map(|(a, b)| a / b).collect();
        let d: Vec<f64> = alpha.iter().map(|&c| 1.0 / lambda - c).collect();
        let mean = cond_mean[0];
        let shift: Vec<f64> = cond_mean.iter().map(|&c| c - mean).collect();
        let shift_tilde: Vec<f64> = shift.iter().zip(&d).map(|(a, b)| a - b).collect();

        Ok(ProfileTable {
            mode,
            lambda,
            m,
            alpha,
            r,
            t,
            w,
            b,
            s,
            cond_mean,
            cond_mean_direct,
            remaining,
            q,
            d,
            shift,
            shift_tilde,
            n_terms: n,
            tail_weight: norm * closure.excess(lambda),
            tail_decay: closure.weight_decay(lambda),
        })
    }

    /// Largest index held in the table.
    pub fn last_index(&self) -> usize {
        self.w.len() - 1
    }

    /// `Σ_k w_k` including the closed-form tail.
    pub fn total_weight(&self) -> f64 {
        let mut acc = Sum::new();
        for &w in &self.w {
            acc.add(w);
        }
        acc.add(self.tail_weight);
        acc.value()
    }

    /// Weight carried by indices beyond the table.
    pub fn tail_weight(&self) -> f64 {
        self.tail_weight
    }

    /// `Σ_k w_k G_k` for a sequence given on every index of the table. Past
    /// the table `G` is continued as a quadratic in `log k` and integrated
    /// against the power-law tail of the weights.
    pub fn weighted_sum(&self, g: &[f64]) -> f64 {
        debug_assert_eq!(g.len(), self.w.len());
        let mut acc = Sum::new();
        for (w, x) in self.w.iter().zip(g) {
            if *w != 0.0 {
                acc.add(w * x);
            }
        }
        acc.add(self.tail_sum(g));
        acc.value()
    }

    /// The tail part of [`weighted_sum`](Self::weighted_sum).
    pub fn tail_sum(&self, g: &[f64]) -> f64 {
        let mass = self.tail_weight;
        if !(mass > 0.0) {
            return 0.0;
        }
        let n = self.last_index();
        let g0 = g[n];
        let q = self.tail_decay;
        if !q.is_finite() || n < 8 {
            return mass * g0;
        }
        let (k1, k2) = (n / 2, n / 4);
        let l1 = (k1 as f64 / n as f64).ln();
        let l2 = (k2 as f64 / n as f64).ln();
        let (y1, y2) = (g[k1] - g0, g[k2] - g0);
        let det = l1 * l2 * (l2 - l1);
        let slope = (y1 * l2 * l2 - y2 * l1 * l1) / det;
        let curve = (l1 * y2 - l2 * y1) / det;
        // Accurate to O(mass/N): the discrete tail starts at N + 1.
        mass * (g0 + slope / q + 2.0 * curve / (q * q))
    }

    /// `E[S]` under the root law.
    pub fn mean_s(&self) -> f64 {
        self.cond_mean[0]
    }
}
