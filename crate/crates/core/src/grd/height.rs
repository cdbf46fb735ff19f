//! Root-law quantities behind the height constant along `f_s = g (f/g)^s`.
//!
//! Under `P(N = n) = A_n(λ)/m_s(λ)` the score `U = Σ_{k<N} b_k a_k` with
//! `a_k = λ c_k` has mean `Σ_k b_k w_k`, `w_k = a_k T_k`, and
//! `∂_λ log m_s = -E[S]` with `S = Σ_{k<N} c_k`.

use serde::Serialize;

use super::chebyshev::{chebyshev_bound, ChebyshevReport};
use super::depth::{gauge, log_h};
use super::profile::{Mode, ProfileTable};
use crate::attach::{interpolate, AttachmentFunction};
use crate::error::{Error, Result};
use crate::series::TruncationConfig;

const INCREMENT_TOL: f64 = 1e-10;

/// Height-tilted table with the gauge shift `a'` already applied to `b`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn table_at(
    g: &AttachmentFunction,
    f: &AttachmentFunction,
    s: f64,
    lambda: f64,
    lambda_s: f64,
    a_prime: f64,
    k: Option<usize>,
    cfg: &TruncationConfig,
) -> Result<ProfileTable> {
    if !(lambda >= lambda_s * (1.0 - 1e-12)) {
        return Err(Error::domain(format!("λ = {lambda} is below λ_s = {lambda_s}")));
    }
    let f_s = interpolate(g, f, s)?;
    ProfileTable::build(&f_s, lambda, Mode::HeightTilted, log_h(g, f), a_prime, k, cfg)
}

fn gauged_table(
    g: &AttachmentFunction,
    f: &AttachmentFunction,
    s: f64,
    lambda: f64,
    k: Option<usize>,
    cfg: &TruncationConfig,
) -> Result<ProfileTable> {
    let fam = gauge(g, f, s, cfg)?;
    table_at(g, f, s, lambda, fam.lambda_theta, fam.a_prime, k, cfg)
}

/// Root-law table of `f_s` at `λ ≥ λ_s`, with `b_k = log h(k) + a'(s)`.
pub fn height_profile(
    g: &AttachmentFunction,
    f: &AttachmentFunction,
    s: f64,
    lambda: f64,
    k: Option<usize>,
    cfg: &TruncationConfig,
) -> Result<ProfileTable> {
    gauged_table(g, f, s, lambda, k, cfg)
}

pub(crate) fn mean_u(t: &ProfileTable) -> f64 {
    t.weighted_sum(&t.b)
}

pub(crate) fn bbar(t: &ProfileTable) -> f64 {
    t.weighted_sum(&t.b) / t.total_weight()
}

pub(crate) fn bbar_derivative(t: &ProfileTable) -> f64 {
    let mean = bbar(t);
    let g: Vec<f64> = t.b.iter().zip(&t.shift_tilde).map(|(b, m)| (b - mean) * m).collect();
    -t.weighted_sum(&g) / t.total_weight()
}

/// `E_{s,λ}[U] = Σ_k b_k w_k`.
pub fn score_mean_u(
    g: &AttachmentFunction,
    f: &AttachmentFunction,
    s: f64,
    lambda: f64,
    k: Option<usize>,
    cfg: &TruncationConfig,
) -> Result<f64> {
    Ok(mean_u(&gauged_table(g, f, s, lambda, k, cfg)?))
}

/// `b̄_s(λ) = Σ b_k w_k / Σ w_k`.
pub fn weighted_mean_bbar(
    g: &AttachmentFunction,
    f: &AttachmentFunction,
    s: f64,
    lambda: f64,
    k: Option<usize>,
    cfg: &TruncationConfig,
) -> Result<f64> {
    Ok(bbar(&gauged_table(g, f, s, lambda, k, cfg)?))
}

/// `∂_λ b̄_s(λ) = -(1/W) Σ_k (b_k - b̄) w_k M̃_k`.
pub fn bbar_lambda_derivative(
    g: &AttachmentFunction,
    f: &AttachmentFunction,
    s: f64,
    lambda: f64,
    k: Option<usize>,
    cfg: &TruncationConfig,
) -> Result<f64> {
    Ok(bbar_derivative(&gauged_table(g, f, s, lambda, k, cfg)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct OneStepReport {
    /// `q_k 𝓡_{k+1} - (c_k - c_{k+1})`, which is also `M̃_{k+1} - M̃_k`.
    pub residuals: Vec<f64>,
    /// Smallest index from which every residual is nonnegative.
    pub k0: Option<usize>,
    /// `max_k |μ_{k+1} - μ_k - q_k 𝓡_{k+1}|` with `μ` from direct suffix
    /// sums.
    pub increment_residual: f64,
    /// Chebyshev bound for `Σ (b_k - b̄) M̃_k w_k` with the prefix below
    /// `K0`; `None` when `K0` was not found.
    pub chebyshev: Option<ChebyshevReport>,
    /// `C_bound · Σ_{k<K0} |b_k - b̄| w_k / W`, the finite-K allowance on
    /// `∂_λ b̄ ≤ 0`.
    pub prefix_bound: Option<f64>,
}

pub(crate) fn one_step_of(t: &ProfileTable) -> Result<OneStepReport> {
    let n = t.last_index();
    let mut residuals = Vec::with_capacity(n);
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let step = t.q[k] * t.remaining[k + 1];
        residuals.push(step - (t.alpha[k] - t.alpha[k + 1]));
        let direct = t.cond_mean_direct[k + 1] - t.cond_mean_direct[k];
        worst = worst.max((direct - step).abs());
    }
    if worst > INCREMENT_TOL {
        log::warn!("increment identity off by {worst:.3e} at λ={}", t.lambda);
    }
    let k0 = match residuals.last() {
        Some(&r) if r < 0.0 => None,
        None => Some(0),
        Some(_) => {
            let mut k0 = residuals.len() - 1;
            while k0 > 0 && residuals[k0 - 1] >= 0.0 {
                k0 -= 1;
            }
            Some(k0)
        }
    };

    let (chebyshev, prefix_bound) = match k0 {
        Some(k0) => {
            let mean = bbar(t);
            let a: Vec<f64> = t.b.iter().map(|b| b - mean).collect();
            let c_bound = t.shift_tilde[..k0].iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let total = t.total_weight();
            let w: Vec<f64> = t.w.iter().map(|w| w / total).collect();
            let prefix: f64 = (0..k0).map(|k| a[k].abs() * w[k]).sum();
            // The table omits the tail weight, so centring is checked
            // against the full sum only up to that weight.
            let cheb = if t.tail_weight() <= 1e-10 * total {
                chebyshev_bound(&a, &t.shift_tilde, &w, k0, c_bound).ok()
            } else {
                None
            };
            (cheb, Some(c_bound * prefix))
        }
        None => (None, None),
    };
    Ok(OneStepReport {
        residuals,
        k0,
        increment_residual: worst,
        chebyshev,
        prefix_bound,
    })
}

pub fn one_step_report(
    g: &AttachmentFunction,
    f: &AttachmentFunction,
    s: f64,
    lambda: f64,
    k: Option<usize>,
    cfg: &TruncationConfig,
) -> Result<OneStepReport> {
    one_step_of(&gauged_table(g, f, s, lambda, k, cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(s: &str) -> AttachmentFunction {
        s.parse().unwrap()
    }

    #[test]
    fn geometric_root_law() {
        let cfg = TruncationConfig::default();
        let f = p("const:1");
        let r = one_step_report(&f, &f, 0.0, 1.0, None, &cfg).unwrap();
        assert_eq!(r.k0, Some(0));
        for x in &r.residuals[..20] {
            assert_relative_eq!(*x, 0.5, max_relative = 1e-12);
        }
        assert!(r.increment_residual < 1e-10);
    }

    #[test]
    fn trivial_scores_when_g_equals_f() {
        let cfg = TruncationConfig::default();
        let f = p("power:0.4");
        assert_eq!(score_mean_u(&f, &f, 0.5, 2.0, None, &cfg).unwrap(), 0.0);
        assert_eq!(weighted_mean_bbar(&f, &f, 0.5, 2.0, None, &cfg).unwrap(), 0.0);
        assert_eq!(bbar_lambda_derivative(&f, &f, 0.5, 2.0, None, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn centred_at_lambda_s() {
        let cfg = TruncationConfig::default();
        let (g, f) = (p("const:1"), p("affine:1"));
        let fam = gauge(&g, &f, 0.5, &cfg).unwrap();
        let u = score_mean_u(&g, &f, 0.5, fam.lambda_theta, None, &cfg).unwrap();
        assert!(u.abs() < 1e-9, "{u}");
    }

    #[test]
    fn below_lambda_s_is_a_domain_error() {
        let cfg = TruncationConfig::default();
        let (g, f) = (p("const:1"), p("affine:1"));
        assert!(matches!(
            height_profile(&g, &f, 0.0, 0.5, None, &cfg),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn bbar_derivative_matches_finite_difference() {
        let cfg = TruncationConfig::default();
        let (g, f) = (p("power:0.3"), p("power:0.7"));
        let fam = gauge(&g, &f, 0.5, &cfg).unwrap();
        let lam = 1.5 * fam.lambda_theta;
        let d = bbar_lambda_derivative(&g, &f, 0.5, lam, None, &cfg).unwrap();
        let eps = 1e-5 * lam;
        let hi = weighted_mean_bbar(&g, &f, 0.5, lam + eps, None, &cfg).unwrap();
        let lo = weighted_mean_bbar(&g, &f, 0.5, lam - eps, None, &cfg).unwrap();
        assert_relative_eq!(d, (hi - lo) / (2.0 * eps), max_relative = 1e-5);
        assert!(d <= 1e-6);
    }
}
