//! The gauged family `f*_θ = f_θ/λ_θ` and the derivative of
//! `Q_θ = Σ_k α_k r_k` along the path.

use std::sync::Arc;

use serde::Serialize;

use super::profile::{Mode, ProfileTable};
use crate::attach::{interpolate, scale, AttachmentFunction};
use crate::constants::{depth_constant, malthusian};
use crate::error::{Error, Result};
use crate::numeric::rel_gap;
use crate::series::TruncationConfig;

const MALTHUS_TOL: f64 = 1e-10;
const CENTERING_TOL: f64 = 1e-8;
const REPRESENTATION_TOL: f64 = 1e-8;
/// Relative accuracy credited to the extrapolated tail of a profile sum.
const TAIL_TRUST: f64 = 1e-2;

#[derive(Debug, Clone, Serialize)]
pub struct GaugedFamily {
    pub theta: f64,
    pub lambda_theta: f64,
    pub f_star: AttachmentFunction,
    /// `a'(θ) = -u_θ/Q_θ`.
    pub a_prime: f64,
    pub q_theta: f64,
    pub u_theta: f64,
    /// `|m_{f*}(1) - 1|`.
    pub malthus_residual: f64,
    /// `|Σ b_k w_k| / Σ |b_k| w_k`.
    pub centering_residual: f64,
    #[serde(skip)]
    table: Arc<ProfileTable>,
}

impl GaugedFamily {
    /// The depth-gauged table at full length.
    pub fn table(&self) -> &ProfileTable {
        &self.table
    }
}

pub(crate) fn log_h<'a>(g: &'a AttachmentFunction, f: &'a AttachmentFunction) -> impl Fn(u64) -> Result<f64> + 'a {
    move |k| Ok(f.ln_eval(k)? - g.ln_eval(k)?)
}

fn gauge_with_cap(
    g: &AttachmentFunction,
    f: &AttachmentFunction,
    theta: f64,
    k_cap: Option<usize>,
    cfg: &TruncationConfig,
) -> Result<GaugedFamily> {
    let f_theta = interpolate(g, f, theta)?;
    let lambda_theta = malthusian(&f_theta, cfg)?;
    let f_star = scale(&f_theta, 1.0 / lambda_theta)?;
    let lh = log_h(g, f);
    let mut table = ProfileTable::build(&f_star, 1.0, Mode::DepthGauged, &lh, 0.0, k_cap, cfg)?;

    let q_theta = table.total_weight();
    let u_theta = table.weighted_sum(&table.b);
    let a_prime = -u_theta / q_theta;
    for b in table.b.iter_mut() {
        *b += a_prime;
    }
    let centering = table.weighted_sum(&table.b);
    let abs_b: Vec<f64> = table.b.iter().map(|b| b.abs()).collect();
    let scale_b = table.weighted_sum(&abs_b);
    let centering_residual = if scale_b > 0.0 { centering.abs() / scale_b } else { 0.0 };
    if centering_residual > CENTERING_TOL {
        return Err(Error::CenteringFailure {
            residual: centering_residual,
        });
    }
    Ok(GaugedFamily {
        theta,
        lambda_theta,
        f_star,
        a_prime,
        q_theta,
        u_theta,
        malthus_residual: (table.m - 1.0).abs(),
        centering_residual,
        table: Arc::new(table),
    })
}

/// Solves for `λ_θ`, rescales to `f*_θ` and fixes the gauge `a'(θ)` so that
/// `Σ_k b_k w_k = 0`.
pub fn gauge(
    g: &AttachmentFunction,
    f: &AttachmentFunction,
    theta: f64,
    cfg: &TruncationConfig,
) -> Result<GaugedFamily> {
    let fam = gauge_with_cap(g, f, theta, None, cfg)?;
    if fam.malthus_residual > MALTHUS_TOL.max(10.0 * cfg.rel_tol) {
        log::warn!(
            "gauged family at θ={theta} has |m*(1) - 1| = {:.3e}",
            fam.malthus_residual
        );
    }
    Ok(fam)
}

/// The depth-gauged table, cut to indices `0..=k` when `k` is given.
pub fn profile(family: &GaugedFamily, k: Option<usize>) -> ProfileTable {
    let mut t = (*family.table).clone();
    if let Some(k) = k {
        let k = k.min(t.last_index());
        for v in [
            &mut t.alpha,
            &mut t.r,
            &mut t.t,
            &mut t.w,
            &mut t.b,
            &mut t.s,
            &mut t.cond_mean,
            &mut t.cond_mean_direct,
            &mut t.remaining,
            &mut t.q,
            &mut t.d,
            &mut t.shift,
            &mut t.shift_tilde,
        ] {
            v.truncate(k + 1);
        }
    }
    t
}

/// `Q'_θ` through both representations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QPrime {
    /// `Σ_{i≤j} (b_i + b_j) α_i α_j r_j`.
    pub double_sum: f64,
    /// `Σ_k b_k w_k (C_k + α_k)`.
    pub c_form: f64,
    /// `Σ_k b_k w_k C_k`, the single sum without the diagonal term.
    pub c_form_no_diagonal: f64,
}

pub(crate) fn q_prime_of(table: &ProfileTable) -> Result<QPrime> {
    let n = table.last_index();
    let mut double = vec![0.0; n + 1];
    let mut c_form = vec![0.0; n + 1];
    let mut bare = vec![0.0; n + 1];
    let (mut s, mut p) = (0.0, 0.0);
    for k in 0..=n {
        let (a, b) = (table.alpha[k], table.b[k]);
        s += a;
        p += b * a;
        double[k] = b * s + p;
        c_form[k] = b * (table.cond_mean[k] + a);
        bare[k] = b * table.cond_mean[k];
    }
    let v1 = table.weighted_sum(&double);
    let v2 = table.weighted_sum(&c_form);
    let tail = table.tail_sum(&double).abs() + table.tail_sum(&c_form).abs();
    let tol = REPRESENTATION_TOL * v1.abs().max(v2.abs()) + TAIL_TRUST * tail;
    if (v1 - v2).abs() > tol.max(1e-300) {
        return Err(Error::RepresentationMismatch {
            a: v1,
            b: v2,
            rel: rel_gap(v1, v2, 1e-300),
        });
    }
    Ok(QPrime {
        double_sum: v1,
        c_form: v2,
        c_form_no_diagonal: table.weighted_sum(&bare),
    })
}

/// `Q'_θ = dQ_θ/dθ` for the path from `g` to `f`.
pub fn q_prime(
    g: &AttachmentFunction,
    f: &AttachmentFunction,
    theta: f64,
    k: Option<usize>,
    cfg: &TruncationConfig,
) -> Result<QPrime> {
    let fam = gauge_with_cap(g, f, theta, k, cfg)?;
    q_prime_of(fam.table())
}

/// `Q_θ` from the depth solver, for finite-difference checks.
pub fn q_of_theta(g: &AttachmentFunction, f: &AttachmentFunction, theta: f64, cfg: &TruncationConfig) -> Result<f64> {
    Ok(depth_constant(&interpolate(g, f, theta)?, cfg)?.q_f)
}

/// Central difference of `Q_θ` with step `eps`, one-sided at the ends.
pub fn q_prime_fd(
    g: &AttachmentFunction,
    f: &AttachmentFunction,
    theta: f64,
    eps: f64,
    cfg: &TruncationConfig,
) -> Result<f64> {
    let lo = (theta - eps).max(0.0);
    let hi = (theta + eps).min(1.0);
    if lo == theta {
        let (q0, q1, q2) = (
            q_of_theta(g, f, theta, cfg)?,
            q_of_theta(g, f, theta + eps, cfg)?,
            q_of_theta(g, f, theta + 2.0 * eps, cfg)?,
        );
        return Ok((-3.0 * q0 + 4.0 * q1 - q2) / (2.0 * eps));
    }
    if hi == theta {
        let (q0, q1, q2) = (
            q_of_theta(g, f, theta, cfg)?,
            q_of_theta(g, f, theta - eps, cfg)?,
            q_of_theta(g, f, theta - 2.0 * eps, cfg)?,
        );
        return Ok((3.0 * q0 - 4.0 * q1 + q2) / (2.0 * eps));
    }
    Ok((q_of_theta(g, f, hi, cfg)? - q_of_theta(g, f, lo, cfg)?) / (hi - lo))
}
