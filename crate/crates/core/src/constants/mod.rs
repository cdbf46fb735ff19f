//! The Malthusian parameter `λ_f`, the depth constant `c_f = 1/Q_f` with
//! `Q_f = -λ_f m'(λ_f)`, and the height constant `c*_f = 1/(λ_f κ_f)` where
//! `κ_f = sup_{λ>λ_f} -log m(λ)/λ`.
//!
//! Both constants are invariant under `f -> c f`, which only rescales `λ`.

mod lambert;

pub use lambert::lambert_w;

use serde::{Deserialize, Serialize};

use crate::attach::AttachmentFunction;
use crate::error::{Error, Result};
use crate::series::{self, Eval, TruncationConfig};

/// Bracket expansion budget, in doublings, for both solvers.
const EXPANSION_BUDGET: usize = 200;
const ROOT_TOL: f64 = 1e-12;
const MAX_NEWTON: usize = 200;
/// Points of the coarse scan that guards the golden-section search.
const SCAN_POINTS: usize = 64;
const GOLDEN_WIDTH: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthSolution {
    pub lambda_f: f64,
    pub q_f: f64,
    pub c_f: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
    /// `|m(λ_f) - 1|`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightSolution {
    pub lambda_f: f64,
    pub lambda_star: f64,
    pub kappa: f64,
    pub r_f: f64,
    pub c_star: f64,
    /// `|log m(λ*) - λ* m'(λ*)/m(λ*)|`.
    pub stationarity_residual: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Root of `m(λ) = 1` with solver diagnostics.
#[derive(Debug, Clone)]
pub(crate) struct Root {
    pub lambda: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub residual: f64,
}

/// `m` and `-m'` at `λ`, or `None` where the series diverges.
fn eval_or_infinite(f: &AttachmentFunction, lambda: f64, cfg: &TruncationConfig) -> Result<Option<Eval>> {
    match series::evaluate(f, lambda, cfg) {
        Ok(e) => Ok(Some(e)),
        Err(Error::DivergentSeries { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

pub(crate) fn solve_malthusian(f: &AttachmentFunction, cfg: &TruncationConfig) -> Result<Root> {
    let tol = ROOT_TOL.max(cfg.rel_tol);
    let no_root = |why: String| Error::NoMalthusianRoot(why);

    // Bracket: m(lo) > 1 (or divergent), m(hi) < 1.
    let mut lambda = 1.0;
    let mut at = eval_or_infinite(f, lambda, cfg)?;
    let (mut lo, mut hi);
    let mut hi_eval;
    match at {
        Some(e) if e.m.value < 1.0 => {
            hi = lambda;
            hi_eval = e;
            let mut found = None;
            for _ in 0..EXPANSION_BUDGET {
                lambda /= 2.0;
                at = eval_or_infinite(f, lambda, cfg)?;
                match at {
                    Some(e) if e.m.value < 1.0 => {
                        hi = lambda;
                        hi_eval = e;
                    }
                    _ => {
                        found = Some(lambda);
                        break;
                    }
                }
            }
            lo = found.ok_or_else(|| no_root("m(λ) < 1 down to λ = 2^-200".into()))?;
        }
        _ => {
            lo = lambda;
            let mut found = None;
            for _ in 0..EXPANSION_BUDGET {
                lambda *= 2.0;
                match eval_or_infinite(f, lambda, cfg)? {
                    Some(e) if e.m.value < 1.0 => {
                        found = Some(e);
                        break;
                    }
                    _ => lo = lambda,
                }
            }
            hi = lambda;
            hi_eval = found
                .ok_or_else(|| no_root("m(λ) is infinite or above 1 up to λ = 2^200; f may be explosive".into()))?;
        }
    }

    // Safeguarded Newton from the convergent end.
    let mut x = hi;
    let mut e = hi_eval;
    for it in 1..=MAX_NEWTON {
        let g = e.m.value - 1.0;
        if g.abs() < tol {
            return Ok(Root {
                lambda: x,
                bracket: (lo, hi),
                iterations: it,
                residual: g.abs(),
            });
        }
        if g > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x + g / e.neg_m_prime.value;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(Root {
                lambda: x,
                bracket: (lo, hi),
                iterations: it,
                residual: g.abs(),
            });
        }
        x = next;
        loop {
            match eval_or_infinite(f, x, cfg)? {
                Some(v) => {
                    e = v;
                    break;
                }
                None => {
                    lo = x;
                    x = 0.5 * (lo + hi);
                    if hi - lo <= 4.0 * f64::EPSILON * hi {
                        return Err(no_root(format!(
                            "m jumps from infinity to below 1 near λ = {x}; no finite m(λ) > 1 exists"
                        )));
                    }
                }
            }
        }
    }
    Err(no_root(format!("Newton did not converge in bracket ({lo}, {hi})")))
}

/// The Malthusian parameter: the root of `m(λ) = 1`.
pub fn malthusian(f: &AttachmentFunction, cfg: &TruncationConfig) -> Result<f64> {
    Ok(solve_malthusian(f, cfg)?.lambda)
}

/// `λ_f`, `Q_f = -λ_f m'(λ_f)` and `c_f = 1/Q_f`.
pub fn depth_constant(f: &AttachmentFunction, cfg: &TruncationConfig) -> Result<DepthSolution> {
    let root = solve_malthusian(f, cfg)?;
    let mp = series::laplace_m_prime_neg(f, root.lambda, cfg)?;
    if !(mp.value <= 1.0 / cfg.rel_tol) || !mp.value.is_finite() {
        return Err(Error::DegenerateDerivative { value: mp.value });
    }
    let q_f = root.lambda * mp.value;
    Ok(DepthSolution {
        lambda_f: root.lambda,
        q_f,
        c_f: 1.0 / q_f,
        bracket: root.bracket,
        iterations: root.iterations,
        residual: root.residual,
    })
}

/// `J(λ)` and `E_λ[S] = -m'(λ)/m(λ)`.
fn objective(f: &AttachmentFunction, lambda: f64, cfg: &TruncationConfig) -> Result<(f64, f64)> {
    let e = series::evaluate(f, lambda, cfg)?;
    Ok((-e.m.value.ln() / lambda, e.neg_m_prime.value / e.m.value))
}

/// `J(λ) = -log m(λ)/λ`, defined from `λ_f` upward.
pub fn speed_objective(f: &AttachmentFunction, lambda: f64, cfg: &TruncationConfig) -> Result<f64> {
    let lf = malthusian(f, cfg)?;
    if !(lambda >= lf * (1.0 - 1e-12)) {
        return Err(Error::domain(format!(
            "speed objective needs λ ≥ λ_f = {lf}, got {lambda}"
        )));
    }
    Ok(objective(f, lambda, cfg)?.0)
}

/// Maximises `J` on `(λ_f, inf)` and returns `κ_f = J(λ*)` and
/// `c*_f = 1/(λ_f κ_f)`.
pub fn height_speed(f: &AttachmentFunction, cfg: &TruncationConfig) -> Result<HeightSolution> {
    let lf = malthusian(f, cfg)?;
    height_speed_from(f, lf, cfg)
}

pub(crate) fn height_speed_from(f: &AttachmentFunction, lf: f64, cfg: &TruncationConfig) -> Result<HeightSolution> {
    let j = |x: f64| objective(f, x, cfg).map(|v| v.0);
    let mut warnings = Vec::new();

    // Walk up in quarter doublings until J has decreased twice in a row.
    let step = 2f64.powf(0.25);
    let mut xs = vec![lf];
    let mut js = vec![0.0];
    let mut upper = None;
    for _ in 0..4 * EXPANSION_BUDGET {
        let x = xs.last().unwrap() * step;
        xs.push(x);
        js.push(j(x)?);
        let n = js.len();
        if n >= 3 && js[n - 1] < js[n - 2] && js[n - 2] < js[n - 3] {
            upper = Some(x);
            break;
        }
    }
    let upper = upper
        .ok_or_else(|| Error::NoInteriorMaximum(format!("J still increasing at λ = {:.3e}", xs.last().unwrap())))?;

    // Coarse scan on a log grid over (λ_f, upper].
    let ratio = upper / lf;
    let mut grid = vec![lf];
    let mut vals = vec![0.0];
    for i in 1..=SCAN_POINTS {
        let x = lf * ratio.powf(i as f64 / SCAN_POINTS as f64);
        grid.push(x);
        vals.push(j(x)?);
    }
    let best = (1..=SCAN_POINTS).max_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    let peaks = (1..SCAN_POINTS)
        .filter(|&i| vals[i] > vals[i - 1] && vals[i] >= vals[i + 1])
        .count();
    if peaks > 1 {
        warnings.push(format!(
            "J has {peaks} local maxima on the coarse scan; using the largest"
        ));
    }
    let a = grid[best - 1];
    let b = grid[(best + 1).min(SCAN_POINTS)];

    let (mut x, _) = golden_max(&j, a, b, GOLDEN_WIDTH)?;

    // Polish on the stationarity condition E[S] = J, i.e. J'(λ) = 0.
    let phi = |x: f64| objective(f, x, cfg).map(|(jv, es)| es - jv);
    let width = (GOLDEN_WIDTH * x).max(1e-14 * x);
    let (pa, pb) = (x - 4.0 * width, x + 4.0 * width);
    let (fa, fb) = (phi(pa)?, phi(pb)?);
    if fa > 0.0 && fb < 0.0 {
        x = illinois(&phi, pa, pb, fa, fb)?;
    } else if fa > 0.0 || fb < 0.0 {
        // Bracket the sign change on the whole scan cell.
        let (fa, fb) = (phi(a)?, phi(b)?);
        if fa > 0.0 && fb < 0.0 {
            x = illinois(&phi, a, b, fa, fb)?;
        }
    }

    let (kappa, es) = objective(f, x, cfg)?;
    let r_f = lf * kappa;
    Ok(HeightSolution {
        lambda_f: lf,
        lambda_star: x,
        kappa,
        r_f,
        c_star: 1.0 / r_f,
        stationarity_residual: x * (es - kappa).abs(),
        warnings,
    })
}

/// Golden-section maximisation on `[a, b]`.
fn golden_max(j: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, rel_width: f64) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut jc = j(c)?;
    let mut jd = j(d)?;
    for _ in 0..500 {
        if b - a <= rel_width * 0.5 * (a + b) {
            break;
        }
        if jc > jd {
            b = d;
            d = c;
            jd = jc;
            c = b - inv_phi * (b - a);
            jc = j(c)?;
        } else {
            a = c;
            c = d;
            jc = jd;
            d = a + inv_phi * (b - a);
            jd = j(d)?;
        }
    }
    Ok(if jc > jd { (c, jc) } else { (d, jd) })
}

/// Illinois variant of regula falsi for a bracketed sign change.
fn illinois(phi: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64) -> Result<f64> {
    let mut side = 0i8;
    let mut x = 0.5 * (a + b);
    for _ in 0..100 {
        x = (a * fb - b * fa) / (fb - fa);
        if !(x > a && x < b) {
            x = 0.5 * (a + b);
        }
        let fx = phi(x)?;
        if fx == 0.0 || (b - a) <= 2.0 * f64::EPSILON * x.abs() {
            break;
        }
        if (fx > 0.0) == (fa > 0.0) {
            a = x;
            fa = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    Ok(x)
}

/// Closed forms for `f(k) = k + δ`: `m(λ) = δ/(λ-1)`, so `λ_f = δ+1`,
/// `c_f = δ/(δ+1)`, `κ = W(1/(δe))`, `λ* = 1 + 1/κ` and
/// `c* = 1/((δ+1) κ)`.
pub fn affine_closed_form(delta: f64) -> Result<(DepthSolution, HeightSolution)> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::domain(format!("affine closed form needs δ > 0, got {delta}")));
    }
    let lambda_f = delta + 1.0;
    let q_f = (delta + 1.0) / delta;
    let kappa = lambert_w(1.0 / (delta * std::f64::consts::E))?;
    let depth = DepthSolution {
        lambda_f,
        q_f,
        c_f: delta / (delta + 1.0),
        bracket: (lambda_f, lambda_f),
        iterations: 0,
        residual: 0.0,
    };
    let height = HeightSolution {
        lambda_f,
        lambda_star: 1.0 + 1.0 / kappa,
        kappa,
        r_f: lambda_f * kappa,
        c_star: 1.0 / (lambda_f * kappa),
        stationarity_residual: 0.0,
        warnings: Vec::new(),
    };
    Ok((depth, height))
}
