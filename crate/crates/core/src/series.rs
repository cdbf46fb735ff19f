//! The product weights `A_n(λ) = Π_{i<n} f(i)/(f(i)+λ)`, their tails
//! `r_i = Σ_{n>i} A_n`, and the Laplace transform `m(λ) = Σ_{n≥1} A_n` with
//! its derivative `-m'(λ) = Σ_i r_i/(f(i)+λ)`.
//!
//! Terms are accumulated in log space. Past the last explicit index `N` the
//! remaining mass is not dropped but closed in form: summation by parts on
//! `A_n - A_{n+1} = A_n λ/(f(n)+λ)` gives
//!
//! ```text
//! Σ_{n≥M} A_n = A_M (f(M) + λ - σ) / (λ - σ)
//! ```
//!
//! when `f` grows with constant slope `σ` beyond `M = N + 1`. The closure is
//! exact for affine and eventually constant `f`; for curved `f` the slope is
//! corrected to first order in its local log-derivative. Truncation stops at
//! doubling checkpoints once the closed-off value agrees with the one at
//! half the index.

use serde::{Deserialize, Serialize};

use crate::attach::AttachmentFunction;
use crate::error::{Error, Result};
use crate::numeric::Sum;

/// First checkpoint of the doubling schedule.
const FIRST_CHECKPOINT: usize = 16;
/// Checkpoints with an infinite tail closure needed before declaring
/// divergence.
const DIVERGENT_CHECKPOINTS: usize = 3;
const MIN_DIVERGENCE_INDEX: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationConfig {
    pub rel_tol: f64,
    /// Absolute floor on convergence comparisons; guards sums that underflow.
    pub abs_tol: f64,
    pub max_terms: usize,
    /// Compare against the value at half the truncation index.
    pub safety_doubling: bool,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        TruncationConfig {
            rel_tol: 1e-12,
            abs_tol: 1e-300,
            max_terms: 10_000_000,
            safety_doubling: true,
        }
    }
}

impl TruncationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::domain(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if !(self.abs_tol >= 0.0) {
            return Err(Error::domain(format!(
                "abs_tol must be nonnegative, got {}",
                self.abs_tol
            )));
        }
        if self.max_terms < 8 {
            return Err(Error::domain(format!(
                "max_terms must be at least 8, got {}",
                self.max_terms
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesResult {
    pub value: f64,
    pub n_used: usize,
    pub err_estimate: f64,
    pub converged: bool,
}

/// Closed-form model of everything beyond the last explicit index.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TailClosure {
    /// `A_M`.
    a_m: f64,
    /// `f(M)`.
    f_m: f64,
    /// Local slope `f(M) - f(M-1)`, clamped at zero.
    sigma: f64,
    /// Local log-derivative of the slope.
    beta: f64,
}

impl TailClosure {
    fn at(f: &AttachmentFunction, m_idx: usize, a_m: f64, f_prev: f64) -> Result<Self> {
        let f_m = f.eval(m_idx as u64)?;
        let sigma = (f_m - f_prev).max(0.0);
        let mut beta = 0.0;
        let half = m_idx / 2;
        if sigma > 0.0 && half >= 1 {
            let s_half = f.eval(half as u64)? - f.eval(half as u64 - 1)?;
            if s_half > 0.0 {
                beta = ((sigma / s_half).ln() / (m_idx as f64 / half as f64).ln()).clamp(-1.0, 0.5);
            }
        }
        Ok(TailClosure { a_m, f_m, sigma, beta })
    }

    /// Effective slope `σψ` and its λ-derivative, or `None` when the model
    /// tail is not summable.
    fn slope(&self, lambda: f64) -> Option<(f64, f64)> {
        if self.sigma <= 0.0 {
            return Some((0.0, 0.0));
        }
        let s = self.sigma;
        let d = lambda - s * (1.0 + self.beta);
        if lambda <= s || d <= 0.0 {
            return None;
        }
        Some((s * (lambda - s) / d, -s * s * self.beta / (d * d)))
    }

    /// `Σ_{n≥M} A_n`.
    pub(crate) fn mass(&self, lambda: f64) -> f64 {
        match self.slope(lambda) {
            Some((u, _)) => self.a_m * (self.f_m + lambda - u) / (lambda - u),
            None => f64::INFINITY,
        }
    }

    /// `Σ_{i≥M} r_i/(f(i)+λ)`, i.e. the part of `-m'` not carried by the
    /// explicit table once the tail mass is counted inside every `r_i`,
    /// `i < M`.
    pub(crate) fn excess(&self, lambda: f64) -> f64 {
        match self.slope(lambda) {
            Some((u, du)) => self.a_m * self.f_m * (1.0 - du) / ((lambda - u) * (lambda - u)),
            None => f64::INFINITY,
        }
    }

    /// `Σ_{n≥M} A_n / A_M`, free of underflow in `A_M`.
    pub(crate) fn mass_ratio(&self, lambda: f64) -> f64 {
        match self.slope(lambda) {
            Some((u, _)) => (self.f_m + lambda - u) / (lambda - u),
            None => f64::INFINITY,
        }
    }

    /// `excess / mass`, free of underflow in `A_M`.
    pub(crate) fn excess_ratio(&self, lambda: f64) -> f64 {
        match self.slope(lambda) {
            Some((u, du)) => self.f_m * (1.0 - du) / ((lambda - u) * (self.f_m + lambda - u)),
            None => f64::INFINITY,
        }
    }

    /// Decay exponent `q` of the tail weights `w_k ~ k^{-(q+1)}`; infinite
    /// when the tail is geometric.
    pub(crate) fn weight_decay(&self, lambda: f64) -> f64 {
        if self.sigma <= 0.0 {
            f64::INFINITY
        } else {
            ((lambda - self.sigma) / self.sigma).max(1e-300)
        }
    }
}

/// `A_n(λ)` for `n = 0..=N` in log space, with the values of `f` and the
/// tail closure at `N + 1`.
#[derive(Debug, Clone)]
pub struct WeightPrefix {
    lambda: f64,
    /// `log A_n` for `n = 0..=N+1`.
    log_a: Vec<f64>,
    /// `f(k)` for `k = 0..=N+1`.
    fvals: Vec<f64>,
    closure: TailClosure,
    m: SeriesResult,
    neg_m_prime: SeriesResult,
}

impl WeightPrefix {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Truncation index `N`.
    pub fn n_terms(&self) -> usize {
        self.log_a.len() - 2
    }

    /// `log A_n` for `n = 0..=N`.
    pub fn log_a(&self) -> &[f64] {
        &self.log_a[..self.log_a.len() - 1]
    }

    /// `A_n` for `n ≤ N + 1`.
    pub fn a(&self, n: usize) -> f64 {
        self.log_a[n].exp()
    }

    /// `f(k)` for `k ≤ N + 1`.
    pub fn f_values(&self) -> &[f64] {
        &self.fvals
    }

    /// `Σ_{n>N} A_n` from the tail closure.
    pub fn tail_mass(&self) -> f64 {
        self.closure.mass(self.lambda)
    }

    pub(crate) fn closure(&self) -> &TailClosure {
        &self.closure
    }

    /// `m(λ)` with the truncation diagnostics of the run that built this
    /// table.
    pub fn m(&self) -> SeriesResult {
        self.m
    }

    /// `-m'(λ)` by one backward pass over the table: suffix sums give every
    /// `r_i`, each weighted by `1/(f(i)+λ)`.
    pub fn neg_m_prime(&self) -> SeriesResult {
        let n = self.n_terms();
        let mut r = self.tail_mass();
        let mut acc = Sum::new();
        acc.add(self.closure.excess(self.lambda));
        for i in (0..=n).rev() {
            acc.add(r / (self.fvals[i] + self.lambda));
            r += self.a(i);
        }
        let value = acc.value();
        let gap = (value - self.neg_m_prime.value).abs();
        SeriesResult {
            value,
            err_estimate: self.neg_m_prime.err_estimate.max(gap),
            ..self.neg_m_prime
        }
    }

    /// `r_i = Σ_{n≥i+1} A_n` for `i = 0..=i_max`, the tail beyond `N`
    /// included through the closure.
    pub fn tails(&self, i_max: usize) -> Vec<f64> {
        let n = self.n_terms();
        let i_max = i_max.min(n);
        let mut out = vec![0.0; n + 1];
        let mut r = Sum::new();
        r.add(self.tail_mass());
        for i in (0..=n).rev() {
            out[i] = r.value();
            r.add(self.a(i));
        }
        out.truncate(i_max + 1);
        out
    }
}

/// Controls beyond [`TruncationConfig`] used when a full table is needed.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Policy {
    /// Keep extending until the closed tail is at most this fraction of `m`.
    pub tail_frac: f64,
    /// Hard cap on the table length; the closure covers the rest.
    pub cap: usize,
}

impl Policy {
    pub(crate) const SERIES: Policy = Policy {
        tail_frac: f64::INFINITY,
        cap: usize::MAX,
    };
}

/// Result of a streaming evaluation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Eval {
    pub m: SeriesResult,
    pub neg_m_prime: SeriesResult,
}

struct Run {
    log_a: Vec<f64>,
    fvals: Vec<f64>,
    closure: TailClosure,
    m: SeriesResult,
    neg_m_prime: SeriesResult,
}

/// Growth exponent far out; above one the series diverges for every λ.
fn is_superlinear(f: &AttachmentFunction) -> bool {
    match (f.ln_eval(1 << 51), f.ln_eval(1 << 52)) {
        (Ok(a), Ok(b)) => (b - a) / std::f64::consts::LN_2 > 1.0 + 1e-6,
        _ => false,
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "lambda must be positive and finite, got {lambda}"
        )))
    }
}

fn divergent(lambda: f64, reason: impl Into<String>) -> Error {
    Error::DivergentSeries {
        lambda,
        reason: reason.into(),
    }
}

fn run(f: &AttachmentFunction, lambda: f64, cfg: &TruncationConfig, policy: Policy, keep: bool) -> Result<Run> {
    check_lambda(lambda)?;
    cfg.validate()?;
    if is_superlinear(f) {
        return Err(divergent(lambda, "f grows faster than linearly"));
    }
    let regular = 2 * f.closed_form_from() as usize;
    let cap = policy.cap.min(cfg.max_terms);

    let mut log_a = Sum::new();
    let mut h = Sum::new();
    let mut s = Sum::new();
    let mut sh = Sum::new();
    let mut log_a_vec = if keep { vec![0.0] } else { Vec::new() };
    let mut fvals = Vec::new();
    let mut n = 0usize;
    let mut next_check = FIRST_CHECKPOINT.min(cap);
    let mut prev: Option<(f64, f64)> = None;
    let mut infinite_checks = 0usize;

    loop {
        let fn_ = f.eval(n as u64)?;
        log_a.add(-(lambda / fn_).ln_1p());
        h.add(1.0 / (fn_ + lambda));
        n += 1;
        let a = log_a.value().exp();
        s.add(a);
        sh.add(a * h.value());
        if keep {
            fvals.push(fn_);
            log_a_vec.push(log_a.value());
        }
        if n < next_check {
            continue;
        }
        next_check = next_check.saturating_mul(2).min(cap.max(n + 1));

        // Checkpoint at N = n: close the tail at M = N + 1.
        let f_n = f.eval(n as u64)?;
        let log_am = log_a.value() - (lambda / f_n).ln_1p();
        let h_m = h.value() + 1.0 / (f_n + lambda);
        let closure = TailClosure::at(f, n + 1, log_am.exp(), f_n)?;
        let t = closure.mass(lambda);
        let at_limit = n >= cfg.max_terms;

        if !t.is_finite() {
            infinite_checks += 1;
            prev = None;
            if (n >= MIN_DIVERGENCE_INDEX && infinite_checks >= DIVERGENT_CHECKPOINTS) || at_limit {
                return Err(divergent(
                    lambda,
                    format!("tail is not summable (local slope ≥ λ at n={n})"),
                ));
            }
            if n >= cap {
                return Err(divergent(lambda, format!("tail not summable at the table cap n={n}")));
            }
            continue;
        }
        infinite_checks = 0;

        let e = t * h_m + closure.excess(lambda);
        let v = s.value() + t;
        let vp = sh.value() + e;
        let (dv, dvp) = match prev {
            Some((pv, pvp)) => ((v - pv).abs(), (vp - pvp).abs()),
            None => (f64::INFINITY, f64::INFINITY),
        };
        let doubling_ok = dv <= cfg.rel_tol * v + cfg.abs_tol && dvp <= cfg.rel_tol * vp + cfg.abs_tol;
        let ok = if cfg.safety_doubling {
            doubling_ok
        } else {
            a <= cfg.rel_tol * s.value() + cfg.abs_tol && t <= cfg.rel_tol * v + cfg.abs_tol
        };
        let (err_m, err_mp) = if cfg.safety_doubling { (dv, dvp) } else { (t, e) };
        let settled = ok && n >= regular;
        let finished = (settled && (t <= policy.tail_frac * v || n >= cap)) || n >= cap || at_limit;

        if finished {
            if !settled && at_limit && a > 10.0 * cfg.rel_tol * s.value() {
                return Err(divergent(
                    lambda,
                    format!("term/sum ratio {:.3e} at max_terms={}", a / s.value(), cfg.max_terms),
                ));
            }
            if !settled {
                log::debug!("series at λ={lambda} not converged after {n} terms (err {err_m:.3e})");
            }
            if keep {
                fvals.push(f_n);
                fvals.push(closure.f_m);
                log_a_vec.push(log_am);
            }
            return Ok(Run {
                log_a: log_a_vec,
                fvals,
                closure,
                m: SeriesResult {
                    value: v,
                    n_used: n,
                    err_estimate: err_m.min(v.abs().max(t)),
                    converged: settled,
                },
                neg_m_prime: SeriesResult {
                    value: vp,
                    n_used: n,
                    err_estimate: err_mp.min(vp.abs().max(e)),
                    converged: settled,
                },
            });
        }
        prev = Some((v, vp));
    }
}

/// `m(λ)` and `-m'(λ)` in one streaming pass, without storing the table.
pub(crate) fn evaluate(f: &AttachmentFunction, lambda: f64, cfg: &TruncationConfig) -> Result<Eval> {
    let r = run(f, lambda, cfg, Policy::SERIES, false)?;
    Ok(Eval {
        m: r.m,
        neg_m_prime: r.neg_m_prime,
    })
}

/// Adaptive table of `A_n(λ)`.
pub(crate) fn build(
    f: &AttachmentFunction,
    lambda: f64,
    cfg: &TruncationConfig,
    policy: Policy,
) -> Result<WeightPrefix> {
    let r = run(f, lambda, cfg, policy, true)?;
    Ok(WeightPrefix {
        lambda,
        log_a: r.log_a,
        fvals: r.fvals,
        closure: r.closure,
        m: r.m,
        neg_m_prime: r.neg_m_prime,
    })
}

/// `log A_n(λ)` for `n = 0..=N` with a fixed truncation index.
pub fn product_weights(f: &AttachmentFunction, lambda: f64, n_max: usize) -> Result<WeightPrefix> {
    check_lambda(lambda)?;
    if n_max < 1 {
        return Err(Error::domain("need at least one term"));
    }
    let mut log_a = Sum::new();
    let mut h = Sum::new();
    let mut s = Sum::new();
    let mut sh = Sum::new();
    let mut log_a_vec = vec![0.0];
    let mut fvals = Vec::with_capacity(n_max + 2);
    for n in 0..=n_max {
        let fn_ = f.eval(n as u64)?;
        fvals.push(fn_);
        log_a.add(-(lambda / fn_).ln_1p());
        h.add(1.0 / (fn_ + lambda));
        log_a_vec.push(log_a.value());
        if n < n_max {
            let a = log_a.value().exp();
            s.add(a);
            sh.add(a * h.value());
        }
    }
    let a_m = log_a.value().exp();
    let closure = TailClosure::at(f, n_max + 1, a_m, fvals[n_max])?;
    fvals.push(closure.f_m);
    let t = closure.mass(lambda);
    let e = t * h.value() + closure.excess(lambda);
    let v = s.value() + t;
    let vp = sh.value() + e;
    let small = |x: f64, tot: f64| x <= TruncationConfig::default().rel_tol * tot;
    Ok(WeightPrefix {
        lambda,
        log_a: log_a_vec,
        fvals,
        closure,
        m: SeriesResult {
            value: v,
            n_used: n_max,
            err_estimate: t,
            converged: small(t, v),
        },
        neg_m_prime: SeriesResult {
            value: vp,
            n_used: n_max,
            err_estimate: e,
            converged: small(e, vp),
        },
    })
}

/// `m(λ) = Σ_{n≥1} A_n(λ)`.
pub fn laplace_m(f: &AttachmentFunction, lambda: f64, cfg: &TruncationConfig) -> Result<SeriesResult> {
    Ok(evaluate(f, lambda, cfg)?.m)
}

/// `-m'(λ) = Σ_i r_i(λ)/(f(i)+λ)`, from a backward pass over the same
/// truncated table that gives `m(λ)`.
pub fn laplace_m_prime_neg(f: &AttachmentFunction, lambda: f64, cfg: &TruncationConfig) -> Result<SeriesResult> {
    Ok(build(f, lambda, cfg, Policy::SERIES)?.neg_m_prime())
}

/// Tails `r_i` for `i = 0..=i_max` (clamped to the truncation index).
pub fn tails(weights: &WeightPrefix, i_max: usize) -> Vec<f64> {
    weights.tails(i_max)
}

/// `|Σ_{n=0}^m λ/(f(n)+λ) A_n - (1 - A_{m+1})|`; zero in exact arithmetic.
pub fn telescoping_residual(f: &AttachmentFunction, lambda: f64, m: usize) -> Result<f64> {
    check_lambda(lambda)?;
    let mut log_a = 0.0;
    let mut acc = Sum::new();
    for n in 0..=m {
        let fn_ = f.eval(n as u64)?;
        let a = f64::exp(log_a);
        acc.add(a * lambda / (fn_ + lambda));
        log_a += -(lambda / fn_).ln_1p();
    }
    Ok((acc.value() - (1.0 - log_a.exp())).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(s: &str) -> AttachmentFunction {
        s.parse().unwrap()
    }

    fn cfg() -> TruncationConfig {
        TruncationConfig::default()
    }

    #[test]
    fn product_weight_examples() {
        let w = product_weights(&p("const:1"), 1.0, 10).unwrap();
        assert_eq!(w.log_a()[0], 0.0);
        assert_relative_eq!(w.log_a()[3], -3.0 * 2f64.ln(), max_relative = 1e-15);
        let w = product_weights(&p("affine:1"), 2.0, 10).unwrap();
        assert_relative_eq!(w.a(2), 1.0 / 6.0, max_relative = 1e-14);
        for n in 0..=10 {
            assert_relative_eq!(w.a(n), 2.0 / ((n + 1) as f64 * (n + 2) as f64), max_relative = 1e-14);
        }
        assert!(w.log_a().windows(2).all(|x| x[1] < x[0]));
    }

    #[test]
    fn laplace_examples() {
        assert_relative_eq!(
            laplace_m(&p("const:1"), 1.0, &cfg()).unwrap().value,
            1.0,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            laplace_m(&p("affine:1"), 3.0, &cfg()).unwrap().value,
            0.5,
            max_relative = 1e-13
        );
        assert!(matches!(
            laplace_m(&p("affine:1"), 0.5, &cfg()),
            Err(Error::DivergentSeries { .. })
        ));
        assert!(matches!(
            laplace_m(&p("affine:1"), 1.0, &cfg()),
            Err(Error::DivergentSeries { .. })
        ));
    }

    #[test]
    fn derivative_examples() {
        for (s, lam, want) in [("const:1", 1.0, 1.0), ("affine:1", 2.0, 1.0), ("affine:2", 3.0, 0.5)] {
            let r = laplace_m_prime_neg(&p(s), lam, &cfg()).unwrap();
            assert_relative_eq!(r.value, want, max_relative = 1e-12);
        }
    }

    #[test]
    fn tails_examples() {
        let w = build(&p("const:1"), 1.0, &cfg(), Policy::SERIES).unwrap();
        let r = tails(&w, 20);
        for (i, ri) in r.iter().enumerate() {
            assert_relative_eq!(*ri, 2f64.powi(-(i as i32)), max_relative = 1e-13);
        }
        assert_relative_eq!(r[0], w.m().value, max_relative = 1e-15);
        let w = build(&p("affine:1"), 2.0, &cfg(), Policy::SERIES).unwrap();
        let r = tails(&w, 10);
        for (i, ri) in r.iter().enumerate() {
            assert_relative_eq!(*ri, 2.0 / (i as f64 + 2.0), max_relative = 1e-12);
        }
    }

    #[test]
    fn telescoping_examples() {
        assert!(telescoping_residual(&p("const:1"), 1.0, 2).unwrap() < 1e-16);
        assert!(telescoping_residual(&p("power:0.5"), 0.7, 0).unwrap() < 1e-16);
        assert!(telescoping_residual(&p("affine:1"), 2.0, 50).unwrap() < 1e-14);
    }

    #[test]
    fn affine_closure_stops_early() {
        let r = laplace_m(&p("affine:1"), 3.0, &cfg()).unwrap();
        assert!(r.converged);
        assert!(r.n_used <= 64, "n_used={}", r.n_used);
    }

    #[test]
    fn near_critical_affine_stays_accurate() {
        let r = laplace_m(&p("affine:1"), 1.0 + 1e-6, &cfg()).unwrap();
        assert_relative_eq!(r.value, 1e6, max_relative = 1e-8);
    }

    #[test]
    fn superlinear_is_divergent() {
        assert!(matches!(
            laplace_m(&p("power:2"), 10.0, &cfg()),
            Err(Error::DivergentSeries { .. })
        ));
    }

    #[test]
    fn tables_wait_for_their_tail() {
        // Linear start, constant tail: the affine-looking head must not fool
        // the stopping rule.
        let mut vals: Vec<f64> = (0..1000).map(|k| k as f64 + 1.0).collect();
        vals.push(1000.0);
        let f = AttachmentFunction::table(vals.clone(), Some(crate::attach::TailRule::Hold)).unwrap();
        let lam = 2.0;
        // Exact: finite head plus geometric tail with ratio 1000/1002.
        let mut a = 1.0;
        let mut m = 0.0;
        for v in &vals {
            a *= v / (v + lam);
            m += a;
        }
        m += a * 1000.0 / lam;
        let r = laplace_m(&f, lam, &cfg()).unwrap();
        assert_relative_eq!(r.value, m, max_relative = 1e-11);
    }

    #[test]
    fn power_series_match_brute_force() {
        let f = p("power:0.5");
        let lam = 2.0;
        let r = laplace_m(&f, lam, &cfg()).unwrap();
        let mut la = 0.0f64;
        let mut m = 0.0;
        for k in 0..200_000u64 {
            la -= (lam / f.eval(k).unwrap()).ln_1p();
            m += la.exp();
        }
        assert_relative_eq!(r.value, m, max_relative = 1e-12);
    }

    #[test]
    fn backward_and_forward_derivative_agree() {
        let f = p("interp:theta=0.6,g=const:1,f=affine:1");
        let w = build(&f, 2.5, &cfg(), Policy::SERIES).unwrap();
        let back = w.neg_m_prime().value;
        let fwd = evaluate(&f, 2.5, &cfg()).unwrap().neg_m_prime.value;
        assert_relative_eq!(back, fwd, max_relative = 1e-12);
    }

    #[test]
    fn config_validation() {
        let bad = TruncationConfig { rel_tol: 0.0, ..cfg() };
        assert!(laplace_m(&p("const:1"), 1.0, &bad).is_err());
        let bad = TruncationConfig { max_terms: 4, ..cfg() };
        assert!(laplace_m(&p("const:1"), 1.0, &bad).is_err());
    }
}
