//! Weighted Chebyshev sums with a non-monotone prefix.
//!
//! For `a` centred under `w` and nondecreasing, and `c` nondecreasing from
//! `K0` on, replacing `c_k` by `c_{K0}` below `K0` gives a fully monotone
//! sequence and hence
//!
//! ```text
//! Σ a_k c_k w_k ≥ -max_{k<K0} |c_k - c_{K0}| · Σ_{k<K0} |a_k| w_k.
//! ```
//!
//! The bound `-C Σ_{k<K0} |a_k| w_k` with only `|c_k| ≤ C` on the prefix is
//! not shift invariant and can fail; it is reported next to the one above.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::Sum;

const CENTERING_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChebyshevReport {
    /// `-C_bound · Σ_{k<K0} |a_k| w_k`.
    pub lower_bound: f64,
    /// `-max_{k<K0} |c_k - c_{K0}| · Σ_{k<K0} |a_k| w_k`.
    pub corrected_bound: f64,
    /// `Σ a_k c_k w_k`.
    pub actual: f64,
}

impl ChebyshevReport {
    pub fn lower_bound_holds(&self) -> bool {
        self.actual >= self.lower_bound
    }
}

pub fn chebyshev_bound(a: &[f64], c: &[f64], w: &[f64], k0: usize, c_bound: f64) -> Result<ChebyshevReport> {
    let n = a.len();
    if c.len() != n || w.len() != n {
        return Err(Error::PreconditionViolation(format!(
            "length mismatch: a={}, c={}, w={}",
            n,
            c.len(),
            w.len()
        )));
    }
    if n == 0 {
        return Ok(ChebyshevReport {
            lower_bound: 0.0,
            corrected_bound: 0.0,
            actual: 0.0,
        });
    }
    if w.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::PreconditionViolation("weights must be nonnegative".into()));
    }
    let mut centre = Sum::new();
    let mut scale = Sum::new();
    for (x, y) in a.iter().zip(w) {
        centre.add(x * y);
        scale.add(x.abs() * y);
    }
    if centre.value().abs() > CENTERING_TOL * scale.value() {
        return Err(Error::PreconditionViolation(format!(
            "a is not centred: |Σ a w| = {:.3e}, Σ |a| w = {:.3e}",
            centre.value().abs(),
            scale.value()
        )));
    }
    if let Some(k) = (1..n).find(|&k| a[k] < a[k - 1]) {
        return Err(Error::PreconditionViolation(format!("a decreases at k={k}")));
    }
    let k0 = k0.min(n - 1);
    if let Some(k) = (k0 + 1..n).find(|&k| c[k] < c[k - 1]) {
        return Err(Error::PreconditionViolation(format!("c decreases at k={k} ≥ K0={k0}")));
    }
    if let Some(k) = (0..k0).find(|&k| c[k].abs() > c_bound) {
        return Err(Error::PreconditionViolation(format!(
            "|c_{k}| = {} exceeds C_bound = {c_bound}",
            c[k].abs()
        )));
    }

    let prefix: f64 = (0..k0).map(|k| a[k].abs() * w[k]).sum();
    let spread = (0..k0).map(|k| (c[k] - c[k0]).abs()).fold(0.0, f64::max);
    let mut actual = Sum::new();
    for k in 0..n {
        actual.add(a[k] * c[k] * w[k]);
    }
    Ok(ChebyshevReport {
        lower_bound: -c_bound * prefix,
        corrected_bound: -spread * prefix,
        actual: actual.value(),
    })
}

/// Smallest `K0` with `c` nondecreasing on `[K0, end]`.
pub fn monotone_from(c: &[f64]) -> usize {
    let mut k0 = c.len().saturating_sub(1);
    while k0 > 0 && c[k0 - 1] <= c[k0] {
        k0 -= 1;
    }
    k0
}
