//! Principal branch of the Lambert W function on `[-1/e, inf)`.

use std::f64::consts::E;

use crate::error::{Error, Result};

/// `W(x)` with `W e^W = x`, by Halley iteration from a branch-point series
/// near `-1/e`, `log1p(x)` for moderate `x`, and the asymptotic expansion
/// for large `x`.
pub fn lambert_w(x: f64) -> Result<f64> {
    let branch = -1.0 / E;
    if x.is_nan() || x < branch - 4.0 * f64::EPSILON {
        return Err(Error::domain(format!("lambert_w needs x >= -1/e, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let mut w = if x < -0.25 {
        let p = (2.0 * (E * x + 1.0)).max(0.0).sqrt();
        let w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
        if p < 1e-5 {
            return Ok(w);
        }
        w
    } else if x < 3.0 {
        x.ln_1p()
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    };
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let dw = f / denom;
        w -= dw;
        if dw.abs() <= 2.0 * f64::EPSILON * w.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(w)
}
