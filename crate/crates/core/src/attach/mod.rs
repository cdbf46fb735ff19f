//! Attachment functions `f: N0 -> (0, inf)` and the growth-ratio order.
//!
//! A function is a small expression tree: closed forms (constant, affine,
//! shifted power), finite tables with an explicit tail rule, positive
//! rescalings, and the multiplicative interpolation `g * (f/g)^theta`.
//! Values are validated on construction, so a function that exists can be
//! evaluated; `eval` still reports `NonPositiveValue` for tail rules that
//! run negative far out.
//!
//! Interpolated values are computed in log space, which keeps power-type
//! functions finite at large `k`.

mod grammar;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Prefix length used by [`is_grd_dominant`] when the caller has no better
/// bound. A numeric verdict only certifies the checked prefix.
pub const DEFAULT_GRD_PREFIX: u64 = 100_000;

/// Absolute slack on log growth ratios in the numeric dominance check.
const GRD_LOG_SLACK: f64 = 1e-13;

/// How a table is continued past its last entry `v` at index `L - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum TailRule {
    /// `f(k) = v`.
    Hold,
    /// `f(k) = v + slope * (k - L + 1)`.
    Affine { slope: f64 },
    /// `f(k) = v * ((k + 1) / L)^rho`.
    Power { rho: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kind {
    Constant {
        c: f64,
    },
    /// `k + delta`.
    Affine {
        delta: f64,
    },
    /// `(k + shift)^rho`.
    Power {
        rho: f64,
        shift: f64,
    },
    Table {
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tail: Option<TailRule>,
    },
    Scaled {
        c: f64,
        base: Box<AttachmentFunction>,
    },
    /// `g * (f/g)^theta`.
    Interp {
        theta: f64,
        g: Box<AttachmentFunction>,
        f: Box<AttachmentFunction>,
    },
}

#[derive(Serialize, Deserialize)]
struct Repr {
    #[serde(flatten)]
    kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rv_index: Option<f64>,
}

/// A validated attachment function plus its declared regular-variation
/// index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Repr", into = "Repr")]
pub struct AttachmentFunction {
    kind: Kind,
    rv_index: Option<f64>,
}

impl TryFrom<Repr> for AttachmentFunction {
    type Error = Error;

    fn try_from(r: Repr) -> Result<Self> {
        validate(&r.kind)?;
        let mut out = AttachmentFunction::from_kind(r.kind);
        if r.rv_index.is_some() {
            out = out.with_rv_index(r.rv_index)?;
        }
        Ok(out)
    }
}

impl From<AttachmentFunction> for Repr {
    fn from(f: AttachmentFunction) -> Self {
        Repr {
            kind: f.kind,
            rv_index: f.rv_index,
        }
    }
}

fn positive(x: f64, what: &str) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} must be positive and finite, got {x}")))
    }
}

fn finite(x: f64, what: &str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} must be finite, got {x}")))
    }
}

fn validate(kind: &Kind) -> Result<()> {
    match kind {
        Kind::Constant { c } => positive(*c, "constant"),
        Kind::Affine { delta } => positive(*delta, "affine delta"),
        Kind::Power { rho, shift } => {
            finite(*rho, "power exponent")?;
            positive(*shift, "power shift")
        }
        Kind::Table { values, tail } => {
            if values.is_empty() {
                return Err(Error::domain("table needs at least one value"));
            }
            for (k, &v) in values.iter().enumerate() {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::NonPositiveValue { k: k as u64, value: v });
                }
            }
            match tail {
                Some(TailRule::Affine { slope }) => finite(*slope, "tail slope"),
                Some(TailRule::Power { rho }) => finite(*rho, "tail exponent"),
                _ => Ok(()),
            }
        }
        Kind::Scaled { c, .. } => positive(*c, "scale factor"),
        Kind::Interp { theta, .. } => check_theta(*theta),
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&theta) {
        Ok(())
    } else {
        Err(Error::domain(format!("theta must lie in [0, 1], got {theta}")))
    }
}

fn rv_in_range(rho: f64) -> Option<f64> {
    (0.0..1.0).contains(&rho).then_some(rho)
}

/// Declared index, or 1 for linear growth; lets `g^(1-θ) f^θ` with affine
/// `f` keep an index below one for `θ < 1`.
fn growth_index(f: &AttachmentFunction) -> Option<f64> {
    f.rv_index.or_else(|| match &f.kind {
        Kind::Affine { .. } => Some(1.0),
        Kind::Power { rho, .. } if *rho == 1.0 => Some(1.0),
        Kind::Table {
            tail: Some(TailRule::Affine { slope }),
            ..
        } if *slope > 0.0 => Some(1.0),
        Kind::Scaled { base, .. } => growth_index(base),
        _ => None,
    })
}

impl AttachmentFunction {
    /// Wraps an already validated kind and declares the regular-variation
    /// index that the closed form carries (none for affine growth, which is
    /// outside `[0, 1)`).
    fn from_kind(kind: Kind) -> Self {
        let rv_index = match &kind {
            Kind::Constant { .. } => Some(0.0),
            Kind::Affine { .. } => None,
            Kind::Power { rho, .. } => rv_in_range(*rho),
            Kind::Table { tail, .. } => match tail {
                Some(TailRule::Hold) => Some(0.0),
                Some(TailRule::Power { rho }) => rv_in_range(*rho),
                _ => None,
            },
            Kind::Scaled { base, .. } => base.rv_index,
            Kind::Interp { theta, g, f } => match (growth_index(g), growth_index(f)) {
                (Some(a), Some(b)) => rv_in_range((1.0 - theta) * a + theta * b),
                _ => None,
            },
        };
        AttachmentFunction { kind, rv_index }
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(Kind::Constant { c })
    }

    pub fn affine(delta: f64) -> Result<Self> {
        Self::new(Kind::Affine { delta })
    }

    /// `(k + shift)^rho`.
    pub fn power(rho: f64, shift: f64) -> Result<Self> {
        Self::new(Kind::Power { rho, shift })
    }

    pub fn table(values: Vec<f64>, tail: Option<TailRule>) -> Result<Self> {
        Self::new(Kind::Table { values, tail })
    }

    pub fn new(kind: Kind) -> Result<Self> {
        validate(&kind)?;
        Ok(Self::from_kind(kind))
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    pub fn rv_index(&self) -> Option<f64> {
        self.rv_index
    }

    /// Overrides the declared regular-variation index.
    pub fn with_rv_index(mut self, rho: Option<f64>) -> Result<Self> {
        if let Some(r) = rho {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::domain(format!("rv_index must lie in [0, 1), got {r}")));
            }
        }
        self.rv_index = rho;
        Ok(self)
    }

    /// `f(k)`.
    pub fn eval(&self, k: u64) -> Result<f64> {
        let v = match &self.kind {
            Kind::Interp { theta, g, f } => {
                if *theta == 0.0 {
                    return g.eval(k);
                }
                if *theta == 1.0 {
                    return f.eval(k);
                }
                self.ln_eval(k)?.exp()
            }
            Kind::Scaled { c, base } => c * base.eval(k)?,
            _ => self.raw(k),
        };
        check(k, v)
    }

    /// `ln f(k)`, computed without forming `f(k)` where the closed form
    /// allows it.
    pub fn ln_eval(&self, k: u64) -> Result<f64> {
        match &self.kind {
            Kind::Power { rho, shift } => Ok(rho * (k as f64 + shift).ln()),
            Kind::Scaled { c, base } => Ok(c.ln() + base.ln_eval(k)?),
            Kind::Interp { theta, g, f } => {
                let lg = g.ln_eval(k)?;
                if *theta == 0.0 {
                    return Ok(lg);
                }
                let lf = f.ln_eval(k)?;
                if *theta == 1.0 {
                    return Ok(lf);
                }
                Ok(lg + theta * (lf - lg))
            }
            _ => Ok(check(k, self.raw(k))?.ln()),
        }
    }

    fn raw(&self, k: u64) -> f64 {
        let x = k as f64;
        match &self.kind {
            Kind::Constant { c } => *c,
            Kind::Affine { delta } => x + delta,
            Kind::Power { rho, shift } => (x + shift).powf(*rho),
            Kind::Table { values, tail } => {
                let len = values.len();
                if (k as usize) < len {
                    return values[k as usize];
                }
                let last = values[len - 1];
                match tail {
                    None => f64::NAN,
                    Some(TailRule::Hold) => last,
                    Some(TailRule::Affine { slope }) => last + slope * (x - (len - 1) as f64),
                    Some(TailRule::Power { rho }) => last * ((x + 1.0) / len as f64).powf(*rho),
                }
            }
            Kind::Scaled { .. } | Kind::Interp { .. } => unreachable!("handled by eval"),
        }
    }

    /// `f(k + 1) / f(k)`.
    pub fn growth_ratio(&self, k: u64) -> Result<f64> {
        match &self.kind {
            Kind::Interp { .. } | Kind::Power { .. } => Ok((self.ln_eval(k + 1)? - self.ln_eval(k)?).exp()),
            _ => Ok(self.eval(k + 1)? / self.eval(k)?),
        }
    }

    /// First index `k <= k_max` beyond which the function follows a closed
    /// form. Zero unless a table is involved.
    pub fn closed_form_from(&self) -> u64 {
        match &self.kind {
            Kind::Table { values, .. } => values.len() as u64,
            Kind::Scaled { base, .. } => base.closed_form_from(),
            Kind::Interp { g, f, .. } => g.closed_form_from().max(f.closed_form_from()),
            _ => 0,
        }
    }

    /// Whether `f(k+1) >= f(k)` follows from the closed form alone.
    pub fn analytically_nondecreasing(&self) -> bool {
        match &self.kind {
            Kind::Constant { .. } | Kind::Affine { .. } => true,
            Kind::Power { rho, .. } => *rho >= 0.0,
            Kind::Table { .. } => false,
            Kind::Scaled { base, .. } => base.analytically_nondecreasing(),
            Kind::Interp { g, f, .. } => g.analytically_nondecreasing() && f.analytically_nondecreasing(),
        }
    }

    /// First `k < k_max` with `f(k+1) < f(k)`, if any.
    pub fn first_decrease(&self, k_max: u64) -> Result<Option<u64>> {
        let mut prev = self.eval(0)?;
        for k in 0..k_max {
            let next = self.eval(k + 1)?;
            if next < prev {
                return Ok(Some(k));
            }
            prev = next;
        }
        Ok(None)
    }

    fn has_table_within(&self, k_max: u64) -> bool {
        match &self.kind {
            Kind::Table { values, .. } => (values.len() as u64) <= k_max,
            Kind::Scaled { base, .. } => base.has_table_within(k_max),
            Kind::Interp { g, f, .. } => g.has_table_within(k_max) || f.has_table_within(k_max),
            _ => false,
        }
    }

    fn unscaled(&self) -> &AttachmentFunction {
        match &self.kind {
            Kind::Scaled { base, .. } => base.unscaled(),
            _ => self,
        }
    }
}

fn check(k: u64, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else if v.is_nan() {
        Err(Error::domain(format!("table has no tail rule for k={k}")))
    } else {
        Err(Error::NonPositiveValue { k, value: v })
    }
}

/// `g * (f/g)^theta`.
pub fn interpolate(g: &AttachmentFunction, f: &AttachmentFunction, theta: f64) -> Result<AttachmentFunction> {
    check_theta(theta)?;
    Ok(AttachmentFunction::from_kind(Kind::Interp {
        theta,
        g: Box::new(g.clone()),
        f: Box::new(f.clone()),
    }))
}

/// `k -> c * f(k)`.
pub fn scale(f: &AttachmentFunction, c: f64) -> Result<AttachmentFunction> {
    positive(c, "scale factor")?;
    let kind = match &f.kind {
        Kind::Scaled { c: c0, base } => Kind::Scaled {
            c: c0 * c,
            base: base.clone(),
        },
        _ => Kind::Scaled {
            c,
            base: Box::new(f.clone()),
        },
    };
    Ok(AttachmentFunction {
        kind,
        rv_index: f.rv_index,
    })
}

/// Outcome of a growth-ratio dominance check `f >=_GR g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum GrdVerdict {
    /// A closed-form rule proves `f/g` nondecreasing on all of N0.
    AnalyticDominates,
    /// `f/g` is nondecreasing on the checked prefix. `tail_extended` marks
    /// prefixes that run past the end of a table, where the verdict depends
    /// on the declared tail rule.
    Dominates { tail_extended: bool },
    /// First index with `f(k+1)/f(k) < g(k+1)/g(k)`.
    Fails { k: u64 },
}

impl GrdVerdict {
    pub fn holds(&self) -> bool {
        !matches!(self, GrdVerdict::Fails { .. })
    }
}

fn analytic_dominance(f: &AttachmentFunction, g: &AttachmentFunction) -> bool {
    let (f, g) = (f.unscaled(), g.unscaled());
    match (&f.kind, &g.kind) {
        (_, Kind::Constant { .. }) => f.analytically_nondecreasing(),
        (Kind::Affine { delta: df }, Kind::Affine { delta: dg }) => df <= dg,
        (Kind::Power { rho: rf, shift: sf }, Kind::Power { rho: rg, shift: sg }) => sf == sg && rf >= rg,
        _ => false,
    }
}

/// Checks whether `f/g` is nondecreasing, analytically where a rule applies
/// and otherwise on `k < k_max`.
pub fn is_grd_dominant(f: &AttachmentFunction, g: &AttachmentFunction, k_max: u64) -> Result<GrdVerdict> {
    if analytic_dominance(f, g) {
        return Ok(GrdVerdict::AnalyticDominates);
    }
    let mut lf = f.ln_eval(0)?;
    let mut lg = g.ln_eval(0)?;
    for k in 0..k_max {
        let (nf, ng) = (f.ln_eval(k + 1)?, g.ln_eval(k + 1)?);
        if (nf - lf) < (ng - lg) - GRD_LOG_SLACK {
            return Ok(GrdVerdict::Fails { k });
        }
        lf = nf;
        lg = ng;
    }
    Ok(GrdVerdict::Dominates {
        tail_extended: f.has_table_within(k_max) || g.has_table_within(k_max),
    })
}

impl fmt::Display for AttachmentFunction {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        grammar::write(self, out)
    }
}

impl FromStr for AttachmentFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        grammar::parse(s)
    }
}
