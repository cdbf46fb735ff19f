//! Monotonicity of the depth and height constants along `θ ↦ g (f/g)^θ`.

use rayon::prelude::*;
use serde::Serialize;

use super::chebyshev::monotone_from;
use super::depth::{gauge, q_prime_fd, q_prime_of};
use super::height::{bbar, mean_u, one_step_of, table_at};
use crate::attach::{interpolate, is_grd_dominant, AttachmentFunction, GrdVerdict, DEFAULT_GRD_PREFIX};
use crate::constants::height_speed_from;
use crate::error::{Error, Result};
use crate::numeric::{grid_derivative, rel_gap};
use crate::series::TruncationConfig;

/// Slack on path verdicts.
pub const MONOTONE_SLACK: f64 = 1e-9;
pub const DEFAULT_GRID_POINTS: usize = 21;
/// Relative jump in `λ*_s` between neighbours that triggers a warning.
const JUMP_WARNING: f64 = 0.1;
pub const OUTSIDE_A7: &str = "outside (A7)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Depth,
    Height,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict")]
pub enum Verdict {
    Monotone,
    ViolationAt { index: usize, magnitude: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathOptions {
    /// Insert midpoints around near-violations before deciding.
    pub refine: bool,
    /// Step of the finite-difference check of `Q'_θ`.
    pub fd_eps: f64,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            refine: true,
            fd_eps: 1e-4,
        }
    }
}

/// One grid point. Depth paths fill `Q`, `c` and `Q'`; height paths fill
/// `R`, `c*` and `R'`. Failed points carry only `param` and `error`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PathPoint {
    pub param: f64,
    pub lambda: Option<f64>,
    pub lambda_star: Option<f64>,
    pub kappa: Option<f64>,
    /// `Q_θ` or `R_s`.
    pub value: Option<f64>,
    /// `c_θ` or `c*_s`.
    pub constant: Option<f64>,
    /// Double-sum `Q'_θ`, or two-point `R'_s` under the depth gauge.
    pub derivative: Option<f64>,
    /// `C_k` form of `Q'_θ`, or `R_s (b̄_s(λ_s) - b̄_s(λ*_s))`.
    pub derivative_alt: Option<f64>,
    /// Finite-difference `dQ/dθ`, or the grid slope of `R`.
    pub derivative_fd: Option<f64>,
    /// Height only: two-point `R'_s` without the gauge shift.
    pub derivative_ungauged: Option<f64>,
    /// `|m_{f*}(1) - 1|`.
    pub res_malthus: Option<f64>,
    pub res_centering: Option<f64>,
    /// Relative gap between `derivative` and `derivative_alt`.
    pub res_representation: Option<f64>,
    /// Relative gap between `derivative` and `derivative_fd`.
    pub res_fd: Option<f64>,
    pub res_stationarity: Option<f64>,
    pub k0: Option<usize>,
    pub prefix_bound: Option<f64>,
    pub n_terms: Option<usize>,
    pub label: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PathReport {
    pub kind: PathKind,
    pub grid: Vec<f64>,
    pub points: Vec<PathPoint>,
    pub verdict: Verdict,
    pub grd: GrdVerdict,
    pub warnings: Vec<String>,
}

impl PathReport {
    pub fn failed_points(&self) -> usize {
        self.points.iter().filter(|p| p.error.is_some()).count()
    }

    /// Smallest derivative over the successful points.
    pub fn min_derivative(&self) -> Option<f64> {
        self.points.iter().filter_map(|p| p.derivative).reduce(f64::min)
    }
}

/// `n` evenly spaced points on `[0, 1]`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::domain("grid is empty"));
    }
    if grid.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::domain("grid points must lie in [0, 1]"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("grid must be strictly increasing"));
    }
    Ok(())
}

fn grd_check(g: &AttachmentFunction, f: &AttachmentFunction, warnings: &mut Vec<String>) -> Result<GrdVerdict> {
    let v = is_grd_dominant(f, g, DEFAULT_GRD_PREFIX)?;
    match v {
        GrdVerdict::Fails { k } => warnings.push(format!(
            "f does not dominate g in growth ratio (first failure at k={k})"
        )),
        GrdVerdict::Dominates { tail_extended: true } => {
            warnings.push("growth-ratio dominance past the table end rests on the declared tail rule".into())
        }
        _ => {}
    }
    Ok(v)
}

fn failed(param: f64, e: Error) -> PathPoint {
    PathPoint {
        param,
        error: Some(format!("{}: {e}", e.kind())),
        ..PathPoint::default()
    }
}

fn depth_point(
    g: &AttachmentFunction,
    f: &AttachmentFunction,
    theta: f64,
    opts: &PathOptions,
    cfg: &TruncationConfig,
) -> Result<PathPoint> {
    let fam = gauge(g, f, theta, cfg)?;
    let table = fam.table();
    let qp = q_prime_of(table)?;
    let fd = q_prime_fd(g, f, theta, opts.fd_eps, cfg)?;
    let c_seq: Vec<f64> = table.cond_mean.iter().zip(&table.alpha).map(|(c, a)| c + a).collect();
    let k0 = monotone_from(&c_seq);
    let bound = c_seq[k0];
    let spread = c_seq[..k0].iter().fold(0.0f64, |m, c| m.max((c - bound).abs()));
    let prefix: f64 = (0..k0).map(|k| table.b[k].abs() * table.w[k]).sum();
    let floor = 1e-12 * fam.q_theta;
    Ok(PathPoint {
        param: theta,
        lambda: Some(fam.lambda_theta),
        value: Some(fam.q_theta),
        constant: Some(1.0 / fam.q_theta),
        derivative: Some(qp.double_sum),
        derivative_alt: Some(qp.c_form),
        derivative_fd: Some(fd),
        res_malthus: Some(fam.malthus_residual),
        res_centering: Some(fam.centering_residual),
        res_representation: Some(rel_gap(qp.double_sum, qp.c_form, floor)),
        res_fd: Some(rel_gap(qp.double_sum, fd, floor)),
        k0: Some(k0),
        prefix_bound: Some(spread * prefix),
        n_terms: Some(table.n_terms),
        ..PathPoint::default()
    })
}

fn height_point(g: &AttachmentFunction, f: &AttachmentFunction, s: f64, cfg: &TruncationConfig) -> Result<PathPoint> {
    let fam = gauge(g, f, s, cfg)?;
    let f_s = interpolate(g, f, s)?;
    let lam_s = fam.lambda_theta;
    let hs = height_speed_from(&f_s, lam_s, cfg)?;
    let at_s = table_at(g, f, s, lam_s, lam_s, fam.a_prime, None, cfg)?;
    let at_star = table_at(g, f, s, hs.lambda_star, lam_s, fam.a_prime, None, cfg)?;

    let (u_s, u_star) = (mean_u(&at_s), mean_u(&at_star));
    let (es_s, ratio) = (at_s.mean_s(), lam_s / hs.lambda_star);
    let two_point = hs.kappa * u_s / es_s - ratio * u_star;
    let u0_s = u_s - fam.a_prime * at_s.total_weight();
    let u0_star = u_star - fam.a_prime * at_star.total_weight();
    let ungauged = hs.kappa * u0_s / es_s - ratio * u0_star;
    let bbar_form = hs.r_f * (bbar(&at_s) - bbar(&at_star));
    let step = one_step_of(&at_star)?;

    let abs_b: Vec<f64> = at_s.b.iter().map(|b| b.abs()).collect();
    let scale_b = at_s.weighted_sum(&abs_b);
    let mut label = String::new();
    if f_s.rv_index().is_none() {
        label.push_str(OUTSIDE_A7);
    }
    for w in &hs.warnings {
        if !label.is_empty() {
            label.push_str("; ");
        }
        label.push_str(w);
    }
    Ok(PathPoint {
        param: s,
        lambda: Some(lam_s),
        lambda_star: Some(hs.lambda_star),
        kappa: Some(hs.kappa),
        value: Some(hs.r_f),
        constant: Some(hs.c_star),
        derivative: Some(two_point),
        derivative_alt: Some(bbar_form),
        derivative_ungauged: Some(ungauged),
        res_malthus: Some(fam.malthus_residual),
        res_centering: Some(if scale_b > 0.0 { u_s.abs() / scale_b } else { 0.0 }),
        res_representation: Some(rel_gap(two_point, bbar_form, 1e-12 * hs.r_f)),
        res_stationarity: Some(hs.stationarity_residual),
        k0: step.k0,
        prefix_bound: step.prefix_bound,
        n_terms: Some(at_star.n_terms),
        label,
        ..PathPoint::default()
    })
}

/// First point where the value drops by more than the slack, or where the
/// derivative is below `-deriv_slack`.
fn verdict_of(points: &[PathPoint], deriv_slack: Option<f64>) -> Verdict {
    let ok: Vec<(usize, &PathPoint)> = points.iter().enumerate().filter(|(_, p)| p.value.is_some()).collect();
    for w in ok.windows(2) {
        let ((_, a), (j, b)) = (w[0], w[1]);
        let drop = a.value.unwrap() - b.value.unwrap();
        if drop > MONOTONE_SLACK {
            return Verdict::ViolationAt {
                index: j,
                magnitude: drop,
            };
        }
    }
    if let Some(slack) = deriv_slack {
        for (i, p) in &ok {
            if let Some(d) = p.derivative {
                if d < -slack {
                    return Verdict::ViolationAt {
                        index: *i,
                        magnitude: -d,
                    };
                }
            }
        }
    }
    Verdict::Monotone
}

/// Midpoints of intervals whose increment is within ten times the slack of
/// a violation, skipping intervals where the path is exactly flat.
fn refinement_points(points: &[PathPoint]) -> Vec<f64> {
    let mut out = Vec::new();
    for w in points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let (Some(va), Some(vb)) = (a.value, b.value) else {
            continue;
        };
        let flat = va == vb && a.derivative == Some(0.0) && b.derivative == Some(0.0);
        if vb - va < 10.0 * MONOTONE_SLACK && !flat {
            out.push(0.5 * (a.param + b.param));
        }
    }
    out
}

fn merge(points: &mut Vec<PathPoint>, extra: Vec<PathPoint>) {
    points.extend(extra);
    points.sort_by(|a, b| a.param.total_cmp(&b.param));
}

fn finish(
    kind: PathKind,
    points: Vec<PathPoint>,
    grd: GrdVerdict,
    mut warnings: Vec<String>,
    deriv_slack: Option<f64>,
) -> PathReport {
    for p in &points {
        if let Some(e) = &p.error {
            warnings.push(format!("point {}: {e}", p.param));
        }
    }
    let verdict = verdict_of(&points, deriv_slack);
    PathReport {
        kind,
        grid: points.iter().map(|p| p.param).collect(),
        points,
        verdict,
        grd,
        warnings,
    }
}

/// `(λ_θ, Q_θ, c_θ, Q'_θ)` along the grid. Monotone iff `Q` is nondecreasing
/// and `Q' ≥ 0`, both within [`MONOTONE_SLACK`].
pub fn depth_path(
    g: &AttachmentFunction,
    f: &AttachmentFunction,
    grid: &[f64],
    opts: &PathOptions,
    cfg: &TruncationConfig,
) -> Result<PathReport> {
    check_grid(grid)?;
    let mut warnings = Vec::new();
    let grd = grd_check(g, f, &mut warnings)?;
    let eval = |t: &f64| depth_point(g, f, *t, opts, cfg).unwrap_or_else(|e| failed(*t, e));
    let mut points: Vec<PathPoint> = grid.par_iter().map(eval).collect();
    if opts.refine {
        let extra = refinement_points(&points);
        if !extra.is_empty() {
            warnings.push(format!("refined {} interval(s) near a possible violation", extra.len()));
            merge(&mut points, extra.par_iter().map(eval).collect());
        }
    }
    Ok(finish(PathKind::Depth, points, grd, warnings, Some(MONOTONE_SLACK)))
}

/// `(λ_s, λ*_s, κ_s, R_s, c*_s, R'_s)` along the grid. Monotone iff `R` is
/// nondecreasing within [`MONOTONE_SLACK`].
pub fn height_path(
    g: &AttachmentFunction,
    f: &AttachmentFunction,
    grid: &[f64],
    opts: &PathOptions,
    cfg: &TruncationConfig,
) -> Result<PathReport> {
    check_grid(grid)?;
    let mut warnings = Vec::new();
    let grd = grd_check(g, f, &mut warnings)?;
    let eval = |s: &f64| height_point(g, f, *s, cfg).unwrap_or_else(|e| failed(*s, e));
    let mut points: Vec<PathPoint> = grid.par_iter().map(eval).collect();
    if opts.refine {
        let extra = refinement_points(&points);
        if !extra.is_empty() {
            warnings.push(format!("refined {} interval(s) near a possible violation", extra.len()));
            merge(&mut points, extra.par_iter().map(eval).collect());
        }
    }

    let ok: Vec<usize> = (0..points.len()).filter(|&i| points[i].value.is_some()).collect();
    if ok.len() >= 2 {
        let xs: Vec<f64> = ok.iter().map(|&i| points[i].param).collect();
        let ys: Vec<f64> = ok.iter().map(|&i| points[i].value.unwrap()).collect();
        for (j, &i) in ok.iter().enumerate() {
            let slope = grid_derivative(&xs, &ys, j);
            let p = &mut points[i];
            p.derivative_fd = Some(slope);
            let d = p.derivative.unwrap_or(f64::NAN);
            p.res_fd = Some(rel_gap(d, slope, 1e-9));
        }
        for w in ok.windows(2) {
            let (a, b) = (points[w[0]].lambda_star.unwrap(), points[w[1]].lambda_star.unwrap());
            if (b - a).abs() > JUMP_WARNING * a.abs() {
                warnings.push(format!(
                    "λ* jumps from {a:.6} to {b:.6} between s={} and s={}",
                    points[w[0]].param, points[w[1]].param
                ));
            }
        }
    }
    for p in &points {
        if p.label.contains(OUTSIDE_A7) {
            warnings.push(format!("s={} is an extrapolated instance ({OUTSIDE_A7})", p.param));
        }
    }
    Ok(finish(PathKind::Height, points, grd, warnings, None))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> AttachmentFunction {
        s.parse().unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(check_grid(&[0.0, 0.5, 1.0]).is_ok());
        assert!(check_grid(&[0.0, 0.0]).is_err());
        assert!(check_grid(&[0.5, 1.5]).is_err());
        assert!(check_grid(&[]).is_err());
        assert_eq!(uniform_grid(3), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn verdict_finds_first_drop() {
        let pt = |x: f64, v: f64| PathPoint {
            param: x,
            value: Some(v),
            derivative: Some(1.0),
            ..PathPoint::default()
        };
        let pts = vec![pt(0.0, 1.0), pt(0.5, 2.0), pt(1.0, 1.5)];
        assert_eq!(
            verdict_of(&pts, None),
            Verdict::ViolationAt {
                index: 2,
                magnitude: 0.5
            }
        );
        assert_eq!(verdict_of(&pts[..2], None), Verdict::Monotone);
    }

    #[test]
    fn constant_path_is_monotone_and_unrefined() {
        let cfg = TruncationConfig::default();
        let f = p("power:0.5");
        let r = depth_path(&f, &f, &uniform_grid(5), &PathOptions::default(), &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Monotone);
        assert_eq!(r.points.len(), 5);
        let q0 = r.points[0].value.unwrap();
        assert!(r
            .points
            .iter()
            .all(|p| p.value == Some(q0) && p.derivative == Some(0.0)));
    }
}
