use approx::assert_relative_eq;

use patree::grd::{self, uniform_grid, PathOptions, Verdict};
use patree::{height_speed, interpolate, laplace_m, scale, AttachmentFunction, TruncationConfig};

fn p(s: &str) -> AttachmentFunction {
    s.parse().unwrap()
}

fn cfg() -> TruncationConfig {
    TruncationConfig::default()
}

fn ln_m(g: &AttachmentFunction, f: &AttachmentFunction, s: f64, lambda: f64) -> f64 {
    laplace_m(&interpolate(g, f, s).unwrap(), lambda, &cfg())
        .unwrap()
        .value
        .ln()
}

#[test]
fn score_identities_match_finite_differences() {
    for (g, f, s) in [
        (p("power:0.3"), p("power:0.7"), 0.5),
        (p("const:1"), p("power:0.6"), 0.3),
        (p("const:1"), p("affine:1"), 0.5),
    ] {
        let fam = grd::gauge(&g, &f, s, &cfg()).unwrap();
        let lambda = 1.7 * fam.lambda_theta;
        let t = grd::height_profile(&g, &f, s, lambda, None, &cfg()).unwrap();

        // ∂_s log m_s(λ) = E[U] without the gauge shift.
        let u0 = t.weighted_sum(&t.b) - fam.a_prime * t.total_weight();
        let eps = 1e-4;
        let fd_s = (ln_m(&g, &f, s + eps, lambda) - ln_m(&g, &f, s - eps, lambda)) / (2.0 * eps);
        assert_relative_eq!(u0, fd_s, max_relative = 1e-4);

        // ∂_λ log m_s(λ) = -E[S].
        let h = 1e-5 * lambda;
        let fd_l = (ln_m(&g, &f, s, lambda + h) - ln_m(&g, &f, s, lambda - h)) / (2.0 * h);
        assert_relative_eq!(-t.mean_s(), fd_l, max_relative = 1e-5);
    }
}

#[test]
fn root_law_quantities_of_uniform_attachment() {
    let f = p("const:1");
    let t = grd::height_profile(&f, &f, 0.0, 1.0, None, &cfg()).unwrap();
    for k in 0..30 {
        assert_relative_eq!(t.t[k], 0.5f64.powi(k as i32), max_relative = 1e-12);
        assert_relative_eq!(t.q[k], 0.5, max_relative = 1e-12);
        assert_relative_eq!(t.alpha[k], 0.5);
        assert_relative_eq!(t.d[k], 0.5);
        assert_relative_eq!(t.shift[k], k as f64 / 2.0, epsilon = 1e-12);
    }
}

#[test]
fn gauge_makes_scores_vanish_at_lambda_s() {
    let (g, f) = (p("power:0.2"), p("power:0.8"));
    for s in [0.0, 0.4, 1.0] {
        let lam_s = grd::gauge(&g, &f, s, &cfg()).unwrap().lambda_theta;
        let u = grd::score_mean_u(&g, &f, s, lam_s, None, &cfg()).unwrap();
        let b = grd::weighted_mean_bbar(&g, &f, s, lam_s, None, &cfg()).unwrap();
        assert!(u.abs() < 1e-9 && b.abs() < 1e-9, "s={s}: {u} {b}");
    }
    // With g = f, b is the constant a'(s) = 0.
    let f = p("power:0.5");
    assert_eq!(grd::weighted_mean_bbar(&f, &f, 0.5, 3.0, None, &cfg()).unwrap(), 0.0);
}

#[test]
fn bbar_decreases_from_lambda_s_to_lambda_star() {
    let (g, f) = (p("const:1"), p("affine:1"));
    let s = 0.5;
    let f_s = interpolate(&g, &f, s).unwrap();
    let h = height_speed(&f_s, &cfg()).unwrap();
    let at_s = grd::weighted_mean_bbar(&g, &f, s, h.lambda_f, None, &cfg()).unwrap();
    let at_star = grd::weighted_mean_bbar(&g, &f, s, h.lambda_star, None, &cfg()).unwrap();
    assert!(at_s >= at_star - 1e-6, "{at_s} < {at_star}");

    let (g, f) = (p("power:0.3"), p("power:0.7"));
    let f_s = interpolate(&g, &f, s).unwrap();
    let h = height_speed(&f_s, &cfg()).unwrap();
    for i in 1..8 {
        let lam = h.lambda_f + (h.lambda_star - h.lambda_f) * i as f64 / 8.0;
        let d = grd::bbar_lambda_derivative(&g, &f, s, lam, None, &cfg()).unwrap();
        assert!(d <= 1e-6, "λ={lam}: {d}");
        let eps = 1e-5 * lam;
        let hi = grd::weighted_mean_bbar(&g, &f, s, lam + eps, None, &cfg()).unwrap();
        let lo = grd::weighted_mean_bbar(&g, &f, s, lam - eps, None, &cfg()).unwrap();
        assert_relative_eq!(d, (hi - lo) / (2.0 * eps), max_relative = 1e-5);
    }
}

#[test]
fn corrected_shift_is_eventually_monotone_at_lambda_star() {
    let f = p("power:0.5");
    let h = height_speed(&f, &cfg()).unwrap();
    let r = grd::one_step_report(&f, &f, 0.0, h.lambda_star, None, &cfg()).unwrap();
    let k0 = r.k0.expect("K0 should exist");
    assert!(r.residuals[k0..].iter().all(|&x| x >= 0.0));
    assert!(r.increment_residual < 1e-10);
    let t = grd::height_profile(&f, &f, 0.0, h.lambda_star, None, &cfg()).unwrap();
    for k in k0..t.last_index() {
        assert!(t.shift_tilde[k + 1] >= t.shift_tilde[k] - 1e-12);
    }
}

#[test]
fn weights_decay_like_a_stretched_exponential() {
    for (g, f, s, rho) in [
        (p("power:0.3"), p("power:0.7"), 0.5, 0.5),
        (p("const:1"), p("power:0.6"), 1.0, 0.6),
    ] {
        let fam = grd::gauge(&g, &f, s, &cfg()).unwrap();
        let t = fam.table();
        let n = t.last_index();
        let worst = (n / 2..=n)
            .filter(|&k| t.w[k] > 0.0)
            .map(|k| t.w[k].ln() / (k as f64).powf(1.0 - rho))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(worst < -0.1, "{worst}");
    }
}

#[test]
fn depth_path_of_uniform_to_linear() {
    let (g, f) = (p("const:1"), p("affine:1"));
    let r = grd::depth_path(&g, &f, &uniform_grid(11), &PathOptions::default(), &cfg()).unwrap();
    assert_eq!(r.verdict, Verdict::Monotone);
    let first = &r.points[0];
    let last = r.points.last().unwrap();
    assert_relative_eq!(first.value.unwrap(), 1.0, max_relative = 1e-9);
    assert_relative_eq!(last.value.unwrap(), 2.0, max_relative = 1e-9);
    assert_relative_eq!(last.constant.unwrap(), 0.5, max_relative = 1e-9);
    for w in r.points.windows(2) {
        assert!(w[1].constant.unwrap() <= w[0].constant.unwrap());
    }
}

#[test]
fn height_path_endpoints_and_labels() {
    let (g, f) = (p("const:1"), p("affine:1"));
    let r = grd::height_path(&g, &f, &[0.0, 0.5, 1.0], &PathOptions::default(), &cfg()).unwrap();
    assert_eq!(r.verdict, Verdict::Monotone);
    assert_relative_eq!(r.points[0].value.unwrap(), (-1.0f64).exp(), max_relative = 1e-9);
    assert_relative_eq!(r.points[0].constant.unwrap(), std::f64::consts::E, max_relative = 1e-8);
    assert_relative_eq!(
        r.points[2].value.unwrap(),
        2.0 * 0.278_464_542_761_073_8,
        max_relative = 1e-9
    );
    assert!(r.points[2].label.contains(grd::OUTSIDE_A7));
    assert!(!r.points[1].label.contains(grd::OUTSIDE_A7));
}

#[test]
fn constant_paths_have_zero_derivatives() {
    let f = p("power:0.4");
    let r = grd::height_path(&f, &f, &uniform_grid(4), &PathOptions::default(), &cfg()).unwrap();
    assert_eq!(r.verdict, Verdict::Monotone);
    assert!(r.points.iter().all(|pt| pt.derivative == Some(0.0)));
}

#[test]
fn path_constants_ignore_scaling_of_f() {
    let (g, f) = (p("power:0.3"), p("power:0.7"));
    let f3 = scale(&f, 3.0).unwrap();
    let grid = uniform_grid(5);
    let opts = PathOptions {
        refine: false,
        ..PathOptions::default()
    };
    let a = grd::depth_path(&g, &f, &grid, &opts, &cfg()).unwrap();
    let b = grd::depth_path(&g, &f3, &grid, &opts, &cfg()).unwrap();
    let c = grd::height_path(&g, &f, &grid, &opts, &cfg()).unwrap();
    let d = grd::height_path(&g, &f3, &grid, &opts, &cfg()).unwrap();
    for i in 0..grid.len() {
        assert_relative_eq!(
            a.points[i].constant.unwrap(),
            b.points[i].constant.unwrap(),
            max_relative = 1e-9
        );
        assert_relative_eq!(
            c.points[i].constant.unwrap(),
            d.points[i].constant.unwrap(),
            max_relative = 1e-8
        );
    }
}

#[test]
fn reversed_pair_violates() {
    let (g, f) = (p("affine:1"), p("const:1"));
    let r = grd::depth_path(&g, &f, &uniform_grid(5), &PathOptions::default(), &cfg()).unwrap();
    assert!(matches!(r.verdict, Verdict::ViolationAt { .. }));
    assert!(!r.grd.holds());
}
