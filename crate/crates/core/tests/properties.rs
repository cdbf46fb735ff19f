use proptest::prelude::*;

use patree::grd::{self, monotone_from};
use patree::simulate::{exact_expected_depth, grow};
use patree::{
    affine_closed_form, chebyshev_bound, depth_constant, height_speed, interpolate, laplace_m, scale,
    telescoping_residual, AttachmentFunction, TruncationConfig,
};

fn cfg() -> TruncationConfig {
    TruncationConfig::default()
}

fn power(rho: f64, shift: f64) -> AttachmentFunction {
    AttachmentFunction::power(rho, shift).unwrap()
}

/// Sublinear or affine attachment functions with a convergent series.
fn attachment() -> impl Strategy<Value = AttachmentFunction> {
    prop_oneof![
        (0.1f64..5.0).prop_map(|c| AttachmentFunction::constant(c).unwrap()),
        (0.1f64..4.0).prop_map(|d| AttachmentFunction::affine(d).unwrap()),
        (0.0f64..0.95, 0.5f64..3.0).prop_map(|(r, s)| power(r, s)),
    ]
}

/// Pairs `(g, f)` with `f ≽_GR g`.
fn grd_pair() -> impl Strategy<Value = (AttachmentFunction, AttachmentFunction)> {
    prop_oneof![
        (0.0f64..0.9, 0.0f64..0.9, 0.5f64..3.0).prop_map(|(a, b, s)| (power(a.min(b), s), power(a.max(b), s))),
        (0.2f64..3.0, 0.05f64..0.9).prop_map(|(c, r)| (AttachmentFunction::constant(c).unwrap(), power(r, 1.0))),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn telescoping_is_exact(f in attachment(), lam_over in 1.05f64..4.0, m in 1usize..400) {
        let lf = depth_constant(&f, &cfg()).unwrap().lambda_f;
        let r = telescoping_residual(&f, lam_over * lf, m).unwrap();
        prop_assert!(r < 1e-13, "residual {r}");
    }

    #[test]
    fn laplace_transform_decreases(f in attachment(), a in 1.05f64..3.0, b in 1.05f64..3.0) {
        let lf = depth_constant(&f, &cfg()).unwrap().lambda_f;
        let (lo, hi) = (a.min(b) * lf, a.max(b) * lf);
        prop_assume!(hi > lo * (1.0 + 1e-9));
        let m_lo = laplace_m(&f, lo, &cfg()).unwrap().value;
        let m_hi = laplace_m(&f, hi, &cfg()).unwrap().value;
        prop_assert!(m_hi < m_lo);
    }

    #[test]
    fn constants_are_scale_invariant(f in attachment(), c in 0.05f64..20.0) {
        let cf = cfg();
        let a = depth_constant(&f, &cf).unwrap();
        let b = depth_constant(&scale(&f, c).unwrap(), &cf).unwrap();
        prop_assert!((a.c_f - b.c_f).abs() <= 1e-9 * a.c_f);
        prop_assert!((b.lambda_f - c * a.lambda_f).abs() <= 1e-9 * b.lambda_f);
        let ha = height_speed(&f, &cf).unwrap();
        let hb = height_speed(&scale(&f, c).unwrap(), &cf).unwrap();
        prop_assert!((ha.c_star - hb.c_star).abs() <= 1e-8 * ha.c_star);
    }

    #[test]
    fn affine_pipeline_matches_closed_form(delta in 0.2f64..6.0) {
        let f = AttachmentFunction::affine(delta).unwrap();
        let (d, h) = affine_closed_form(delta).unwrap();
        let nd = depth_constant(&f, &cfg()).unwrap();
        let nh = height_speed(&f, &cfg()).unwrap();
        prop_assert!((nd.c_f - d.c_f).abs() <= 1e-8 * d.c_f);
        prop_assert!((nh.kappa - h.kappa).abs() <= 1e-8 * h.kappa);
        prop_assert!((nh.c_star - h.c_star).abs() <= 1e-8 * h.c_star);
    }

    #[test]
    fn interpolation_endpoints((g, f) in grd_pair(), k in 0u64..10_000) {
        let g0 = interpolate(&g, &f, 0.0).unwrap();
        let f1 = interpolate(&g, &f, 1.0).unwrap();
        prop_assert_eq!(g0.eval(k).unwrap(), g.eval(k).unwrap());
        prop_assert_eq!(f1.eval(k).unwrap(), f.eval(k).unwrap());
    }

    #[test]
    fn spec_text_round_trips(f in attachment(), theta in 0.0f64..=1.0, g in attachment()) {
        let i = interpolate(&g, &f, theta).unwrap();
        for x in [f, i] {
            let back: AttachmentFunction = x.to_string().parse().unwrap();
            prop_assert_eq!(back, x);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Gauge, centring, table shape, `C_k` monotonicity and both `Q'`
    /// representations on random dominated pairs.
    #[test]
    fn gauged_family_invariants((g, f) in grd_pair(), theta in 0.0f64..=1.0) {
        let fam = grd::gauge(&g, &f, theta, &cfg()).unwrap();
        prop_assert!(fam.malthus_residual < 1e-10, "malthus {}", fam.malthus_residual);
        prop_assert!(fam.centering_residual < 1e-8);
        let t = fam.table();
        prop_assert!((t.total_weight() - fam.q_theta).abs() <= 1e-8 * fam.q_theta);
        prop_assert!(t.w.iter().all(|&w| w >= 0.0));
        for k in 1..t.w.len() {
            prop_assert!(t.b[k] >= t.b[k - 1] - 1e-12, "b decreases at {k}");
            prop_assert!(t.r[k] <= t.r[k - 1]);
            let c = t.cond_mean[k - 1];
            prop_assert!(t.cond_mean[k] >= c - 1e-12 * c.abs().max(1.0), "C decreases at {k}");
        }
        let qp = grd::q_prime(&g, &f, theta, None, &cfg()).unwrap();
        let scale_q = qp.double_sum.abs().max(qp.c_form.abs());
        prop_assert!((qp.double_sum - qp.c_form).abs() <= 1e-8 * scale_q + 1e-15);
        prop_assert!(qp.double_sum >= -1e-9);
    }

    #[test]
    fn increment_identity_holds((g, f) in grd_pair(), s in 0.0f64..=1.0, stretch in 1.0f64..3.0) {
        let lam_s = grd::gauge(&g, &f, s, &cfg()).unwrap().lambda_theta;
        let r = grd::one_step_report(&g, &f, s, stretch * lam_s, None, &cfg()).unwrap();
        prop_assert!(r.increment_residual < 1e-10, "{}", r.increment_residual);
    }

    #[test]
    fn finite_n_depth_ordering((g, f) in grd_pair(), n in 2usize..=7) {
        let ef = exact_expected_depth(&f, n).unwrap();
        let eg = exact_expected_depth(&g, n).unwrap();
        prop_assert!(ef <= eg + 1e-12, "E_f = {ef} > E_g = {eg}");
    }

    #[test]
    fn grown_trees_are_consistent(f in attachment(), n in 1usize..3000, seed in any::<u64>()) {
        let t = grow(&f, n, seed).unwrap();
        prop_assert_eq!(t.n(), n);
        let mut kids = vec![0usize; n + 1];
        for (c, p, d) in t.edges() {
            prop_assert_eq!(d, t.depth(p) + 1);
            kids[p] += 1;
            let _ = c;
        }
        prop_assert_eq!(kids.iter().sum::<usize>(), n - 1);
        prop_assert!((1..=n).all(|v| kids[v] == t.children(v)));
        prop_assert_eq!(t.height(), (1..=n).map(|v| t.depth(v)).max().unwrap());
        let again = grow(&f, n, seed).unwrap();
        prop_assert!(t.edges().eq(again.edges()));
    }
}

/// A nondecreasing sequence centred under `w`.
fn centred(raw: &[f64], w: &[f64]) -> Vec<f64> {
    let mut a = raw.to_vec();
    a.sort_by(f64::total_cmp);
    let mean = a.iter().zip(w).map(|(x, y)| x * y).sum::<f64>() / w.iter().sum::<f64>();
    a.iter().map(|x| x - mean).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn chebyshev_bound_holds(
        len in 2usize..40,
        seed in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0, 0.01f64..5.0), 40),
        k0_frac in 0.0f64..1.0,
    ) {
        let raw_a: Vec<f64> = seed[..len].iter().map(|x| x.0).collect();
        let mut c: Vec<f64> = seed[..len].iter().map(|x| x.1).collect();
        let w: Vec<f64> = seed[..len].iter().map(|x| x.2).collect();
        let a = centred(&raw_a, &w);
        c.sort_by(f64::total_cmp);
        let k0 = (k0_frac * len as f64) as usize;
        let c_bound = c[..k0].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let r = chebyshev_bound(&a, &c, &w, k0, c_bound).unwrap();
        prop_assert!(r.actual >= r.lower_bound - 1e-9 * (1.0 + r.actual.abs()));
        prop_assert!(r.actual >= r.corrected_bound - 1e-9 * (1.0 + r.actual.abs()));
    }

    /// Only the suffix from `K0` is monotone; the shift-invariant bound must
    /// still hold.
    #[test]
    fn corrected_chebyshev_bound_with_rough_prefix(
        len in 3usize..30,
        seed in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0, 0.01f64..5.0), 30),
        k0_frac in 0.0f64..1.0,
    ) {
        let raw_a: Vec<f64> = seed[..len].iter().map(|x| x.0).collect();
        let mut c: Vec<f64> = seed[..len].iter().map(|x| x.1).collect();
        let w: Vec<f64> = seed[..len].iter().map(|x| x.2).collect();
        let a = centred(&raw_a, &w);
        let k0 = (k0_frac * len as f64) as usize;
        c[k0..].sort_by(f64::total_cmp);
        prop_assert!(monotone_from(&c) <= k0);
        let c_bound = c[..k0].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let r = chebyshev_bound(&a, &c, &w, k0, c_bound).unwrap();
        prop_assert!(r.actual >= r.corrected_bound - 1e-9 * (1.0 + r.actual.abs()));
    }
}
