//! Interpolation diagnostics for growth-ratio dominance.
//!
//! For `f ≽_GR g` the path `f_θ = g h^θ` with `h = f/g` runs from `g` to
//! `f`. Along it the depth reciprocal `Q_θ` and the height speed
//! `R_s = λ_s κ_s` should be nondecreasing. This module computes both
//! derivatives through their series representations, cross-checks them
//! against each other and against finite differences, and reports the
//! per-index sequences (`C_k`, `M̃_k`, one-step residuals) the monotonicity
//! arguments rest on.
//!
//! Depth quantities are computed in the gauge `f*_θ = f_θ/λ_θ`, which pins
//! the Malthusian parameter at 1; the gauge shift `a'(θ) = -u_θ/Q_θ` centres
//! the scores `b_k = log h(k) + a'(θ)` under the weights `w_k = α_k r_k`.

mod chebyshev;
mod depth;
mod height;
mod path;
mod profile;

pub use chebyshev::{chebyshev_bound, monotone_from, ChebyshevReport};
pub use depth::{gauge, profile, q_of_theta, q_prime, q_prime_fd, GaugedFamily, QPrime};
pub use height::{
    bbar_lambda_derivative, height_profile, one_step_report, score_mean_u, weighted_mean_bbar, OneStepReport,
};
pub use path::{
    depth_path, height_path, uniform_grid, PathKind, PathOptions, PathPoint, PathReport, Verdict, DEFAULT_GRID_POINTS,
    MONOTONE_SLACK, OUTSIDE_A7,
};
pub use profile::{Mode, ProfileTable, PROFILE_CAP};
