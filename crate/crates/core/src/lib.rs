//! Depth and height constants of preferential-attachment trees.
//!
//! A tree grows by attaching vertex `n` to an existing vertex `i` with
//! probability proportional to `f(children(i))`. The insertion depth and the
//! height grow like `c_f log n` and `c*_f log n`. Both constants come from
//! the Laplace transform `m_f(λ)` of the embedded branching process:
//!
//! * [`constants`] solves `m_f(λ_f) = 1` for the depth constant
//!   `c_f = 1/(-λ_f m_f'(λ_f))` and maximises `-log m_f(λ)/λ` for the height
//!   constant;
//! * [`grd`] checks along interpolation paths `g (f/g)^θ` that both constants
//!   move monotonically under growth-ratio dominance;
//! * [`simulate`] grows trees directly, for Monte Carlo and exact small-`n`
//!   cross-checks.

// Guards like `!(x > 0.0)` are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attach;
pub mod constants;
pub mod error;
pub mod grd;
pub mod numeric;
pub mod series;
pub mod simulate;

pub use attach::{interpolate, is_grd_dominant, scale, AttachmentFunction, GrdVerdict, Kind, TailRule};
pub use constants::{
    affine_closed_form, depth_constant, height_speed, lambert_w, malthusian, speed_objective, DepthSolution,
    HeightSolution,
};
pub use error::{Error, Result};
pub use grd::{
    bbar_lambda_derivative, chebyshev_bound, depth_path, gauge, height_path, height_profile, one_step_report, profile,
    q_prime, score_mean_u, weighted_mean_bbar, GaugedFamily, PathOptions, PathReport, ProfileTable, Verdict,
};
pub use series::{
    laplace_m, laplace_m_prime_neg, product_weights, tails, telescoping_residual, SeriesResult, TruncationConfig,
    WeightPrefix,
};
pub use simulate::{exact_expected_depth, grow, monte_carlo, sample_root_law, SimSummary, TreeState};
