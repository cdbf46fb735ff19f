//! Fixtures shared by the benchmarks.

use patree::AttachmentFunction;

/// Representative attachment functions: uniform, linear, and two sublinear
/// powers with different decay of the weights.
pub fn families() -> Vec<(&'static str, AttachmentFunction)> {
    ["const:1", "affine:1", "power:0.5", "power:0.8"]
        .into_iter()
        .map(|s| (s, s.parse().expect("fixture specs parse")))
        .collect()
}
