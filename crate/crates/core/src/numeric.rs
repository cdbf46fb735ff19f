//! Small numerical helpers shared by the solvers.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.s + self.c
    }
}

pub fn sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Sum::new();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Pairwise sum; the result does not depend on how the slice was produced,
/// only on its order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_gap(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Derivative at `xs[i]` of the interpolating polynomial through up to five
/// neighbouring grid points (Fornberg weights). Works on non-uniform grids
/// and near the ends, where the stencil becomes one-sided.
pub fn grid_derivative(xs: &[f64], ys: &[f64], i: usize) -> f64 {
    let n = xs.len();
    let width = n.min(5);
    let lo = i.saturating_sub(width / 2).min(n - width);
    let xs_s = &xs[lo..lo + width];
    let w = fornberg_first(xs[i], xs_s);
    w.iter().zip(&ys[lo..lo + width]).map(|(a, b)| a * b).sum()
}

/// First-derivative weights at `z` for nodes `x` (Fornberg 1988).
fn fornberg_first(z: f64, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let m = 1;
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[1]).collect()
}
