//! Binary-indexed prefix sums over nonnegative weights.

#[derive(Debug, Clone, Default)]
pub struct Fenwick {
    tree: Vec<f64>,
}

impl Fenwick {
    pub fn with_capacity(n: usize) -> Self {
        Fenwick {
            tree: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    /// Appends a slot holding `w`.
    pub fn push(&mut self, w: f64) {
        let i = self.tree.len() + 1;
        // Node i covers (i - lowbit(i), i]; fold in the children already
        // present.
        let mut sum = w;
        let low = i & i.wrapping_neg();
        let mut j = i - 1;
        let stop = i - low;
        while j > stop {
            sum += self.tree[j - 1];
            j -= j & j.wrapping_neg();
        }
        self.tree.push(sum);
    }

    pub fn add(&mut self, idx: usize, delta: f64) {
        let mut i = idx + 1;
        while i <= self.tree.len() {
            self.tree[i - 1] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum of slots `0..idx`.
    pub fn prefix(&self, idx: usize) -> f64 {
        let mut i = idx.min(self.tree.len());
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i - 1];
            i -= i & i.wrapping_neg();
        }
        s
    }

    pub fn total(&self) -> f64 {
        self.prefix(self.tree.len())
    }

    /// Smallest slot `i` with `prefix(i + 1) > target`, clamped to the last
    /// slot when rounding pushes `target` past the total.
    pub fn find(&self, mut target: f64) -> usize {
        let n = self.tree.len();
        debug_assert!(n > 0);
        let mut pos = 0;
        let mut step = if n == 0 {
            0
        } else {
            1 << (usize::BITS - 1 - n.leading_zeros())
        };
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next - 1] <= target {
                target -= self.tree[next - 1];
                pos = next;
            }
            step >>= 1;
        }
        pos.min(n - 1)
    }

    /// Recomputes every node from the given slot values.
    pub fn rebuild(&mut self, weights: &[f64]) {
        self.tree.clear();
        for &w in weights {
            self.push(w);
        }
    }
}
