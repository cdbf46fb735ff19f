//! Exact `E[D_n]` by enumerating every attachment history.

use super::tree::FCache;
use crate::attach::AttachmentFunction;
use crate::error::{Error, Result};
use crate::numeric::Sum;

pub const ORACLE_MAX_N: usize = 9;

struct Walk<'a, 'f> {
    n: usize,
    cache: &'a mut FCache<'f>,
    children: Vec<usize>,
    depth: Vec<usize>,
    acc: Sum,
}

impl Walk<'_, '_> {
    fn visit(&mut self, m: usize, prob: f64) -> Result<()> {
        if m == self.n {
            self.acc.add(prob * self.depth[m - 1] as f64);
            return Ok(());
        }
        let mut w = Vec::with_capacity(m);
        for i in 0..m {
            w.push(self.cache.get(self.children[i])?);
        }
        let total: f64 = w.iter().sum();
        for (i, wi) in w.into_iter().enumerate() {
            self.children[i] += 1;
            self.depth[m] = self.depth[i] + 1;
            self.visit(m + 1, prob * wi / total)?;
            self.children[i] -= 1;
        }
        Ok(())
    }
}

/// `E_f[D_n]` over all `(n-1)!` histories, for `2 ≤ n ≤ 9`.
pub fn exact_expected_depth(f: &AttachmentFunction, n: usize) -> Result<f64> {
    if !(2..=ORACLE_MAX_N).contains(&n) {
        return Err(Error::domain(format!(
            "the enumeration oracle needs 2 ≤ n ≤ {ORACLE_MAX_N}, got {n}"
        )));
    }
    if n == ORACLE_MAX_N {
        log::warn!("enumerating 8! histories for n = {n}");
    }
    let mut cache = FCache::new(f);
    let mut walk = Walk {
        n,
        cache: &mut cache,
        children: vec![0; n],
        depth: vec![0; n],
        acc: Sum::new(),
    };
    walk.visit(1, 1.0)?;
    Ok(walk.acc.value())
}
