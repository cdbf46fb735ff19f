//! Growth of a single preferential-attachment tree.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fenwick::Fenwick;
use crate::attach::AttachmentFunction;
use crate::error::{Error, Result};
use crate::numeric::Sum;

/// Insertions between full recomputations of the weight index.
const REBUILD_EVERY: usize = 1 << 18;

/// Generator behind every simulation: ChaCha with 8 rounds, seeded through
/// `seed_from_u64`. Replica `i` of a Monte Carlo run uses seed
/// `seed_base + i`.
pub type SimRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `f(k)` memoised by child count.
#[derive(Debug, Clone)]
pub(crate) struct FCache<'a> {
    f: &'a AttachmentFunction,
    values: Vec<f64>,
}

impl<'a> FCache<'a> {
    pub(crate) fn new(f: &'a AttachmentFunction) -> Self {
        FCache { f, values: Vec::new() }
    }

    pub(crate) fn get(&mut self, k: usize) -> Result<f64> {
        while self.values.len() <= k {
            let v = self.f.eval(self.values.len() as u64)?;
            self.values.push(v);
        }
        Ok(self.values[k])
    }
}

/// A tree on vertices `1..=n`, rooted at 1.
#[derive(Debug, Clone)]
pub struct TreeState {
    /// `parent[v-1]`, zero for the root.
    parent: Vec<u32>,
    depth: Vec<u32>,
    children: Vec<u32>,
    /// `f(children)` per vertex.
    weights: Vec<f64>,
    index: Fenwick,
    total: Sum,
    height: u32,
}

impl TreeState {
    fn root(f0: f64, capacity: usize) -> Self {
        let mut index = Fenwick::with_capacity(capacity);
        index.push(f0);
        let mut total = Sum::new();
        total.add(f0);
        TreeState {
            parent: vec![0],
            depth: vec![0],
            children: vec![0],
            weights: vec![f0],
            index,
            total,
            height: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.parent.len()
    }

    /// Parent of vertex `v` (1-based), `None` for the root.
    pub fn parent(&self, v: usize) -> Option<usize> {
        match self.parent[v - 1] {
            0 => None,
            p => Some(p as usize),
        }
    }

    pub fn depth(&self, v: usize) -> usize {
        self.depth[v - 1] as usize
    }

    pub fn children(&self, v: usize) -> usize {
        self.children[v - 1] as usize
    }

    /// `Σ_i f(children[i])`, tracked incrementally.
    pub fn total_weight(&self) -> f64 {
        self.total.value()
    }

    /// `Σ_i f(children[i])` recomputed from scratch.
    pub fn recomputed_weight(&self) -> f64 {
        crate::numeric::sum(self.weights.iter().copied())
    }

    /// `D_n`, the depth of the newest vertex.
    pub fn insertion_depth(&self) -> usize {
        *self.depth.last().unwrap() as usize
    }

    /// `H_n`, the largest depth.
    pub fn height(&self) -> usize {
        self.height as usize
    }

    /// `(child, parent, depth)` for every non-root vertex.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (2..=self.n()).map(move |v| (v, self.parent[v - 1] as usize, self.depth[v - 1] as usize))
    }

    /// Attaches a new vertex to `p` (1-based).
    fn attach(&mut self, p: usize, cache: &mut FCache<'_>) -> Result<()> {
        let i = p - 1;
        let c = self.children[i] as usize;
        let new_w = cache.get(c + 1)?;
        let delta = new_w - self.weights[i];
        self.children[i] += 1;
        self.weights[i] = new_w;
        self.index.add(i, delta);
        self.total.add(delta);

        let f0 = cache.get(0)?;
        let d = self.depth[i] + 1;
        self.parent.push(p as u32);
        self.depth.push(d);
        self.children.push(0);
        self.weights.push(f0);
        self.index.push(f0);
        self.total.add(f0);
        self.height = self.height.max(d);

        if self.n().is_multiple_of(REBUILD_EVERY) {
            self.index.rebuild(&self.weights);
            let mut t = Sum::new();
            for &w in &self.weights {
                t.add(w);
            }
            self.total = t;
        }
        Ok(())
    }

    /// Builds a tree from explicit parents: `parents[j]` is the parent of
    /// vertex `j + 2`.
    pub fn from_parents(f: &AttachmentFunction, parents: &[usize]) -> Result<Self> {
        let mut cache = FCache::new(f);
        let mut t = TreeState::root(cache.get(0)?, parents.len() + 1);
        for (j, &p) in parents.iter().enumerate() {
            if p == 0 || p > j + 1 {
                return Err(Error::domain(format!("vertex {} cannot attach to {p}", j + 2)));
            }
            t.attach(p, &mut cache)?;
        }
        Ok(t)
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 || n > u32::MAX as usize {
        return Err(Error::domain(format!("tree size must be in 1..=2^32-1, got {n}")));
    }
    Ok(())
}

/// Grows `T_n(f)`: vertex `m` attaches to `i` with probability
/// `f(children(i)) / Σ_j f(children(j))`.
pub fn grow(f: &AttachmentFunction, n: usize, seed: u64) -> Result<TreeState> {
    check_n(n)?;
    let mut cache = FCache::new(f);
    let mut rng = rng(seed);
    grow_with(&mut cache, n, &mut rng)
}

pub(crate) fn grow_with(cache: &mut FCache<'_>, n: usize, rng: &mut impl Rng) -> Result<TreeState> {
    let mut t = TreeState::root(cache.get(0)?, n);
    while t.n() < n {
        let target = rng.gen::<f64>() * t.index.total();
        let p = t.index.find(target) + 1;
        t.attach(p, cache)?;
    }
    Ok(t)
}
