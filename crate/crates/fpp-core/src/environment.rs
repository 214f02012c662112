//! Bernoulli(p) edge environments: reproducible generation, union-find
//! cluster labeling, and the giant-cluster proxy standing in for the
//! infinite cluster of the supercritical regime.

use crate::error::{Error, Result};
use crate::exec;
use crate::lattice::{CenteredBox, Point};
use crate::rng::{CounterRng, Stream};
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    #[serde(rename = "box")]
    pub box_: CenteredBox,
    pub p: f64,
    pub seed: u64,
}

impl EnvConfig {
    pub fn new(box_: CenteredBox, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidModel(format!("p = {p} outside [0, 1]")));
        }
        Ok(EnvConfig { box_, p, seed })
    }

    pub fn dim(&self) -> usize {
        self.box_.dim()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.seed = seed;
        c
    }
}

/// One realized environment. Immutable after generation.
#[derive(Debug, Clone)]
pub struct Environment {
    config: EnvConfig,
    /// open bit per edge index
    open: Vec<u64>,
    /// cluster label per vertex: the root vertex index of its cluster
    labels: Vec<u32>,
    giant_id: u32,
    giant_size: usize,
}

#[inline]
fn open_bit(words: &[u64], e: usize) -> bool {
    words[e >> 6] >> (e & 63) & 1 == 1
}

struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n as u32).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        // path halving
        while self.parent[x as usize] != x {
            let gp = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = gp;
            x = gp;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        let (big, small) =
            if self.size[ra as usize] >= self.size[rb as usize] { (ra, rb) } else { (rb, ra) };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
    }
}

/// Generate the environment for `cfg`. Each edge is open independently
/// with probability p, driven by the counter RNG at the edge's index, so
/// the result is a pure function of the config and two environments with
/// p <= p' and the same seed satisfy open(p) ⊆ open(p') edgewise.
pub fn generate(cfg: &EnvConfig) -> Result<Environment> {
    let n_edges = cfg.box_.n_edges();
    let rng = CounterRng::new(cfg.seed, Stream::EnvOpen);
    let p = cfg.p;
    let n_words = n_edges.div_ceil(64);
    let mut open = vec![0u64; n_words];
    exec::fill_indexed(&mut open, |w| {
        let mut word = 0u64;
        let base = w * 64;
        let top = 64.min(n_edges - base);
        for b in 0..top {
            if rng.uniform((base + b) as u64) < p {
                word |= 1 << b;
            }
        }
        word
    });
    label_environment(cfg, open)
}

/// Build an environment from explicitly given open bits; the coupling
/// experiments derive their environments from auxiliary fields rather
/// than from the plain Bernoulli construction.
pub fn from_open_bits<F: Fn(usize) -> bool>(cfg: &EnvConfig, is_open: F) -> Result<Environment> {
    let n_edges = cfg.box_.n_edges();
    let mut open = vec![0u64; n_edges.div_ceil(64)];
    for e in 0..n_edges {
        if is_open(e) {
            open[e >> 6] |= 1 << (e & 63);
        }
    }
    label_environment(cfg, open)
}

fn label_environment(cfg: &EnvConfig, open: Vec<u64>) -> Result<Environment> {
    let box_ = &cfg.box_;
    let n_edges = box_.n_edges();
    let n_vertices = box_.n_vertices();

    // single sequential labeling pass
    let mut uf = UnionFind::new(n_vertices);
    for e in 0..n_edges {
        if open_bit(&open, e) {
            let (a, b, _) = box_.edge_endpoints_idx(e);
            uf.union(a as u32, b as u32);
        }
    }
    let mut labels = vec![0u32; n_vertices];
    for (v, label) in labels.iter_mut().enumerate() {
        *label = uf.find(v as u32);
    }

    // the giant is the largest cluster; ties go to the cluster whose
    // minimal vertex comes first in lexical order (= ascending index)
    let mut giant_id = labels[0];
    let mut giant_size = 0usize;
    let mut seen = vec![false; n_vertices];
    for &label in &labels {
        let root = label as usize;
        if !seen[root] {
            seen[root] = true;
            let size = uf.size[root] as usize;
            if size > giant_size {
                giant_size = size;
                giant_id = root as u32;
            }
        }
    }

    Ok(Environment { config: cfg.clone(), open, labels, giant_id, giant_size })
}

impl Environment {
    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn box_(&self) -> &CenteredBox {
        &self.config.box_
    }

    #[inline]
    pub fn is_open(&self, edge_idx: usize) -> bool {
        open_bit(&self.open, edge_idx)
    }

    pub fn open_edge_count(&self) -> usize {
        self.open.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn label_of(&self, v_idx: usize) -> u32 {
        self.labels[v_idx]
    }

    pub fn giant_id(&self) -> u32 {
        self.giant_id
    }

    pub fn giant_size(&self) -> usize {
        self.giant_size
    }

    /// A one-vertex "giant" means nothing percolates.
    pub fn has_giant(&self) -> bool {
        self.giant_size >= 2
    }

    #[inline]
    pub fn in_giant_idx(&self, v_idx: usize) -> bool {
        self.has_giant() && self.labels[v_idx] == self.giant_id
    }

    pub fn in_giant(&self, p: &Point) -> Result<bool> {
        Ok(self.in_giant_idx(self.box_().vertex_index(p)?))
    }

    pub fn same_cluster(&self, x: &Point, y: &Point) -> Result<bool> {
        let (a, b) = (self.box_().vertex_index(x)?, self.box_().vertex_index(y)?);
        Ok(self.labels[a] == self.labels[b])
    }

    /// Increasing multiples k such that k*u lies in the giant proxy, with
    /// k*u confined to the inner box; at most `n_max` of them. The first
    /// element is the entry position of the ray into the giant.
    pub fn line_cluster_hits(&self, u: &Point, n_max: usize) -> Result<Vec<i64>> {
        if u.is_zero() {
            return Err(Error::InvalidModel("direction must be nonzero".into()));
        }
        let mut hits = Vec::new();
        if !self.has_giant() {
            return Ok(hits);
        }
        let mut k = 1i64;
        loop {
            let q = u.scale(k);
            if !self.box_().in_inner(&q) {
                break;
            }
            if self.in_giant_idx(self.box_().vertex_index(&q)?) {
                hits.push(k);
                if hits.len() >= n_max {
                    break;
                }
            }
            k += 1;
        }
        Ok(hits)
    }

    /// Fraction of inner-box vertices that belong to the giant proxy.
    pub fn giant_density(&self) -> f64 {
        if !self.has_giant() {
            return 0.0;
        }
        let box_ = self.box_();
        let mut coords = vec![0i64; box_.dim()];
        let mut inner = 0usize;
        let mut hit = 0usize;
        for v in 0..box_.n_vertices() {
            box_.vertex_coords(v, &mut coords);
            if coords.iter().all(|&c| c.abs() <= box_.inner_half_width()) {
                inner += 1;
                if self.in_giant_idx(v) {
                    hit += 1;
                }
            }
        }
        hit as f64 / inner as f64
    }

    /// Textual dump for cross-run diffing: a header line followed by the
    /// open bitset in edge-index order, 64 edges per line as 0/1 chars.
    pub fn export<W: Write>(&self, mut w: W) -> Result<()> {
        let b = self.box_();
        writeln!(
            w,
            "fpp-env v1 d={} L={} margin={} p={} seed={}",
            b.dim(),
            b.half_width(),
            b.inner_margin(),
            self.config.p,
            self.config.seed
        )?;
        let n = b.n_edges();
        let mut line = String::with_capacity(65);
        for e in 0..n {
            line.push(if self.is_open(e) { '1' } else { '0' });
            if line.len() == 64 || e + 1 == n {
                writeln!(w, "{line}")?;
                line.clear();
            }
        }
        Ok(())
    }
}

/// Rejection-samples environment seeds, keeping those whose realization
/// puts the origin in the giant proxy: the finite-volume analogue of
/// conditioning on the origin lying in the infinite cluster.
pub fn conditioned_seeds(cfg: &EnvConfig, n: usize, max_tries: usize) -> Result<Vec<u64>> {
    let origin = Point::origin(cfg.dim());
    let mut accepted = Vec::with_capacity(n);
    let mut tried = 0usize;
    let mut seed = cfg.seed;
    while accepted.len() < n && tried < max_tries {
        let env = generate(&cfg.with_seed(seed))?;
        if env.in_giant(&origin)? {
            accepted.push(seed);
        }
        seed = seed.wrapping_add(1);
        tried += 1;
    }
    if accepted.len() < n {
        return Err(Error::Conditioning(format!(
            "only {}/{n} seeds put the origin in the giant after {max_tries} tries (p = {})",
            accepted.len(),
            cfg.p
        )));
    }
    Ok(accepted)
}
