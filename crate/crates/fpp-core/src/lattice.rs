//! Geometry of the simulation box: points and edges of a finite chunk of
//! the hypercubic lattice, dense edge enumeration, the l1 norm and the
//! l1 ball ("diamond") used by the flat-edge analysis.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A lattice point. Coordinates are stored per run dimension `d >= 2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point(pub Vec<i64>);

impl Point {
    pub fn new(coords: &[i64]) -> Self {
        Point(coords.to_vec())
    }

    /// Convenience constructor for the planar case.
    pub fn xy(x: i64, y: i64) -> Self {
        Point(vec![x, y])
    }

    pub fn origin(d: usize) -> Self {
        Point(vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm1(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs()).sum()
    }

    pub fn add(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn neg(&self) -> Point {
        Point(self.0.iter().map(|c| -c).collect())
    }

    pub fn scale(&self, k: i64) -> Point {
        Point(self.0.iter().map(|c| c * k).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// gcd of the absolute coordinates; 0 only for the zero vector.
    pub fn coord_gcd(&self) -> u64 {
        fn gcd(a: u64, b: u64) -> u64 {
            if b == 0 {
                a
            } else {
                gcd(b, a % b)
            }
        }
        self.0.iter().map(|c| c.unsigned_abs()).fold(0, gcd)
    }
}

impl std::fmt::Display for Point {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A lattice edge, identified by its lexicographically smaller endpoint
/// and the axis along which it leaves it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub endpoint: Point,
    pub axis: usize,
}

impl Edge {
    pub fn other_endpoint(&self) -> Point {
        let mut c = self.endpoint.0.clone();
        c[self.axis] += 1;
        Point(c)
    }
}

/// The centered box [-L, L]^d. Shape statistics are restricted to the
/// inner box [-(L - margin), L - margin]^d so that boundary-censored
/// clusters never contaminate them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CenteredBox {
    dim: usize,
    half_width: i64,
    inner_margin: i64,
    #[serde(skip)]
    cache: StrideCache,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct StrideCache {
    side: usize,
    n_vertices: usize,
    n_edges_per_axis: usize,
    /// vertex strides, axis 0 most significant
    vstride: Vec<usize>,
    /// edge rank strides per (axis, digit)
    estride: Vec<Vec<usize>>,
}

impl StrideCache {
    fn build(dim: usize, half_width: i64) -> Result<Self> {
        let side = (2 * half_width + 1) as usize;
        let reduced = (2 * half_width) as usize;
        let mut n_vertices: usize = 1;
        for _ in 0..dim {
            n_vertices = n_vertices
                .checked_mul(side)
                .ok_or_else(|| Error::Capacity(format!("(2*{half_width}+1)^{dim} overflows")))?;
        }
        let n_edges_per_axis = n_vertices / side * reduced;
        let total_edges = n_edges_per_axis
            .checked_mul(dim)
            .ok_or_else(|| Error::Capacity("edge count overflows".into()))?;
        // labels are u32 and edge bitsets must stay addressable
        if n_vertices >= u32::MAX as usize || total_edges >= u32::MAX as usize {
            return Err(Error::Capacity(format!(
                "{n_vertices} vertices / {total_edges} edges exceed the u32 index budget"
            )));
        }
        let mut vstride = vec![1usize; dim];
        for i in (0..dim.saturating_sub(1)).rev() {
            vstride[i] = vstride[i + 1] * side;
        }
        let mut estride = vec![vec![1usize; dim]; dim];
        for (axis, row) in estride.iter_mut().enumerate() {
            for i in (0..dim.saturating_sub(1)).rev() {
                let radix = if i + 1 == axis { reduced } else { side };
                row[i] = row[i + 1] * radix;
            }
        }
        Ok(StrideCache { side, n_vertices, n_edges_per_axis, vstride, estride })
    }
}

impl CenteredBox {
    pub fn new(dim: usize, half_width: i64, inner_margin: i64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::UnsupportedDimension { got: dim, reason: "need d >= 2".into() });
        }
        if half_width < 1 {
            return Err(Error::Capacity("half_width must be >= 1".into()));
        }
        if inner_margin < 0 || inner_margin >= half_width {
            return Err(Error::Capacity(format!(
                "inner_margin {inner_margin} must satisfy 0 <= margin < L = {half_width}"
            )));
        }
        let cache = StrideCache::build(dim, half_width)?;
        Ok(CenteredBox { dim, half_width, inner_margin, cache })
    }

    /// Box with the default statistics margin L/5.
    pub fn with_default_margin(dim: usize, half_width: i64) -> Result<Self> {
        Self::new(dim, half_width, half_width / 5)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> i64 {
        self.half_width
    }

    pub fn inner_margin(&self) -> i64 {
        self.inner_margin
    }

    pub fn inner_half_width(&self) -> i64 {
        self.half_width - self.inner_margin
    }

    pub fn side(&self) -> usize {
        self.cache.side
    }

    pub fn n_vertices(&self) -> usize {
        self.cache.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.cache.n_edges_per_axis * self.dim
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.dim() == self.dim && p.0.iter().all(|&c| c.abs() <= self.half_width)
    }

    pub fn in_inner(&self, p: &Point) -> bool {
        let r = self.inner_half_width();
        p.dim() == self.dim && p.0.iter().all(|&c| c.abs() <= r)
    }

    pub fn vertex_index(&self, p: &Point) -> Result<usize> {
        if !self.contains(p) {
            return Err(Error::OutOfBox(p.0.clone()));
        }
        let mut idx = 0usize;
        for (i, &c) in p.0.iter().enumerate() {
            idx += (c + self.half_width) as usize * self.cache.vstride[i];
        }
        Ok(idx)
    }

    pub fn vertex_point(&self, idx: usize) -> Point {
        let mut coords = vec![0i64; self.dim];
        self.vertex_coords(idx, &mut coords);
        Point(coords)
    }

    /// Allocation-free decode of a vertex index.
    pub fn vertex_coords(&self, idx: usize, out: &mut [i64]) {
        let mut rest = idx;
        for (o, &stride) in out.iter_mut().zip(&self.cache.vstride) {
            let digit = rest / stride;
            rest %= stride;
            *o = digit as i64 - self.half_width;
        }
    }

    #[inline]
    pub fn vertex_digit(&self, idx: usize, axis: usize) -> usize {
        idx / self.cache.vstride[axis] % self.cache.side
    }

    /// Index of the edge leaving vertex `v_idx` in direction `+e_axis`.
    /// The caller must ensure the coordinate along `axis` is below L.
    #[inline]
    pub fn edge_index_raw(&self, v_idx: usize, axis: usize) -> usize {
        let mut rank = 0usize;
        let mut rest = v_idx;
        let row = &self.cache.estride[axis];
        for (&stride, &vstride) in row.iter().zip(&self.cache.vstride) {
            let digit = rest / vstride;
            rest %= vstride;
            rank += digit * stride;
        }
        axis * self.cache.n_edges_per_axis + rank
    }

    pub fn edge_index(&self, e: &Edge) -> Result<usize> {
        if e.axis >= self.dim {
            return Err(Error::OutOfBox(e.endpoint.0.clone()));
        }
        if !self.contains(&e.endpoint) || e.endpoint.0[e.axis] >= self.half_width {
            return Err(Error::OutOfBox(e.endpoint.0.clone()));
        }
        let v = self.vertex_index(&e.endpoint)?;
        Ok(self.edge_index_raw(v, e.axis))
    }

    pub fn edge_from_index(&self, idx: usize) -> Edge {
        let axis = idx / self.cache.n_edges_per_axis;
        let mut rank = idx % self.cache.n_edges_per_axis;
        let mut coords = vec![0i64; self.dim];
        let row = &self.cache.estride[axis];
        for (c, &stride) in coords.iter_mut().zip(row) {
            let digit = rank / stride;
            rank %= stride;
            *c = digit as i64 - self.half_width;
        }
        Edge { endpoint: Point(coords), axis }
    }

    /// Both endpoints of an edge as vertex indices, with its axis.
    #[inline]
    pub fn edge_endpoints_idx(&self, idx: usize) -> (usize, usize, usize) {
        let axis = idx / self.cache.n_edges_per_axis;
        let mut rank = idx % self.cache.n_edges_per_axis;
        let row = &self.cache.estride[axis];
        let mut v = 0usize;
        for (&stride, &vstride) in row.iter().zip(&self.cache.vstride) {
            let digit = rank / stride;
            rank %= stride;
            v += digit * vstride;
        }
        (v, v + self.cache.vstride[axis], axis)
    }

    /// Visit the (up to 2d) incident edges of a vertex as
    /// (edge_index, neighbour_vertex_index) pairs.
    #[inline]
    pub fn for_each_neighbor<F: FnMut(usize, usize)>(&self, v_idx: usize, mut visit: F) {
        for axis in 0..self.dim {
            let digit = self.vertex_digit(v_idx, axis);
            if digit + 1 < self.cache.side {
                visit(self.edge_index_raw(v_idx, axis), v_idx + self.cache.vstride[axis]);
            }
            if digit > 0 {
                let w = v_idx - self.cache.vstride[axis];
                visit(self.edge_index_raw(w, axis), w);
            }
        }
    }
}

// serde skips the cache; rebuild it after deserialization
impl CenteredBox {
    pub fn rebuild_cache(&mut self) -> Result<()> {
        self.cache = StrideCache::build(self.dim, self.half_width)?;
        Ok(())
    }
}

/// Discretization of the boundary of the l1 ball of radius `r` in the
/// plane: `resolution` points per quadrant edge, as f64 pairs.
pub fn diamond_boundary_points(r: f64, dim: usize, resolution: usize) -> Result<Vec<[f64; 2]>> {
    if dim != 2 {
        return Err(Error::UnsupportedDimension { got: dim, reason: "diamond boundary is planar".into() });
    }
    if r <= 0.0 || resolution == 0 {
        return Err(Error::InvalidModel(format!("need r > 0 and resolution > 0, got r={r}")));
    }
    let mut pts = Vec::with_capacity(4 * resolution);
    // walk the four edges of the diamond counterclockwise from (r, 0)
    let corners = [[r, 0.0], [0.0, r], [-r, 0.0], [0.0, -r], [r, 0.0]];
    for seg in corners.windows(2) {
        for i in 0..resolution {
            let t = i as f64 / resolution as f64;
            pts.push([
                seg[0][0] + t * (seg[1][0] - seg[0][0]),
                seg[0][1] + t * (seg[1][1] - seg[0][1]),
            ]);
        }
    }
    Ok(pts)
}
