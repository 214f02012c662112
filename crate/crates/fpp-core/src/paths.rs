//! Exact shortest paths on one realized (environment, passage field):
//! chemical distance (minimal open-edge count), travel time (minimal
//! open-path time sum), wet sets, and canonical geodesics.
//!
//! Dijkstra runs on the pair (cost, hops) ordered lexicographically, so
//! zero passage times are fine: ties in cost are resolved by hop count
//! and the search always terminates. Disconnection is reported as a
//! tagged absence (`None`), never as a sentinel value.

use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::lattice::{CenteredBox, Edge, Point};
use crate::passage::PassageField;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapItem {
    cost: f64,
    hops: u32,
    v: u32,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap and we want the cheapest item
        other
            .cost
            .partial_cmp(&self.cost)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.hops.cmp(&self.hops))
            .then_with(|| other.v.cmp(&self.v))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Travel times and hop counts from one source to every vertex it can
/// reach (within an optional horizon).
#[derive(Debug, Clone)]
pub struct DistanceMap {
    source_idx: usize,
    cost: Vec<f64>,
    hops: Vec<u32>,
}

impl DistanceMap {
    pub fn source_idx(&self) -> usize {
        self.source_idx
    }

    #[inline]
    pub fn reached_idx(&self, v: usize) -> bool {
        self.cost[v].is_finite()
    }

    pub fn cost_of_idx(&self, v: usize) -> Option<f64> {
        self.cost[v].is_finite().then_some(self.cost[v])
    }

    pub fn hops_of_idx(&self, v: usize) -> Option<u32> {
        self.reached_idx(v).then_some(self.hops[v])
    }

    pub fn raw_costs(&self) -> &[f64] {
        &self.cost
    }
}

fn validate_field(field: &PassageField) -> Result<()> {
    if field.times().iter().any(|&t| t < 0.0 || t.is_nan()) {
        return Err(Error::InvalidModel("passage field contains a negative time".into()));
    }
    Ok(())
}

fn dijkstra(
    env: &Environment,
    field: &PassageField,
    source_idx: usize,
    horizon: f64,
    stop_at: Option<usize>,
) -> (Vec<f64>, Vec<u32>) {
    let box_ = env.box_();
    let n = box_.n_vertices();
    let mut cost = vec![f64::INFINITY; n];
    let mut hops = vec![u32::MAX; n];
    let mut heap = BinaryHeap::new();
    cost[source_idx] = 0.0;
    hops[source_idx] = 0;
    heap.push(HeapItem { cost: 0.0, hops: 0, v: source_idx as u32 });
    while let Some(HeapItem { cost: c, hops: h, v }) = heap.pop() {
        let v = v as usize;
        if c > cost[v] || (c == cost[v] && h > hops[v]) {
            continue; // stale entry
        }
        if stop_at == Some(v) {
            break;
        }
        box_.for_each_neighbor(v, |e, w| {
            if !env.is_open(e) {
                return;
            }
            let nc = c + field.time(e);
            if nc > horizon {
                return;
            }
            let nh = h + 1;
            if nc < cost[w] || (nc == cost[w] && nh < hops[w]) {
                cost[w] = nc;
                hops[w] = nh;
                heap.push(HeapItem { cost: nc, hops: nh, v: w as u32 });
            }
        });
    }
    (cost, hops)
}

/// Full travel-time sweep from `source`, truncated at `horizon`
/// (pass `f64::INFINITY` for the whole cluster).
pub fn distance_map(
    env: &Environment,
    field: &PassageField,
    source: &Point,
    horizon: f64,
) -> Result<DistanceMap> {
    if horizon < 0.0 {
        return Err(Error::NegativeHorizon(horizon));
    }
    validate_field(field)?;
    let source_idx = env.box_().vertex_index(source)?;
    let (cost, hops) = dijkstra(env, field, source_idx, horizon, None);
    Ok(DistanceMap { source_idx, cost, hops })
}

/// Hop distances (chemical distances) from one source via BFS.
#[derive(Debug, Clone)]
pub struct ChemicalMap {
    source_idx: usize,
    hops: Vec<u32>,
}

impl ChemicalMap {
    pub fn source_idx(&self) -> usize {
        self.source_idx
    }

    pub fn hops_of_idx(&self, v: usize) -> Option<u64> {
        (self.hops[v] != u32::MAX).then_some(self.hops[v] as u64)
    }
}

pub fn chemical_map(env: &Environment, source: &Point) -> Result<ChemicalMap> {
    let box_ = env.box_();
    let source_idx = box_.vertex_index(source)?;
    let mut hops = vec![u32::MAX; box_.n_vertices()];
    hops[source_idx] = 0;
    let mut queue = std::collections::VecDeque::from([source_idx]);
    while let Some(v) = queue.pop_front() {
        let h = hops[v];
        box_.for_each_neighbor(v, |e, w| {
            if env.is_open(e) && hops[w] == u32::MAX {
                hops[w] = h + 1;
                queue.push_back(w);
            }
        });
    }
    Ok(ChemicalMap { source_idx, hops })
}

/// Minimal number of open edges joining x and y; `None` when they lie in
/// different clusters (the +infinity convention).
pub fn chemical_distance(env: &Environment, x: &Point, y: &Point) -> Result<Option<u64>> {
    let box_ = env.box_();
    let target = box_.vertex_index(y)?;
    let map = chemical_map(env, x)?;
    Ok(map.hops_of_idx(target))
}

/// Minimal open-path time sum between x and y; `None` exactly when the
/// chemical distance is infinite.
pub fn travel_time(
    env: &Environment,
    field: &PassageField,
    x: &Point,
    y: &Point,
) -> Result<Option<f64>> {
    validate_field(field)?;
    let box_ = env.box_();
    let sx = box_.vertex_index(x)?;
    let ty = box_.vertex_index(y)?;
    let (cost, _) = dijkstra(env, field, sx, f64::INFINITY, Some(ty));
    Ok(cost[ty].is_finite().then_some(cost[ty]))
}

/// The wet set at a horizon: every vertex with travel time <= horizon,
/// with its exact time and hop count, sorted by vertex index.
#[derive(Debug, Clone)]
pub struct WetSet {
    box_: CenteredBox,
    source: Point,
    horizon: f64,
    reached: Vec<(u32, f64, u32)>,
}

impl WetSet {
    pub fn from_distance_map(
        box_: &CenteredBox,
        source: &Point,
        map: &DistanceMap,
        horizon: f64,
    ) -> Result<WetSet> {
        if horizon < 0.0 {
            return Err(Error::NegativeHorizon(horizon));
        }
        let reached = (0..box_.n_vertices())
            .filter(|&v| map.cost[v] <= horizon)
            .map(|v| (v as u32, map.cost[v], map.hops[v]))
            .collect();
        Ok(WetSet { box_: box_.clone(), source: source.clone(), horizon, reached })
    }

    pub fn box_(&self) -> &CenteredBox {
        &self.box_
    }

    pub fn source(&self) -> &Point {
        &self.source
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.reached.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reached.is_empty()
    }

    pub fn reached_raw(&self) -> &[(u32, f64, u32)] {
        &self.reached
    }

    pub fn contains_idx(&self, v: usize) -> bool {
        self.reached.binary_search_by_key(&(v as u32), |r| r.0).is_ok()
    }

    pub fn time_of(&self, p: &Point) -> Option<f64> {
        let v = self.box_.vertex_index(p).ok()?;
        self.reached
            .binary_search_by_key(&(v as u32), |r| r.0)
            .ok()
            .map(|i| self.reached[i].1)
    }

    pub fn iter_points(&self) -> impl Iterator<Item = (Point, f64, u32)> + '_ {
        self.reached.iter().map(move |&(v, t, h)| (self.box_.vertex_point(v as usize), t, h))
    }

    /// CSV rows (x_1,...,x_d, time, hops) in vertex-index order.
    pub fn export_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.box_.dim();
        for i in 0..d {
            write!(w, "x{},", i + 1)?;
        }
        writeln!(w, "time,hops")?;
        let mut coords = vec![0i64; d];
        for &(v, t, h) in &self.reached {
            self.box_.vertex_coords(v as usize, &mut coords);
            for c in &coords {
                write!(w, "{c},")?;
            }
            writeln!(w, "{t},{h}")?;
        }
        Ok(())
    }
}

pub fn wet_set(
    env: &Environment,
    field: &PassageField,
    source: &Point,
    horizon: f64,
) -> Result<WetSet> {
    let map = distance_map(env, field, source, horizon)?;
    WetSet::from_distance_map(env.box_(), source, &map, horizon)
}

/// An optimal open path from x to y: minimal time sum, then minimal edge
/// count, then lexicographically minimal edge-index sequence. Errors with
/// `NoPath` when the endpoints are in different clusters.
pub fn geodesic(
    env: &Environment,
    field: &PassageField,
    x: &Point,
    y: &Point,
) -> Result<Vec<Edge>> {
    validate_field(field)?;
    let box_ = env.box_();
    let sx = box_.vertex_index(x)?;
    let ty = box_.vertex_index(y)?;
    if sx == ty {
        return Ok(Vec::new());
    }
    // distances to y; then walk forward from x always taking the smallest
    // edge index that stays on an optimal (cost, hops) path
    let (cost, hops) = dijkstra(env, field, ty, f64::INFINITY, None);
    if !cost[sx].is_finite() {
        return Err(Error::NoPath);
    }
    let mut path = Vec::with_capacity(hops[sx] as usize);
    let mut v = sx;
    while v != ty {
        let mut best: Option<(usize, usize)> = None;
        box_.for_each_neighbor(v, |e, w| {
            if env.is_open(e)
                && cost[w].is_finite()
                && cost[v] == field.time(e) + cost[w]
                && hops[v] == hops[w] + 1
                && best.is_none_or(|(be, _)| e < be)
            {
                best = Some((e, w));
            }
        });
        let (e, w) = best.expect("optimal predecessor must exist");
        path.push(box_.edge_from_index(e));
        v = w;
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{generate, EnvConfig};
    use crate::passage::{sample_field, PassageModel};
    use proptest::prelude::*;

    fn make(l: i64, p: f64, seed: u64, model: PassageModel) -> (Environment, PassageField) {
        let env =
            generate(&EnvConfig::new(CenteredBox::new(2, l, 0).unwrap(), p, seed).unwrap())
                .unwrap();
        let field = sample_field(&model, &env).unwrap();
        (env, field)
    }

    /// Exhaustive minimum over simple paths, with sound cost pruning.
    /// Independent of the Dijkstra/BFS implementations above.
    fn enumerate_min(
        env: &Environment,
        weight: &dyn Fn(usize) -> f64,
        from: usize,
        to: usize,
    ) -> Option<f64> {
        fn dfs(
            env: &Environment,
            weight: &dyn Fn(usize) -> f64,
            v: usize,
            to: usize,
            partial: f64,
            visited: &mut Vec<bool>,
            best: &mut Option<f64>,
        ) {
            if v == to {
                if best.is_none() || partial < best.unwrap() {
                    *best = Some(partial);
                }
                return;
            }
            let mut nexts = Vec::new();
            env.box_().for_each_neighbor(v, |e, w| {
                if env.is_open(e) && !visited[w] {
                    nexts.push((weight(e), w));
                }
            });
            nexts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            for (t, w) in nexts {
                let np = partial + t;
                if best.is_some_and(|b| np >= b) {
                    continue;
                }
                visited[w] = true;
                dfs(env, weight, w, to, np, visited, best);
                visited[w] = false;
            }
        }
        let mut visited = vec![false; env.box_().n_vertices()];
        visited[from] = true;
        let mut best = None;
        dfs(env, weight, from, to, 0.0, &mut visited, &mut best);
        best
    }

    #[test]
    fn zero_distance_to_self() {
        let (env, field) = make(2, 0.5, 3, PassageModel::exponential(1.0, 4));
        let p = Point::xy(1, -1);
        assert_eq!(chemical_distance(&env, &p, &p).unwrap(), Some(0));
        assert_eq!(travel_time(&env, &field, &p, &p).unwrap(), Some(0.0));
        assert!(geodesic(&env, &field, &p, &p).unwrap().is_empty());
    }

    #[test]
    fn full_lattice_distance_is_l1() {
        let (env, _) = make(3, 1.0, 1, PassageModel::dirac(1.0, 1));
        for (x, y) in [
            (Point::xy(0, 0), Point::xy(3, -2)),
            (Point::xy(-3, -3), Point::xy(3, 3)),
            (Point::xy(1, 2), Point::xy(-1, 2)),
        ] {
            let d = chemical_distance(&env, &x, &y).unwrap().unwrap();
            assert_eq!(d, x.add(&y.neg()).norm1());
        }
    }

    #[test]
    fn dirac_travel_equals_chemical() {
        let (env, field) = make(3, 0.6, 11, PassageModel::dirac(1.0, 5));
        let b = env.box_();
        for xv in 0..b.n_vertices() {
            let x = b.vertex_point(xv);
            let dm = distance_map(&env, &field, &x, f64::INFINITY).unwrap();
            let cm = chemical_map(&env, &x).unwrap();
            for v in 0..b.n_vertices() {
                assert_eq!(dm.cost_of_idx(v), cm.hops_of_idx(v).map(|h| h as f64));
            }
        }
    }

    #[test]
    fn matches_exhaustive_enumeration_small_boxes() {
        for seed in 0..12 {
            let p = 0.35 + 0.05 * (seed % 8) as f64;
            let (env, field) = make(2, p, seed, PassageModel::exponential(1.0, seed + 100));
            let b = env.box_();
            let n = b.n_vertices();
            for from in 0..n {
                let x = b.vertex_point(from);
                let dm = distance_map(&env, &field, &x, f64::INFINITY).unwrap();
                let cm = chemical_map(&env, &x).unwrap();
                for to in 0..n {
                    let oracle_d = enumerate_min(&env, &|e| field.time(e), from, to);
                    let oracle_hops = enumerate_min(&env, &|_| 1.0, from, to);
                    match (dm.cost_of_idx(to), oracle_d) {
                        (Some(a), Some(bb)) => assert!((a - bb).abs() < 1e-12),
                        (None, None) => {}
                        other => panic!("seed {seed} pair {from}->{to}: {other:?}"),
                    }
                    assert_eq!(
                        cm.hops_of_idx(to),
                        oracle_hops.map(|h| h as u64),
                        "seed {seed} hops {from}->{to}"
                    );
                }
            }
        }
    }

    #[test]
    fn symmetry_exact() {
        let (env, field) = make(3, 0.6, 21, PassageModel::exponential(1.0, 22));
        let b = env.box_();
        for (x, y) in [(Point::xy(0, 0), Point::xy(2, 1)), (Point::xy(-2, 3), Point::xy(1, -1))] {
            assert_eq!(
                travel_time(&env, &field, &x, &y).unwrap(),
                travel_time(&env, &field, &y, &x).unwrap()
            );
            let _ = b;
        }
    }

    #[test]
    fn triangle_inequality_on_cluster_triples() {
        let (env, field) = make(4, 0.7, 31, PassageModel::exponential(1.0, 32));
        let b = env.box_();
        let verts: Vec<usize> =
            (0..b.n_vertices()).filter(|&v| env.in_giant_idx(v)).take(12).collect();
        for &a in &verts {
            let pa = b.vertex_point(a);
            let da = distance_map(&env, &field, &pa, f64::INFINITY).unwrap();
            for &x in &verts {
                let px = b.vertex_point(x);
                let dx = distance_map(&env, &field, &px, f64::INFINITY).unwrap();
                for &z in &verts {
                    let lhs = da.cost_of_idx(z).unwrap();
                    let rhs = da.cost_of_idx(x).unwrap() + dx.cost_of_idx(z).unwrap();
                    assert!(lhs <= rhs + 1e-9);
                }
            }
        }
    }

    #[test]
    fn domination_by_scaled_chemical_distance() {
        let (env, field) = make(4, 0.65, 41, PassageModel::dirac(2.5, 42));
        let origin = Point::xy(0, 0);
        let dm = distance_map(&env, &field, &origin, f64::INFINITY).unwrap();
        let cm = chemical_map(&env, &origin).unwrap();
        for v in 0..env.box_().n_vertices() {
            if let Some(c) = dm.cost_of_idx(v) {
                assert!((c - 2.5 * cm.hops_of_idx(v).unwrap() as f64).abs() < 1e-9);
            }
        }
        // general law: d >= nu_min * D pathwise
        let (env, field) = make(4, 0.65, 43, PassageModel::mixture(0.5, 1.0, 3.0, 44));
        let dm = distance_map(&env, &field, &origin, f64::INFINITY).unwrap();
        let cm = chemical_map(&env, &origin).unwrap();
        for v in 0..env.box_().n_vertices() {
            if let Some(c) = dm.cost_of_idx(v) {
                assert!(c + 1e-9 >= cm.hops_of_idx(v).unwrap() as f64);
            }
        }
    }

    #[test]
    fn wet_set_horizon_zero_and_full_lattice_ball() {
        let (env, field) = make(4, 1.0, 51, PassageModel::dirac(1.0, 52));
        let origin = Point::xy(0, 0);
        let ws0 = wet_set(&env, &field, &origin, 0.0).unwrap();
        assert_eq!(ws0.len(), 1);
        assert_eq!(ws0.time_of(&origin), Some(0.0));
        let ws = wet_set(&env, &field, &origin, 2.5).unwrap();
        // discrete l1 ball of radius 2: 1 + 4 + 8 = 13 vertices
        assert_eq!(ws.len(), 13);
        for (p, t, h) in ws.iter_points() {
            assert_eq!(t, p.norm1() as f64);
            assert_eq!(h as u64, p.norm1());
        }
    }

    #[test]
    fn negative_horizon_rejected() {
        let (env, field) = make(2, 1.0, 1, PassageModel::dirac(1.0, 1));
        assert!(matches!(
            wet_set(&env, &field, &Point::xy(0, 0), -1.0),
            Err(Error::NegativeHorizon(_))
        ));
    }

    #[test]
    fn geodesic_straight_line_on_full_lattice() {
        let (env, field) = make(3, 1.0, 61, PassageModel::dirac(1.0, 62));
        let path = geodesic(&env, &field, &Point::xy(0, 0), &Point::xy(2, 0)).unwrap();
        assert_eq!(path.len(), 2);
        assert_eq!(path[0], Edge { endpoint: Point::xy(0, 0), axis: 0 });
        assert_eq!(path[1], Edge { endpoint: Point::xy(1, 0), axis: 0 });
    }

    #[test]
    fn geodesic_cost_equals_travel_time() {
        for seed in 0..8 {
            let (env, field) = make(3, 0.7, seed, PassageModel::exponential(1.0, seed + 7));
            let b = env.box_();
            let x = Point::xy(0, 0);
            for v in 0..b.n_vertices() {
                let y = b.vertex_point(v);
                match travel_time(&env, &field, &x, &y).unwrap() {
                    Some(t) => {
                        let path = geodesic(&env, &field, &x, &y).unwrap();
                        let total: f64 =
                            path.iter().map(|e| field.time(b.edge_index(e).unwrap())).sum();
                        assert!((total - t).abs() < 1e-9);
                    }
                    None => assert!(matches!(
                        geodesic(&env, &field, &x, &y),
                        Err(Error::NoPath)
                    )),
                }
            }
        }
    }

    #[test]
    fn zero_weight_edges_terminate() {
        let (env, field) = make(4, 0.8, 71, PassageModel::mixture(0.6, 0.0, 1.0, 72));
        let dm = distance_map(&env, &field, &Point::xy(0, 0), f64::INFINITY).unwrap();
        assert!(dm.raw_costs().iter().all(|&c| c.is_infinite() || c >= 0.0));
    }

    #[test]
    fn infinite_travel_iff_infinite_chemical() {
        let (env, field) = make(4, 0.45, 81, PassageModel::exponential(1.0, 82));
        let b = env.box_();
        let x = Point::xy(0, 0);
        let dm = distance_map(&env, &field, &x, f64::INFINITY).unwrap();
        let cm = chemical_map(&env, &x).unwrap();
        for v in 0..b.n_vertices() {
            assert_eq!(dm.cost_of_idx(v).is_some(), cm.hops_of_idx(v).is_some());
        }
    }

    #[test]
    fn csv_export_shape() {
        let (env, field) = make(2, 1.0, 1, PassageModel::dirac(1.0, 1));
        let ws = wet_set(&env, &field, &Point::xy(0, 0), 1.0).unwrap();
        let mut buf = Vec::new();
        ws.export_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "x1,x2,time,hops");
        assert_eq!(lines.count(), 5); // origin + 4 neighbours
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn wet_sets_nested_in_horizon(seed in 0u64..200, t1 in 0.0f64..3.0, dt in 0.0f64..3.0) {
            let (env, field) = make(3, 0.7, seed, PassageModel::exponential(1.0, seed ^ 0xabc));
            let origin = Point::xy(0, 0);
            let a = wet_set(&env, &field, &origin, t1).unwrap();
            let b = wet_set(&env, &field, &origin, t1 + dt).unwrap();
            for &(v, _, _) in a.reached_raw() {
                prop_assert!(b.contains_idx(v as usize));
            }
        }
    }
}
