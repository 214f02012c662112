//! Directional time constants and the asymptotic shape.
//!
//! The estimator follows the ray construction: along a direction u, the
//! travel time from the origin to the k-th intersection of the ray with
//! the giant proxy, divided by the intersection position, converges to
//! the directional constant. Replicas are independent realizations
//! conditioned on the origin lying in the giant; the last (deepest) hit
//! per replica is used to minimize transient bias, and the replica
//! spread provides the standard error.

use crate::environment::{generate, EnvConfig, Environment};
use crate::error::{Error, Result};
use crate::exec;
use crate::lattice::Point;
use crate::passage::{sample_field, PassageField, PassageModel};
use crate::paths::{distance_map, DistanceMap};
use crate::rng::derive_seed;
use crate::stats::{pooled_stderr, OnlineStats};
use serde::{Deserialize, Serialize};

/// Realize one replica: environment from `env_seed`, passage field from a
/// seed derived from (model.seed, env_seed) so the two sources stay
/// independent while the whole pair remains a function of the seeds.
pub fn realize(
    cfg: &EnvConfig,
    model: &PassageModel,
    env_seed: u64,
) -> Result<(Environment, PassageField)> {
    let env = generate(&cfg.with_seed(env_seed))?;
    let field = sample_field(&model.with_seed(derive_seed(model.seed, env_seed)), &env)?;
    Ok((env, field))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectionalEstimate {
    pub u: Point,
    /// last ray hit used, per contributing replica
    pub hits: Vec<i64>,
    /// d(0, T u) / T at that hit, per contributing replica
    pub ratios: Vec<f64>,
    pub mu_hat: f64,
    pub stderr: f64,
}

impl DirectionalEstimate {
    fn from_samples(u: Point, samples: Vec<(i64, f64)>) -> Self {
        let hits: Vec<i64> = samples.iter().map(|s| s.0).collect();
        let ratios: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let acc = OnlineStats::from_slice(&ratios);
        DirectionalEstimate { u, hits, ratios, mu_hat: acc.mean(), stderr: acc.stderr() }
    }

    pub fn n_replicas(&self) -> usize {
        self.ratios.len()
    }
}

/// All primitive directions (gcd of coordinates 1) with coordinates in
/// [-max_coord, max_coord], in lexical order. Covers the +/- pairs the
/// property checks need.
pub fn direction_fan(d: usize, max_coord: i64) -> Vec<Point> {
    fn fill(d: usize, max_coord: i64, coords: &mut Vec<i64>, out: &mut Vec<Point>) {
        if coords.len() == d {
            let p = Point(coords.clone());
            if !p.is_zero() && p.coord_gcd() == 1 {
                out.push(p);
            }
            return;
        }
        for c in -max_coord..=max_coord {
            coords.push(c);
            fill(d, max_coord, coords, out);
            coords.pop();
        }
    }
    let mut out = Vec::new();
    fill(d, max_coord, &mut Vec::new(), &mut out);
    out.sort();
    out
}

/// Estimate the directional constant for every direction of `fan` from
/// the replicas given by `env_seeds` (expected to be conditioned on the
/// origin lying in the giant). One travel-time sweep per replica serves
/// all directions.
pub fn estimate_fan(
    cfg: &EnvConfig,
    model: &PassageModel,
    env_seeds: &[u64],
    fan: &[Point],
    n_hits: usize,
) -> Result<Vec<DirectionalEstimate>> {
    estimate_fan_with(env_seeds.len(), |r| realize(cfg, model, env_seeds[r]), fan, n_hits)
}

/// (last hit, ratio) of one replica along one ray, when the ray hits.
type RaySample = Option<(i64, f64)>;

/// Same estimator over replicas produced by an arbitrary provider; the
/// road-network pipeline supplies company environments this way.
pub fn estimate_fan_with<F>(
    n_replicas: usize,
    provider: F,
    fan: &[Point],
    n_hits: usize,
) -> Result<Vec<DirectionalEstimate>>
where
    F: Fn(usize) -> Result<(Environment, PassageField)> + Sync + Send,
{
    if n_replicas == 0 {
        return Err(Error::Conditioning("no replicas supplied".into()));
    }
    let per_replica: Vec<Result<Vec<RaySample>>> =
        exec::map_indexed(n_replicas, |r| {
            let (env, field) = provider(r)?;
            let origin = Point::origin(env.box_().dim());
            if !env.in_giant(&origin)? {
                return Err(Error::Conditioning(format!(
                    "replica {r} does not put the origin in the giant"
                )));
            }
            let dm = distance_map(&env, &field, &origin, f64::INFINITY)?;
            fan.iter()
                .map(|u| ray_sample(&env, &dm, u, n_hits))
                .collect::<Result<Vec<_>>>()
        });

    let mut columns: Vec<Vec<(i64, f64)>> = vec![Vec::new(); fan.len()];
    for row in per_replica {
        for (col, sample) in row?.into_iter().enumerate() {
            if let Some(s) = sample {
                columns[col].push(s);
            }
        }
    }
    fan.iter()
        .zip(columns)
        .map(|(u, samples)| {
            if u.is_zero() {
                // mu(0) = 0 by definition
                return Ok(DirectionalEstimate {
                    u: u.clone(),
                    hits: Vec::new(),
                    ratios: Vec::new(),
                    mu_hat: 0.0,
                    stderr: 0.0,
                });
            }
            if samples.is_empty() {
                return Err(Error::InsufficientBox(format!(
                    "no ray hit for direction {u} inside the inner box"
                )));
            }
            Ok(DirectionalEstimate::from_samples(u.clone(), samples))
        })
        .collect()
}

fn ray_sample(env: &Environment, dm: &DistanceMap, u: &Point, n_hits: usize) -> Result<RaySample> {
    if u.is_zero() {
        return Ok(None);
    }
    let hits = env.line_cluster_hits(u, n_hits)?;
    let Some(&t) = hits.last() else { return Ok(None) };
    let target = env.box_().vertex_index(&u.scale(t))?;
    let cost = dm
        .cost_of_idx(target)
        .expect("giant vertices share the conditioned origin's cluster");
    Ok(Some((t, cost / t as f64)))
}

pub fn estimate_mu(
    cfg: &EnvConfig,
    model: &PassageModel,
    env_seeds: &[u64],
    u: &Point,
    n_hits: usize,
) -> Result<DirectionalEstimate> {
    Ok(estimate_fan(cfg, model, env_seeds, std::slice::from_ref(u), n_hits)?.pop().unwrap())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub property: String,
    pub detail: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormPropertyReport {
    pub mu_star: f64,
    pub checks: Vec<PropertyCheck>,
}

impl NormPropertyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&PropertyCheck> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

/// Verify the norm properties of the directional constant on a set of
/// estimates: symmetry under negation, invariance under coordinate
/// exchange (product laws), homogeneity along multiples, subadditivity
/// on available (u, v, u+v) triples, the mu_star upper bound, and the
/// Lipschitz continuity bound. Statistical checks get `tol` pooled
/// standard errors of slack.
pub fn check_norm_properties(
    estimates: &[DirectionalEstimate],
    tol: f64,
    max_triples: usize,
) -> NormPropertyReport {
    use std::collections::BTreeMap;
    let by_dir: BTreeMap<&Point, &DirectionalEstimate> =
        estimates.iter().map(|e| (&e.u, e)).collect();
    let d = estimates.first().map(|e| e.u.dim()).unwrap_or(0);
    let mut checks = Vec::new();

    // mu_star = max over axis directions present
    let mut mu_star = 0.0f64;
    let mut mu_star_se = 0.0f64;
    for i in 0..d {
        let mut coords = vec![0i64; d];
        coords[i] = 1;
        if let Some(e) = by_dir.get(&Point(coords)) {
            if e.mu_hat > mu_star {
                mu_star = e.mu_hat;
                mu_star_se = e.stderr;
            }
        }
    }

    let two_sided = |name: &str, detail: String, a: f64, b: f64, slack: f64| PropertyCheck {
        property: name.into(),
        detail,
        lhs: a,
        rhs: b,
        slack,
        pass: (a - b).abs() <= slack,
    };

    for e in estimates {
        // symmetry mu(u) = mu(-u), each unordered pair once
        let neg = e.u.neg();
        if e.u < neg {
            if let Some(o) = by_dir.get(&neg) {
                checks.push(two_sided(
                    "symmetry",
                    format!("{} vs {}", e.u, neg),
                    e.mu_hat,
                    o.mu_hat,
                    tol * pooled_stderr(e.stderr, o.stderr),
                ));
            }
        }
        // coordinate exchange, planar case
        if d == 2 {
            let swapped = Point(vec![e.u.0[1], e.u.0[0]]);
            if e.u < swapped {
                if let Some(o) = by_dir.get(&swapped) {
                    checks.push(two_sided(
                        "axis-exchange",
                        format!("{} vs {}", e.u, swapped),
                        e.mu_hat,
                        o.mu_hat,
                        tol * pooled_stderr(e.stderr, o.stderr),
                    ));
                }
            }
            let reflected = Point(vec![-e.u.0[0], e.u.0[1]]);
            if e.u < reflected {
                if let Some(o) = by_dir.get(&reflected) {
                    checks.push(two_sided(
                        "axis-reflection",
                        format!("{} vs {}", e.u, reflected),
                        e.mu_hat,
                        o.mu_hat,
                        tol * pooled_stderr(e.stderr, o.stderr),
                    ));
                }
            }
        }
        // homogeneity mu(k u) = k mu(u)
        for k in 2..=4i64 {
            if let Some(o) = by_dir.get(&e.u.scale(k)) {
                checks.push(two_sided(
                    "homogeneity",
                    format!("{} vs {}x{}", o.u, k, e.u),
                    o.mu_hat,
                    k as f64 * e.mu_hat,
                    tol * pooled_stderr(o.stderr, k as f64 * e.stderr),
                ));
            }
        }
        // upper bound mu(u) <= mu_star * |u|_1
        if mu_star > 0.0 && !e.u.is_zero() {
            let bound = mu_star * e.u.norm1() as f64;
            let slack = tol * pooled_stderr(e.stderr, mu_star_se * e.u.norm1() as f64);
            checks.push(PropertyCheck {
                property: "upper-bound".into(),
                detail: format!("mu{} <= mu_* |u|_1", e.u),
                lhs: e.mu_hat,
                rhs: bound,
                slack,
                pass: e.mu_hat <= bound + slack,
            });
        }
    }

    // subadditivity on (u, v, u+v) triples available in the set
    let mut n_triples = 0usize;
    'outer: for a in estimates {
        for b in estimates {
            if a.u >= b.u {
                continue;
            }
            let sum = a.u.add(&b.u);
            if sum.is_zero() {
                continue;
            }
            if let Some(s) = by_dir.get(&sum) {
                let rhs = a.mu_hat + b.mu_hat;
                let slack = tol * pooled_stderr(s.stderr, pooled_stderr(a.stderr, b.stderr));
                checks.push(PropertyCheck {
                    property: "subadditivity".into(),
                    detail: format!("mu{} <= mu{} + mu{}", s.u, a.u, b.u),
                    lhs: s.mu_hat,
                    rhs,
                    slack,
                    pass: s.mu_hat <= rhs + slack,
                });
                n_triples += 1;
                if n_triples >= max_triples {
                    break 'outer;
                }
            }
        }
    }

    // continuity |mu(u) - mu(v)| <= mu_* |u - v|_1 on adjacent fan entries
    if mu_star > 0.0 {
        for pair in estimates.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let dist = a.u.add(&b.u.neg()).norm1() as f64;
            if dist == 0.0 {
                continue;
            }
            let lhs = (a.mu_hat - b.mu_hat).abs();
            let rhs = mu_star * dist;
            let slack = tol * pooled_stderr(a.stderr, b.stderr);
            checks.push(PropertyCheck {
                property: "continuity".into(),
                detail: format!("|mu{} - mu{}| <= mu_* {dist}", a.u, b.u),
                lhs,
                rhs,
                slack,
                pass: lhs <= rhs + slack,
            });
        }
    }

    NormPropertyReport { mu_star, checks }
}

/// The estimated unit ball of the directional constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapeEstimate {
    pub directions: Vec<DirectionalEstimate>,
    /// boundary samples +/- u / mu(u), any dimension
    pub ball_points: Vec<Vec<f64>>,
    /// convex hull of the boundary samples, counterclockwise (d = 2 only)
    pub hull: Vec<[f64; 2]>,
    pub mu_star: f64,
    pub warning: Option<String>,
}

impl ShapeEstimate {
    /// Support function of the estimated ball in direction `theta`.
    pub fn support(&self, theta: &[f64]) -> f64 {
        support_of(&self.ball_points, theta)
    }
}

pub fn support_of(points: &[Vec<f64>], theta: &[f64]) -> f64 {
    points
        .iter()
        .map(|p| p.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Andrew monotone chain; returns the hull counterclockwise.
pub fn convex_hull_2d(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &[f64; 2], a: &[f64; 2], b: &[f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0
        {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0
        {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Estimate the asymptotic shape as the convex hull of the fan boundary
/// samples. Degenerate directions (mu close to zero) are an error when
/// they are all degenerate, a warning when only some are.
pub fn estimate_shape(
    cfg: &EnvConfig,
    model: &PassageModel,
    env_seeds: &[u64],
    fan: &[Point],
    n_hits: usize,
) -> Result<ShapeEstimate> {
    let estimates = estimate_fan(cfg, model, env_seeds, fan, n_hits)?;
    shape_from_estimates(estimates)
}

pub fn shape_from_estimates(estimates: Vec<DirectionalEstimate>) -> Result<ShapeEstimate> {
    const EPS_DEGENERATE: f64 = 1e-9;
    let n_zero = estimates.iter().filter(|e| e.mu_hat < EPS_DEGENERATE).count();
    if n_zero == estimates.len() {
        return Err(Error::DegenerateShape(
            "every directional constant is zero; the limit is all of space".into(),
        ));
    }
    let warning = (n_zero > 0).then(|| {
        format!("inconsistent degeneracy: {n_zero}/{} directions have mu ~ 0", estimates.len())
    });

    let d = estimates[0].u.dim();
    let mut ball_points = Vec::new();
    for e in &estimates {
        if e.mu_hat < EPS_DEGENERATE {
            continue;
        }
        let p: Vec<f64> = e.u.0.iter().map(|&c| c as f64 / e.mu_hat).collect();
        let neg: Vec<f64> = p.iter().map(|x| -x).collect();
        ball_points.push(p);
        ball_points.push(neg);
    }

    let hull = if d == 2 {
        let pts: Vec<[f64; 2]> = ball_points.iter().map(|p| [p[0], p[1]]).collect();
        convex_hull_2d(&pts)
    } else {
        Vec::new()
    };

    let mut mu_star = 0.0f64;
    for e in &estimates {
        if e.u.norm1() == 1 {
            mu_star = mu_star.max(e.mu_hat);
        }
    }

    Ok(ShapeEstimate { directions: estimates, ball_points, hull, mu_star, warning })
}

/// Hausdorff-style distance trace of the rescaled wet set against a
/// candidate ball, by support-function comparison over a direction fan.
/// Distances are measured in the gauge of `gauge_points` (defaulting to
/// the ball itself): the directional support gap divided by the gauge's
/// support, which for convex bodies is the gauge-Hausdorff distance at
/// fan resolution. The wet set is compared as a union of lattice cells
/// of side 1/t.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HausdorffTrace {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub fan_size: usize,
}

pub fn hausdorff_trace(
    env: &Environment,
    field: &PassageField,
    ball_points: &[Vec<f64>],
    gauge_points: Option<&[Vec<f64>]>,
    times: &[f64],
) -> Result<HausdorffTrace> {
    let box_ = env.box_();
    let d = box_.dim();
    let origin = Point::origin(d);
    if !env.in_giant(&origin)? {
        return Err(Error::Conditioning("origin is not in the giant proxy".into()));
    }
    let max_t = times.iter().cloned().fold(0.0, f64::max);
    let dm = distance_map(env, field, &origin, max_t)?;

    // the trace is meaningless if the wet set is clipped by the inner box
    let inner = box_.inner_half_width();
    let mut coords = vec![0i64; d];
    for v in 0..box_.n_vertices() {
        if dm.reached_idx(v) {
            box_.vertex_coords(v, &mut coords);
            if coords.iter().any(|c| c.abs() >= inner) {
                return Err(Error::Truncated { time: max_t });
            }
        }
    }

    let gauge = gauge_points.unwrap_or(ball_points);
    let fan: Vec<Vec<f64>> = fan_directions_from(ball_points);
    let reached: Vec<(Vec<i64>, f64)> = (0..box_.n_vertices())
        .filter(|&v| dm.reached_idx(v))
        .map(|v| {
            let mut c = vec![0i64; d];
            box_.vertex_coords(v, &mut c);
            (c, dm.cost_of_idx(v).unwrap())
        })
        .collect();

    let mut distances = Vec::with_capacity(times.len());
    for &t in times {
        let per_dir = exec::map_indexed(fan.len(), |i| {
            let theta = &fan[i];
            let cell_pad: f64 = theta.iter().map(|x| x.abs()).sum::<f64>() / (2.0 * t);
            let mut h_a = f64::NEG_INFINITY;
            for (c, time) in &reached {
                if *time <= t {
                    let dot: f64 = c.iter().zip(theta).map(|(a, b)| *a as f64 * b).sum();
                    h_a = h_a.max(dot / t);
                }
            }
            h_a += cell_pad;
            let h_b = support_of(ball_points, theta);
            let h_g = support_of(gauge, theta);
            if h_g > 0.0 {
                (h_a - h_b).abs() / h_g
            } else {
                0.0
            }
        });
        distances.push(per_dir.into_iter().fold(0.0, f64::max));
    }
    Ok(HausdorffTrace { times: times.to_vec(), distances, fan_size: fan.len() })
}

fn fan_directions_from(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    points
        .iter()
        .filter_map(|p| {
            let norm: f64 = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            (norm > 0.0).then(|| p.iter().map(|x| x / norm).collect())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DegeneracyVerdict {
    Degenerate,
    Norm,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegeneracyProbe {
    pub p: f64,
    pub q_zero: f64,
    /// p * nu(0), to be compared with the planar critical value 1/2
    pub pq: f64,
    pub estimate: DirectionalEstimate,
    pub verdict: DegeneracyVerdict,
}

/// Probe the positivity dichotomy for the mixture
/// q_zero * delta_0 + (1 - q_zero) * delta_1 on a Bernoulli(p)
/// environment in the plane: a vanishing axis constant signals the
/// degenerate regime, a clearly positive one the norm regime.
pub fn degeneracy_probe(
    cfg: &EnvConfig,
    q_zero: f64,
    passage_seed: u64,
    env_seeds: &[u64],
    n_hits: usize,
    eps_deg: f64,
    eps_norm: f64,
) -> Result<DegeneracyProbe> {
    if cfg.dim() != 2 {
        return Err(Error::UnsupportedDimension {
            got: cfg.dim(),
            reason: "the dichotomy probe relies on the planar critical value 1/2".into(),
        });
    }
    let model = PassageModel::mixture(q_zero, 0.0, 1.0, passage_seed);
    let e1 = Point::xy(1, 0);
    let estimate = estimate_mu(cfg, &model, env_seeds, &e1, n_hits)?;
    let verdict = if estimate.mu_hat < eps_deg {
        DegeneracyVerdict::Degenerate
    } else if estimate.mu_hat > eps_norm {
        DegeneracyVerdict::Norm
    } else {
        DegeneracyVerdict::Inconclusive
    };
    Ok(DegeneracyProbe { p: cfg.p, q_zero, pq: cfg.p * q_zero, estimate, verdict })
}
