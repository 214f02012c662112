//! Planar flat-edge analysis: the oriented-percolation speed, the
//! predicted contact segment on the diamond boundary, and the realized
//! contact set of a wet set.
//!
//! Orientation convention: one oriented step is a lattice step +e1 or
//! +e2, so generation n lives on the antidiagonal x + y = n and the
//! transverse coordinate is x - y. The reported speed `alpha_hat` is the
//! right-edge displacement per generation divided by sqrt(2), which puts
//! the endpoints of the contact segment at
//! (1/2 + alpha/sqrt2, 1/2 - alpha/sqrt2) and its mirror image. With
//! every bond open the speed is exactly 1/sqrt(2) and the segment is the
//! whole positive-quadrant edge of the diamond.

use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::exec;
use crate::lattice::Point;
use crate::passage::{atom_at_min, PassageField};
use crate::paths::distance_map;
use crate::rng::{derive_seed, CounterRng, Stream};
use crate::stats::OnlineStats;
use serde::{Deserialize, Serialize};

pub const MAX_ALPHA: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OrientedParams {
    pub generations: usize,
    pub replicas: usize,
    /// minimum single-site survival frequency for a supercritical verdict
    pub survival_threshold: f64,
}

impl Default for OrientedParams {
    fn default() -> Self {
        OrientedParams { generations: 800, replicas: 40, survival_threshold: 0.05 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrientedSpeedEstimate {
    pub q: f64,
    /// asymptotic speed in the sqrt(2) normalization; absent when the
    /// survival simulation says subcritical
    pub alpha_hat: Option<f64>,
    pub stderr: f64,
    pub survival_freq: f64,
    pub supercritical: bool,
    pub generations: usize,
    pub replicas: usize,
}

impl OrientedSpeedEstimate {
    /// Endpoints of the predicted contact segment on the unit diamond,
    /// positive quadrant; `None` in the subcritical regime.
    pub fn endpoints(&self) -> Option<([f64; 2], [f64; 2])> {
        self.alpha_hat.map(|a| {
            let off = a / std::f64::consts::SQRT_2;
            ([0.5 + off, 0.5 - off], [0.5 - off, 0.5 + off])
        })
    }
}

/// One oriented-percolation configuration on the rotated lattice, run
/// from both initial conditions: the half line (for the right-edge
/// speed) and the single origin site (for survival).
fn oriented_replica(q: f64, rng: &CounterRng, generations: usize) -> (f64, bool) {
    let g = generations as i64;
    let width = (2 * g + 3) as usize;
    let slot = |x: i64| (x + g + 1) as usize;
    let bond = |n: usize, x: i64, right: bool| -> bool {
        let ctr = ((n as u64) * width as u64 + slot(x) as u64) * 2 + right as u64;
        rng.uniform(ctr) < q
    };

    // half-line start: every even x <= 0 occupied
    let mut row = vec![false; width];
    let mut x0 = 0i64;
    while x0 >= -g - 1 {
        row[slot(x0)] = true;
        x0 -= 2;
    }
    let mut right_edge = 0i64;
    let mut gens_run = 0usize;
    for n in 0..generations {
        let mut next = vec![false; width];
        for (xi, &occupied) in row.iter().enumerate() {
            if !occupied {
                continue;
            }
            let x = xi as i64 - g - 1;
            if x < g + 1 && bond(n, x, true) {
                next[slot(x + 1)] = true;
            }
            if x > -g - 1 && bond(n, x, false) {
                next[slot(x - 1)] = true;
            }
        }
        row = next;
        gens_run = n + 1;
        match row.iter().rposition(|&b| b) {
            Some(xi) => right_edge = xi as i64 - g - 1,
            None => break,
        }
    }
    let speed = right_edge as f64 / gens_run as f64 / std::f64::consts::SQRT_2;

    // single-site start: survival of the origin's oriented cluster
    let mut row = vec![false; width];
    row[slot(0)] = true;
    let mut alive = true;
    for n in 0..generations {
        let mut next = vec![false; width];
        let mut any = false;
        for (xi, &occupied) in row.iter().enumerate() {
            if !occupied {
                continue;
            }
            let x = xi as i64 - g - 1;
            if x < g + 1 && bond(n, x, true) {
                next[slot(x + 1)] = true;
                any = true;
            }
            if x > -g - 1 && bond(n, x, false) {
                next[slot(x - 1)] = true;
                any = true;
            }
        }
        if !any {
            alive = false;
            break;
        }
        row = next;
    }
    (speed, alive)
}

/// Estimate the oriented-percolation speed at parameter q by simulation.
/// No literature value of the oriented threshold is assumed: the verdict
/// comes from the measured survival frequency.
pub fn oriented_speed(q: f64, seed: u64, params: &OrientedParams) -> Result<OrientedSpeedEstimate> {
    if !(0.0 < q && q <= 1.0) {
        return Err(Error::InvalidModel(format!("oriented parameter q = {q} outside (0, 1]")));
    }
    let results: Vec<(f64, bool)> = exec::map_indexed(params.replicas, |r| {
        let rng = CounterRng::new(derive_seed(seed, r as u64), Stream::Oriented);
        oriented_replica(q, &rng, params.generations)
    });
    let survivals = results.iter().filter(|r| r.1).count();
    let survival_freq = survivals as f64 / params.replicas as f64;
    let supercritical = survival_freq >= params.survival_threshold;
    let acc = OnlineStats::from_slice(&results.iter().map(|r| r.0).collect::<Vec<_>>());
    Ok(OrientedSpeedEstimate {
        q,
        alpha_hat: supercritical.then(|| acc.mean()),
        stderr: acc.stderr(),
        survival_freq,
        supercritical,
        generations: params.generations,
        replicas: params.replicas,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FlatEdgeParams {
    /// absolute tolerance on the contact criterion; 0 selects exact
    /// arithmetic (appropriate for deterministic times)
    pub eps: f64,
    /// number of angular bins over the positive-quadrant boundary
    pub n_bins: usize,
}

impl Default for FlatEdgeParams {
    fn default() -> Self {
        FlatEdgeParams { eps: 0.0, n_bins: 32 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlatEdgePrediction {
    pub alpha_hat: f64,
    pub m: [f64; 2],
    pub n: [f64; 2],
    /// predicted angular extent, in the parameter s = y / (x + y)
    pub s_lo: f64,
    pub s_hi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlatEdgeReport {
    /// p * nu(nu_min), when the law has a closed-form atom at its minimum
    pub q: Option<f64>,
    pub nu_min: f64,
    pub t: f64,
    /// diamond radius in lattice units: t / nu_min
    pub radius: i64,
    /// contact vertices in the positive quadrant, lex order
    pub contact: Vec<Point>,
    /// contact count over the number of boundary sites (radius + 1)
    pub contact_fraction: f64,
    /// per-bin contact counts over s = y / (x + y)
    pub bins: Vec<u32>,
    pub s_min: Option<f64>,
    pub s_max: Option<f64>,
    pub prediction: Option<FlatEdgePrediction>,
    /// worst endpoint mismatch against the prediction, in bin widths
    pub endpoint_gap_bins: Option<f64>,
}

/// Extract the contact set of the wet set at horizon `t`: the
/// positive-quadrant vertices on the diamond of radius t/nu_min whose
/// travel time equals nu_min times their l1 norm, and compare its
/// angular extent with the predicted segment.
pub fn flat_edge_scan(
    env: &Environment,
    field: &PassageField,
    t: f64,
    params: &FlatEdgeParams,
    speed: Option<&OrientedSpeedEstimate>,
) -> Result<FlatEdgeReport> {
    let box_ = env.box_();
    if box_.dim() != 2 {
        return Err(Error::UnsupportedDimension {
            got: box_.dim(),
            reason: "flat-edge analysis is planar".into(),
        });
    }
    let stats = field.stats();
    let nu_min = stats.nu_min;
    if nu_min <= 0.0 {
        return Err(Error::HypothesisViolated(
            "flat edge needs a strictly positive essential infimum".into(),
        ));
    }
    let origin = Point::origin(2);
    if !env.in_giant(&origin)? {
        return Err(Error::Conditioning("origin is not in the giant proxy".into()));
    }
    let radius = (t / nu_min + 1e-9).floor() as i64;
    if radius > box_.half_width() {
        return Err(Error::InsufficientBox(format!(
            "diamond radius {radius} exceeds the box half-width {}",
            box_.half_width()
        )));
    }

    let dm = distance_map(env, field, &origin, t)?;
    let mut contact = Vec::new();
    let mut bins = vec![0u32; params.n_bins];
    // walk the positive-quadrant boundary sites (a, radius - a)
    for a in 0..=radius {
        let candidates: &[i64] = if params.eps == 0.0 { &[radius] } else { &[radius - 1, radius] };
        for &r in candidates {
            let b = r - a;
            if b < 0 {
                continue;
            }
            let p = Point::xy(a, b);
            let Ok(v) = box_.vertex_index(&p) else { continue };
            let Some(d) = dm.cost_of_idx(v) else { continue };
            let norm = p.norm1() as f64;
            let is_contact = if params.eps == 0.0 {
                d == nu_min * norm
            } else {
                (d - nu_min * norm).abs() <= params.eps
                    && (norm - t / nu_min).abs() <= params.eps * t
            };
            if is_contact {
                let s = if a + b > 0 { b as f64 / (a + b) as f64 } else { 0.5 };
                let bin = ((s * params.n_bins as f64) as usize).min(params.n_bins - 1);
                bins[bin] += 1;
                contact.push(p);
                break;
            }
        }
    }
    contact.sort();

    let ss: Vec<f64> = contact
        .iter()
        .map(|p| {
            let total = p.0[0] + p.0[1];
            if total > 0 {
                p.0[1] as f64 / total as f64
            } else {
                0.5
            }
        })
        .collect();
    let s_min = ss.iter().cloned().reduce(f64::min);
    let s_max = ss.iter().cloned().reduce(f64::max);

    let prediction = speed.and_then(|sp| {
        sp.endpoints().map(|(m, n)| FlatEdgePrediction {
            alpha_hat: sp.alpha_hat.unwrap(),
            m,
            n,
            s_lo: m[1],
            s_hi: n[1],
        })
    });
    let endpoint_gap_bins = match (&prediction, s_min, s_max) {
        (Some(pred), Some(lo), Some(hi)) => {
            let bw = 1.0 / params.n_bins as f64;
            Some(((lo - pred.s_lo).abs().max((hi - pred.s_hi).abs())) / bw)
        }
        _ => None,
    };

    let q = atom_at_min(field.model()).map(|atom| env.config().p * atom);
    Ok(FlatEdgeReport {
        q,
        nu_min,
        t,
        radius,
        contact_fraction: contact.len() as f64 / (radius + 1) as f64,
        contact,
        bins,
        s_min,
        s_max,
        prediction,
        endpoint_gap_bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{generate, EnvConfig};
    use crate::lattice::CenteredBox;
    use crate::passage::{sample_field, PassageModel};
    use crate::stats::pooled_stderr;

    #[test]
    fn all_bonds_open_gives_maximal_speed() {
        let params = OrientedParams { generations: 200, replicas: 4, survival_threshold: 0.05 };
        let est = oriented_speed(1.0, 7, &params).unwrap();
        assert!(est.supercritical);
        assert_eq!(est.survival_freq, 1.0);
        assert!((est.alpha_hat.unwrap() - MAX_ALPHA).abs() < 1e-15);
        let (m, n) = est.endpoints().unwrap();
        assert!((m[0] - 1.0).abs() < 1e-12 && m[1].abs() < 1e-12);
        assert!((n[1] - 1.0).abs() < 1e-12 && n[0].abs() < 1e-12);
    }

    #[test]
    fn low_q_dies_out() {
        let params = OrientedParams { generations: 400, replicas: 20, survival_threshold: 0.05 };
        let est = oriented_speed(0.55, 11, &params).unwrap();
        assert!(!est.supercritical, "survival {}", est.survival_freq);
        assert!(est.alpha_hat.is_none());
    }

    #[test]
    fn supercritical_q_is_stable_across_pools() {
        let params = OrientedParams { generations: 400, replicas: 20, survival_threshold: 0.05 };
        let a = oriented_speed(0.85, 100, &params).unwrap();
        let b = oriented_speed(0.85, 200, &params).unwrap();
        assert!(a.supercritical && b.supercritical);
        let (va, vb) = (a.alpha_hat.unwrap(), b.alpha_hat.unwrap());
        assert!(va > 0.0 && va < MAX_ALPHA);
        assert!((va - vb).abs() <= 3.0 * pooled_stderr(a.stderr, b.stderr), "{va} vs {vb}");
    }

    #[test]
    fn speed_monotone_in_q() {
        // shared innovations couple the configurations across q
        let params = OrientedParams { generations: 300, replicas: 8, survival_threshold: 0.05 };
        let mut last = -1.0;
        for q in [0.7, 0.8, 0.9, 1.0] {
            let est = oriented_speed(q, 42, &params).unwrap();
            let a = est.alpha_hat.unwrap_or(0.0);
            assert!(a >= last, "alpha({q}) = {a} regressed below {last}");
            last = a;
        }
    }

    #[test]
    fn endpoints_mirror_each_other() {
        let params = OrientedParams { generations: 300, replicas: 10, survival_threshold: 0.05 };
        let est = oriented_speed(0.8, 3, &params).unwrap();
        let (m, n) = est.endpoints().unwrap();
        assert!((m[0] - n[1]).abs() < 1e-12);
        assert!((m[1] - n[0]).abs() < 1e-12);
        assert!((m[0] + n[0] - 1.0).abs() < 1e-12);
    }

    fn full_lattice(l: i64) -> (Environment, PassageField) {
        let cfg = EnvConfig::new(CenteredBox::new(2, l, 0).unwrap(), 1.0, 1).unwrap();
        let env = generate(&cfg).unwrap();
        let field = sample_field(&PassageModel::dirac(1.0, 2), &env).unwrap();
        (env, field)
    }

    #[test]
    fn full_lattice_contact_spans_whole_edge() {
        let (env, field) = full_lattice(30);
        let report = flat_edge_scan(&env, &field, 25.0, &FlatEdgeParams::default(), None).unwrap();
        assert_eq!(report.radius, 25);
        assert_eq!(report.contact.len(), 26);
        assert_eq!(report.contact_fraction, 1.0);
        assert_eq!(report.s_min, Some(0.0));
        assert_eq!(report.s_max, Some(1.0));
        assert_eq!(report.q, Some(1.0));
    }

    #[test]
    fn dirac_scaling_of_the_radius() {
        let cfg = EnvConfig::new(CenteredBox::new(2, 20, 0).unwrap(), 1.0, 1).unwrap();
        let env = generate(&cfg).unwrap();
        let field = sample_field(&PassageModel::dirac(2.0, 2), &env).unwrap();
        let report = flat_edge_scan(&env, &field, 20.0, &FlatEdgeParams::default(), None).unwrap();
        assert_eq!(report.radius, 10);
        assert_eq!(report.contact_fraction, 1.0);
    }

    #[test]
    fn zero_infimum_rejected() {
        let cfg = EnvConfig::new(CenteredBox::new(2, 10, 0).unwrap(), 1.0, 1).unwrap();
        let env = generate(&cfg).unwrap();
        let field = sample_field(&PassageModel::exponential(1.0, 2), &env).unwrap();
        assert!(matches!(
            flat_edge_scan(&env, &field, 5.0, &FlatEdgeParams::default(), None),
            Err(Error::HypothesisViolated(_))
        ));
    }
}
