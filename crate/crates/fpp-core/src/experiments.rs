//! Coupling and comparison experiments: the exponential coupling with
//! its pathwise inclusion, shape scaling under exponential times,
//! stochastic-domination and sandwich comparisons, the chemical-distance
//! tail diagnostic, and the road-network pipeline.
//!
//! Every coupling here is realized through shared counters: the same
//! (seed, stream, counter) uniform drives both sides of a comparison, so
//! the claimed inclusions are checked pathwise on every seed, not just
//! in distribution.

use crate::asymptotics::{
    estimate_fan, estimate_fan_with, shape_from_estimates, DirectionalEstimate, ShapeEstimate,
};
use crate::environment::{self, generate, EnvConfig, Environment};
use crate::error::{Error, Result};
use crate::exec;
use crate::lattice::{CenteredBox, Point};
use crate::passage::{
    model_stats, quantile, sample_field, PassageField, PassageLaw, PassageModel, RoadNetwork,
    RoadNetworkSpec,
};
use crate::paths::{chemical_map, distance_map};
use crate::rng::{derive_seed, CounterRng, Stream};
use crate::stats::{pooled_stderr, proportion_stderr, OnlineStats};
use serde::{Deserialize, Serialize};

/// One statistical verification row: a measured value against its
/// closed-form expectation, with the tolerance actually applied.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatCheck {
    pub name: String,
    pub value: f64,
    pub expected: f64,
    pub tol: f64,
    pub pass: bool,
}

impl StatCheck {
    fn new(name: &str, value: f64, expected: f64, tol: f64) -> Self {
        StatCheck { name: name.into(), value, expected, tol, pass: (value - expected).abs() <= tol }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingHorizon {
    pub t: f64,
    pub wet_full: usize,
    pub wet_thinned: usize,
    pub inclusion_ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingRun {
    pub p: f64,
    pub seed: u64,
    pub horizons: Vec<CouplingHorizon>,
    pub marginals: Vec<StatCheck>,
    pub marginals_pass: bool,
}

/// The exponential coupling: per edge, eta ~ Exp(p), x ~ Exp(1-p) and
/// z ~ Exp(1) independent; the thinned model keeps the edge open when
/// eta <= x (probability p) with time eta, and redraws time z on closed
/// edges. The thinned wet set is contained in the full-lattice wet set
/// at every horizon, pathwise; a violation is a hard error. The derived
/// pair (open bit, time) is Bernoulli(p) x Exp(1), independent, which
/// the marginal checks verify at three standard errors.
pub fn exponential_coupling(
    box_: &CenteredBox,
    p: f64,
    horizons: &[f64],
    seed: u64,
) -> Result<CouplingRun> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::InvalidModel(format!("coupling needs p in (0,1), got {p}")));
    }
    let n_edges = box_.n_edges();
    let rng_eta = CounterRng::new(seed, Stream::CouplingEta);
    let rng_x = CounterRng::new(seed, Stream::CouplingX);
    let rng_z = CounterRng::new(seed, Stream::CouplingZ);

    let mut eta = vec![0.0f64; n_edges];
    exec::fill_indexed(&mut eta, |e| rng_eta.exponential(e as u64, p));
    let mut open = vec![false; n_edges];
    {
        let eta = &eta;
        exec::fill_indexed(&mut open, |e| eta[e] <= rng_x.exponential(e as u64, 1.0 - p));
    }
    let mut eta_prime = vec![0.0f64; n_edges];
    {
        let (eta, open) = (&eta, &open);
        exec::fill_indexed(&mut eta_prime, |e| {
            if open[e] {
                eta[e]
            } else {
                rng_z.exponential(e as u64, 1.0)
            }
        });
    }

    let env_full = generate(&EnvConfig::new(box_.clone(), 1.0, seed)?)?;
    let env_thin =
        environment::from_open_bits(&EnvConfig::new(box_.clone(), p, seed)?, |e| open[e])?;
    let field_full =
        PassageField::from_times(box_.clone(), PassageModel::exponential(p, seed), eta.clone())?;
    let field_thin = PassageField::from_times(
        box_.clone(),
        PassageModel::exponential(1.0, seed),
        eta_prime.clone(),
    )?;

    let origin = Point::origin(box_.dim());
    let max_t = horizons.iter().cloned().fold(0.0, f64::max);
    let dm_full = distance_map(&env_full, &field_full, &origin, max_t)?;
    let dm_thin = distance_map(&env_thin, &field_thin, &origin, max_t)?;

    let mut horizon_rows = Vec::with_capacity(horizons.len());
    for &t in horizons {
        let mut wet_full = 0usize;
        let mut wet_thinned = 0usize;
        let mut inclusion_ok = true;
        for v in 0..box_.n_vertices() {
            let in_full = dm_full.cost_of_idx(v).is_some_and(|c| c <= t);
            let in_thin = dm_thin.cost_of_idx(v).is_some_and(|c| c <= t);
            wet_full += in_full as usize;
            wet_thinned += in_thin as usize;
            if in_thin && !in_full {
                inclusion_ok = false;
            }
        }
        if !inclusion_ok {
            return Err(Error::CouplingViolation(format!(
                "thinned wet set escapes the full wet set at horizon {t} (seed {seed})"
            )));
        }
        horizon_rows.push(CouplingHorizon { t, wet_full, wet_thinned, inclusion_ok });
    }

    // marginals of the derived pair
    let n = n_edges as u64;
    let open_freq = open.iter().filter(|&&b| b).count() as f64 / n_edges as f64;
    let mut all = OnlineStats::new();
    let mut on_open = OnlineStats::new();
    let mut on_closed = OnlineStats::new();
    let mut sq = OnlineStats::new();
    for e in 0..n_edges {
        all.push(eta_prime[e]);
        sq.push(eta_prime[e] * eta_prime[e]);
        if open[e] {
            on_open.push(eta_prime[e]);
        } else {
            on_closed.push(eta_prime[e]);
        }
    }
    let var = sq.mean() - all.mean() * all.mean();
    let marginals = vec![
        StatCheck::new("P(open) = p", open_freq, p, 3.0 * proportion_stderr(p, n)),
        StatCheck::new("E eta' = 1", all.mean(), 1.0, 3.0 * all.stderr()),
        // Var of Exp(1) is 1; the error of the plug-in variance is driven
        // by the spread of eta'^2
        StatCheck::new("Var eta' = 1", var, 1.0, 3.0 * sq.stderr()),
        StatCheck::new(
            "independence: E[eta'|open] - E[eta'|closed]",
            on_open.mean() - on_closed.mean(),
            0.0,
            3.0 * pooled_stderr(on_open.stderr(), on_closed.stderr()),
        ),
    ];
    let marginals_pass = marginals.iter().all(|c| c.pass);
    Ok(CouplingRun { p, seed, horizons: horizon_rows, marginals, marginals_pass })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingRow {
    pub lambda: f64,
    pub mu_hat: f64,
    pub stderr: f64,
    pub expected: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingTable {
    pub direction: Point,
    pub base_lambda: f64,
    pub rows: Vec<ScalingRow>,
    pub pass: bool,
}

/// Time-constant scaling under exponential times: multiplying the rate
/// by lambda divides every travel time in law by lambda, so the
/// directional constant must scale as mu_base / lambda. The first entry
/// of `lambdas` is the baseline and reuses its own run (exact ratio 1);
/// the others run on independently derived passage seeds so the check
/// is a real statistical comparison.
pub fn scaling_check(
    cfg: &EnvConfig,
    lambdas: &[f64],
    direction: &Point,
    env_seeds: &[u64],
    passage_seed: u64,
    n_hits: usize,
) -> Result<ScalingTable> {
    if lambdas.is_empty() {
        return Err(Error::InvalidModel("no scaling factors supplied".into()));
    }
    let base_lambda = lambdas[0];
    let estimates: Vec<DirectionalEstimate> = lambdas
        .iter()
        .enumerate()
        .map(|(i, &lam)| {
            let seed = if i == 0 { passage_seed } else { derive_seed(passage_seed, i as u64) };
            let model = PassageModel::exponential(lam, seed);
            Ok(estimate_fan(cfg, &model, env_seeds, std::slice::from_ref(direction), n_hits)?
                .pop()
                .unwrap())
        })
        .collect::<Result<_>>()?;
    let base = &estimates[0];
    let rows: Vec<ScalingRow> = lambdas
        .iter()
        .zip(&estimates)
        .map(|(&lam, est)| {
            let factor = base_lambda / lam;
            let expected = base.mu_hat * factor;
            let tol = 3.0 * pooled_stderr(est.stderr, base.stderr * factor);
            ScalingRow {
                lambda: lam,
                mu_hat: est.mu_hat,
                stderr: est.stderr,
                expected,
                tol,
                pass: (est.mu_hat - expected).abs() <= tol,
            }
        })
        .collect();
    let pass = rows.iter().all(|r| r.pass);
    Ok(ScalingTable { direction: direction.clone(), base_lambda, rows, pass })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub p: f64,
    pub p_prime: f64,
    pub vertices_checked: usize,
    pub mu: DirectionalEstimate,
    pub mu_prime: DirectionalEstimate,
    pub mu_ordered: bool,
}

/// Stochastic comparison through shared uniforms: raise the density from
/// p to p' >= p and lower the law from nu to a stochastically smaller
/// nu'. Every open path survives with smaller times, so travel times can
/// only shrink; the check is exact on every seed and replica, and a
/// violation is a hard error.
#[allow(clippy::too_many_arguments)]
pub fn stochastic_comparison(
    cfg: &EnvConfig,
    p_prime: f64,
    law: &PassageLaw,
    law_prime: &PassageLaw,
    env_seeds: &[u64],
    passage_seed: u64,
    direction: &Point,
    n_hits: usize,
) -> Result<ComparisonReport> {
    if p_prime < cfg.p {
        return Err(Error::InvalidModel(format!(
            "comparison needs p <= p', got {} > {p_prime}",
            cfg.p
        )));
    }
    if !quantile_dominates(law, law_prime)? {
        return Err(Error::InvalidModel(
            "the primed law is not stochastically smaller than the base law".into(),
        ));
    }
    let cfg_prime = EnvConfig::new(cfg.box_.clone(), p_prime, cfg.seed)?;
    let origin = Point::origin(cfg.dim());

    let checked: Vec<Result<usize>> = exec::map_indexed(env_seeds.len(), |r| {
        let env_seed = env_seeds[r];
        let field_seed = derive_seed(passage_seed, env_seed);
        let env = generate(&cfg.with_seed(env_seed))?;
        let env_p = generate(&cfg_prime.with_seed(env_seed))?;
        let field = sample_field(&PassageModel::new(law.clone(), field_seed), &env)?;
        let field_p = sample_field(&PassageModel::new(law_prime.clone(), field_seed), &env_p)?;
        let dm = distance_map(&env, &field, &origin, f64::INFINITY)?;
        let dm_p = distance_map(&env_p, &field_p, &origin, f64::INFINITY)?;
        let mut n_checked = 0usize;
        for v in 0..cfg.box_.n_vertices() {
            if let Some(d) = dm.cost_of_idx(v) {
                match dm_p.cost_of_idx(v) {
                    Some(dp) if dp <= d => n_checked += 1,
                    other => {
                        return Err(Error::CouplingViolation(format!(
                            "domination fails at vertex {v}: d = {d}, d' = {other:?} (seed {env_seed})"
                        )))
                    }
                }
            }
        }
        Ok(n_checked)
    });
    let mut vertices_checked = 0usize;
    for c in checked {
        vertices_checked += c?;
    }

    let mu = estimate_fan(
        cfg,
        &PassageModel::new(law.clone(), passage_seed),
        env_seeds,
        std::slice::from_ref(direction),
        n_hits,
    )?
    .pop()
    .unwrap();
    let mu_prime = estimate_fan(
        &cfg_prime,
        &PassageModel::new(law_prime.clone(), passage_seed),
        env_seeds,
        std::slice::from_ref(direction),
        n_hits,
    )?
    .pop()
    .unwrap();
    let mu_ordered = mu_prime.mu_hat <= mu.mu_hat + 3.0 * pooled_stderr(mu.stderr, mu_prime.stderr);
    Ok(ComparisonReport {
        p: cfg.p,
        p_prime,
        vertices_checked,
        mu,
        mu_prime,
        mu_ordered,
    })
}

/// Quantile-function dominance on a fine grid; exact for the piecewise
/// closed-form product laws used here.
fn quantile_dominates(law: &PassageLaw, law_prime: &PassageLaw) -> Result<bool> {
    const GRID: usize = 20_000;
    for i in 0..GRID {
        let u = (i as f64 + 0.5) / GRID as f64;
        if quantile(law, u)? < quantile(law_prime, u)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SandwichRow {
    pub u: Point,
    pub mu_hat: f64,
    pub mu_stderr: f64,
    pub chem_mu_hat: f64,
    pub chem_stderr: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SandwichReport {
    pub nu_min: f64,
    pub nu_mean: f64,
    pub rows: Vec<SandwichRow>,
    pub pass: bool,
}

/// Sandwich of the time constant between scaled chemical-distance
/// constants: nu_min * mu_chem <= mu <= nu_mean * mu_chem, checked per
/// direction at three pooled standard errors on shared environments.
pub fn sandwich_check(
    cfg: &EnvConfig,
    model: &PassageModel,
    directions: &[Point],
    env_seeds: &[u64],
    n_hits: usize,
) -> Result<SandwichReport> {
    let stats = model_stats(model);
    let mu = estimate_fan(cfg, model, env_seeds, directions, n_hits)?;
    let chem_model = PassageModel::dirac(1.0, model.seed);
    let chem = estimate_fan(cfg, &chem_model, env_seeds, directions, n_hits)?;
    let rows: Vec<SandwichRow> = mu
        .iter()
        .zip(&chem)
        .map(|(m, c)| {
            let lower = stats.nu_min * c.mu_hat;
            let lower_tol = 3.0 * pooled_stderr(m.stderr, stats.nu_min * c.stderr);
            let upper = stats.nu_mean * c.mu_hat;
            let upper_tol = 3.0 * pooled_stderr(m.stderr, stats.nu_mean * c.stderr);
            SandwichRow {
                u: m.u.clone(),
                mu_hat: m.mu_hat,
                mu_stderr: m.stderr,
                chem_mu_hat: c.mu_hat,
                chem_stderr: c.stderr,
                lower_ok: m.mu_hat >= lower - lower_tol,
                upper_ok: m.mu_hat <= upper + upper_tol,
            }
        })
        .collect();
    let pass = rows.iter().all(|r| r.lower_ok && r.upper_ok);
    Ok(SandwichReport { nu_min: stats.nu_min, nu_mean: stats.nu_mean, rows, pass })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailDiagnostic {
    /// l1 radii of the sampled spheres
    pub radii: Vec<u64>,
    pub r_grid: Vec<f64>,
    /// connected pairs observed at each radius
    pub samples: Vec<u64>,
    /// freq[i][j]: empirical P(D > r_grid[j] * |x|_1, 0 <-> x) at radius radii[i]
    pub freq: Vec<Vec<f64>>,
    /// smallest grid ratio whose tail at the largest radius has no
    /// observations left
    pub rho_hat: Option<f64>,
}

/// per-radius sample counts and per-(radius, ratio) exceedance counts
type TailCounts = (Vec<u64>, Vec<Vec<u64>>);

/// Empirical tail of the chemical distance against multiples of the l1
/// norm, over connected pairs (0, x) pooled across replicas.
pub fn chemical_tail_diagnostic(
    cfg: &EnvConfig,
    env_seeds: &[u64],
    radii: &[u64],
    r_grid: &[f64],
) -> Result<TailDiagnostic> {
    let box_ = &cfg.box_;
    let d = box_.dim();
    let origin = Point::origin(d);
    let origin_idx = box_.vertex_index(&origin)?;
    let per_replica: Vec<Result<TailCounts>> =
        exec::map_indexed(env_seeds.len(), |r| {
            let env = generate(&cfg.with_seed(env_seeds[r]))?;
            let cm = chemical_map(&env, &origin)?;
            let mut samples = vec![0u64; radii.len()];
            let mut exceed = vec![vec![0u64; r_grid.len()]; radii.len()];
            let mut coords = vec![0i64; d];
            for v in 0..box_.n_vertices() {
                if v == origin_idx || env.label_of(v) != env.label_of(origin_idx) {
                    continue;
                }
                box_.vertex_coords(v, &mut coords);
                if coords.iter().any(|c| c.abs() > box_.inner_half_width()) {
                    continue;
                }
                let norm: u64 = coords.iter().map(|c| c.unsigned_abs()).sum();
                let Some(bin) = radii.iter().position(|&m| m == norm) else { continue };
                samples[bin] += 1;
                let dist = cm.hops_of_idx(v).expect("connected") as f64;
                for (j, &ratio) in r_grid.iter().enumerate() {
                    if dist > ratio * norm as f64 {
                        exceed[bin][j] += 1;
                    }
                }
            }
            Ok((samples, exceed))
        });

    let mut samples = vec![0u64; radii.len()];
    let mut exceed = vec![vec![0u64; r_grid.len()]; radii.len()];
    for row in per_replica {
        let (s, e) = row?;
        for i in 0..radii.len() {
            samples[i] += s[i];
            for j in 0..r_grid.len() {
                exceed[i][j] += e[i][j];
            }
        }
    }
    let freq: Vec<Vec<f64>> = exceed
        .iter()
        .zip(&samples)
        .map(|(row, &n)| {
            row.iter().map(|&k| if n > 0 { k as f64 / n as f64 } else { 0.0 }).collect()
        })
        .collect();
    let last = radii.len() - 1;
    let rho_hat = (samples[last] > 0)
        .then(|| {
            r_grid
                .iter()
                .zip(&freq[last])
                .find(|(_, &f)| f < 1.0 / samples[last] as f64)
                .map(|(&r, _)| r)
        })
        .flatten();
    Ok(TailDiagnostic { radii: radii.to_vec(), r_grid: r_grid.to_vec(), samples, freq, rho_hat })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoadNetworkRun {
    pub company: usize,
    pub n_companies: usize,
    pub accepted_seeds: Vec<u64>,
    pub shape: ShapeEstimate,
    /// wet-set cardinalities at the requested horizons, per replica
    pub horizon_counts: Vec<Vec<(f64, usize)>>,
}

/// End-to-end shape estimation for one company of the road network:
/// condition on the origin lying in that company's giant, estimate the
/// directional constants over the fan on the company's own environment,
/// and record wet-set growth at the requested horizons.
#[allow(clippy::too_many_arguments)]
pub fn road_network_run(
    box_: &CenteredBox,
    spec: &RoadNetworkSpec,
    base_seed: u64,
    replicas: usize,
    max_tries: usize,
    horizons: &[f64],
    fan: &[Point],
    n_hits: usize,
) -> Result<RoadNetworkRun> {
    spec.validate()?;
    let company = spec.company;
    let origin = Point::origin(box_.dim());

    let mut accepted = Vec::with_capacity(replicas);
    let mut tried = 0usize;
    let mut seed = base_seed;
    while accepted.len() < replicas && tried < max_tries {
        let net = RoadNetwork::build(spec.clone(), box_, seed)?;
        if net.company_env(company).in_giant(&origin)? {
            accepted.push(seed);
        }
        seed = seed.wrapping_add(1);
        tried += 1;
    }
    if accepted.len() < replicas {
        return Err(Error::Conditioning(format!(
            "only {}/{replicas} road seeds put the origin in company {company}'s giant",
            accepted.len()
        )));
    }

    let provider = |r: usize| -> Result<(Environment, PassageField)> {
        let net = RoadNetwork::build(spec.clone(), box_, accepted[r])?;
        Ok((net.company_env(company).clone(), net.company_field(company)))
    };
    let estimates = estimate_fan_with(accepted.len(), provider, fan, n_hits)?;
    let shape = shape_from_estimates(estimates)?;

    let horizon_counts: Vec<Vec<(f64, usize)>> = if horizons.is_empty() {
        vec![Vec::new(); accepted.len()]
    } else {
        let rows: Vec<Result<Vec<(f64, usize)>>> = exec::map_indexed(accepted.len(), |r| {
            let net = RoadNetwork::build(spec.clone(), box_, accepted[r])?;
            let env = net.company_env(company);
            let field = net.company_field(company);
            let max_t = horizons.iter().cloned().fold(0.0, f64::max);
            let dm = distance_map(env, &field, &origin, max_t)?;
            Ok(horizons
                .iter()
                .map(|&t| {
                    let count = (0..box_.n_vertices())
                        .filter(|&v| dm.cost_of_idx(v).is_some_and(|c| c <= t))
                        .count();
                    (t, count)
                })
                .collect())
        });
        rows.into_iter().collect::<Result<_>>()?
    };

    Ok(RoadNetworkRun {
        company,
        n_companies: spec.n_companies(),
        accepted_seeds: accepted,
        shape,
        horizon_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::conditioned_seeds;

    fn boxed(l: i64) -> CenteredBox {
        CenteredBox::with_default_margin(2, l).unwrap()
    }

    #[test]
    fn coupling_inclusion_and_marginals() {
        for seed in [1, 2, 3] {
            let run = exponential_coupling(&boxed(60), 0.7, &[5.0, 10.0, 20.0], seed).unwrap();
            assert!(run.horizons.iter().all(|h| h.inclusion_ok));
            assert!(
                run.horizons.windows(2).all(|w| w[0].wet_full <= w[1].wet_full),
                "wet sets grow with the horizon"
            );
            assert!(run.marginals_pass, "marginals: {:?}", run.marginals);
        }
    }

    #[test]
    fn coupling_rejects_degenerate_p() {
        assert!(exponential_coupling(&boxed(5), 1.0, &[1.0], 1).is_err());
    }

    #[test]
    fn scaling_baseline_is_exact_and_factors_hold() {
        let cfg = EnvConfig::new(boxed(50), 0.75, 900).unwrap();
        let seeds = conditioned_seeds(&cfg, 6, 60).unwrap();
        let table = scaling_check(&cfg, &[1.0, 2.0], &Point::xy(1, 0), &seeds, 17, 100).unwrap();
        assert_eq!(table.rows[0].mu_hat, table.rows[0].expected);
        assert!(table.pass, "{:?}", table.rows);
    }

    #[test]
    fn comparison_identical_models_is_equality() {
        let cfg = EnvConfig::new(boxed(30), 0.7, 50).unwrap();
        let seeds = conditioned_seeds(&cfg, 3, 30).unwrap();
        let rep = stochastic_comparison(
            &cfg,
            0.7,
            &PassageLaw::Dirac(1.0),
            &PassageLaw::Dirac(1.0),
            &seeds,
            5,
            &Point::xy(1, 0),
            50,
        )
        .unwrap();
        assert_eq!(rep.mu.mu_hat, rep.mu_prime.mu_hat);
        assert!(rep.mu_ordered);
    }

    #[test]
    fn comparison_dirac_scaling_and_density() {
        let cfg = EnvConfig::new(boxed(30), 0.7, 60).unwrap();
        let seeds = conditioned_seeds(&cfg, 3, 30).unwrap();
        let rep = stochastic_comparison(
            &cfg,
            0.8,
            &PassageLaw::Dirac(2.0),
            &PassageLaw::Dirac(1.0),
            &seeds,
            5,
            &Point::xy(1, 0),
            50,
        )
        .unwrap();
        assert!(rep.vertices_checked > 0);
        assert!(rep.mu_prime.mu_hat <= rep.mu.mu_hat);
    }

    #[test]
    fn thinned_shape_inside_scaled_full_shape() {
        // thinning the lattice to density p with Exp(1) times can only
        // slow the spread compared to the full lattice with Exp(p)
        // times, so the directional constants are ordered
        let p = 0.7;
        let cfg_thin = EnvConfig::new(boxed(150), p, 210).unwrap();
        let seeds = conditioned_seeds(&cfg_thin, 6, 60).unwrap();
        let u = Point::xy(1, 0);
        let thin = estimate_fan(
            &cfg_thin,
            &PassageModel::exponential(1.0, 7),
            &seeds,
            std::slice::from_ref(&u),
            1000,
        )
        .unwrap()
        .pop()
        .unwrap();
        let cfg_full = EnvConfig::new(boxed(150), 1.0, 210).unwrap();
        let full = estimate_fan(
            &cfg_full,
            &PassageModel::exponential(p, 7),
            &seeds,
            std::slice::from_ref(&u),
            1000,
        )
        .unwrap()
        .pop()
        .unwrap();
        let tol = 3.0 * pooled_stderr(thin.stderr, full.stderr);
        assert!(
            thin.mu_hat >= full.mu_hat - tol,
            "thinned constant {} below full-lattice constant {}",
            thin.mu_hat,
            full.mu_hat
        );
    }

    #[test]
    fn comparison_rejects_wrong_order() {
        let cfg = EnvConfig::new(boxed(10), 0.7, 60).unwrap();
        let res = stochastic_comparison(
            &cfg,
            0.8,
            &PassageLaw::Dirac(1.0),
            &PassageLaw::Dirac(2.0),
            &[1],
            5,
            &Point::xy(1, 0),
            50,
        );
        assert!(res.is_err());
    }

    #[test]
    fn sandwich_dirac_is_tight() {
        let cfg = EnvConfig::new(boxed(40), 0.75, 70).unwrap();
        let seeds = conditioned_seeds(&cfg, 4, 40).unwrap();
        let report =
            sandwich_check(&cfg, &PassageModel::dirac(2.0, 3), &[Point::xy(1, 0)], &seeds, 100)
                .unwrap();
        let row = &report.rows[0];
        // nu_min = nu_mean = 2: both sides equal twice the chemical constant
        assert_eq!(row.mu_hat, 2.0 * row.chem_mu_hat);
        assert!(report.pass);
    }

    #[test]
    fn sandwich_mixture_brackets() {
        let cfg = EnvConfig::new(boxed(50), 0.75, 80).unwrap();
        let seeds = conditioned_seeds(&cfg, 6, 60).unwrap();
        let report = sandwich_check(
            &cfg,
            &PassageModel::mixture(0.5, 1.0, 3.0, 3),
            &[Point::xy(1, 0), Point::xy(0, 1)],
            &seeds,
            100,
        )
        .unwrap();
        assert_eq!(report.nu_min, 1.0);
        assert_eq!(report.nu_mean, 2.0);
        assert!(report.pass, "{:?}", report.rows);
    }

    #[test]
    fn tail_full_lattice_has_no_excess() {
        let cfg = EnvConfig::new(boxed(30), 1.0, 90).unwrap();
        let diag = chemical_tail_diagnostic(&cfg, &[1, 2], &[5, 10, 20], &[1.0, 1.5, 2.0]).unwrap();
        // D = |x|_1 exactly, so nothing exceeds any r >= 1
        for row in &diag.freq {
            assert!(row.iter().all(|&f| f == 0.0));
        }
        assert_eq!(diag.rho_hat, Some(1.0));
    }

    #[test]
    fn tail_monotone_in_ratio() {
        let cfg = EnvConfig::new(boxed(40), 0.7, 91).unwrap();
        let diag =
            chemical_tail_diagnostic(&cfg, &[1, 2, 3, 4], &[8, 16, 24], &[1.0, 1.2, 1.5, 2.0])
                .unwrap();
        for row in &diag.freq {
            for w in row.windows(2) {
                assert!(w[0] >= w[1], "tail must be nonincreasing in r: {row:?}");
            }
        }
        // detours exist at p = 0.7
        assert!(diag.freq[1][0] > 0.0, "{:?}", diag.freq);
    }

    #[test]
    fn road_single_company_unit_costs_is_chemical_distance() {
        let box_ = boxed(30);
        let spec = RoadNetworkSpec { p: vec![0.75], f: vec![vec![0.0, 1.0]], company: 0 };
        let run = road_network_run(
            &box_,
            &spec,
            400,
            3,
            40,
            &[10.0],
            &[Point::xy(1, 0), Point::xy(0, 1)],
            50,
        )
        .unwrap();
        // unit costs on the company's own giant: exactly the chemical
        // distance on that environment, so mu >= 1 along the axes
        for d in &run.shape.directions {
            assert!(d.mu_hat >= 1.0);
        }
        assert!(run.shape.warning.is_none());
        assert!(run.horizon_counts.iter().all(|h| h[0].1 > 0));
    }

    #[test]
    fn road_symmetric_companies_agree() {
        let box_ = boxed(30);
        // congestion pricing independent of the company
        let f = vec![vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0]];
        let run0 = road_network_run(
            &box_,
            &RoadNetworkSpec { p: vec![0.75, 0.75], f: f.clone(), company: 0 },
            500,
            4,
            60,
            &[],
            &[Point::xy(1, 0)],
            50,
        )
        .unwrap();
        let run1 = road_network_run(
            &box_,
            &RoadNetworkSpec { p: vec![0.75, 0.75], f, company: 1 },
            500,
            4,
            60,
            &[],
            &[Point::xy(1, 0)],
            50,
        )
        .unwrap();
        let (a, b) = (&run0.shape.directions[0], &run1.shape.directions[0]);
        let tol = (4.0 * pooled_stderr(a.stderr, b.stderr)).max(0.05);
        assert!((a.mu_hat - b.mu_hat).abs() <= tol, "{} vs {}", a.mu_hat, b.mu_hat);
    }

    #[test]
    fn road_cost_sharing_lowers_travel_times() {
        // f decreasing in the sharing count: a second company can only
        // lower company 0's costs on coupled seeds
        let box_ = boxed(30);
        let one = RoadNetworkSpec { p: vec![0.75], f: vec![vec![0.0, 2.0]], company: 0 };
        let two = RoadNetworkSpec {
            p: vec![0.75, 0.75],
            f: vec![vec![0.0, 2.0, 1.0], vec![0.0, 2.0, 1.0]],
            company: 0,
        };
        let seed = 700;
        let net1 = RoadNetwork::build(one, &box_, seed).unwrap();
        let net2 = RoadNetwork::build(two, &box_, seed).unwrap();
        // company 0 sees the same environment in both builds, and on the
        // edges its clients can actually use (eta >= 1) the shared table
        // never costs more
        for e in 0..box_.n_edges() {
            assert_eq!(net1.company_env(0).is_open(e), net2.company_env(0).is_open(e));
            if net1.eta()[e] >= 1 {
                assert!(net2.eta()[e] >= net1.eta()[e]);
                assert!(net2.company_field(0).time(e) <= net1.company_field(0).time(e));
            }
        }
        // hence travel times from the conditioned origin only shrink
        let env = net1.company_env(0);
        let origin = Point::origin(2);
        if env.in_giant(&origin).unwrap() {
            let d1 =
                distance_map(env, &net1.company_field(0), &origin, f64::INFINITY).unwrap();
            let d2 =
                distance_map(env, &net2.company_field(0), &origin, f64::INFINITY).unwrap();
            for v in 0..box_.n_vertices() {
                if let Some(a) = d1.cost_of_idx(v) {
                    assert!(d2.cost_of_idx(v).unwrap() <= a);
                }
            }
        }
    }
}
