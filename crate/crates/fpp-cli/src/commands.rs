//! Command implementations: each builds its inputs from the run config,
//! calls into the library, and writes deterministic CSV/JSON (and PGM)
//! artifacts into the output directory.

use crate::config::RunConfig;
use fpp_core::asymptotics::{
    check_norm_properties, direction_fan, estimate_fan, estimate_mu, hausdorff_trace, realize,
    shape_from_estimates, DirectionalEstimate,
};
use fpp_core::environment::conditioned_seeds;
use fpp_core::error::Error;
use fpp_core::experiments::{
    chemical_tail_diagnostic, exponential_coupling, road_network_run, sandwich_check,
    scaling_check, stochastic_comparison,
};
use fpp_core::flatedge::{flat_edge_scan, oriented_speed, FlatEdgeParams, OrientedParams};
use fpp_core::lattice::Point;
use fpp_core::passage::{atom_at_min, model_stats, sample_field};
use fpp_core::paths::wet_set;
use fpp_core::render::{render_wet_set, Overlay};
use fpp_core::stats::OnlineStats;
use serde_json::json;
use std::fmt::Write as _;
use std::path::Path;

pub enum Outcome {
    Pass,
    VerdictFailed(String),
}

pub enum CmdError {
    Config(String),
    Verdict(String),
}

impl From<Error> for CmdError {
    fn from(e: Error) -> Self {
        match e {
            Error::CouplingViolation(msg) => CmdError::Verdict(msg),
            other => CmdError::Config(other.to_string()),
        }
    }
}

impl From<String> for CmdError {
    fn from(s: String) -> Self {
        CmdError::Config(s)
    }
}

type CmdResult = Result<Outcome, CmdError>;

pub fn prepare_out(out: &Path, cfg: &RunConfig, command: &str) -> Result<(), CmdError> {
    std::fs::create_dir_all(out).map_err(|e| CmdError::Config(e.to_string()))?;
    write_file(out, "config.txt", cfg.echo(command))?;
    Ok(())
}

fn write_file(out: &Path, name: &str, content: String) -> Result<(), CmdError> {
    std::fs::write(out.join(name), content).map_err(|e| CmdError::Config(e.to_string()))
}

fn write_json(out: &Path, name: &str, value: &serde_json::Value) -> Result<(), CmdError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CmdError::Config(e.to_string()))?;
    text.push('\n');
    write_file(out, name, text)
}

fn mu_csv(estimates: &[DirectionalEstimate]) -> String {
    let d = estimates.first().map(|e| e.u.dim()).unwrap_or(2);
    let mut s = String::new();
    for i in 0..d {
        let _ = write!(s, "u{},", i + 1);
    }
    let _ = writeln!(s, "mu_hat,stderr,replicas,mean_hit");
    for e in estimates {
        for c in &e.u.0 {
            let _ = write!(s, "{c},");
        }
        let hits = OnlineStats::from_slice(&e.hits.iter().map(|&h| h as f64).collect::<Vec<_>>());
        let _ = writeln!(s, "{},{},{},{}", e.mu_hat, e.stderr, e.n_replicas(), hits.mean());
    }
    s
}

pub fn generate(cfg: &RunConfig, out: &Path) -> CmdResult {
    let env_cfg = cfg.env_config()?;
    let env = fpp_core::environment::generate(&env_cfg)?;
    let mut dump = Vec::new();
    env.export(&mut dump)?;
    write_file(out, "environment.txt", String::from_utf8(dump).expect("ascii dump"))?;
    write_json(
        out,
        "summary.json",
        &json!({
            "d": cfg.d,
            "L": cfg.l,
            "p": cfg.p,
            "seed_env": cfg.seed_env,
            "n_vertices": env.box_().n_vertices(),
            "n_edges": env.box_().n_edges(),
            "open_edges": env.open_edge_count(),
            "giant_size": env.giant_size(),
            "giant_density": env.giant_density(),
        }),
    )?;
    Ok(Outcome::Pass)
}

pub fn mu(cfg: &RunConfig, out: &Path) -> CmdResult {
    let env_cfg = cfg.env_config()?;
    let model = cfg.passage_model()?;
    let u = cfg.direction()?;
    let seeds = conditioned_seeds(&env_cfg, cfg.replicas, cfg.max_tries())?;
    let est = estimate_mu(&env_cfg, &model, &seeds, &u, cfg.n_hits)?;
    write_file(out, "mu.csv", mu_csv(std::slice::from_ref(&est)))?;
    write_json(
        out,
        "summary.json",
        &json!({
            "estimate": est,
            "env_seeds": seeds,
        }),
    )?;
    Ok(Outcome::Pass)
}

pub fn shape(cfg: &RunConfig, out: &Path) -> CmdResult {
    let env_cfg = cfg.env_config()?;
    let model = cfg.passage_model()?;
    let seeds = conditioned_seeds(&env_cfg, cfg.replicas, cfg.max_tries())?;
    let mut fan = direction_fan(cfg.d, cfg.fan_max);
    // multiples for the homogeneity checks
    let mut extra = vec![Point::xy(2, 0).0, Point::xy(0, 2).0, vec![2, 2], vec![3, 0]]
        .into_iter()
        .map(Point)
        .filter(|p| p.dim() == cfg.d)
        .collect::<Vec<_>>();
    fan.append(&mut extra);
    fan.sort();
    fan.dedup();

    let estimates = estimate_fan(&env_cfg, &model, &seeds, &fan, cfg.n_hits)?;
    let report = check_norm_properties(&estimates, cfg.stderr_mult, 10);
    let shape = shape_from_estimates(estimates.clone())?;
    write_file(out, "mu.csv", mu_csv(&estimates))?;

    let trace = if cfg.t.is_empty() {
        None
    } else {
        let (env, field) = realize(&env_cfg, &model, seeds[0])?;
        Some(hausdorff_trace(&env, &field, &shape.ball_points, None, &cfg.t)?)
    };
    if let Some(tr) = &trace {
        let mut s = String::from("t,distance\n");
        for (t, d) in tr.times.iter().zip(&tr.distances) {
            let _ = writeln!(s, "{t},{d}");
        }
        write_file(out, "trace.csv", s)?;
    }

    if cfg.render && !cfg.t.is_empty() {
        let t = cfg.t.iter().cloned().fold(0.0, f64::max);
        let (env, field) = realize(&env_cfg, &model, seeds[0])?;
        let ws = wet_set(&env, &field, &Point::origin(cfg.d), t)?;
        let hull_t: Vec<[f64; 2]> =
            shape.hull.iter().map(|p| [p[0] * t, p[1] * t]).collect();
        let overlays = vec![Overlay::polygon("estimated ball", "blue", hull_t)];
        render_wet_set(&env, &ws, &overlays, &out.join("snapshot.pgm"))?;
    }

    write_json(
        out,
        "shape.json",
        &json!({
            "shape": shape,
            "properties": report,
            "trace": trace,
            "env_seeds": seeds,
        }),
    )?;
    if report.all_pass() {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::VerdictFailed(format!(
            "{} norm-property checks failed",
            report.failures().len()
        )))
    }
}

pub fn flat_edge(cfg: &RunConfig, out: &Path) -> CmdResult {
    if cfg.t.is_empty() {
        return Err(CmdError::Config("flat-edge needs a horizon (--t)".into()));
    }
    let env_cfg = cfg.env_config()?;
    let model = cfg.passage_model()?;
    let stats = model_stats(&model);
    let q = match cfg.q {
        Some(q) => q,
        None => {
            let atom = atom_at_min(&model).ok_or_else(|| {
                CmdError::Config("model has no closed-form atom at its minimum; pass --q".into())
            })?;
            cfg.p * atom
        }
    };
    let params = OrientedParams {
        generations: cfg.generations,
        replicas: cfg.oriented_replicas,
        survival_threshold: 0.05,
    };
    let speed = oriented_speed(q, cfg.seed_env, &params)?;

    let seeds = conditioned_seeds(&env_cfg, 1, cfg.max_tries())?;
    let (env, field) = realize(&env_cfg, &model, seeds[0])?;
    let t = cfg.t.iter().cloned().fold(0.0, f64::max);
    let fe_params = FlatEdgeParams { eps: cfg.eps_contact, n_bins: cfg.bins };
    let report = flat_edge_scan(&env, &field, t, &fe_params, Some(&speed))?;

    let mut s = String::from("x,y\n");
    for p in &report.contact {
        let _ = writeln!(s, "{},{}", p.0[0], p.0[1]);
    }
    write_file(out, "contact.csv", s)?;

    if cfg.render {
        let ws = wet_set(&env, &field, &Point::origin(2), t)?;
        let r = t / stats.nu_min;
        let mut overlays = vec![Overlay::diamond(r, "red")];
        if let Some(pred) = &report.prediction {
            overlays.push(Overlay::segment(
                "predicted flat edge",
                "green",
                [pred.m[0] * r, pred.m[1] * r],
                [pred.n[0] * r, pred.n[1] * r],
            ));
        }
        render_wet_set(&env, &ws, &overlays, &out.join("snapshot.pgm"))?;
    }

    write_json(
        out,
        "flatedge.json",
        &json!({
            "oriented": speed,
            "scan": report,
            "env_seed": seeds[0],
        }),
    )?;
    Ok(Outcome::Pass)
}

pub fn couple(cfg: &RunConfig, out: &Path) -> CmdResult {
    let box_ = cfg.box_()?;
    let run = exponential_coupling(&box_, cfg.p, &cfg.t, cfg.seed_env)?;
    write_json(out, "coupling.json", &json!(run))?;
    let mut s = String::from("t,wet_full,wet_thinned,inclusion\n");
    for h in &run.horizons {
        let _ = writeln!(s, "{},{},{},{}", h.t, h.wet_full, h.wet_thinned, h.inclusion_ok);
        println!("B'({t}) in B({t}): {}", if h.inclusion_ok { "PASS" } else { "FAIL" }, t = h.t);
    }
    write_file(out, "coupling.csv", s)?;
    if run.marginals_pass {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::VerdictFailed("coupling marginal checks failed".into()))
    }
}

pub fn compare_domination(cfg: &RunConfig, out: &Path) -> CmdResult {
    let env_cfg = cfg.env_config()?;
    let p2 = cfg.p2.ok_or_else(|| CmdError::Config("compare needs --p2".into()))?;
    let law = cfg.passage_model()?.law;
    let law2 = match &cfg.model2 {
        Some(m) => crate::config::parse_model(m, cfg.d, cfg.seed_passage)?.law,
        None => law.clone(),
    };
    let seeds = conditioned_seeds(&env_cfg, cfg.replicas, cfg.max_tries())?;
    let rep = stochastic_comparison(
        &env_cfg,
        p2,
        &law,
        &law2,
        &seeds,
        cfg.seed_passage,
        &cfg.direction()?,
        cfg.n_hits,
    )?;
    write_json(out, "comparison.json", &json!(rep))?;
    println!("pathwise domination: PASS ({} vertices)", rep.vertices_checked);
    if rep.mu_ordered {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::VerdictFailed("estimated constants are not ordered".into()))
    }
}

pub fn compare_sandwich(cfg: &RunConfig, out: &Path) -> CmdResult {
    let env_cfg = cfg.env_config()?;
    let model = cfg.passage_model()?;
    let seeds = conditioned_seeds(&env_cfg, cfg.replicas, cfg.max_tries())?;
    let dirs: Vec<Point> = (0..cfg.d)
        .map(|i| {
            let mut c = vec![0i64; cfg.d];
            c[i] = 1;
            Point(c)
        })
        .collect();
    let rep = sandwich_check(&env_cfg, &model, &dirs, &seeds, cfg.n_hits)?;
    let mut s = String::from("u,mu_hat,mu_stderr,chem_mu_hat,chem_stderr,lower_ok,upper_ok\n");
    for r in &rep.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.u, r.mu_hat, r.mu_stderr, r.chem_mu_hat, r.chem_stderr, r.lower_ok, r.upper_ok
        );
    }
    write_file(out, "sandwich.csv", s)?;
    write_json(out, "sandwich.json", &json!(rep))?;
    if rep.pass {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::VerdictFailed("sandwich bounds violated".into()))
    }
}

pub fn compare_scaling(cfg: &RunConfig, out: &Path) -> CmdResult {
    let env_cfg = cfg.env_config()?;
    let seeds = conditioned_seeds(&env_cfg, cfg.replicas, cfg.max_tries())?;
    let table = scaling_check(
        &env_cfg,
        &cfg.lambdas,
        &cfg.direction()?,
        &seeds,
        cfg.seed_passage,
        cfg.n_hits,
    )?;
    let mut s = String::from("lambda,mu_hat,stderr,expected,tol,pass\n");
    for r in &table.rows {
        let _ =
            writeln!(s, "{},{},{},{},{},{}", r.lambda, r.mu_hat, r.stderr, r.expected, r.tol, r.pass);
    }
    write_file(out, "scaling.csv", s)?;
    write_json(out, "scaling.json", &json!(table))?;
    if table.pass {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::VerdictFailed("scaling rows out of tolerance".into()))
    }
}

pub fn roadnet(cfg: &RunConfig, out: &Path) -> CmdResult {
    let box_ = cfg.box_()?;
    let spec = cfg.road_spec()?;
    let fan = direction_fan(cfg.d, cfg.fan_max);
    let run = road_network_run(
        &box_,
        &spec,
        cfg.seed_env,
        cfg.replicas,
        cfg.max_tries(),
        &cfg.t,
        &fan,
        cfg.n_hits,
    )?;
    write_file(out, "mu.csv", mu_csv(&run.shape.directions))?;
    write_json(out, "roadnet.json", &json!(run))?;
    Ok(Outcome::Pass)
}

pub fn tail(cfg: &RunConfig, out: &Path) -> CmdResult {
    let env_cfg = cfg.env_config()?;
    let seeds: Vec<u64> = (0..cfg.replicas as u64).map(|i| cfg.seed_env.wrapping_add(i)).collect();
    let diag = chemical_tail_diagnostic(&env_cfg, &seeds, &cfg.radii, &cfg.r_grid)?;
    let mut s = String::from("radius,samples");
    for r in &diag.r_grid {
        let _ = write!(s, ",freq_r{r}");
    }
    s.push('\n');
    for (i, &radius) in diag.radii.iter().enumerate() {
        let _ = write!(s, "{radius},{}", diag.samples[i]);
        for f in &diag.freq[i] {
            let _ = write!(s, ",{f}");
        }
        s.push('\n');
    }
    write_file(out, "tail.csv", s)?;
    write_json(out, "tail.json", &json!(diag))?;
    Ok(Outcome::Pass)
}

pub fn render(cfg: &RunConfig, out: &Path) -> CmdResult {
    if cfg.t.is_empty() {
        return Err(CmdError::Config("render needs a horizon (--t)".into()));
    }
    let env_cfg = cfg.env_config()?;
    let model = cfg.passage_model()?;
    let seeds = conditioned_seeds(&env_cfg, 1, cfg.max_tries())?;
    let env = fpp_core::environment::generate(&env_cfg.with_seed(seeds[0]))?;
    let field = sample_field(&model, &env)?;
    let t = cfg.t.iter().cloned().fold(0.0, f64::max);
    let ws = wet_set(&env, &field, &Point::origin(cfg.d), t)?;
    let stats = model_stats(&model);
    let overlays = if stats.nu_min > 0.0 {
        vec![Overlay::diamond(t / stats.nu_min, "red")]
    } else {
        Vec::new()
    };
    let snap = render_wet_set(&env, &ws, &overlays, &out.join("snapshot.pgm"))?;
    let mut wet_csv = Vec::new();
    ws.export_csv(&mut wet_csv)?;
    write_file(out, "wet.csv", String::from_utf8(wet_csv).expect("ascii csv"))?;
    write_json(
        out,
        "summary.json",
        &json!({
            "env_seed": seeds[0],
            "t": t,
            "wet_count": ws.len(),
            "class_counts": snap.counts,
        }),
    )?;
    Ok(Outcome::Pass)
}
