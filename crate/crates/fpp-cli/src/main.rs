//! Command-line surface of the first-passage percolation simulator.
//!
//! Every run is reproducible from its two seeds (environment, passage)
//! plus the flags; the effective configuration is echoed to the output
//! directory and all emitted CSV/PGM files are byte-stable across runs.
//!
//! Exit codes: 0 success, 1 verdict failure (a pathwise coupling
//! violation or a failed property check), 2 usage or configuration
//! error.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand, ValueEnum};
use config::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fpp", version, about = "First-passage percolation on the giant percolation cluster")]
struct Cli {
    /// flat key = value config file; flags override its entries
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory (default: out/<command>-s<seed-env>)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// worker threads (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(flatten)]
    over: Overrides,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Overrides {
    /// lattice dimension
    #[arg(long, global = true)]
    d: Option<usize>,
    /// box half-width L (the box is [-L, L]^d)
    #[arg(long = "L", global = true)]
    l: Option<i64>,
    /// inner statistics margin (default L/5)
    #[arg(long, global = true)]
    margin: Option<i64>,
    /// edge density
    #[arg(long, global = true)]
    p: Option<f64>,
    /// passage model: dirac:c | exp:rate | mix:q:a:b | chi2:<kernel file>
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    seed_env: Option<u64>,
    #[arg(long, global = true)]
    seed_passage: Option<u64>,
    /// horizons, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    t: Option<Vec<f64>>,
    #[arg(long, global = true)]
    replicas: Option<usize>,
    /// direction fan: all primitive vectors with coordinates up to this
    #[arg(long, global = true)]
    fan_max: Option<i64>,
    /// cap on ray hits per direction
    #[arg(long, global = true)]
    n_hits: Option<usize>,
    /// statistical tolerance in pooled standard errors
    #[arg(long, global = true)]
    stderr_mult: Option<f64>,
    #[arg(long, global = true)]
    eps_deg: Option<f64>,
    #[arg(long, global = true)]
    eps_norm: Option<f64>,
    /// direction, e.g. "1,0"
    #[arg(long, global = true)]
    u: Option<String>,
    /// comparison density (compare)
    #[arg(long, global = true)]
    p2: Option<f64>,
    /// comparison model (compare)
    #[arg(long, global = true)]
    model2: Option<String>,
    /// exponential rates for the scaling table; first is the baseline
    #[arg(long, global = true, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    /// oriented-percolation parameter override (flat-edge)
    #[arg(long, global = true)]
    q: Option<f64>,
    #[arg(long, global = true)]
    generations: Option<usize>,
    #[arg(long, global = true)]
    oriented_replicas: Option<usize>,
    /// angular bins over the positive-quadrant boundary
    #[arg(long, global = true)]
    bins: Option<usize>,
    /// contact tolerance; 0 = exact arithmetic
    #[arg(long, global = true)]
    eps_contact: Option<f64>,
    /// road-company densities, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    companies: Option<Vec<f64>>,
    /// road cost table: rows per company ';'-separated, entries ','
    #[arg(long, global = true)]
    f_table: Option<String>,
    /// which company's travel times to analyze (0-based)
    #[arg(long, global = true)]
    company: Option<usize>,
    /// l1 radii for the tail diagnostic
    #[arg(long, global = true, value_delimiter = ',')]
    radii: Option<Vec<u64>>,
    /// distance/norm ratios for the tail diagnostic
    #[arg(long, global = true, value_delimiter = ',')]
    r_grid: Option<Vec<f64>>,
    /// cap on conditioning rejection attempts
    #[arg(long, global = true)]
    max_tries: Option<usize>,
    /// also write PGM/SVG snapshots where applicable
    #[arg(long, global = true)]
    render: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum CompareMode {
    /// pathwise stochastic domination (denser environment, smaller law)
    Domination,
    /// bracket the constant between scaled chemical-distance constants
    Sandwich,
    /// exponential-rate scaling of the constant
    Scaling,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate an environment, label clusters, export the bit dump
    Generate,
    /// Estimate the directional time constant along --u
    Mu,
    /// Fan estimate, norm-property report, shape and Hausdorff trace
    Shape,
    /// Oriented speed plus diamond contact analysis at the last horizon
    FlatEdge,
    /// Exponential coupling: pathwise inclusion and marginal checks
    Couple,
    /// Comparison experiments (see --mode)
    Compare {
        #[arg(long, value_enum, default_value_t = CompareMode::Domination)]
        mode: CompareMode,
    },
    /// Road-network shape estimation for one company
    Roadnet,
    /// Chemical-distance tail diagnostic
    Tail,
    /// Wet-set snapshot (PGM + SVG overlays)
    Render,
}

impl Overrides {
    fn apply(self, cfg: &mut RunConfig) {
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { cfg.$field = v; } )* }
        }
        macro_rules! set_opt {
            ($($field:ident),*) => { $( if self.$field.is_some() { cfg.$field = self.$field; } )* }
        }
        set!(d, l, p, model, seed_env, seed_passage, t, replicas, fan_max, n_hits, stderr_mult);
        set!(eps_deg, eps_norm, u, lambdas, generations, oriented_replicas, bins, eps_contact);
        set!(companies, company, radii, r_grid);
        set_opt!(margin, p2, model2, q, f_table, max_tries);
        if self.render {
            cfg.render = true;
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        fpp_core::exec::configure_jobs(cli.jobs);
    }
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        if let Err(e) = cfg.apply_file(path) {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    cli.over.apply(&mut cfg);

    let name = match &cli.cmd {
        Cmd::Generate => "generate",
        Cmd::Mu => "mu",
        Cmd::Shape => "shape",
        Cmd::FlatEdge => "flat-edge",
        Cmd::Couple => "couple",
        Cmd::Compare { .. } => "compare",
        Cmd::Roadnet => "roadnet",
        Cmd::Tail => "tail",
        Cmd::Render => "render",
    };
    let out = cli
        .out
        .unwrap_or_else(|| PathBuf::from("out").join(format!("{name}-s{}", cfg.seed_env)));

    let result = commands::prepare_out(&out, &cfg, name).and_then(|()| match cli.cmd {
        Cmd::Generate => commands::generate(&cfg, &out),
        Cmd::Mu => commands::mu(&cfg, &out),
        Cmd::Shape => commands::shape(&cfg, &out),
        Cmd::FlatEdge => commands::flat_edge(&cfg, &out),
        Cmd::Couple => commands::couple(&cfg, &out),
        Cmd::Compare { mode } => match mode {
            CompareMode::Domination => commands::compare_domination(&cfg, &out),
            CompareMode::Sandwich => commands::compare_sandwich(&cfg, &out),
            CompareMode::Scaling => commands::compare_scaling(&cfg, &out),
        },
        Cmd::Roadnet => commands::roadnet(&cfg, &out),
        Cmd::Tail => commands::tail(&cfg, &out),
        Cmd::Render => commands::render(&cfg, &out),
    });

    match result {
        Ok(commands::Outcome::Pass) => ExitCode::SUCCESS,
        Ok(commands::Outcome::VerdictFailed(why)) => {
            eprintln!("verdict failed: {why}");
            ExitCode::from(1)
        }
        Err(commands::CmdError::Verdict(why)) => {
            eprintln!("verdict failed: {why}");
            ExitCode::from(1)
        }
        Err(commands::CmdError::Config(why)) => {
            eprintln!("error: {why}");
            ExitCode::from(2)
        }
    }
}
