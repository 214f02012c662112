//! Run configuration: defaults, the flat key = value config file, and
//! the flag overrides. A run is reproducible from the effective
//! configuration alone, which every command echoes into its output
//! directory as `config.txt`.

use fpp_core::environment::EnvConfig;
use fpp_core::lattice::{CenteredBox, Point};
use fpp_core::passage::{GaussianFieldSpec, KernelTap, PassageLaw, PassageModel, RoadNetworkSpec};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub d: usize,
    pub l: i64,
    /// None selects the default statistics margin L/5
    pub margin: Option<i64>,
    pub p: f64,
    pub model: String,
    pub seed_env: u64,
    pub seed_passage: u64,
    pub t: Vec<f64>,
    pub replicas: usize,
    pub fan_max: i64,
    pub n_hits: usize,
    pub stderr_mult: f64,
    pub eps_deg: f64,
    pub eps_norm: f64,
    pub u: String,
    pub p2: Option<f64>,
    pub model2: Option<String>,
    pub lambdas: Vec<f64>,
    pub q: Option<f64>,
    pub generations: usize,
    pub oriented_replicas: usize,
    pub bins: usize,
    pub eps_contact: f64,
    pub companies: Vec<f64>,
    pub f_table: Option<String>,
    pub company: usize,
    pub radii: Vec<u64>,
    pub r_grid: Vec<f64>,
    pub max_tries: Option<usize>,
    pub render: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            d: 2,
            l: 100,
            margin: None,
            p: 0.7,
            model: "dirac:1".into(),
            seed_env: 1,
            seed_passage: 2,
            t: vec![50.0],
            replicas: 8,
            fan_max: 4,
            n_hits: 1000,
            stderr_mult: 3.0,
            eps_deg: 0.05,
            eps_norm: 0.2,
            u: "1,0".into(),
            p2: None,
            model2: None,
            lambdas: vec![1.0, 2.0, 4.0],
            q: None,
            generations: 800,
            oriented_replicas: 40,
            bins: 32,
            eps_contact: 0.0,
            companies: vec![0.7],
            f_table: None,
            company: 0,
            radii: vec![10, 20, 40],
            r_grid: vec![1.0, 1.25, 1.5, 2.0, 3.0],
            max_tries: None,
            render: false,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.trim().parse().map_err(|_| format!("config key '{key}': cannot parse '{v}'"))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>, String> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

impl RunConfig {
    pub fn apply_file(&mut self, path: &Path) -> Result<(), String> {
        let text =
            std::fs::read_to_string(path).map_err(|e| format!("config {}: {e}", path.display()))?;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!("config line {}: expected 'key = value'", ln + 1));
            };
            self.apply_key(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn apply_key(&mut self, key: &str, v: &str) -> Result<(), String> {
        match key {
            "d" => self.d = parse(key, v)?,
            "L" | "l" => self.l = parse(key, v)?,
            "margin" => self.margin = Some(parse(key, v)?),
            "p" => self.p = parse(key, v)?,
            "model" => self.model = v.to_string(),
            "seed-env" => self.seed_env = parse(key, v)?,
            "seed-passage" => self.seed_passage = parse(key, v)?,
            "t" => self.t = parse_list(key, v)?,
            "replicas" => self.replicas = parse(key, v)?,
            "fan-max" => self.fan_max = parse(key, v)?,
            "n-hits" => self.n_hits = parse(key, v)?,
            "stderr-mult" => self.stderr_mult = parse(key, v)?,
            "eps-deg" => self.eps_deg = parse(key, v)?,
            "eps-norm" => self.eps_norm = parse(key, v)?,
            "u" => self.u = v.to_string(),
            "p2" => self.p2 = Some(parse(key, v)?),
            "model2" => self.model2 = Some(v.to_string()),
            "lambdas" => self.lambdas = parse_list(key, v)?,
            "q" => self.q = Some(parse(key, v)?),
            "generations" => self.generations = parse(key, v)?,
            "oriented-replicas" => self.oriented_replicas = parse(key, v)?,
            "bins" => self.bins = parse(key, v)?,
            "eps-contact" => self.eps_contact = parse(key, v)?,
            "companies" => self.companies = parse_list(key, v)?,
            "f-table" => self.f_table = Some(v.to_string()),
            "company" => self.company = parse(key, v)?,
            "radii" => self.radii = parse_list(key, v)?,
            "r-grid" => self.r_grid = parse_list(key, v)?,
            "max-tries" => self.max_tries = Some(parse(key, v)?),
            "render" => self.render = parse(key, v)?,
            other => return Err(format!("unknown config key '{other}'")),
        }
        Ok(())
    }

    pub fn max_tries(&self) -> usize {
        self.max_tries.unwrap_or(self.replicas.max(1) * 100)
    }

    pub fn box_(&self) -> Result<CenteredBox, String> {
        let b = match self.margin {
            Some(m) => CenteredBox::new(self.d, self.l, m),
            None => CenteredBox::with_default_margin(self.d, self.l),
        };
        b.map_err(|e| e.to_string())
    }

    pub fn env_config(&self) -> Result<EnvConfig, String> {
        EnvConfig::new(self.box_()?, self.p, self.seed_env).map_err(|e| e.to_string())
    }

    pub fn passage_model(&self) -> Result<PassageModel, String> {
        parse_model(&self.model, self.d, self.seed_passage)
    }

    pub fn direction(&self) -> Result<Point, String> {
        parse_direction(&self.u, self.d)
    }

    pub fn road_spec(&self) -> Result<RoadNetworkSpec, String> {
        let n = self.companies.len();
        let f = match &self.f_table {
            Some(spec) => parse_f_table(spec, n)?,
            // unit cost on any shared road
            None => {
                let mut row = vec![0.0];
                row.extend(std::iter::repeat_n(1.0, n));
                vec![row; n]
            }
        };
        Ok(RoadNetworkSpec { p: self.companies.clone(), f, company: self.company })
    }

    /// The effective configuration as sorted key = value lines.
    pub fn echo(&self, command: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command = {command}");
        let mut rows: Vec<(String, String)> = vec![
            ("d".into(), self.d.to_string()),
            ("L".into(), self.l.to_string()),
            ("p".into(), self.p.to_string()),
            ("model".into(), self.model.clone()),
            ("seed-env".into(), self.seed_env.to_string()),
            ("seed-passage".into(), self.seed_passage.to_string()),
            ("t".into(), join(&self.t)),
            ("replicas".into(), self.replicas.to_string()),
            ("fan-max".into(), self.fan_max.to_string()),
            ("n-hits".into(), self.n_hits.to_string()),
            ("stderr-mult".into(), self.stderr_mult.to_string()),
            ("eps-deg".into(), self.eps_deg.to_string()),
            ("eps-norm".into(), self.eps_norm.to_string()),
            ("u".into(), self.u.clone()),
            ("lambdas".into(), join(&self.lambdas)),
            ("generations".into(), self.generations.to_string()),
            ("oriented-replicas".into(), self.oriented_replicas.to_string()),
            ("bins".into(), self.bins.to_string()),
            ("eps-contact".into(), self.eps_contact.to_string()),
            ("companies".into(), join(&self.companies)),
            ("company".into(), self.company.to_string()),
            ("radii".into(), join(&self.radii)),
            ("r-grid".into(), join(&self.r_grid)),
            ("max-tries".into(), self.max_tries().to_string()),
            ("render".into(), self.render.to_string()),
        ];
        if let Some(m) = self.margin {
            rows.push(("margin".into(), m.to_string()));
        }
        if let Some(p2) = self.p2 {
            rows.push(("p2".into(), p2.to_string()));
        }
        if let Some(m2) = &self.model2 {
            rows.push(("model2".into(), m2.clone()));
        }
        if let Some(q) = self.q {
            rows.push(("q".into(), q.to_string()));
        }
        if let Some(ft) = &self.f_table {
            rows.push(("f-table".into(), ft.clone()));
        }
        rows.sort();
        for (k, v) in rows {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Model specs: dirac:c, exp:rate (or exponential:rate), mix:q:a:b,
/// chi2:<kernel file>.
pub fn parse_model(spec: &str, d: usize, seed: u64) -> Result<PassageModel, String> {
    let mut parts = spec.split(':');
    let kind = parts.next().unwrap_or("");
    let args: Vec<&str> = parts.collect();
    let law = match (kind, args.as_slice()) {
        ("dirac", [c]) => PassageLaw::Dirac(parse("dirac", c)?),
        ("exp" | "exponential", [rate]) => PassageLaw::Exponential(parse("exp", rate)?),
        ("mix" | "mixture", [q, a, b]) => PassageLaw::BernoulliMixture {
            q: parse("mix q", q)?,
            a: parse("mix a", a)?,
            b: parse("mix b", b)?,
        },
        ("chi2", [path]) => PassageLaw::GaussianChi2(parse_kernel_file(Path::new(path), d)?),
        _ => {
            return Err(format!(
                "cannot parse model '{spec}' (expected dirac:c, exp:rate, mix:q:a:b or chi2:file)"
            ))
        }
    };
    Ok(PassageModel::new(law, seed))
}

/// Kernel files: one tap per line, `dx dy [dz ...] axis channel weight`,
/// '#' comments.
pub fn parse_kernel_file(path: &Path, d: usize) -> Result<GaussianFieldSpec, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("kernel {}: {e}", path.display()))?;
    let mut taps = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.len() != d + 3 {
            return Err(format!(
                "kernel line {}: expected {} fields (offset x{d}, axis, channel, weight)",
                ln + 1,
                d + 3
            ));
        }
        let offset: Vec<i64> =
            tok[..d].iter().map(|s| parse("kernel offset", s)).collect::<Result<_, _>>()?;
        taps.push(KernelTap {
            offset,
            axis: parse("kernel axis", tok[d])?,
            channel: parse("kernel channel", tok[d + 1])?,
            weight: parse("kernel weight", tok[d + 2])?,
        });
    }
    Ok(GaussianFieldSpec { taps })
}

pub fn parse_direction(spec: &str, d: usize) -> Result<Point, String> {
    let coords: Vec<i64> = spec
        .split(',')
        .map(|s| parse("u", s))
        .collect::<Result<_, _>>()?;
    if coords.len() != d {
        return Err(format!("direction '{spec}' has {} coordinates, need {d}", coords.len()));
    }
    Ok(Point(coords))
}

/// Road cost tables: rows per company separated by ';', each row the
/// n+1 values f(i, 0), ..., f(i, n) separated by ','.
pub fn parse_f_table(spec: &str, n: usize) -> Result<Vec<Vec<f64>>, String> {
    let rows: Vec<Vec<f64>> = spec
        .split(';')
        .map(|row| parse_list("f-table", row))
        .collect::<Result<_, _>>()?;
    if rows.len() != n || rows.iter().any(|r| r.len() != n + 1) {
        return Err(format!("f-table must be {n} rows of {} entries", n + 1));
    }
    Ok(rows)
}
