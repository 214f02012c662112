//! Raster and vector snapshots of wet sets: a plain-text graymap of the
//! vertex classes (the bit-exact golden format) and an optional SVG
//! overlay carrying the estimated ball, the reference diamond and the
//! predicted flat-edge segment.

use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::lattice::Point;
use crate::paths::WetSet;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellClass {
    Unreached,
    GiantDry,
    Reached,
    Origin,
}

impl CellClass {
    pub fn gray(self) -> u8 {
        match self {
            CellClass::Unreached => 0,
            CellClass::GiantDry => 70,
            CellClass::Reached => 200,
            CellClass::Origin => 255,
        }
    }
}

/// Per-vertex classification of one run at one horizon.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub side: usize,
    pub half_width: i64,
    /// row-major, top row = +L, classes per vertex
    pub grid: Vec<CellClass>,
    pub counts: [usize; 4],
    pub header: String,
}

impl Snapshot {
    /// Classify every vertex of a planar box: origin / reached within the
    /// wet set's horizon / in the giant but dry / everything else.
    pub fn build(env: &Environment, ws: &WetSet) -> Result<Snapshot> {
        let box_ = env.box_();
        if box_.dim() != 2 {
            return Err(Error::UnsupportedDimension {
                got: box_.dim(),
                reason: "snapshots are planar".into(),
            });
        }
        let l = box_.half_width();
        let side = box_.side();
        let origin_idx = box_.vertex_index(&Point::origin(2))?;
        let mut grid = vec![CellClass::Unreached; side * side];
        let mut counts = [0usize; 4];
        for row in 0..side {
            let y = l - row as i64;
            for col in 0..side {
                let x = col as i64 - l;
                let v = box_.vertex_index(&Point::xy(x, y))?;
                let class = if v == origin_idx {
                    CellClass::Origin
                } else if ws.contains_idx(v) {
                    CellClass::Reached
                } else if env.in_giant_idx(v) {
                    CellClass::GiantDry
                } else {
                    CellClass::Unreached
                };
                counts[class as usize] += 1;
                grid[row * side + col] = class;
            }
        }
        let cfg = env.config();
        let header = format!(
            "d=2 L={} p={} env_seed={} t={}",
            l,
            cfg.p,
            cfg.seed,
            ws.horizon()
        );
        Ok(Snapshot { side, half_width: l, grid, counts, header })
    }

    /// Plain (P2) graymap with the run parameters on a comment line.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "P2")?;
        writeln!(w, "# {}", self.header)?;
        writeln!(w, "{} {}", self.side, self.side)?;
        writeln!(w, "255")?;
        for row in 0..self.side {
            let mut line = String::with_capacity(self.side * 4);
            for col in 0..self.side {
                if col > 0 {
                    line.push(' ');
                }
                line.push_str(itoa(self.grid[row * self.side + col].gray()));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

fn itoa(v: u8) -> &'static str {
    // the four class levels only
    match v {
        0 => "0",
        70 => "70",
        200 => "200",
        _ => "255",
    }
}

/// A labelled polygon for the vector overlay, in lattice coordinates.
#[derive(Debug, Clone)]
pub struct Overlay {
    pub label: String,
    pub color: String,
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
}

impl Overlay {
    pub fn polygon(label: &str, color: &str, points: Vec<[f64; 2]>) -> Self {
        Overlay { label: label.into(), color: color.into(), points, closed: true }
    }

    pub fn segment(label: &str, color: &str, a: [f64; 2], b: [f64; 2]) -> Self {
        Overlay { label: label.into(), color: color.into(), points: vec![a, b], closed: false }
    }

    /// The diamond of radius r.
    pub fn diamond(r: f64, color: &str) -> Self {
        Self::polygon("diamond", color, vec![[r, 0.0], [0.0, r], [-r, 0.0], [0.0, -r]])
    }
}

/// Write the wet set as a PGM file and, when overlays are given, an SVG
/// with the same coordinate frame next to it (same path, .svg extension).
pub fn render_wet_set(
    env: &Environment,
    ws: &WetSet,
    overlays: &[Overlay],
    path: &Path,
) -> Result<Snapshot> {
    let snap = Snapshot::build(env, ws)?;
    let file = std::fs::File::create(path)?;
    snap.write_pgm(std::io::BufWriter::new(file))?;
    if !overlays.is_empty() {
        let svg_path = path.with_extension("svg");
        let file = std::fs::File::create(svg_path)?;
        write_svg(&snap, ws, overlays, std::io::BufWriter::new(file))?;
    }
    Ok(snap)
}

fn write_svg<W: Write>(snap: &Snapshot, ws: &WetSet, overlays: &[Overlay], mut w: W) -> Result<()> {
    let l = snap.half_width as f64;
    // lattice (x, y) maps to svg (x + L, L - y)
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {side} {side}">"#,
        side = snap.side
    )?;
    writeln!(w, "<!-- {} -->", snap.header)?;
    writeln!(w, r#"<rect width="{0}" height="{0}" fill="white"/>"#, snap.side)?;
    // reached vertices as 1x1 cells
    writeln!(w, r##"<g fill="#888888">"##)?;
    for (p, _, _) in ws.iter_points() {
        let (x, y) = (p.0[0] as f64 + l, l - p.0[1] as f64);
        writeln!(w, r#"<rect x="{}" y="{}" width="1" height="1"/>"#, x - 0.5, y - 0.5)?;
    }
    writeln!(w, "</g>")?;
    for ov in overlays {
        let pts: Vec<String> =
            ov.points.iter().map(|p| format!("{},{}", p[0] + l, l - p[1])).collect();
        if ov.closed {
            writeln!(
                w,
                r#"<polygon points="{}" fill="none" stroke="{}" stroke-width="1.5"><title>{}</title></polygon>"#,
                pts.join(" "),
                ov.color,
                ov.label
            )?;
        } else {
            writeln!(
                w,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"><title>{}</title></polyline>"#,
                pts.join(" "),
                ov.color,
                ov.label
            )?;
        }
    }
    writeln!(w, "</svg>")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{generate, EnvConfig};
    use crate::lattice::CenteredBox;
    use crate::passage::{sample_field, PassageModel};
    use crate::paths::wet_set;

    fn snapshot_fixture(p: f64, horizon: f64) -> (Environment, WetSet) {
        let cfg = EnvConfig::new(CenteredBox::new(2, 8, 0).unwrap(), p, 5).unwrap();
        let env = generate(&cfg).unwrap();
        let field = sample_field(&PassageModel::dirac(1.0, 6), &env).unwrap();
        let ws = wet_set(&env, &field, &Point::origin(2), horizon).unwrap();
        (env, ws)
    }

    #[test]
    fn counts_match_wet_set_cardinalities() {
        let (env, ws) = snapshot_fixture(0.7, 5.0);
        let snap = Snapshot::build(&env, &ws).unwrap();
        // origin + reached classes together equal the wet set size
        assert_eq!(snap.counts[CellClass::Origin as usize], 1);
        assert_eq!(snap.counts[CellClass::Reached as usize], ws.len() - 1);
        let total: usize = snap.counts.iter().sum();
        assert_eq!(total, env.box_().n_vertices());
    }

    #[test]
    fn pgm_round_trip_counts() {
        let (env, ws) = snapshot_fixture(0.7, 4.0);
        let snap = Snapshot::build(&env, &ws).unwrap();
        let mut buf = Vec::new();
        snap.write_pgm(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("P2"));
        assert!(lines.next().unwrap().starts_with("# d=2 L=8 p=0.7"));
        assert_eq!(lines.next(), Some("17 17"));
        assert_eq!(lines.next(), Some("255"));
        let mut parsed = [0usize; 4];
        for tok in lines.flat_map(|l| l.split_whitespace()) {
            match tok {
                "0" => parsed[0] += 1,
                "70" => parsed[1] += 1,
                "200" => parsed[2] += 1,
                "255" => parsed[3] += 1,
                other => panic!("unexpected gray {other}"),
            }
        }
        assert_eq!(parsed, snap.counts);
    }

    #[test]
    fn empty_wet_set_is_a_valid_file() {
        // p = 0: nothing is reached beyond the origin
        let (env, ws) = snapshot_fixture(0.0, 3.0);
        assert_eq!(ws.len(), 1);
        let snap = Snapshot::build(&env, &ws).unwrap();
        let mut buf = Vec::new();
        snap.write_pgm(&mut buf).unwrap();
        assert!(!buf.is_empty());
        assert_eq!(snap.counts[CellClass::Reached as usize], 0);
    }

    #[test]
    fn files_written_deterministically() {
        let (env, ws) = snapshot_fixture(0.7, 5.0);
        let dir = std::env::temp_dir().join("fpp-render-test");
        std::fs::create_dir_all(&dir).unwrap();
        let p1 = dir.join("a.pgm");
        let p2 = dir.join("b.pgm");
        let overlays = vec![Overlay::diamond(5.0, "red")];
        render_wet_set(&env, &ws, &overlays, &p1).unwrap();
        render_wet_set(&env, &ws, &overlays, &p2).unwrap();
        let a = std::fs::read(&p1).unwrap();
        let b = std::fs::read(&p2).unwrap();
        assert_eq!(a, b);
        assert!(p1.with_extension("svg").exists());
        std::fs::remove_dir_all(&dir).ok();
    }
}
