//! Frame CSV files and the `key: value` run summary.

use std::fmt::Display;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use curvefront::study::mean_radius;
use curvefront::FrameRecord;

pub const FRAME_HEADER: &str = "step,time,index,x,y,kappa,nx,ny,u,v";

/// Writes `frame_<step>.csv` files into one directory. Float columns use
/// the shortest representation that reads back to the same value.
pub struct FrameWriter {
    dir: PathBuf,
    count: usize,
    last_step: Option<usize>,
}

impl FrameWriter {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), count: 0, last_step: None })
    }

    pub fn write(&mut self, f: &FrameRecord) -> std::io::Result<()> {
        let file = fs::File::create(self.dir.join(frame_name(f.step)))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "{FRAME_HEADER}")?;
        for (i, q) in f.points.iter().enumerate() {
            let n = f.normals[i];
            write!(w, "{},{},{},{},{},{},{},{},", f.step, f.time, i, q.x, q.y, f.curvature[i], n.x, n.y)?;
            match &f.fields {
                Some((u, v)) => writeln!(w, "{},{}", u[i], v[i])?,
                None => writeln!(w, ",")?,
            }
        }
        w.flush()?;
        self.count += 1;
        self.last_step = Some(f.step);
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn last_step(&self) -> Option<usize> {
        self.last_step
    }
}

pub fn frame_name(step: usize) -> String {
    format!("frame_{step:06}.csv")
}

/// Ordered `key: value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub entries: Vec<(String, String)>,
}

impl Summary {
    pub fn push(&mut self, key: &str, value: impl Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Final-state statistics of `f`.
    pub fn extend_frame(&mut self, f: &FrameRecord) {
        let (lo, hi) = spacing_range(&f.points);
        self.push("final_step", f.step);
        self.push("final_time", f.time);
        self.push("final_points", f.point_count);
        self.push("final_mean_radius", mean_radius(&f.points));
        self.push("min_spacing", lo);
        self.push("max_spacing", hi);
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut s = String::new();
        for (k, v) in &self.entries {
            s.push_str(&format!("{k}: {v}\n"));
        }
        fs::write(path, s)
    }

    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter_map(|l| l.split_once(": "))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Self { entries }
    }
}

pub fn spacing_range(points: &[curvefront::Vec2]) -> (f64, f64) {
    let n = points.len();
    (0..n)
        .map(|i| (points[(i + 1) % n] - points[i]).norm())
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use curvefront::study::{generate, Shape};
    use curvefront::{EvolutionConfig, Simulation};

    #[test]
    fn frame_round_trip() {
        let pc = generate(&Shape::Circle { r0: 1.0 }, 24).unwrap();
        let cfg = EvolutionConfig::for_cloud(&pc, 1e-3, 0.0);
        let f = Simulation::new(pc, cfg).unwrap().frame();
        let dir = tempfile::tempdir().unwrap();
        let mut w = FrameWriter::create(dir.path()).unwrap();
        w.write(&f).unwrap();
        let text = fs::read_to_string(dir.path().join(frame_name(0))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(FRAME_HEADER));
        for (i, l) in lines.enumerate() {
            let cols: Vec<&str> = l.split(',').collect();
            assert_eq!(cols.len(), 10);
            assert_eq!(cols[3].parse::<f64>().unwrap(), f.points[i].x);
            assert_eq!(cols[5].parse::<f64>().unwrap(), f.curvature[i]);
            assert_eq!((cols[8], cols[9]), ("", ""));
        }
    }

    #[test]
    fn summary_round_trip() {
        let mut s = Summary::default();
        s.push("status", "ok");
        s.push("final_mean_radius", 0.1 + 0.2);
        let parsed = Summary::parse(&format!("{}: {}\n{}: {}\n", "status", "ok", "final_mean_radius", 0.1 + 0.2));
        assert_eq!(parsed, s);
        assert_eq!(parsed.get("final_mean_radius").unwrap().parse::<f64>().unwrap(), 0.1 + 0.2);
    }

    #[test]
    fn spacing_of_square() {
        let sq = [(0., 0.), (2., 0.), (2., 1.), (0., 1.)].map(|(x, y)| curvefront::Vec2::new(x, y));
        assert_eq!(spacing_range(&sq), (1.0, 2.0));
    }
}
