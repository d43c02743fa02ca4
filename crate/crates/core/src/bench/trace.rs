//! Per-episode trajectory log: a CSV with one row per physics step and a JSON
//! sidecar holding everything needed to redraw the episode.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::report::Method;
use crate::episode::TraceRow;
use crate::error::Error;
use crate::geometry::Vec2;
use crate::sim::EpisodeStatus;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub scenario: String,
    pub method: Method,
    pub seed: u64,
    pub status: EpisodeStatus,
    pub robot_radius: f64,
    pub goal_tolerance: f64,
    pub goal: [f64; 2],
    pub pedestrian_radii: Vec<f64>,
    pub path: Vec<[f64; 2]>,
    /// Scenario document the episode ran on.
    pub scenario_text: String,
    pub control_steps: u64,
    /// Control steps per proxemic zone.
    pub proxemic_steps: [u64; 4],
    pub sw_total: f64,
    pub sw_step: f64,
    pub path_length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub meta: TraceMeta,
    pub rows: Vec<TraceRow>,
}

pub fn meta_path(csv_path: &Path) -> PathBuf {
    let mut s = csv_path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

impl Trace {
    pub fn header(n_peds: usize) -> String {
        let mut h = String::from("t,control,x,y,theta,v,w");
        for i in 0..n_peds {
            let _ = write!(h, ",p{i}_x,p{i}_y");
        }
        h
    }

    pub fn to_csv(&self) -> String {
        let mut s = Self::header(self.meta.pedestrian_radii.len());
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{},{},{},{},{},{},{}", r.t, r.control as u8, r.x, r.y, r.theta, r.v, r.w);
            for p in &r.pedestrians {
                let _ = write!(s, ",{},{}", p.x, p.y);
            }
            s.push('\n');
        }
        s
    }

    pub fn meta_json(&self) -> String {
        serde_json::to_string_pretty(&self.meta).expect("trace metadata serializes") + "\n"
    }

    pub fn write(&self, csv_path: &Path) -> Result<(), Error> {
        if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(csv_path, self.to_csv()).map_err(|e| Error::io(csv_path, e))?;
        let mp = meta_path(csv_path);
        fs::write(&mp, self.meta_json()).map_err(|e| Error::io(&mp, e))?;
        Ok(())
    }

    pub fn parse(csv: &str, meta_json: &str) -> Result<Self, Error> {
        let meta: TraceMeta =
            serde_json::from_str(meta_json).map_err(|e| Error::Invalid(format!("trace metadata: {e}")))?;
        let n = meta.pedestrian_radii.len();
        let mut lines = csv.lines();
        let header = lines.next().unwrap_or_default();
        if header != Self::header(n) {
            return Err(Error::Invalid(format!("unexpected trace header `{header}`")));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let bad = || Error::Invalid(format!("trace row {}: malformed", i + 1));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 + 2 * n {
                return Err(bad());
            }
            let num = |k: usize| f[k].parse::<f64>().map_err(|_| bad());
            let control = match f[1] {
                "0" => false,
                "1" => true,
                _ => return Err(bad()),
            };
            let pedestrians = (0..n)
                .map(|p| Ok(Vec2::new(num(7 + 2 * p)?, num(8 + 2 * p)?)))
                .collect::<Result<Vec<_>, Error>>()?;
            rows.push(TraceRow {
                t: num(0)?,
                control,
                x: num(2)?,
                y: num(3)?,
                theta: num(4)?,
                v: num(5)?,
                w: num(6)?,
                pedestrians,
            });
        }
        Ok(Self { meta, rows })
    }

    pub fn read(csv_path: &Path) -> Result<Self, Error> {
        let csv = fs::read_to_string(csv_path).map_err(|e| Error::io(csv_path, e))?;
        let mp = meta_path(csv_path);
        let meta = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
        Self::parse(&csv, &meta)
    }

    /// Sum of step displacements recomputed from the rows.
    pub fn path_length(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|w| Vec2::new(w[1].x, w[1].y).distance(Vec2::new(w[0].x, w[0].y)))
            .sum()
    }

    pub fn control_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.control).count()
    }
}
