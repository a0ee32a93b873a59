//! Trajectory logs and their CSV / JSON-lines encodings.
//!
//! CSV output is two files: `trajectory.csv` with one row per robot per
//! tick and `globals.csv` with one row per tick. Floats are written in
//! shortest round-trip form so a log read back is bit-identical.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

use super::config::LogFormat;

pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const GLOBALS_CSV: &str = "globals.csv";
pub const TRAJECTORY_JSONL: &str = "trajectory.jsonl";

/// One robot at one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotRecord {
    pub alive: bool,
    pub x: Vec<f64>,
    pub omega: f64,
    pub omega_hat: f64,
    pub phi: Vec<f64>,
    /// Position command; body-frame `(eps_r, v_r)` for vessels.
    pub u: Vec<f64>,
    pub u_omega: f64,
    pub eta: f64,
    pub neighbors: usize,
}

/// Team snapshot at one logged instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tick {
    pub t: f64,
    pub omega_star: f64,
    /// Lyapunov function; absent when a gap is at or below `r`.
    pub v: Option<f64>,
    /// Dissipation bound `Omega`; absent with `v`.
    pub dissipation: Option<f64>,
    /// Smallest coordinate gap between alive robots.
    pub min_gap: Option<f64>,
    /// Smallest physical distance between alive robots.
    pub min_distance: Option<f64>,
    pub eta_sum: f64,
    /// Repulsion clamp events since the previous tick.
    pub clamps: usize,
    pub robots: Vec<RobotRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEvent {
    pub t: f64,
    pub kind: String,
    pub message: String,
}

/// Whole-run counters that are not tied to logged ticks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub steps: usize,
    /// Clamp events over every control evaluation.
    pub clamp_events: usize,
    /// Largest `|sum_i eta_i|` over every control evaluation.
    pub max_abs_eta_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub dim: usize,
    pub n_robots: usize,
    pub ticks: Vec<Tick>,
    pub events: Vec<LogEvent>,
    pub stats: RunStats,
}

impl TrajectoryLog {
    pub fn times(&self) -> Vec<f64> {
        self.ticks.iter().map(|t| t.t).collect()
    }

    /// Coordinate of robot `i` over the whole log.
    pub fn omega_series(&self, i: usize) -> Vec<f64> {
        self.ticks.iter().map(|t| t.robots[i].omega).collect()
    }

    /// Alive flags at the last tick.
    pub fn final_alive(&self) -> Vec<bool> {
        self.ticks
            .last()
            .map(|t| t.robots.iter().map(|r| r.alive).collect())
            .unwrap_or_default()
    }

    pub fn trajectory_header(dim: usize) -> Vec<String> {
        let mut h: Vec<String> = vec!["t".into(), "robot".into(), "alive".into()];
        h.extend((1..=dim).map(|j| format!("x{j}")));
        h.push("omega".into());
        h.push("omega_hat".into());
        h.extend((1..=dim).map(|j| format!("phi{j}")));
        h.extend((1..=dim).map(|j| format!("u{j}")));
        for s in ["u_omega", "eta", "neighbors"] {
            h.push(s.into());
        }
        h
    }

    pub fn globals_header() -> Vec<String> {
        ["t", "omega_star", "V", "Omega", "min_gap", "min_distance", "eta_sum", "clamp"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    /// Writes the log in `format` into `dir` and returns the files written.
    pub fn write(&self, dir: &Path, format: LogFormat) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        match format {
            LogFormat::Csv => {
                let traj = dir.join(TRAJECTORY_CSV);
                let glob = dir.join(GLOBALS_CSV);
                self.write_csv(&traj, &glob)?;
                Ok(vec![traj, glob])
            }
            LogFormat::Jsonl => {
                let p = dir.join(TRAJECTORY_JSONL);
                self.write_jsonl(&p)?;
                Ok(vec![p])
            }
        }
    }

    pub fn write_csv(&self, trajectory: &Path, globals: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(trajectory)?));
        w.write_record(Self::trajectory_header(self.dim))?;
        let mut row: Vec<String> = Vec::new();
        for tick in &self.ticks {
            for (i, r) in tick.robots.iter().enumerate() {
                row.clear();
                row.push(tick.t.to_string());
                row.push((i + 1).to_string());
                row.push(if r.alive { "1" } else { "0" }.into());
                row.extend(r.x.iter().map(f64::to_string));
                row.push(r.omega.to_string());
                row.push(r.omega_hat.to_string());
                row.extend(r.phi.iter().map(f64::to_string));
                row.extend(r.u.iter().map(f64::to_string));
                row.push(r.u_omega.to_string());
                row.push(r.eta.to_string());
                row.push(r.neighbors.to_string());
                w.write_record(&row)?;
            }
        }
        w.flush()?;

        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut g = csv::Writer::from_writer(BufWriter::new(File::create(globals)?));
        g.write_record(Self::globals_header())?;
        for tick in &self.ticks {
            g.write_record([
                tick.t.to_string(),
                tick.omega_star.to_string(),
                opt(tick.v),
                opt(tick.dissipation),
                opt(tick.min_gap),
                opt(tick.min_distance),
                tick.eta_sum.to_string(),
                tick.clamps.to_string(),
            ])?;
        }
        g.flush()?;
        Ok(())
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for tick in &self.ticks {
            serde_json::to_writer(&mut w, tick)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads ticks back from a `trajectory.csv` (with its sibling
    /// `globals.csv`) or a `trajectory.jsonl`. Events and run counters are
    /// not part of these files and come back empty.
    pub fn read(path: &Path) -> Result<Self> {
        let ticks = if path.extension().and_then(|e| e.to_str()) == Some("jsonl") {
            read_jsonl(path)?
        } else {
            let globals = path.with_file_name(GLOBALS_CSV);
            read_csv(path, &globals)?
        };
        let first = ticks.first().ok_or_else(|| Error::Analysis("log has no ticks".into()))?;
        let n_robots = first.robots.len();
        let dim = first.robots.first().map(|r| r.x.len()).unwrap_or(0);
        Ok(Self { dim, n_robots, ticks, events: Vec::new(), stats: RunStats::default() })
    }
}

fn read_jsonl(path: &Path) -> Result<Vec<Tick>> {
    let mut ticks = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            ticks.push(serde_json::from_str(&line)?);
        }
    }
    Ok(ticks)
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Analysis(msg.into())
}

fn num<T: std::str::FromStr>(field: &str, what: &str) -> Result<T> {
    field.parse().map_err(|_| bad(format!("cannot parse {what} from `{field}`")))
}

fn opt_num(field: &str, what: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        num(field, what).map(Some)
    }
}

fn read_csv(trajectory: &Path, globals: &Path) -> Result<Vec<Tick>> {
    let mut g = csv::Reader::from_path(globals)?;
    if g.headers()?.iter().collect::<Vec<_>>() != TrajectoryLog::globals_header() {
        return Err(bad(format!("unexpected header in {}", globals.display())));
    }
    let mut ticks = Vec::new();
    for rec in g.records() {
        let rec = rec?;
        ticks.push(Tick {
            t: num(&rec[0], "t")?,
            omega_star: num(&rec[1], "omega_star")?,
            v: opt_num(&rec[2], "V")?,
            dissipation: opt_num(&rec[3], "Omega")?,
            min_gap: opt_num(&rec[4], "min_gap")?,
            min_distance: opt_num(&rec[5], "min_distance")?,
            eta_sum: num(&rec[6], "eta_sum")?,
            clamps: num(&rec[7], "clamp")?,
            robots: Vec::new(),
        });
    }

    let mut r = csv::Reader::from_path(trajectory)?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let dim = header.iter().filter(|h| h.starts_with('x')).count();
    if header != TrajectoryLog::trajectory_header(dim) {
        return Err(bad(format!("unexpected header in {}", trajectory.display())));
    }
    // Rows are grouped by tick in robot order; robot 1 opens the next tick.
    let mut cursor: Option<usize> = None;
    for rec in r.records() {
        let rec = rec?;
        let t: f64 = num(&rec[0], "t")?;
        let robot: usize = num(&rec[1], "robot")?;
        if robot == 1 {
            cursor = Some(cursor.map_or(0, |k| k + 1));
        }
        let tick = cursor
            .and_then(|k| ticks.get_mut(k))
            .filter(|tk| tk.t == t)
            .ok_or_else(|| bad(format!("row at t = {t} has no matching globals row")))?;
        if tick.robots.len() + 1 != robot {
            return Err(bad(format!("robot rows out of order at t = {t}")));
        }
        let f = |i: usize, what: &str| num::<f64>(&rec[i], what);
        let mut c = 3;
        let x = (0..dim).map(|j| f(c + j, "x")).collect::<Result<Vec<_>>>()?;
        c += dim;
        let omega = f(c, "omega")?;
        let omega_hat = f(c + 1, "omega_hat")?;
        c += 2;
        let phi = (0..dim).map(|j| f(c + j, "phi")).collect::<Result<Vec<_>>>()?;
        c += dim;
        let u = (0..dim).map(|j| f(c + j, "u")).collect::<Result<Vec<_>>>()?;
        c += dim;
        tick.robots.push(RobotRecord {
            alive: &rec[2] == "1",
            x,
            omega,
            omega_hat,
            phi,
            u,
            u_omega: f(c, "u_omega")?,
            eta: f(c + 1, "eta")?,
            neighbors: num(&rec[c + 2], "neighbors")?,
        });
    }
    Ok(ticks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TrajectoryLog {
        let rec = |w: f64, alive: bool| RobotRecord {
            alive,
            x: vec![0.1, -2.5e-7],
            omega: w,
            omega_hat: 0.3,
            phi: vec![1e-20, 0.0],
            u: vec![1.0 / 3.0, 2.0],
            u_omega: -1.0,
            eta: 0.0,
            neighbors: 1,
        };
        let ticks = (0..3)
            .map(|k| Tick {
                t: k as f64 * 0.1,
                omega_star: -0.1 * k as f64,
                v: if k == 1 { None } else { Some(0.25) },
                dissipation: Some(-0.5),
                min_gap: Some(0.45),
                min_distance: None,
                eta_sum: 1e-17,
                clamps: k,
                robots: vec![rec(0.0, true), rec(0.45, k < 2)],
            })
            .collect();
        TrajectoryLog { dim: 2, n_robots: 2, ticks, events: vec![], stats: RunStats::default() }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let log = sample();
        log.write(dir.path(), LogFormat::Csv).unwrap();
        let back = TrajectoryLog::read(&dir.path().join(TRAJECTORY_CSV)).unwrap();
        assert_eq!(back.ticks, log.ticks);
        assert_eq!((back.dim, back.n_robots), (2, 2));
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let log = sample();
        log.write(dir.path(), LogFormat::Jsonl).unwrap();
        let back = TrajectoryLog::read(&dir.path().join(TRAJECTORY_JSONL)).unwrap();
        assert_eq!(back.ticks, log.ticks);
    }

    #[test]
    fn header_layout() {
        assert_eq!(
            TrajectoryLog::trajectory_header(2).join(","),
            "t,robot,alive,x1,x2,omega,omega_hat,phi1,phi2,u1,u2,u_omega,eta,neighbors"
        );
    }

    #[test]
    fn empty_log_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let log = TrajectoryLog { ticks: vec![], ..sample() };
        log.write(dir.path(), LogFormat::Csv).unwrap();
        assert!(TrajectoryLog::read(&dir.path().join(TRAJECTORY_CSV)).is_err());
    }
}
