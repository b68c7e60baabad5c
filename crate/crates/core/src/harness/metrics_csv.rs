//! CSV output for sweeps.
//!
//! The metrics file holds only values that are a pure function of the inputs
//! and seeds, so reruns produce identical bytes. Wall-clock times go to a
//! separate timings file.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::qlearning::EpisodeRecord;

use super::sweep::{downsample, Curve, SweepResult, SweepRow};
use super::HarnessError;

/// Per-run curves are thinned to this many points for plotting.
pub const CURVE_POINTS: usize = 2_000;

/// Column order of the metrics file.
pub const METRICS_HEADER: [&str; 13] = [
    "map_id",
    "method",
    "seed",
    "converged",
    "convergence_steps",
    "convergence_episode",
    "episodes",
    "total_steps",
    "shortest_distance",
    "longest_distance",
    "greedy_length",
    "threshold",
    "error",
];

#[derive(Debug, Serialize, Deserialize)]
struct MetricsRecord {
    map_id: String,
    method: String,
    seed: u64,
    converged: bool,
    convergence_steps: Option<u64>,
    convergence_episode: Option<usize>,
    episodes: usize,
    total_steps: u64,
    shortest_distance: Option<usize>,
    longest_distance: Option<usize>,
    greedy_length: Option<usize>,
    threshold: Option<f64>,
    error: Option<String>,
}

impl From<&SweepRow> for MetricsRecord {
    fn from(r: &SweepRow) -> Self {
        Self {
            map_id: r.map_id.clone(),
            method: r.method.clone(),
            seed: r.seed,
            converged: r.converged,
            convergence_steps: r.convergence_steps,
            convergence_episode: r.convergence_episode,
            episodes: r.episodes,
            total_steps: r.total_steps,
            shortest_distance: r.shortest_distance,
            longest_distance: r.longest_distance,
            greedy_length: r.greedy_length,
            threshold: r.threshold,
            error: r.error.clone(),
        }
    }
}

impl From<MetricsRecord> for SweepRow {
    fn from(r: MetricsRecord) -> Self {
        Self {
            map_id: r.map_id,
            method: r.method,
            seed: r.seed,
            converged: r.converged,
            convergence_steps: r.convergence_steps,
            convergence_episode: r.convergence_episode,
            episodes: r.episodes,
            total_steps: r.total_steps,
            shortest_distance: r.shortest_distance,
            longest_distance: r.longest_distance,
            greedy_length: r.greedy_length,
            threshold: r.threshold,
            error: r.error,
            wall_time: 0.0,
        }
    }
}

#[derive(Debug, Serialize)]
struct TimingRecord<'a> {
    map_id: &'a str,
    method: &'a str,
    seed: u64,
    wall_time: f64,
}

#[derive(Debug, Serialize)]
struct EpisodeLine<'a> {
    map_id: &'a str,
    method: &'a str,
    seed: u64,
    episode: usize,
    steps: usize,
    total_reward: f64,
    reached_goal: bool,
    greedy_steps: Option<usize>,
}

impl<'a> EpisodeLine<'a> {
    fn new(curve: &'a Curve, episode: usize, rec: &EpisodeRecord) -> Self {
        Self {
            map_id: &curve.map_id,
            method: &curve.method,
            seed: curve.seed,
            episode,
            steps: rec.steps,
            total_reward: rec.total_reward,
            reached_goal: rec.reached_goal,
            greedy_steps: rec.greedy_steps,
        }
    }
}

/// Writes the metrics columns of `rows`. An empty slice still gets a header.
pub fn write_rows<W: Write>(rows: &[SweepRow], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for row in rows {
        w.serialize(MetricsRecord::from(row))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a metrics file written by [`write_rows`]. `wall_time` is not stored
/// there and comes back as 0.
pub fn read_rows<R: Read>(input: R) -> csv::Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(METRICS_HEADER) {
        return Err(csv::Error::from(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            "unexpected metrics header",
        )));
    }
    r.deserialize::<MetricsRecord>()
        .map(|rec| rec.map(SweepRow::from))
        .collect()
}

fn write_file(path: &Path, body: impl FnOnce(&mut File) -> csv::Result<()>) -> Result<(), HarnessError> {
    let mut file = File::create(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    body(&mut file).map_err(|source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<(), HarnessError> {
    write_file(path, |f| write_rows(&result.rows, f))
}

pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>, HarnessError> {
    let file = File::open(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_rows(file).map_err(|source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

pub fn emit_timings(result: &SweepResult, path: &Path) -> Result<(), HarnessError> {
    write_file(path, |f| {
        let mut w = csv::Writer::from_writer(f);
        for r in &result.rows {
            w.serialize(TimingRecord {
                map_id: &r.map_id,
                method: &r.method,
                seed: r.seed,
                wall_time: r.wall_time,
            })?;
        }
        w.flush()?;
        Ok(())
    })
}

/// Every episode of every kept curve.
pub fn emit_episodes(curves: &[Curve], path: &Path) -> Result<(), HarnessError> {
    write_file(path, |f| {
        let mut w = csv::Writer::from_writer(f);
        for c in curves {
            for (i, rec) in c.episodes.iter().enumerate() {
                w.serialize(EpisodeLine::new(c, i, rec))?;
            }
        }
        w.flush()?;
        Ok(())
    })
}

/// Curves thinned to at most [`CURVE_POINTS`] episodes per run.
pub fn emit_curves(curves: &[Curve], path: &Path) -> Result<(), HarnessError> {
    write_file(path, |f| {
        let mut w = csv::Writer::from_writer(f);
        for c in curves {
            for (i, rec) in downsample(&c.episodes, CURVE_POINTS) {
                w.serialize(EpisodeLine::new(c, i, &rec))?;
            }
        }
        w.flush()?;
        Ok(())
    })
}
