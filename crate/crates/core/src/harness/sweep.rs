//! Method-comparison sweeps over `(map, method, seed)` triples.
//!
//! Every run owns its table and RNG, so rows do not depend on execution
//! order or on the worker count. Results are sorted by map, method and seed
//! position before they are returned.

use std::time::Instant;

use rayon::prelude::*;

use crate::gridworld::GridMap;
use crate::heuristics::RewardParams;
use crate::qlearning::{greedy_rollout, train, EpisodeRecord, LearnerConfig, QTable, RunMetrics};

use super::methods::{load_predictions, prepare, MethodSpec, PredictionSource, Predictions};
use super::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub struct MapCase {
    pub id: String,
    pub map: GridMap,
}

impl MapCase {
    pub fn new(id: impl Into<String>, map: GridMap) -> Self {
        Self { id: id.into(), map }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub learner: LearnerConfig,
    /// Blend weight for the blended reward field and the blended prior.
    pub omega: f64,
    /// Peak reward of the continuous fields.
    pub r_max: f64,
    pub workers: usize,
    /// Keep per-episode records of every run.
    pub keep_curves: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            learner: LearnerConfig::default(),
            omega: RewardParams::DEFAULT_OMEGA,
            r_max: RewardParams::DEFAULT_R_MAX,
            workers: 1,
            keep_curves: false,
        }
    }
}

impl SweepConfig {
    pub fn reward_params(&self, map: &GridMap) -> RewardParams {
        RewardParams {
            omega: self.omega,
            r_max: self.r_max,
            ..RewardParams::for_map(map)
        }
    }
}

/// One `(map, method, seed)` result. `wall_time` is measured but is not part
/// of the deterministic CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub map_id: String,
    pub method: String,
    pub seed: u64,
    pub converged: bool,
    pub convergence_steps: Option<u64>,
    pub convergence_episode: Option<usize>,
    pub episodes: usize,
    pub total_steps: u64,
    pub shortest_distance: Option<usize>,
    pub longest_distance: Option<usize>,
    /// Length of the greedy rollout of the final table.
    pub greedy_length: Option<usize>,
    pub threshold: Option<f64>,
    pub error: Option<String>,
    pub wall_time: f64,
}

/// Per-episode records of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub map_id: String,
    pub method: String,
    pub seed: u64,
    pub episodes: Vec<EpisodeRecord>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub curves: Vec<Curve>,
}

impl SweepResult {
    pub fn rows_for<'a>(&'a self, map_id: &'a str, method: &'a str) -> impl Iterator<Item = &'a SweepRow> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.map_id == map_id && r.method == method)
    }

    /// Mean convergence steps of a `(map, method)` cell; non-converged runs
    /// count their total steps.
    pub fn mean_convergence_steps(&self, map_id: &str, method: &str) -> Option<f64> {
        let vals: Vec<f64> = self
            .rows_for(map_id, method)
            .filter(|r| r.error.is_none())
            .map(|r| r.convergence_steps.unwrap_or(r.total_steps) as f64)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Output of a single training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub qtable: QTable,
    pub greedy_length: Option<usize>,
    pub thd: Option<f64>,
}

/// Trains `method` on `map` with `seed`, given already-loaded predictions.
pub fn run_prepared(
    map: &GridMap,
    method: &MethodSpec,
    predictions: &Predictions,
    config: &SweepConfig,
    seed: u64,
) -> Result<RunOutput, HarnessError> {
    let prepared = prepare(map, method, predictions, &config.reward_params(map))?;
    let learner = LearnerConfig {
        seed,
        ..config.learner.clone()
    };
    let out = train(map, prepared.qtable, prepared.reward_field.as_ref(), &learner)?;
    let greedy_length = greedy_rollout(map, &out.qtable, learner.step_cap)
        .ok()
        .map(|p| p.len() - 1);
    Ok(RunOutput {
        metrics: out.metrics,
        qtable: out.qtable,
        greedy_length,
        thd: prepared.thd,
    })
}

/// Loads predictions for `method` and trains it once.
pub fn run_single(
    map: &GridMap,
    method: &MethodSpec,
    config: &SweepConfig,
    seed: u64,
) -> Result<RunOutput, HarnessError> {
    method.validate()?;
    let preds = load_predictions(
        map,
        &method.predictions,
        method.needs_guideline(),
        method.needs_region(),
    )?;
    run_prepared(map, method, &preds, config, seed)
}

/// Sort key (map, method, seed position), row and optional curve.
type JobResult = ((usize, usize, usize), SweepRow, Option<Curve>);

struct Job<'a> {
    map: usize,
    method: usize,
    seed_pos: usize,
    seed: u64,
    predictions: &'a Result<Predictions, String>,
}

/// Runs every `(map, method, seed)` combination. Predictions are built or
/// loaded once per map and prediction source. Failures are recorded in the
/// row's `error` column.
pub fn run_comparison(
    maps: &[MapCase],
    methods: &[MethodSpec],
    seeds: &[u64],
    config: &SweepConfig,
) -> Result<SweepResult, HarnessError> {
    // Distinct prediction sources and which grids each must provide.
    let mut sources: Vec<(PredictionSource, bool, bool)> = Vec::new();
    let mut source_of = Vec::with_capacity(methods.len());
    for m in methods {
        let idx = match sources.iter().position(|(s, _, _)| *s == m.predictions) {
            Some(i) => i,
            None => {
                sources.push((m.predictions.clone(), false, false));
                sources.len() - 1
            }
        };
        sources[idx].1 |= m.needs_guideline();
        sources[idx].2 |= m.needs_region();
        source_of.push(idx);
    }
    let predictions: Vec<Vec<Result<Predictions, String>>> = maps
        .iter()
        .map(|case| {
            sources
                .iter()
                .map(|(src, g, r)| load_predictions(&case.map, src, *g, *r).map_err(|e| e.to_string()))
                .collect()
        })
        .collect();

    let mut jobs = Vec::with_capacity(maps.len() * methods.len() * seeds.len());
    for (mi, map_preds) in predictions.iter().enumerate() {
        for (ki, _) in methods.iter().enumerate() {
            for (si, &seed) in seeds.iter().enumerate() {
                jobs.push(Job {
                    map: mi,
                    method: ki,
                    seed_pos: si,
                    seed,
                    predictions: &map_preds[source_of[ki]],
                });
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut results: Vec<JobResult> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let case = &maps[job.map];
                let method = &methods[job.method];
                let started = Instant::now();
                let outcome = method.validate().map_err(|e| e.to_string()).and_then(|_| {
                    let none = Predictions::default();
                    let preds = if method.needs_guideline() || method.needs_region() {
                        job.predictions.as_ref().map_err(Clone::clone)?
                    } else {
                        &none
                    };
                    run_prepared(&case.map, method, preds, config, job.seed).map_err(|e| e.to_string())
                });
                let wall_time = started.elapsed().as_secs_f64();
                let (row, curve) = make_row(case, method, job.seed, outcome, wall_time, config.keep_curves);
                ((job.map, job.method, job.seed_pos), row, curve)
            })
            .collect()
    });
    results.sort_by_key(|(key, _, _)| *key);
    let mut sweep = SweepResult::default();
    for (_, row, curve) in results {
        sweep.rows.push(row);
        sweep.curves.extend(curve);
    }
    Ok(sweep)
}

fn make_row(
    case: &MapCase,
    method: &MethodSpec,
    seed: u64,
    outcome: Result<RunOutput, String>,
    wall_time: f64,
    keep_curve: bool,
) -> (SweepRow, Option<Curve>) {
    let mut row = SweepRow {
        map_id: case.id.clone(),
        method: method.name.clone(),
        seed,
        converged: false,
        convergence_steps: None,
        convergence_episode: None,
        episodes: 0,
        total_steps: 0,
        shortest_distance: None,
        longest_distance: None,
        greedy_length: None,
        threshold: None,
        error: None,
        wall_time,
    };
    match outcome {
        Ok(out) => {
            let m = out.metrics;
            row.converged = m.converged();
            row.convergence_steps = m.convergence_steps;
            row.convergence_episode = m.convergence_episode;
            row.episodes = m.per_episode.len();
            row.total_steps = m.total_steps;
            row.shortest_distance = m.shortest_distance;
            row.longest_distance = m.longest_distance;
            row.greedy_length = out.greedy_length;
            row.threshold = out.thd;
            let curve = keep_curve.then(|| Curve {
                map_id: case.id.clone(),
                method: method.name.clone(),
                seed,
                episodes: m.per_episode,
            });
            (row, curve)
        }
        Err(e) => {
            row.error = Some(e);
            (row, None)
        }
    }
}

/// Runs the eight ablation settings on every map and seed.
pub fn run_ablation(
    maps: &[MapCase],
    seeds: &[u64],
    predictions: &PredictionSource,
    config: &SweepConfig,
) -> Result<SweepResult, HarnessError> {
    run_comparison(maps, &MethodSpec::ablation_set(predictions), seeds, config)
}

/// Evenly spaced subsample of at most `max_points` records, always keeping
/// the last one. Returns `(episode index, record)` pairs.
pub fn downsample(records: &[EpisodeRecord], max_points: usize) -> Vec<(usize, EpisodeRecord)> {
    if records.len() <= max_points || max_points < 2 {
        return records.iter().copied().enumerate().take(max_points).collect();
    }
    let last = records.len() - 1;
    (0..max_points)
        .map(|i| {
            let idx = i * last / (max_points - 1);
            (idx, records[idx])
        })
        .collect()
}
