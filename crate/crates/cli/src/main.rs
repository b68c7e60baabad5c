use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use heurql::gridworld::GridMap;
use heurql::harness::config::Settings;
use heurql::harness::mapgen::{self, SUITE_SEED};
use heurql::harness::metrics_csv;
use heurql::harness::render::{render_qtable, DEFAULT_CELL};
use heurql::harness::sweep::{RunOutput, SweepRow};
use heurql::harness::{
    methods::METHOD_NAMES, run_ablation, run_comparison, run_single, HarnessError, MapCase, MethodSpec,
    PredictionSource, SweepConfig, SweepResult,
};
use heurql::oracle::{oracle_guideline, oracle_region, OracleParams};
use heurql::pgrid;

const METHODS_HELP: &str = "\
Methods:
  ql      sparse rewards, zero-initialised table
  o-ql    sparse rewards, table initialised from the Euclidean distance prior
  iql     distance-based continuous reward, zero-initialised table
  ndr-ql  blended guideline/distance reward, table initialised from the
          region mask blended with the distance prior

o-ql and iql reproduce only the heuristic priors of those methods; their
learning-rate and action-selection changes are not included.

Predictions come from the built-in BFS oracle unless --pred-guideline /
--pred-region name PGRID files.

Every flag can also be set in a --config file of `key = value` lines, using
the flag name without dashes as the key (e.g. `pred-region = r.pgrid`).
Flags given on the command line override the file.

Exit status: 0 on success, 1 on usage errors, 2 when a run fails.";

#[derive(Debug, Parser)]
#[command(name = "heurql", version, about = "Heuristic-accelerated tabular Q-learning on grid maps", after_help = METHODS_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one method on one map.
    #[command(after_help = METHODS_HELP)]
    Run(Opts),
    /// Compare ql, o-ql, iql and ndr-ql over maps and seeds.
    #[command(after_help = METHODS_HELP)]
    Compare(Opts),
    /// Run the eight heuristic ablation settings over maps and seeds.
    #[command(after_help = METHODS_HELP)]
    Ablate(Opts),
    /// Write oracle guideline and region PGRID files for a map.
    Oracle(Opts),
    /// Train one method and write its Q-table as a PPM image.
    #[command(after_help = METHODS_HELP)]
    Render(Opts),
    /// Write the generated benchmark maps.
    GenMaps(Opts),
}

#[derive(Debug, Args)]
struct Opts {
    /// Settings file of `key = value` lines.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Map file, or a directory of `.map` files. Sweeps default to the generated suite.
    #[arg(long, value_name = "PATH")]
    map: Option<String>,
    /// Method for `run` and `render` (ql, o-ql, iql, ndr-ql).
    #[arg(long)]
    method: Option<String>,
    /// Guideline PGRID file used instead of the oracle.
    #[arg(long, value_name = "FILE")]
    pred_guideline: Option<String>,
    /// Region PGRID file used instead of the oracle.
    #[arg(long, value_name = "FILE")]
    pred_region: Option<String>,
    /// Learning rate [default: 0.1].
    #[arg(long)]
    alpha: Option<f64>,
    /// Exploration rate [default: 0.2].
    #[arg(long)]
    epsilon: Option<f64>,
    /// Discount factor [default: 0.9].
    #[arg(long)]
    gamma: Option<f64>,
    /// Blend weight of the blended reward and Q-table prior [default: 0.5].
    #[arg(long)]
    omega: Option<f64>,
    /// Peak value of the continuous reward fields [default: 3].
    #[arg(long)]
    r_max: Option<f64>,
    /// Seed of a single run, or the first seed of a sweep.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of consecutive seeds per sweep cell.
    #[arg(long, value_name = "N")]
    seeds: Option<usize>,
    /// Episode budget per run [default: 20000].
    #[arg(long, value_name = "N")]
    max_episodes: Option<usize>,
    /// Step limit per episode [default: 5000].
    #[arg(long, value_name = "N")]
    step_cap: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<String>,
    /// Worker threads for sweeps [default: 1].
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Pixels per map cell in renderings.
    #[arg(long, value_name = "N")]
    cell_size: Option<usize>,
}

impl Opts {
    fn flag_settings(&self) -> Settings {
        let mut s = Settings::default();
        let mut put = |key: &str, v: Option<String>| {
            if let Some(v) = v {
                s.set(key, v);
            }
        };
        put("map", self.map.clone());
        put("method", self.method.clone());
        put("pred-guideline", self.pred_guideline.clone());
        put("pred-region", self.pred_region.clone());
        put("alpha", self.alpha.map(|v| v.to_string()));
        put("epsilon", self.epsilon.map(|v| v.to_string()));
        put("gamma", self.gamma.map(|v| v.to_string()));
        put("omega", self.omega.map(|v| v.to_string()));
        put("r-max", self.r_max.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("seeds", self.seeds.map(|v| v.to_string()));
        put("max-episodes", self.max_episodes.map(|v| v.to_string()));
        put("step-cap", self.step_cap.map(|v| v.to_string()));
        put("out", self.out.clone());
        put("workers", self.workers.map(|v| v.to_string()));
        put("cell-size", self.cell_size.map(|v| v.to_string()));
        s
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        if e.is_usage() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

fn usage(e: impl fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime(e: impl fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Flags and settings file combined into typed values.
struct Resolved {
    map: Option<PathBuf>,
    method: String,
    predictions: PredictionSource,
    sweep: SweepConfig,
    seed: u64,
    seed_given: Option<u64>,
    seeds: usize,
    out: Option<PathBuf>,
    cell: usize,
}

impl Resolved {
    fn from_opts(opts: &Opts) -> Result<Self, CliError> {
        let file = match &opts.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
                Settings::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
            }
            None => Settings::default(),
        };
        let s = file.merged_with(&opts.flag_settings());

        let mut sweep = SweepConfig::default();
        let l = &mut sweep.learner;
        macro_rules! take {
            ($key:literal, $slot:expr) => {
                if let Some(v) = s.parsed($key).map_err(usage)? {
                    $slot = v;
                }
            };
        }
        take!("alpha", l.alpha);
        take!("epsilon", l.epsilon);
        take!("gamma", l.gamma);
        take!("max-episodes", l.max_episodes);
        take!("step-cap", l.step_cap);
        take!("omega", sweep.omega);
        take!("r-max", sweep.r_max);
        take!("workers", sweep.workers);
        sweep.learner.validate().map_err(usage)?;
        if !(0.0..=1.0).contains(&sweep.omega) {
            return Err(usage("omega must lie in [0, 1]"));
        }
        if !(sweep.r_max.is_finite() && sweep.r_max >= 0.0) {
            return Err(usage("r-max must be a non-negative number"));
        }
        if sweep.workers == 0 {
            return Err(usage("workers must be at least 1"));
        }

        let guideline = s.get("pred-guideline").map(PathBuf::from);
        let region = s.get("pred-region").map(PathBuf::from);
        let predictions = if guideline.is_some() || region.is_some() {
            PredictionSource::Files { guideline, region }
        } else {
            PredictionSource::Oracle(OracleParams::default())
        };
        let method = s.get("method").unwrap_or("ndr-ql").to_string();
        if !METHOD_NAMES.contains(&method.as_str()) {
            return Err(usage(format!(
                "unknown method `{method}`; expected one of {}",
                METHOD_NAMES.join(", ")
            )));
        }
        let seeds = s.parsed("seeds").map_err(usage)?.unwrap_or(10);
        if seeds == 0 {
            return Err(usage("seeds must be at least 1"));
        }
        let cell = s.parsed("cell-size").map_err(usage)?.unwrap_or(DEFAULT_CELL);
        if cell == 0 {
            return Err(usage("cell-size must be at least 1"));
        }
        let seed_given = s.parsed("seed").map_err(usage)?;
        Ok(Self {
            map: s.get("map").map(PathBuf::from),
            method,
            predictions,
            sweep,
            seed: seed_given.unwrap_or(0),
            seed_given,
            seeds,
            out: s.get("out").map(PathBuf::from),
            cell,
        })
    }

    fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| self.seed.wrapping_add(i)).collect()
    }

    fn method_spec(&self) -> MethodSpec {
        MethodSpec::named(&self.method, self.predictions.clone()).expect("method name checked on resolve")
    }

    fn require_map(&self) -> Result<&Path, CliError> {
        self.map.as_deref().ok_or_else(|| usage("--map is required"))
    }

    fn out_dir(&self, default: &str) -> Result<PathBuf, CliError> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from(default));
        std::fs::create_dir_all(&dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
        Ok(dir)
    }
}

fn read_map(path: &Path) -> Result<GridMap, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    GridMap::parse(&text).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn map_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// A single file, every `.map` file of a directory, or the generated suite.
fn load_maps(path: Option<&Path>) -> Result<Vec<MapCase>, CliError> {
    let Some(path) = path else {
        return Ok(mapgen::suite(SUITE_SEED)
            .into_iter()
            .map(|(id, map)| MapCase::new(id, map))
            .collect());
    };
    if !path.is_dir() {
        return Ok(vec![MapCase::new(map_id(path), read_map(path)?)]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| runtime(format!("{}: {e}", path.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "map"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(usage(format!("{}: no .map files", path.display())));
    }
    files
        .iter()
        .map(|p| Ok(MapCase::new(map_id(p), read_map(p)?)))
        .collect()
}

fn write_sweep(result: &SweepResult, dir: &Path) -> Result<(), CliError> {
    metrics_csv::emit_csv(result, &dir.join("metrics.csv"))?;
    metrics_csv::emit_timings(result, &dir.join("timings.csv"))?;
    metrics_csv::emit_episodes(&result.curves, &dir.join("episodes.csv"))?;
    metrics_csv::emit_curves(&result.curves, &dir.join("curves.csv"))?;
    Ok(())
}

fn print_summary(result: &SweepResult, maps: &[MapCase], methods: &[MethodSpec]) {
    println!(
        "{:<12} {:<10} {:>9} {:>16} {:>9}",
        "map", "method", "converged", "mean steps", "longest"
    );
    for case in maps {
        for m in methods {
            let rows: Vec<&SweepRow> = result.rows_for(&case.id, &m.name).collect();
            let ok = rows.iter().filter(|r| r.converged).count();
            let mean = result
                .mean_convergence_steps(&case.id, &m.name)
                .map_or("-".to_string(), |v| format!("{v:.0}"));
            let longest = rows
                .iter()
                .filter_map(|r| r.longest_distance)
                .max()
                .map_or("-".to_string(), |v| v.to_string());
            println!(
                "{:<12} {:<10} {:>9} {:>16} {:>9}",
                case.id,
                m.name,
                format!("{ok}/{}", rows.len()),
                mean,
                longest
            );
        }
    }
}

fn finish_sweep(result: &SweepResult, maps: &[MapCase], methods: &[MethodSpec], r: &Resolved) -> Result<(), CliError> {
    if r.out.is_some() {
        write_sweep(result, &r.out_dir(".")?)?;
    }
    print_summary(result, maps, methods);
    let failed: Vec<&SweepRow> = result.rows.iter().filter(|row| row.error.is_some()).collect();
    if let Some(first) = failed.first() {
        return Err(runtime(format!(
            "{} of {} runs failed; first: {} {} seed {}: {}",
            failed.len(),
            result.rows.len(),
            first.map_id,
            first.method,
            first.seed,
            first.error.as_deref().unwrap_or("")
        )));
    }
    Ok(())
}

fn train_one(r: &Resolved) -> Result<(MapCase, RunOutput), CliError> {
    let path = r.require_map()?;
    let case = MapCase::new(map_id(path), read_map(path)?);
    let out = run_single(&case.map, &r.method_spec(), &r.sweep, r.seed)?;
    Ok((case, out))
}

fn cmd_run(r: &Resolved) -> Result<(), CliError> {
    let (case, out) = train_one(r)?;
    let m = &out.metrics;
    let show = |v: Option<String>| v.unwrap_or_else(|| "-".into());
    println!("map                 {}", case.id);
    println!("method              {}", r.method);
    println!("seed                {}", r.seed);
    println!("converged           {}", m.converged());
    println!(
        "convergence steps   {}",
        show(m.convergence_steps.map(|v| v.to_string()))
    );
    println!(
        "convergence episode {}",
        show(m.convergence_episode.map(|v| v.to_string()))
    );
    println!("episodes            {}", m.per_episode.len());
    println!("total steps         {}", m.total_steps);
    println!(
        "shortest distance   {}",
        show(m.shortest_distance.map(|v| v.to_string()))
    );
    println!(
        "longest distance    {}",
        show(m.longest_distance.map(|v| v.to_string()))
    );
    println!("greedy length       {}", show(out.greedy_length.map(|v| v.to_string())));
    if let Some(thd) = out.thd {
        println!("region threshold    {thd}");
    }
    if r.out.is_some() {
        let dir = r.out_dir(".")?;
        let result = SweepResult {
            rows: vec![SweepRow {
                map_id: case.id.clone(),
                method: r.method.clone(),
                seed: r.seed,
                converged: m.converged(),
                convergence_steps: m.convergence_steps,
                convergence_episode: m.convergence_episode,
                episodes: m.per_episode.len(),
                total_steps: m.total_steps,
                shortest_distance: m.shortest_distance,
                longest_distance: m.longest_distance,
                greedy_length: out.greedy_length,
                threshold: out.thd,
                error: None,
                wall_time: 0.0,
            }],
            curves: vec![heurql::harness::sweep::Curve {
                map_id: case.id.clone(),
                method: r.method.clone(),
                seed: r.seed,
                episodes: m.per_episode.clone(),
            }],
        };
        metrics_csv::emit_csv(&result, &dir.join("metrics.csv"))?;
        metrics_csv::emit_episodes(&result.curves, &dir.join("episodes.csv"))?;
        metrics_csv::emit_curves(&result.curves, &dir.join("curves.csv"))?;
        write_render(&out, &case.map, r.cell, &dir.join("qtable.ppm"))?;
    }
    if !m.converged() {
        return Err(runtime(format!(
            "no convergence within {} episodes",
            r.sweep.learner.max_episodes
        )));
    }
    Ok(())
}

fn write_render(out: &RunOutput, map: &GridMap, cell: usize, path: &Path) -> Result<(), CliError> {
    let img = render_qtable(&out.qtable, map, cell).map_err(runtime)?;
    img.write_ppm(path)
        .map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn cmd_sweep(r: &Resolved, methods: Vec<MethodSpec>, ablation: bool) -> Result<(), CliError> {
    let maps = load_maps(r.map.as_deref())?;
    for m in &methods {
        m.validate()?;
    }
    let mut config = r.sweep.clone();
    config.keep_curves = r.out.is_some();
    let seeds = r.seed_list();
    let result = if ablation {
        run_ablation(&maps, &seeds, &r.predictions, &config)?
    } else {
        run_comparison(&maps, &methods, &seeds, &config)?
    };
    finish_sweep(&result, &maps, &methods, r)
}

fn cmd_oracle(r: &Resolved) -> Result<(), CliError> {
    let path = r.require_map()?;
    let map = read_map(path)?;
    let params = OracleParams::default();
    let g = oracle_guideline(&map, &params).map_err(runtime)?;
    let region = oracle_region(&map, &params).map_err(runtime)?;
    let dir = r.out_dir(".")?;
    for (name, grid) in [("guideline.pgrid", &g), ("region.pgrid", &region)] {
        let target = dir.join(name);
        std::fs::write(&target, pgrid::emit(grid)).map_err(|e| runtime(format!("{}: {e}", target.display())))?;
        println!("{}", target.display());
    }
    Ok(())
}

fn cmd_render(r: &Resolved) -> Result<(), CliError> {
    let (case, out) = train_one(r)?;
    let dir = r.out_dir(".")?;
    let target = dir.join(format!("{}-{}-{}.ppm", case.id, r.method, r.seed));
    write_render(&out, &case.map, r.cell, &target)?;
    println!("{}", target.display());
    Ok(())
}

fn cmd_gen_maps(r: &Resolved) -> Result<(), CliError> {
    let dir = r.out_dir("maps")?;
    let seed = r.seed_given.unwrap_or(SUITE_SEED);
    for (id, map) in mapgen::suite(seed) {
        let target = dir.join(format!("{id}.map"));
        std::fs::write(&target, map.to_text()).map_err(|e| runtime(format!("{}: {e}", target.display())))?;
        println!("{}", target.display());
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run(o) => cmd_run(&Resolved::from_opts(&o)?),
        Command::Compare(o) => {
            let r = Resolved::from_opts(&o)?;
            cmd_sweep(&r, MethodSpec::comparison_set(&r.predictions), false)
        }
        Command::Ablate(o) => {
            let r = Resolved::from_opts(&o)?;
            cmd_sweep(&r, MethodSpec::ablation_set(&r.predictions), true)
        }
        Command::Oracle(o) => cmd_oracle(&Resolved::from_opts(&o)?),
        Command::Render(o) => cmd_render(&Resolved::from_opts(&o)?),
        Command::GenMaps(o) => cmd_gen_maps(&Resolved::from_opts(&o)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
