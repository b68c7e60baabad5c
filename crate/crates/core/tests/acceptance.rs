//! Acceptance criteria. Each test prints one `PASS` / `FAIL` line.
//!
//! Run with `cargo test -p heurql --test acceptance -- --nocapture` to see
//! the report. Set `HEURQL_BLESS_GOLDEN=1` to rewrite the render golden files.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use heurql::gridworld::{shortest_path_length, Cell, GridMap, Position};
use heurql::harness::mapgen::{suite, SUITE_SEED};
use heurql::harness::metrics_csv::write_rows;
use heurql::harness::render::render_qtable;
use heurql::harness::{run_comparison, MapCase, MethodSpec, PredictionSource, SweepConfig, SweepResult};
use heurql::heuristics::{
    adaptive_threshold, blended_crf, d_crf, d_qi, ndr_crf, ndr_qi, region_mask, HeuristicError, PredictionGrid,
    PredictionKind, RewardParams,
};
use heurql::oracle::{oracle_guideline, oracle_region, OracleParams};
use heurql::pgrid;
use heurql::qlearning::{init_qtable, train, LearnerConfig, QInit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const REL_TOL: f64 = 1e-12;
const SUITE_SEEDS: u64 = 10;

/// Writes straight to stderr so the line shows up even when output is captured.
fn report(name: &str, pass: bool, detail: &str, started: Instant) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!(
        "[{verdict}] {name}: {detail} ({:.2}s)\n",
        started.elapsed().as_secs_f64()
    );
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}

fn close(got: f64, want: f64) -> bool {
    if want == 0.0 {
        got == 0.0
    } else {
        ((got - want) / want).abs() <= REL_TOL
    }
}

/// Collects `(label, got, want)` checks and returns the failures.
struct Checks(Vec<String>, usize);

impl Checks {
    fn new() -> Self {
        Self(Vec::new(), 0)
    }

    fn value(&mut self, label: &str, got: f64, want: f64) {
        self.1 += 1;
        if !close(got, want) {
            self.0.push(format!("{label}: got {got:e}, want {want:e}"));
        }
    }
}

fn grid(kind: PredictionKind, w: usize, h: usize, cells: &[((usize, usize), f64)]) -> PredictionGrid {
    let mut values = vec![0.0; w * h];
    for &((x, y), v) in cells {
        values[y * w + x] = v;
    }
    PredictionGrid::new(kind, w, h, values).unwrap()
}

#[test]
fn equation_unit_suite() {
    let started = Instant::now();
    let mut c = Checks::new();
    let p = |x, y| Position::new(x, y);

    // Distance field on a 20x12 map, goal (12, 6), r0 = 0.5, r_max = 40, Gx = 10, Gy = 5.
    let map = GridMap::empty(20, 12, p(0, 11), p(12, 6)).unwrap();
    let params = RewardParams {
        r0: 0.5,
        r_max: 40.0,
        gx: 10.0,
        gy: 5.0,
        omega: 0.3,
    };
    let field = d_crf(&map, &params).unwrap();
    for ((x, y), want) in [
        ((12, 6), 40.5),
        ((2, 6), 15.215177646857693),
        ((12, 1), 15.215177646857693),
        ((15, 10), 13.814843347923182),
        ((0, 0), 4.1287181315765),
        ((19, 11), 7.807340962109387),
    ] {
        c.value(&format!("d_crf({x},{y})"), field.get(p(x, y)), want);
    }
    let unit = RewardParams {
        r0: 0.0,
        r_max: 40.0,
        gx: 10.0,
        gy: 10.0,
        omega: 0.5,
    };
    let wide = GridMap::empty(21, 2, p(0, 1), p(10, 0)).unwrap();
    c.value(
        "d_crf offset (10,0)",
        d_crf(&wide, &unit).unwrap().get(p(0, 0)),
        14.715177646857693,
    );

    // Guideline field.
    let g = grid(
        PredictionKind::Guideline,
        20,
        12,
        &[
            ((12, 6), 1.0),
            ((2, 6), 0.5),
            ((12, 1), 0.0),
            ((15, 10), 0.8),
            ((0, 0), 0.125),
            ((19, 11), 0.3),
        ],
    );
    let ndr = ndr_crf(&g, &params).unwrap();
    for ((x, y), want) in [
        ((12, 6), 40.0),
        ((2, 6), 20.0),
        ((12, 1), 0.0),
        ((15, 10), 32.0),
        ((0, 0), 5.0),
        ((19, 11), 12.0),
    ] {
        c.value(&format!("ndr_crf({x},{y})"), ndr.get(p(x, y)), want);
    }

    // Blend at omega = 0.3; r0 is not part of the blend.
    let blend = blended_crf(&map, &g, &params).unwrap();
    for ((x, y), want) in [
        ((12, 6), 40.0),
        ((2, 6), 16.300624352800384),
        ((12, 1), 10.300624352800385),
        ((15, 10), 18.920390343546224),
        ((0, 0), 4.0401026921035506),
        ((19, 11), 8.71513867347657),
    ] {
        c.value(&format!("blended_crf({x},{y})"), blend.get(p(x, y)), want);
    }
    let at = |o: f64| RewardParams {
        omega: o,
        r0: 0.0,
        ..params
    };
    let ends = (
        blended_crf(&map, &g, &at(1.0)).unwrap(),
        blended_crf(&map, &g, &at(0.0)).unwrap(),
    );
    let (ndr_ref, d_ref) = (ndr_crf(&g, &at(1.0)).unwrap(), d_crf(&map, &at(0.0)).unwrap());
    for pos in map.positions() {
        c.value("blend omega=1", ends.0.get(pos), ndr_ref.get(pos));
        c.value("blend omega=0", ends.1.get(pos), d_ref.get(pos));
    }

    // Euclidean prior on a 9x9 map with the goal in the corner.
    let corner = GridMap::empty(9, 9, p(8, 8), p(0, 0)).unwrap();
    let dq = d_qi(&corner);
    for ((x, y), want) in [
        ((0, 0), 1.0),
        ((3, 4), 0.006737946999085467),
        ((1, 1), 0.2431167344342142),
        ((6, 8), 4.5399929762484854e-05),
        ((0, 7), 0.0009118819655545162),
    ] {
        c.value(&format!("d_qi({x},{y})"), dq.get(p(x, y)), want);
    }

    // Mask at a fixed threshold.
    let r = grid(
        PredictionKind::Region,
        3,
        2,
        &[
            ((0, 0), 0.995),
            ((1, 0), 0.5),
            ((2, 0), 0.99),
            ((0, 1), 1.0),
            ((1, 1), 0.0),
            ((2, 1), 0.991),
        ],
    );
    let mask = region_mask(&r, 0.99).unwrap();
    for (i, want) in [0.0, -10.0, -10.0, 0.0, -10.0, 0.0].into_iter().enumerate() {
        c.value(&format!("region_mask[{i}] thd=0.99"), mask[i], want);
    }
    c.value("region_mask 0.5 at thd=0.49", region_mask(&r, 0.49).unwrap()[1], 0.0);

    // Region prior: a ring along the top row and right column, the goal
    // itself at 0, and an isolated in-region cell at (3, 4).
    let mut ring: Vec<((usize, usize), f64)> = (1..9).map(|x| ((x, 0), 1.0)).collect();
    ring.extend((0..9).map(|y| ((8, y), 1.0)));
    ring.push(((3, 4), 1.0));
    let region = grid(PredictionKind::Region, 9, 9, &ring);
    let half = ndr_qi(&corner, &region, 0.5).unwrap();
    c.value("ndr_qi thd", half.thd().unwrap(), 0.99);
    c.value("ndr_qi w=0.5 goal", half.get(p(0, 0)), -4.5);
    c.value("ndr_qi w=0.5 (3,4)", half.get(p(3, 4)), 0.0033689734995427335);
    c.value("ndr_qi w=0.5 (1,1)", half.get(p(1, 1)), -4.878441632782893);
    c.value(
        "ndr_qi w=0.25 (1,1)",
        ndr_qi(&corner, &region, 0.25).unwrap().get(p(1, 1)),
        -2.3176624491743394,
    );
    let full = ndr_qi(&corner, &region, 1.0).unwrap();
    c.value("ndr_qi w=1 (3,4)", full.get(p(3, 4)), 0.0);
    c.value("ndr_qi w=1 (8,4)", full.get(p(8, 4)), 0.0);
    c.value("ndr_qi w=1 (1,1)", full.get(p(1, 1)), -10.0);
    let zero = ndr_qi(&corner, &region, 0.0).unwrap();
    for pos in corner.positions() {
        c.value("ndr_qi w=0", zero.get(pos), dq.get(pos));
    }

    let pass = c.0.is_empty() && started.elapsed().as_secs_f64() < 1.0;
    let detail = format!("{} values checked, {} off by more than 1e-12 relative", c.1, c.0.len());
    report("equation unit suite", pass, &detail, started);
    assert!(c.0.is_empty(), "{:#?}", c.0);
}

#[test]
fn adaptive_threshold_examples() {
    let started = Instant::now();
    // Unobstructed corridor: the start-goal path has value 1, the rest 0.
    let map = GridMap::parse("S...G\n.....\n.....\n").unwrap();
    let corridor = grid(
        PredictionKind::Region,
        5,
        3,
        &(0..5).map(|x| ((x, 0), 1.0)).collect::<Vec<_>>(),
    );
    let open = GridMap::empty(6, 6, Position::new(0, 0), Position::new(5, 5)).unwrap();
    let half = PredictionGrid::uniform(PredictionKind::Region, 6, 6, 0.5).unwrap();
    let none = PredictionGrid::uniform(PredictionKind::Region, 6, 6, 0.0).unwrap();

    let got = (
        adaptive_threshold(&map, &corridor),
        adaptive_threshold(&open, &half),
        adaptive_threshold(&open, &none),
    );
    let pass = got.0 == Ok(0.99) && got.1 == Ok(0.49) && got.2 == Err(HeuristicError::NoConnectivity);
    let pass_time = started.elapsed().as_secs_f64() < 1.0;
    report(
        "adaptive threshold",
        pass && pass_time,
        &format!("corridor {:?}, uniform 0.5 {:?}, uniform 0 {:?}", got.0, got.1, got.2),
        started,
    );
    assert!(pass);
}

/// Random 10x10 maps: half empty, half with 15% obstacles; start and goal
/// drawn at random at least 5 steps apart.
fn random_maps(count: usize, seed: u64) -> Vec<MapCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut maps = Vec::new();
    while maps.len() < count {
        let density = if maps.len() < count / 2 { 0.0 } else { 0.15 };
        let start = Position::new(rng.gen_range(0..10), rng.gen_range(0..10));
        let goal = Position::new(rng.gen_range(0..10), rng.gen_range(0..10));
        if start.manhattan(goal) < 5 {
            continue;
        }
        let cells = (0..100)
            .map(|i| {
                let p = Position::new(i % 10, i / 10);
                if p != start && p != goal && rng.gen_bool(density) {
                    Cell::Obstacle
                } else {
                    Cell::Free
                }
            })
            .collect();
        let map = GridMap::new(10, 10, cells, start, goal).unwrap();
        if shortest_path_length(&map, start, goal).is_some() {
            maps.push(MapCase::new(format!("r{}", maps.len()), map));
        }
    }
    maps
}

#[test]
fn optimality_oracle() {
    let started = Instant::now();
    let maps = random_maps(20, 4242);
    let methods = MethodSpec::ablation_set(&PredictionSource::default());
    let result = run_comparison(&maps, &methods, &[0, 1, 2], &SweepConfig::default()).unwrap();
    let mut converged = 0;
    let mut mismatches = Vec::new();
    let mut by_setting: BTreeMap<&str, usize> = BTreeMap::new();
    for row in &result.rows {
        assert!(row.error.is_none(), "{row:?}");
        if !row.converged {
            continue;
        }
        converged += 1;
        let case = maps.iter().find(|c| c.id == row.map_id).unwrap();
        let optimum = shortest_path_length(&case.map, case.map.start(), case.map.goal());
        if row.greedy_length != optimum {
            *by_setting.entry(&row.method).or_default() += 1;
            mismatches.push(format!(
                "{} {} seed {}: greedy {:?} vs {:?}",
                row.map_id, row.method, row.seed, row.greedy_length, optimum
            ));
        }
    }
    let pass = mismatches.is_empty() && started.elapsed().as_secs_f64() < 120.0;
    report(
        "optimality oracle",
        pass,
        &format!(
            "{converged}/{} runs converged, {} converged greedy paths longer than BFS {by_setting:?}",
            result.rows.len(),
            mismatches.len()
        ),
        started,
    );
    assert!(mismatches.is_empty(), "{mismatches:#?}");
}

fn suite_cases() -> Vec<MapCase> {
    suite(SUITE_SEED)
        .into_iter()
        .map(|(id, map)| MapCase::new(id, map))
        .collect()
}

fn suite_seeds() -> Vec<u64> {
    (0..SUITE_SEEDS).collect()
}

fn comparison() -> &'static (SweepResult, f64) {
    static CELL: OnceLock<(SweepResult, f64)> = OnceLock::new();
    CELL.get_or_init(|| {
        let started = Instant::now();
        let methods = MethodSpec::comparison_set(&PredictionSource::default());
        let r = run_comparison(&suite_cases(), &methods, &suite_seeds(), &SweepConfig::default()).unwrap();
        (r, started.elapsed().as_secs_f64())
    })
}

fn ablation() -> &'static (SweepResult, f64) {
    static CELL: OnceLock<(SweepResult, f64)> = OnceLock::new();
    CELL.get_or_init(|| {
        let started = Instant::now();
        let methods = MethodSpec::ablation_set(&PredictionSource::default());
        let r = run_comparison(&suite_cases(), &methods, &suite_seeds(), &SweepConfig::default()).unwrap();
        (r, started.elapsed().as_secs_f64())
    })
}

fn mean(result: &SweepResult, map: &str, method: &str) -> f64 {
    result.mean_convergence_steps(map, method).unwrap()
}

#[test]
fn convergence_speedup() {
    let started = Instant::now();
    let (result, secs) = comparison();
    assert!(result.rows.iter().all(|r| r.error.is_none()));
    let mut ratios = Vec::new();
    let mut ordered = 0;
    for case in suite_cases() {
        let ndr = mean(result, &case.id, "ndr-ql");
        let ql = mean(result, &case.id, "ql");
        let dqi = mean(result, &case.id, "o-ql");
        ratios.push((case.id.clone(), ndr / ql));
        if ndr < dqi {
            ordered += 1;
        }
    }
    let halved = ratios.iter().all(|(_, r)| *r <= 0.5);
    let pass = halved && ordered >= 4 && *secs < 900.0;
    let shown: Vec<String> = ratios.iter().map(|(id, r)| format!("{id} {r:.2}")).collect();
    report(
        "convergence speedup",
        pass,
        &format!(
            "ndr-ql/ql per map [{}]; ndr-ql < o-ql on {ordered}/5 maps",
            shown.join(", ")
        ),
        started,
    );
    assert!(halved, "{ratios:?}");
    assert!(ordered >= 4);
}

#[test]
fn ablation_structure() {
    let started = Instant::now();
    let (result, secs) = ablation();
    assert!(result.rows.iter().all(|r| r.error.is_none()));
    let names: Vec<String> = MethodSpec::ablation_set(&PredictionSource::default())
        .into_iter()
        .map(|m| m.name)
        .collect();
    let mut all_min = 0;
    let mut nc_beats_dc = 0;
    let mut notes = Vec::new();
    for case in suite_cases() {
        let best = names
            .iter()
            .min_by(|a, b| mean(result, &case.id, a).total_cmp(&mean(result, &case.id, b)))
            .unwrap();
        if best == "all" {
            all_min += 1;
        } else {
            notes.push(format!("{}: fastest {best}", case.id));
        }
        if mean(result, &case.id, "N-C") < mean(result, &case.id, "D-C") {
            nc_beats_dc += 1;
        }
    }
    let pass = all_min >= 4 && nc_beats_dc == 5 && *secs < 1800.0;
    report(
        "ablation structure",
        pass,
        &format!("all-four fastest on {all_min}/5 maps {notes:?}; N-C < D-C on {nc_beats_dc}/5"),
        started,
    );
    assert!(all_min >= 4);
    assert_eq!(nc_beats_dc, 5);
}

#[test]
fn path_quality_ordering() {
    let started = Instant::now();
    let (result, _) = comparison();
    let longest = |map: &str, method: &str| result.rows_for(map, method).filter_map(|r| r.longest_distance).max();
    let mut failures = Vec::new();
    let mut shown = Vec::new();
    for case in suite_cases() {
        let (ndr, ql) = (longest(&case.id, "ndr-ql"), longest(&case.id, "ql"));
        shown.push(format!("{} {:?}/{:?}", case.id, ndr, ql));
        if !(ndr.is_some() && ql.is_some() && ndr <= ql) {
            failures.push(case.id.clone());
        }
    }
    report(
        "path-quality ordering",
        failures.is_empty(),
        &format!("longest ndr-ql/ql [{}]", shown.join(", ")),
        started,
    );
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn determinism() {
    let started = Instant::now();
    let maps: Vec<MapCase> = suite_cases().into_iter().take(2).collect();
    let methods = MethodSpec::comparison_set(&PredictionSource::default());
    let csv = |workers: usize, reversed: bool| {
        let mut seeds = vec![3, 4, 5];
        let mut ms = methods.clone();
        if reversed {
            seeds.reverse();
            ms.reverse();
        }
        let config = SweepConfig {
            workers,
            ..SweepConfig::default()
        };
        let mut r = run_comparison(&maps, &ms, &seeds, &config).unwrap();
        r.rows
            .sort_by(|a, b| (&a.map_id, &a.method, a.seed).cmp(&(&b.map_id, &b.method, b.seed)));
        let mut buf = Vec::new();
        write_rows(&r.rows, &mut buf).unwrap();
        buf
    };
    let first = csv(1, false);
    let same = first == csv(1, false) && first == csv(3, false) && first == csv(2, true);
    report(
        "determinism",
        same,
        &format!(
            "{} CSV bytes identical across reruns, worker counts and job order",
            first.len()
        ),
        started,
    );
    assert!(same);
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

fn golden_images() -> Vec<(&'static str, Vec<u8>)> {
    let small = GridMap::parse("S....\n.##..\n...#.\n.#...\n....G\n").unwrap();
    let prior = init_qtable(&small, QInit::Field(&d_qi(&small))).unwrap();
    let region = oracle_region(&small, &OracleParams::default()).unwrap();
    let masked = init_qtable(&small, QInit::Field(&ndr_qi(&small, &region, 0.5).unwrap())).unwrap();
    let config = LearnerConfig {
        seed: 7,
        ..LearnerConfig::default()
    };
    let trained = train(&small, init_qtable(&small, QInit::Uniform).unwrap(), None, &config)
        .unwrap()
        .qtable;
    vec![
        ("small-dqi.ppm", render_qtable(&prior, &small, 9).unwrap().to_ppm()),
        ("small-ndrqi.ppm", render_qtable(&masked, &small, 9).unwrap().to_ppm()),
        (
            "small-trained.ppm",
            render_qtable(&trained, &small, 7).unwrap().to_ppm(),
        ),
    ]
}

#[test]
fn format_round_trips() {
    let started = Instant::now();
    let mut problems = Vec::new();

    let shipped = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../maps");
    let mut maps: Vec<GridMap> = Vec::new();
    for (id, generated) in suite(SUITE_SEED) {
        let text = std::fs::read_to_string(shipped.join(format!("{id}.map"))).unwrap();
        let parsed = GridMap::parse(&text).unwrap();
        if parsed.to_text() != text || parsed != generated {
            problems.push(format!("map {id}"));
        }
        maps.push(parsed);
    }
    maps.extend(random_maps(40, 99).into_iter().map(|c| c.map));
    for map in &maps {
        if GridMap::parse(&map.to_text()).as_ref() != Ok(map) {
            problems.push("random map".into());
        }
        let params = OracleParams::default();
        for g in [
            oracle_guideline(map, &params).unwrap(),
            oracle_region(map, &params).unwrap(),
        ] {
            if pgrid::parse(&pgrid::emit(&g)).as_ref() != Ok(&g) {
                problems.push(format!("pgrid {:?}", g.kind()));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let (w, h) = (rng.gen_range(2..12), rng.gen_range(2..12));
        let values: Vec<f64> = (0..w * h).map(|_| rng.gen::<f64>()).collect();
        let g = PredictionGrid::new(PredictionKind::Guideline, w, h, values).unwrap();
        if pgrid::parse(&pgrid::emit(&g)).as_ref() != Ok(&g) {
            problems.push("random pgrid".into());
        }
    }

    let bless = std::env::var_os("HEURQL_BLESS_GOLDEN").is_some();
    let images = golden_images();
    for (name, bytes) in &images {
        let path = golden_dir().join(name);
        if bless {
            std::fs::create_dir_all(golden_dir()).unwrap();
            std::fs::write(&path, bytes).unwrap();
        }
        match std::fs::read(&path) {
            Ok(expected) if &expected == bytes => {}
            _ => problems.push(format!("render {name}")),
        }
    }
    report(
        "format round-trips",
        problems.is_empty(),
        &format!(
            "{} maps, {} prediction grids, {} golden renderings; {} mismatches",
            maps.len(),
            2 * maps.len() + 50,
            images.len(),
            problems.len()
        ),
        started,
    );
    assert!(problems.is_empty(), "{problems:?}");
}
