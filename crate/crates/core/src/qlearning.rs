//! Tabular Q-learning with epsilon-greedy exploration.
//!
//! Randomness comes from a ChaCha8 stream seeded with [`LearnerConfig::seed`];
//! a run is a pure function of the map, the initial table, the reward field
//! and the config.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gridworld::{step, Action, GridMap, Position, Scenario, StepOutcome, VisitedSet};
use crate::heuristics::{QInitField, RewardField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnError {
    #[error("{what} is {found_w}x{found_h}, map is {map_w}x{map_h}")]
    DimensionMismatch {
        what: &'static str,
        map_w: usize,
        map_h: usize,
        found_w: usize,
        found_h: usize,
    },
    #[error("invalid learner config: {0}")]
    InvalidConfig(&'static str),
}

fn check_dims(what: &'static str, map: &GridMap, w: usize, h: usize) -> Result<(), LearnError> {
    if w != map.width() || h != map.height() {
        return Err(LearnError::DimensionMismatch {
            what,
            map_w: map.width(),
            map_h: map.height(),
            found_w: w,
            found_h: h,
        });
    }
    Ok(())
}

/// `Q(s, a)` for every cell and the four actions.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    width: usize,
    height: usize,
    values: Vec<[f64; 4]>,
}

/// How to fill a fresh table.
#[derive(Debug, Clone, Copy)]
pub enum QInit<'a> {
    Uniform,
    Field(&'a QInitField),
}

impl QTable {
    pub fn zeros(map: &GridMap) -> Self {
        Self {
            width: map.width(),
            height: map.height(),
            values: vec![[0.0; 4]; map.cell_count()],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, pos: Position) -> &[f64; 4] {
        &self.values[pos.y * self.width + pos.x]
    }

    pub fn get_mut(&mut self, pos: Position) -> &mut [f64; 4] {
        &mut self.values[pos.y * self.width + pos.x]
    }

    pub fn rows(&self) -> &[[f64; 4]] {
        &self.values
    }

    /// Greedy action; ties go to the earliest action in `Up, Down, Left, Right`.
    pub fn best_action(&self, pos: Position) -> Action {
        let q = self.get(pos);
        let mut best = 0;
        for i in 1..4 {
            if q[i] > q[best] {
                best = i;
            }
        }
        Action::ALL[best]
    }

    pub fn max_value(&self, pos: Position) -> f64 {
        let q = self.get(pos);
        q[0].max(q[1]).max(q[2]).max(q[3])
    }

    /// Smallest and largest entry over all cells.
    pub fn value_range(&self) -> (f64, f64) {
        self.values
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Builds the starting table. With a field, `Q(s, a)` is the field value of
/// the cell `a` leads to, or of `s` itself when the move is blocked.
pub fn init_qtable(map: &GridMap, init: QInit<'_>) -> Result<QTable, LearnError> {
    let mut table = QTable::zeros(map);
    if let QInit::Field(field) = init {
        check_dims("Q-init field", map, field.width(), field.height())?;
        for pos in map.positions() {
            let row = table.get_mut(pos);
            for action in Action::ALL {
                let target = map.successor(pos, action).unwrap_or(pos);
                row[action.index()] = field.get(target);
            }
        }
    }
    Ok(table)
}

/// Rewards for the discrete cases. `free` applies to ordinary moves when no
/// continuous field is supplied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConstants {
    pub collision: f64,
    pub goal: f64,
    pub revisit: f64,
    pub free: f64,
}

impl Default for RewardConstants {
    fn default() -> Self {
        Self {
            collision: -10.0,
            goal: 40.0,
            revisit: -5.0,
            free: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub max_episodes: usize,
    /// Steps after which an episode is cut off without the goal reward.
    pub step_cap: usize,
    pub seed: u64,
    pub convergence_window: usize,
    pub rewards: RewardConstants,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            epsilon: 0.2,
            gamma: 0.9,
            max_episodes: 20_000,
            step_cap: 5_000,
            seed: 0,
            convergence_window: 50,
            rewards: RewardConstants::default(),
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(LearnError::InvalidConfig("alpha must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(LearnError::InvalidConfig("epsilon must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(LearnError::InvalidConfig("gamma must lie in [0, 1)"));
        }
        if self.convergence_window < 2 {
            return Err(LearnError::InvalidConfig("convergence window must be at least 2"));
        }
        if self.step_cap == 0 {
            return Err(LearnError::InvalidConfig("step cap must be positive"));
        }
        Ok(())
    }
}

/// Reward for one transition; ordinary moves read the field at the cell
/// entered.
pub fn reward_of(outcome: &StepOutcome, field: Option<&RewardField>, rewards: &RewardConstants) -> f64 {
    match outcome.scenario {
        Scenario::Collision => rewards.collision,
        Scenario::Goal => rewards.goal,
        Scenario::Revisit => rewards.revisit,
        Scenario::Free => field.map_or(rewards.free, |f| f.get(outcome.next)),
    }
}

/// Epsilon-greedy choice. One uniform draw decides exploration; a second
/// picks the random action.
pub fn select_action<R: Rng + ?Sized>(q: &QTable, state: Position, epsilon: f64, rng: &mut R) -> Action {
    if rng.gen::<f64>() < epsilon {
        Action::ALL[rng.gen_range(0..4)]
    } else {
        q.best_action(state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RolloutFailure {
    StepCap,
    CycleDetected,
}

/// Reusable greedy walker so per-episode probes do not allocate.
#[derive(Debug, Clone)]
struct GreedyWalker {
    seen: VisitedSet,
}

impl GreedyWalker {
    fn new(map: &GridMap) -> Self {
        Self {
            seen: VisitedSet::new(map),
        }
    }

    fn walk(
        &mut self,
        map: &GridMap,
        q: &QTable,
        step_cap: usize,
        mut path: Option<&mut Vec<Position>>,
    ) -> Result<usize, RolloutFailure> {
        self.seen.clear();
        let mut pos = map.start();
        self.seen.insert(pos);
        if let Some(p) = path.as_deref_mut() {
            p.push(pos);
        }
        let mut steps = 0;
        while pos != map.goal() {
            if steps == step_cap {
                return Err(RolloutFailure::StepCap);
            }
            pos = map.successor(pos, q.best_action(pos)).unwrap_or(pos);
            steps += 1;
            if let Some(p) = path.as_deref_mut() {
                p.push(pos);
            }
            if !self.seen.insert(pos) {
                return Err(RolloutFailure::CycleDetected);
            }
        }
        Ok(steps)
    }
}

/// Follows greedy actions from the start. Fails when `step_cap` moves are
/// exhausted or a cell repeats (a blocked greedy move repeats immediately).
pub fn greedy_rollout(map: &GridMap, q: &QTable, step_cap: usize) -> Result<Vec<Position>, RolloutFailure> {
    let mut path = Vec::new();
    GreedyWalker::new(map).walk(map, q, step_cap, Some(&mut path))?;
    Ok(path)
}

/// Largest allowed spread of path lengths inside a convergence window.
pub const CONVERGENCE_TOLERANCE: usize = 2;

fn window_converged(window: &[Option<usize>]) -> bool {
    let mut lo = usize::MAX;
    let mut hi = 0;
    for len in window {
        match len {
            Some(l) => {
                lo = lo.min(*l);
                hi = hi.max(*l);
            }
            None => return false,
        }
    }
    !window.is_empty() && hi - lo <= CONVERGENCE_TOLERANCE
}

/// First (0-based) episode index ending a run of `window` episodes that all
/// reached the goal with lengths spread by at most
/// [`CONVERGENCE_TOLERANCE`]. `None` marks a failed episode.
pub fn detect_convergence(lengths: &[Option<usize>], window: usize) -> Option<usize> {
    if window < 2 || lengths.len() < window {
        return None;
    }
    (window - 1..lengths.len()).find(|&e| window_converged(&lengths[e + 1 - window..=e]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    /// Training steps taken, including blocked moves.
    pub steps: usize,
    pub total_reward: f64,
    pub reached_goal: bool,
    /// Length of the greedy rollout after this episode's updates.
    pub greedy_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    /// Cumulative training steps through the convergence episode.
    pub convergence_steps: Option<u64>,
    pub convergence_episode: Option<usize>,
    /// Shortest and longest goal-reaching training episode, in steps.
    pub shortest_distance: Option<usize>,
    pub longest_distance: Option<usize>,
    pub total_steps: u64,
    pub per_episode: Vec<EpisodeRecord>,
}

impl RunMetrics {
    pub fn converged(&self) -> bool {
        self.convergence_episode.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub qtable: QTable,
    pub metrics: RunMetrics,
}

/// Runs episodes from the start cell until convergence or `max_episodes`.
///
/// Convergence is judged on the greedy policy: after every episode the table
/// is rolled out greedily and the run converges once
/// `convergence_window` consecutive rollouts reach the goal with stable
/// length. Training episodes themselves keep exploring at rate `epsilon`, so
/// their lengths never settle to a fixed spread. A run that exhausts
/// `max_episodes` returns its metrics with `convergence_episode == None`.
pub fn train(
    map: &GridMap,
    mut q: QTable,
    field: Option<&RewardField>,
    config: &LearnerConfig,
) -> Result<TrainOutcome, LearnError> {
    config.validate()?;
    check_dims("Q-table", map, q.width(), q.height())?;
    if let Some(f) = field {
        check_dims("reward field", map, f.width(), f.height())?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut visited = VisitedSet::new(map);
    let mut walker = GreedyWalker::new(map);
    let probe_cap = config.step_cap.min(map.cell_count());
    let mut probes: Vec<Option<usize>> = Vec::new();
    let mut metrics = RunMetrics {
        convergence_steps: None,
        convergence_episode: None,
        shortest_distance: None,
        longest_distance: None,
        total_steps: 0,
        per_episode: Vec::new(),
    };

    for episode in 0..config.max_episodes {
        visited.clear();
        let mut pos = map.start();
        visited.insert(pos);
        let mut steps = 0;
        let mut total_reward = 0.0;
        let mut reached_goal = false;
        while steps < config.step_cap {
            let action = select_action(&q, pos, config.epsilon, &mut rng);
            let outcome = step(map, pos, &visited, action);
            let reward = reward_of(&outcome, field, &config.rewards);
            let target = if outcome.terminal {
                reward
            } else {
                reward + config.gamma * q.max_value(outcome.next)
            };
            let entry = &mut q.get_mut(pos)[action.index()];
            *entry += config.alpha * (target - *entry);
            total_reward += reward;
            steps += 1;
            visited.insert(outcome.next);
            pos = outcome.next;
            if outcome.terminal {
                reached_goal = true;
                break;
            }
        }
        metrics.total_steps += steps as u64;
        if reached_goal {
            metrics.shortest_distance = Some(metrics.shortest_distance.map_or(steps, |s| s.min(steps)));
            metrics.longest_distance = Some(metrics.longest_distance.map_or(steps, |l| l.max(steps)));
        }
        let greedy_steps = walker.walk(map, &q, probe_cap, None).ok();
        probes.push(greedy_steps);
        metrics.per_episode.push(EpisodeRecord {
            steps,
            total_reward,
            reached_goal,
            greedy_steps,
        });
        let window = config.convergence_window;
        if probes.len() >= window && window_converged(&probes[probes.len() - window..]) {
            metrics.convergence_episode = Some(episode);
            metrics.convergence_steps = Some(metrics.total_steps);
            break;
        }
    }
    Ok(TrainOutcome { qtable: q, metrics })
}
