//! Occupancy-grid environment: map loading, four-action kinematics and
//! breadth-first distance queries.
//!
//! Coordinates are `(x, y)` with `x` the column and `y` the row; row 0 is the
//! top row of the map file.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Errors produced while building or parsing a [`GridMap`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapError {
    #[error("map is empty")]
    Empty,
    #[error("map must be at least 2x2, got {width}x{height}")]
    TooSmall { width: usize, height: usize },
    #[error("line {line}: expected {expected} columns, found {found}")]
    RaggedRow { line: usize, expected: usize, found: usize },
    #[error("line {line}, column {column}: illegal character {ch:?}")]
    IllegalChar { line: usize, column: usize, ch: char },
    #[error("no start cell 'S'")]
    MissingStart,
    #[error("no goal cell 'G'")]
    MissingGoal,
    #[error("more than one start cell 'S'")]
    DuplicateStart,
    #[error("more than one goal cell 'G'")]
    DuplicateGoal,
    #[error("cell vector has {found} entries, expected {expected}")]
    CellCount { expected: usize, found: usize },
    #[error("start {0} is out of bounds or on an obstacle")]
    BadStart(Position),
    #[error("goal {0} is out of bounds or on an obstacle")]
    BadGoal(Position),
    #[error("start and goal coincide at {0}")]
    StartIsGoal(Position),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Position {
    pub x: usize,
    pub y: usize,
}

impl Position {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    pub fn manhattan(self, other: Position) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// The four unit moves. The declaration order is the tie-break order used by
/// greedy action selection and by the BFS path reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Action> {
        Self::ALL.get(index).copied()
    }

    /// Unit offset `(dx, dy)`; `Up` decreases the row index.
    pub const fn offset(self) -> (isize, isize) {
        match self {
            Action::Up => (0, -1),
            Action::Down => (0, 1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Free,
    Obstacle,
}

/// A validated occupancy grid with distinct, free start and goal cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    start: Position,
    goal: Position,
}

impl GridMap {
    pub fn new(
        width: usize,
        height: usize,
        cells: Vec<Cell>,
        start: Position,
        goal: Position,
    ) -> Result<Self, MapError> {
        if width < 2 || height < 2 {
            return Err(MapError::TooSmall { width, height });
        }
        if cells.len() != width * height {
            return Err(MapError::CellCount {
                expected: width * height,
                found: cells.len(),
            });
        }
        let map = Self {
            width,
            height,
            cells,
            start,
            goal,
        };
        if !map.is_free(start) {
            return Err(MapError::BadStart(start));
        }
        if !map.is_free(goal) {
            return Err(MapError::BadGoal(goal));
        }
        if start == goal {
            return Err(MapError::StartIsGoal(start));
        }
        Ok(map)
    }

    /// An obstacle-free map.
    pub fn empty(width: usize, height: usize, start: Position, goal: Position) -> Result<Self, MapError> {
        Self::new(width, height, vec![Cell::Free; width * height], start, goal)
    }

    /// Parses the text map format: `.` free, `#` obstacle, `S` start,
    /// `G` goal, one row per line.
    pub fn parse(text: &str) -> Result<Self, MapError> {
        let body = text.strip_suffix('\n').unwrap_or(text);
        if body.is_empty() {
            return Err(MapError::Empty);
        }
        let mut width = None;
        let mut cells = Vec::new();
        let mut start = None;
        let mut goal = None;
        let mut height = 0;
        for (row, line) in body.split('\n').enumerate() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            let mut count = 0;
            for (col, ch) in line.chars().enumerate() {
                let pos = Position::new(col, row);
                let cell = match ch {
                    '.' => Cell::Free,
                    '#' => Cell::Obstacle,
                    'S' => {
                        if start.replace(pos).is_some() {
                            return Err(MapError::DuplicateStart);
                        }
                        Cell::Free
                    }
                    'G' => {
                        if goal.replace(pos).is_some() {
                            return Err(MapError::DuplicateGoal);
                        }
                        Cell::Free
                    }
                    _ => {
                        return Err(MapError::IllegalChar {
                            line: row + 1,
                            column: col + 1,
                            ch,
                        })
                    }
                };
                cells.push(cell);
                count += 1;
            }
            match width {
                None => width = Some(count),
                Some(w) if w != count => {
                    return Err(MapError::RaggedRow {
                        line: row + 1,
                        expected: w,
                        found: count,
                    })
                }
                Some(_) => {}
            }
            height += 1;
        }
        let width = width.unwrap_or(0);
        if width < 2 || height < 2 {
            return Err(MapError::TooSmall { width, height });
        }
        let start = start.ok_or(MapError::MissingStart)?;
        let goal = goal.ok_or(MapError::MissingGoal)?;
        Self::new(width, height, cells, start, goal)
    }

    /// Serializes to the text map format with a trailing newline.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let pos = Position::new(x, y);
                out.push(if pos == self.start {
                    'S'
                } else if pos == self.goal {
                    'G'
                } else {
                    match self.cell(pos) {
                        Cell::Free => '.',
                        Cell::Obstacle => '#',
                    }
                });
            }
            out.push('\n');
        }
        out
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn start(&self) -> Position {
        self.start
    }

    pub fn goal(&self) -> Position {
        self.goal
    }

    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }

    pub fn in_bounds(&self, pos: Position) -> bool {
        pos.x < self.width && pos.y < self.height
    }

    /// Row-major index of an in-bounds position.
    pub fn index(&self, pos: Position) -> usize {
        debug_assert!(self.in_bounds(pos));
        pos.y * self.width + pos.x
    }

    pub fn position(&self, index: usize) -> Position {
        Position::new(index % self.width, index / self.width)
    }

    pub fn cell(&self, pos: Position) -> Cell {
        self.cells[self.index(pos)]
    }

    pub fn is_free(&self, pos: Position) -> bool {
        self.in_bounds(pos) && self.cells[self.index(pos)] == Cell::Free
    }

    pub fn positions(&self) -> impl Iterator<Item = Position> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| Position::new(x, y)))
    }

    /// The cell reached by `action` from `pos`, if it is in bounds and free.
    pub fn successor(&self, pos: Position, action: Action) -> Option<Position> {
        let (dx, dy) = action.offset();
        let x = pos.x.checked_add_signed(dx)?;
        let y = pos.y.checked_add_signed(dy)?;
        let next = Position::new(x, y);
        self.is_free(next).then_some(next)
    }

    /// Free 4-neighbours in action order.
    pub fn neighbors(&self, pos: Position) -> impl Iterator<Item = Position> + '_ {
        Action::ALL.into_iter().filter_map(move |a| self.successor(pos, a))
    }

    pub fn set_cell(&mut self, pos: Position, cell: Cell) -> Result<(), MapError> {
        if cell == Cell::Obstacle && pos == self.start {
            return Err(MapError::BadStart(pos));
        }
        if cell == Cell::Obstacle && pos == self.goal {
            return Err(MapError::BadGoal(pos));
        }
        let idx = self.index(pos);
        self.cells[idx] = cell;
        Ok(())
    }
}

impl FromStr for GridMap {
    type Err = MapError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl fmt::Display for GridMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Per-episode set of occupied cells. Clearing is O(1) via a generation
/// counter so one allocation serves a whole training run.
#[derive(Debug, Clone)]
pub struct VisitedSet {
    stamps: Vec<u32>,
    generation: u32,
    width: usize,
}

impl VisitedSet {
    pub fn new(map: &GridMap) -> Self {
        Self {
            stamps: vec![0; map.cell_count()],
            generation: 1,
            width: map.width(),
        }
    }

    pub fn clear(&mut self) {
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamps.fill(0);
            self.generation = 1;
        }
    }

    /// Marks `pos`; returns `true` if it was not already present.
    pub fn insert(&mut self, pos: Position) -> bool {
        let idx = pos.y * self.width + pos.x;
        let fresh = self.stamps[idx] != self.generation;
        self.stamps[idx] = self.generation;
        fresh
    }

    pub fn contains(&self, pos: Position) -> bool {
        self.stamps[pos.y * self.width + pos.x] == self.generation
    }
}

/// Which reward case a transition falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Collision,
    Goal,
    Revisit,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub next: Position,
    pub scenario: Scenario,
    pub terminal: bool,
}

/// Applies `action` at `pos`. A blocked move leaves the agent in place and is
/// classified as a collision; the episode continues.
pub fn step(map: &GridMap, pos: Position, visited: &VisitedSet, action: Action) -> StepOutcome {
    match map.successor(pos, action) {
        None => StepOutcome {
            next: pos,
            scenario: Scenario::Collision,
            terminal: false,
        },
        Some(next) if next == map.goal() => StepOutcome {
            next,
            scenario: Scenario::Goal,
            terminal: true,
        },
        Some(next) if visited.contains(next) => StepOutcome {
            next,
            scenario: Scenario::Revisit,
            terminal: false,
        },
        Some(next) => StepOutcome {
            next,
            scenario: Scenario::Free,
            terminal: false,
        },
    }
}

/// BFS step counts from `from` to every cell; `None` for obstacles and
/// unreachable cells.
pub fn distance_field(map: &GridMap, from: Position) -> Vec<Option<u32>> {
    let mut dist = vec![None; map.cell_count()];
    if !map.is_free(from) {
        return dist;
    }
    let mut queue = VecDeque::new();
    dist[map.index(from)] = Some(0);
    queue.push_back(from);
    while let Some(pos) = queue.pop_front() {
        let d = dist[map.index(pos)].expect("queued cells have a distance");
        for next in map.neighbors(pos) {
            let slot = &mut dist[map.index(next)];
            if slot.is_none() {
                *slot = Some(d + 1);
                queue.push_back(next);
            }
        }
    }
    dist
}

/// Length in steps of a shortest 4-connected path, or `None` if `to` cannot be
/// reached from `from`.
pub fn shortest_path_length(map: &GridMap, from: Position, to: Position) -> Option<usize> {
    if from == to {
        return map.is_free(from).then_some(0);
    }
    let mut seen = vec![false; map.cell_count()];
    let mut queue = VecDeque::new();
    seen[map.index(from)] = true;
    queue.push_back((from, 0usize));
    while let Some((pos, d)) = queue.pop_front() {
        for next in map.neighbors(pos) {
            if next == to {
                return Some(d + 1);
            }
            let idx = map.index(next);
            if !seen[idx] {
                seen[idx] = true;
                queue.push_back((next, d + 1));
            }
        }
    }
    None
}

/// One BFS-optimal path from `from` to `to` (both endpoints included).
/// Neighbours are expanded in action order and each cell keeps the parent
/// that discovered it first, so the result is deterministic.
pub fn shortest_path(map: &GridMap, from: Position, to: Position) -> Option<Vec<Position>> {
    let mut parent: Vec<Option<usize>> = vec![None; map.cell_count()];
    let mut seen = vec![false; map.cell_count()];
    let mut queue = VecDeque::new();
    seen[map.index(from)] = true;
    queue.push_back(from);
    let mut found = from == to;
    while let Some(pos) = queue.pop_front() {
        if found {
            break;
        }
        for next in map.neighbors(pos) {
            let idx = map.index(next);
            if !seen[idx] {
                seen[idx] = true;
                parent[idx] = Some(map.index(pos));
                if next == to {
                    found = true;
                    break;
                }
                queue.push_back(next);
            }
        }
    }
    if !found {
        return None;
    }
    let mut path = vec![to];
    let mut cur = map.index(to);
    while let Some(p) = parent[cur] {
        path.push(map.position(p));
        cur = p;
    }
    path.reverse();
    Some(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn open(w: usize, h: usize) -> GridMap {
        GridMap::empty(w, h, Position::new(0, 0), Position::new(w - 1, h - 1)).unwrap()
    }

    #[test]
    fn parses_smallest_legal_map() {
        let map = GridMap::parse("S..\n...\n..G\n").unwrap();
        assert_eq!(map.width(), 3);
        assert_eq!(map.height(), 3);
        assert_eq!(map.start(), Position::new(0, 0));
        assert_eq!(map.goal(), Position::new(2, 2));
    }

    #[test]
    fn parses_cell_characters() {
        let map = GridMap::parse("#.#\nS.G").unwrap();
        assert_eq!(map.cell(Position::new(0, 0)), Cell::Obstacle);
        assert_eq!(map.cell(Position::new(1, 0)), Cell::Free);
        assert_eq!(map.cell(Position::new(2, 0)), Cell::Obstacle);
    }

    #[test]
    fn rejects_malformed_maps() {
        assert_eq!(GridMap::parse("S.S\n..G"), Err(MapError::DuplicateStart));
        assert_eq!(GridMap::parse("S.G\n..G"), Err(MapError::DuplicateGoal));
        assert_eq!(GridMap::parse("...\n..G"), Err(MapError::MissingStart));
        assert_eq!(GridMap::parse("S..\n..."), Err(MapError::MissingGoal));
        assert_eq!(
            GridMap::parse("S..\n.G"),
            Err(MapError::RaggedRow {
                line: 2,
                expected: 3,
                found: 2
            })
        );
        assert!(matches!(
            GridMap::parse("S.x\n..G"),
            Err(MapError::IllegalChar { ch: 'x', .. })
        ));
        assert_eq!(GridMap::parse(""), Err(MapError::Empty));
        assert!(matches!(GridMap::parse("SG"), Err(MapError::TooSmall { .. })));
        assert!(matches!(GridMap::parse("S.\n\n.G"), Err(MapError::RaggedRow { .. })));
    }

    #[test]
    fn constructor_rejects_blocked_endpoints() {
        let mut cells = vec![Cell::Free; 4];
        cells[0] = Cell::Obstacle;
        assert!(matches!(
            GridMap::new(2, 2, cells.clone(), Position::new(0, 0), Position::new(1, 1)),
            Err(MapError::BadStart(_))
        ));
        assert!(matches!(
            GridMap::new(2, 2, cells, Position::new(1, 1), Position::new(0, 0)),
            Err(MapError::BadGoal(_))
        ));
        assert!(matches!(
            GridMap::empty(2, 2, Position::new(1, 1), Position::new(1, 1)),
            Err(MapError::StartIsGoal(_))
        ));
    }

    #[test]
    fn accepts_crlf_and_missing_trailing_newline() {
        let a = GridMap::parse("S.\r\n.G\r\n").unwrap();
        let b = GridMap::parse("S.\n.G").unwrap();
        assert_eq!(a, b);
        assert_eq!(b.to_text(), "S.\n.G\n");
    }

    #[test]
    fn boundary_move_is_collision() {
        let map = open(3, 3);
        let visited = VisitedSet::new(&map);
        let out = step(&map, Position::new(0, 0), &visited, Action::Left);
        assert_eq!(out.scenario, Scenario::Collision);
        assert_eq!(out.next, Position::new(0, 0));
        assert!(!out.terminal);
    }

    #[test]
    fn obstacle_move_is_collision() {
        let map = GridMap::parse("S#\n.G").unwrap();
        let visited = VisitedSet::new(&map);
        let out = step(&map, Position::new(0, 0), &visited, Action::Right);
        assert_eq!(out.scenario, Scenario::Collision);
        assert_eq!(out.next, Position::new(0, 0));
    }

    #[test]
    fn reaching_goal_is_terminal() {
        let map = open(3, 3);
        let visited = VisitedSet::new(&map);
        let out = step(&map, Position::new(2, 1), &visited, Action::Down);
        assert_eq!(out.scenario, Scenario::Goal);
        assert!(out.terminal);
    }

    #[test]
    fn goal_wins_over_revisit() {
        let map = open(3, 3);
        let mut visited = VisitedSet::new(&map);
        visited.insert(map.goal());
        let out = step(&map, Position::new(2, 1), &visited, Action::Down);
        assert_eq!(out.scenario, Scenario::Goal);
    }

    #[test]
    fn revisit_is_detected() {
        let map = open(3, 3);
        let mut visited = VisitedSet::new(&map);
        visited.insert(Position::new(0, 0));
        let out = step(&map, Position::new(1, 0), &visited, Action::Left);
        assert_eq!(out.scenario, Scenario::Revisit);
        assert_eq!(out.next, Position::new(0, 0));
        visited.clear();
        let out = step(&map, Position::new(1, 0), &visited, Action::Left);
        assert_eq!(out.scenario, Scenario::Free);
    }

    #[test]
    fn bfs_examples() {
        let map = open(5, 5);
        assert_eq!(
            shortest_path_length(&map, Position::new(0, 0), Position::new(4, 4)),
            Some(8)
        );
        assert_eq!(
            shortest_path_length(&map, Position::new(2, 2), Position::new(2, 2)),
            Some(0)
        );
        let walled = GridMap::parse("S.#..\n..#..\n..#..\n..#..\n..#.G").unwrap();
        assert_eq!(shortest_path_length(&walled, walled.start(), walled.goal()), None);
        assert!(shortest_path(&walled, walled.start(), walled.goal()).is_none());
    }

    #[test]
    fn shortest_path_prefers_action_order() {
        let map = open(3, 3);
        let path = shortest_path(&map, map.start(), map.goal()).unwrap();
        assert_eq!(path.len(), 5);
        // Down is expanded before Right, so the first discovered route runs
        // down the left column.
        assert_eq!(path[1], Position::new(0, 1));
    }

    fn random_map(w: usize, h: usize, density: f64, seed: u64) -> GridMap {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let start = Position::new(0, 0);
        let goal = Position::new(w - 1, h - 1);
        let cells = (0..w * h)
            .map(|i| {
                let p = Position::new(i % w, i / w);
                if p != start && p != goal && rng.gen_bool(density) {
                    Cell::Obstacle
                } else {
                    Cell::Free
                }
            })
            .collect();
        GridMap::new(w, h, cells, start, goal).unwrap()
    }

    proptest! {
        #[test]
        fn bfs_is_symmetric_and_bounded(seed in any::<u64>(), density in 0.0f64..0.4) {
            let map = random_map(10, 10, density, seed);
            let free: Vec<_> = map.positions().filter(|p| map.is_free(*p)).collect();
            for (i, &a) in free.iter().enumerate().step_by(7) {
                for &b in free.iter().skip(i).step_by(5) {
                    let ab = shortest_path_length(&map, a, b);
                    let ba = shortest_path_length(&map, b, a);
                    prop_assert_eq!(ab, ba);
                    if let Some(d) = ab {
                        prop_assert!(d >= a.manhattan(b));
                        let field = distance_field(&map, a);
                        prop_assert_eq!(field[map.index(b)], Some(d as u32));
                    }
                }
            }
        }

        #[test]
        fn step_stays_on_free_cells_and_is_pure(seed in any::<u64>(), density in 0.0f64..0.4) {
            let map = random_map(8, 8, density, seed);
            let mut visited = VisitedSet::new(&map);
            visited.insert(map.start());
            for pos in map.positions().filter(|p| map.is_free(*p)) {
                for action in Action::ALL {
                    let a = step(&map, pos, &visited, action);
                    let b = step(&map, pos, &visited, action);
                    prop_assert_eq!(a, b);
                    prop_assert!(map.is_free(a.next));
                    if a.scenario == Scenario::Collision {
                        prop_assert_eq!(a.next, pos);
                    }
                    prop_assert_eq!(a.terminal, a.scenario == Scenario::Goal);
                }
            }
        }

        #[test]
        fn text_round_trip(seed in any::<u64>(), w in 2usize..12, h in 2usize..12) {
            let map = random_map(w, h, 0.3, seed);
            let reparsed = GridMap::parse(&map.to_text()).unwrap();
            prop_assert_eq!(reparsed, map);
        }
    }
}
