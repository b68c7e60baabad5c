//! Procedural benchmark maps: a braided corridor maze with dead-ends and a
//! few open rooms.
//!
//! The maze is carved on a coarse lattice of `corridor`-wide cells separated
//! by `wall`-thick walls, using a randomized depth-first backtracker. A
//! fraction of the remaining walls is then knocked out to create loops, and
//! some rectangular rooms are cleared. Start is the top-left lattice cell,
//! goal the bottom-right one.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gridworld::{shortest_path_length, Cell, GridMap, Position};

/// Seed of the shipped benchmark suite.
pub const SUITE_SEED: u64 = 20_240_917;
/// Number of maps in the shipped benchmark suite.
pub const SUITE_SIZE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MazeParams {
    pub width: usize,
    pub height: usize,
    pub corridor: usize,
    pub wall: usize,
    /// Probability of removing each interior wall left by the backtracker.
    pub braid: f64,
    pub rooms: usize,
}

impl Default for MazeParams {
    fn default() -> Self {
        Self {
            width: 50,
            height: 50,
            corridor: 3,
            wall: 2,
            braid: 0.08,
            rooms: 2,
        }
    }
}

/// Generates one maze. Start and goal are always connected.
pub fn corridor_maze(params: &MazeParams, seed: u64) -> GridMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pitch = params.corridor + params.wall;
    let cols = ((params.width - params.wall) / pitch).max(2);
    let rows = ((params.height - params.wall) / pitch).max(2);
    let mut cells = vec![Cell::Obstacle; params.width * params.height];
    let clear = |x0: usize, y0: usize, w: usize, h: usize, cells: &mut Vec<Cell>| {
        for y in y0..(y0 + h).min(params.height) {
            for x in x0..(x0 + w).min(params.width) {
                cells[y * params.width + x] = Cell::Free;
            }
        }
    };
    // Centre the lattice; leftover columns and rows become border wall.
    let margin_x = (params.width - (cols * pitch - params.wall)) / 2;
    let margin_y = (params.height - (rows * pitch - params.wall)) / 2;
    let origin_x = |c: usize| margin_x + c * pitch;
    let origin_y = |c: usize| margin_y + c * pitch;

    // Depth-first backtracker over lattice cells.
    let mut seen = vec![false; cols * rows];
    let mut stack = vec![(0usize, 0usize)];
    seen[0] = true;
    clear(origin_x(0), origin_y(0), params.corridor, params.corridor, &mut cells);
    let mut open_walls = Vec::new();
    while let Some(&(cx, cy)) = stack.last() {
        let mut options: Vec<(usize, usize)> = Vec::with_capacity(4);
        if cy > 0 && !seen[(cy - 1) * cols + cx] {
            options.push((cx, cy - 1));
        }
        if cy + 1 < rows && !seen[(cy + 1) * cols + cx] {
            options.push((cx, cy + 1));
        }
        if cx > 0 && !seen[cy * cols + cx - 1] {
            options.push((cx - 1, cy));
        }
        if cx + 1 < cols && !seen[cy * cols + cx + 1] {
            options.push((cx + 1, cy));
        }
        match options.choose(&mut rng) {
            Some(&(nx, ny)) => {
                seen[ny * cols + nx] = true;
                open_walls.push(((cx, cy), (nx, ny)));
                stack.push((nx, ny));
            }
            None => {
                stack.pop();
            }
        }
    }
    let carve_between = |(ax, ay): (usize, usize), (bx, by): (usize, usize), cells: &mut Vec<Cell>| {
        let (x0, y0) = (origin_x(ax.min(bx)), origin_y(ay.min(by)));
        let w = if ax == bx {
            params.corridor
        } else {
            pitch + params.corridor
        };
        let h = if ay == by {
            params.corridor
        } else {
            pitch + params.corridor
        };
        clear(x0, y0, w, h, cells);
    };
    for &(a, b) in &open_walls {
        carve_between(a, b, &mut cells);
    }

    // Braid: knock out some of the walls the backtracker kept.
    for cy in 0..rows {
        for cx in 0..cols {
            if cx + 1 < cols && rng.gen_bool(params.braid) {
                carve_between((cx, cy), (cx + 1, cy), &mut cells);
            }
            if cy + 1 < rows && rng.gen_bool(params.braid) {
                carve_between((cx, cy), (cx, cy + 1), &mut cells);
            }
        }
    }

    // Rooms spanning 2x2 lattice cells, kept away from start and goal.
    for _ in 0..params.rooms {
        let rx = rng.gen_range(0..cols - 1);
        let ry = rng.gen_range(0..rows - 1);
        if (rx, ry) == (0, 0) || (rx + 1, ry + 1) == (cols - 1, rows - 1) {
            continue;
        }
        clear(
            origin_x(rx),
            origin_y(ry),
            pitch + params.corridor,
            pitch + params.corridor,
            &mut cells,
        );
    }

    let start = Position::new(origin_x(0), origin_y(0));
    let goal = Position::new(
        origin_x(cols - 1) + params.corridor - 1,
        origin_y(rows - 1) + params.corridor - 1,
    );
    let map = GridMap::new(params.width, params.height, cells, start, goal).expect("maze endpoints are carved");
    debug_assert!(shortest_path_length(&map, start, goal).is_some());
    map
}

/// The benchmark suite: `SUITE_SIZE` 50x50 mazes derived from `seed`.
pub fn suite(seed: u64) -> Vec<(String, GridMap)> {
    (0..SUITE_SIZE)
        .map(|i| {
            let map = corridor_maze(&MazeParams::default(), seed.wrapping_add(i as u64));
            (format!("maze-{}", i + 1), map)
        })
        .collect()
}
