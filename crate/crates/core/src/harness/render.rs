//! Q-table images in binary PPM (P6).
//!
//! Each map cell becomes an `N x N` block cut along both diagonals into four
//! triangles: top for `Up`, bottom for `Down`, left for `Left`, right for
//! `Right`. Pixels lying exactly on a diagonal belong to the top or bottom
//! triangle; an odd block's centre pixel belongs to the bottom one. The image has a one-pixel border, so a `W x H` map renders to
//! `(W*N + 2) x (H*N + 2)` pixels.
//!
//! Colour scale: with `lo` and `hi` the smallest and largest Q-value over free
//! non-goal cells, `t = (q - lo) / (hi - lo)` (0.5 when `lo == hi`) maps
//! linearly from blue `(0, 0, 255)` at 0 through white at 0.5 to red
//! `(255, 0, 0)` at 1, channels rounded to nearest. Obstacles are black, the
//! start and goal get a centred green and gold square.

use std::path::Path;

use thiserror::Error;

use crate::gridworld::{GridMap, Position};
use crate::qlearning::QTable;

pub type Rgb = [u8; 3];

pub const OBSTACLE: Rgb = [0, 0, 0];
pub const BORDER: Rgb = [96, 96, 96];
pub const START_MARK: Rgb = [0, 160, 0];
pub const GOAL_MARK: Rgb = [255, 200, 0];
pub const DEFAULT_CELL: usize = 9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("table is {0}x{1}, map is {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("table holds a non-finite value")]
    NonFinite,
    #[error("cell size must be at least 1")]
    CellSize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pixmap {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB triples.
    pub data: Vec<u8>,
}

impl Pixmap {
    fn filled(width: usize, height: usize, colour: Rgb) -> Self {
        Self {
            width,
            height,
            data: colour.repeat(width * height),
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    fn put(&mut self, x: usize, y: usize, colour: Rgb) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&colour);
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn write_ppm(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_ppm())
    }
}

/// Linear blue-white-red colour for `t` in `[0, 1]`.
pub fn scale_colour(t: f64) -> Rgb {
    let t = t.clamp(0.0, 1.0);
    let c = |v: f64| (255.0 * v).round() as u8;
    if t <= 0.5 {
        let s = t / 0.5;
        [c(s), c(s), 255]
    } else {
        let s = (t - 0.5) / 0.5;
        [255, c(1.0 - s), c(1.0 - s)]
    }
}

/// Action index (Up, Down, Left, Right) owning pixel `(px, py)` of a block.
fn triangle(px: usize, py: usize, n: usize) -> usize {
    // Offsets from the block centre, doubled to stay integral.
    let dx = 2 * px as i64 + 1 - n as i64;
    let dy = 2 * py as i64 + 1 - n as i64;
    if dy.abs() >= dx.abs() {
        if dy < 0 {
            0
        } else {
            1
        }
    } else if dx < 0 {
        2
    } else {
        3
    }
}

pub fn render_qtable(q: &QTable, map: &GridMap, cell: usize) -> Result<Pixmap, RenderError> {
    if cell == 0 {
        return Err(RenderError::CellSize);
    }
    if q.width() != map.width() || q.height() != map.height() {
        return Err(RenderError::DimensionMismatch(
            q.width(),
            q.height(),
            map.width(),
            map.height(),
        ));
    }
    if q.rows().iter().flatten().any(|v| !v.is_finite()) {
        return Err(RenderError::NonFinite);
    }
    let scored = || map.positions().filter(|&p| map.is_free(p) && p != map.goal());
    let (lo, hi) = scored()
        .flat_map(|p| *q.get(p))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let norm = |v: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };

    let mut img = Pixmap::filled(map.width() * cell + 2, map.height() * cell + 2, BORDER);
    let mark = (cell / 3).max(1);
    let mark_at = (cell - mark) / 2;
    for pos in map.positions() {
        let (ox, oy) = (1 + pos.x * cell, 1 + pos.y * cell);
        let colours = if map.is_free(pos) {
            q.get(pos).map(|v| scale_colour(norm(v)))
        } else {
            [OBSTACLE; 4]
        };
        for py in 0..cell {
            for px in 0..cell {
                img.put(ox + px, oy + py, colours[triangle(px, py, cell)]);
            }
        }
        let marker = if pos == map.start() {
            Some(START_MARK)
        } else if pos == map.goal() {
            Some(GOAL_MARK)
        } else {
            None
        };
        if let Some(m) = marker {
            for py in mark_at..mark_at + mark {
                for px in mark_at..mark_at + mark {
                    img.put(ox + px, oy + py, m);
                }
            }
        }
    }
    Ok(img)
}

/// Top-left pixel of the block drawn for `pos`.
pub fn block_origin(pos: Position, cell: usize) -> (usize, usize) {
    (1 + pos.x * cell, 1 + pos.y * cell)
}
