//! Continuous reward fields and Q-table initialization fields.
//!
//! Every constructor is a pure function of its inputs and produces one value
//! per map cell in row-major order.

use std::collections::VecDeque;

use thiserror::Error;

use crate::gridworld::{GridMap, Position};

/// Mask value for cells inside the thresholded region.
pub const MASK_INSIDE: f64 = 0.0;
/// Mask value for cells outside the thresholded region.
pub const MASK_OUTSIDE: f64 = -10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeuristicError {
    #[error("expected a {expected:?} prediction grid, got {found:?}")]
    KindMismatch {
        expected: PredictionKind,
        found: PredictionKind,
    },
    #[error("prediction grid is {found_w}x{found_h}, map is {map_w}x{map_h}")]
    DimensionMismatch {
        map_w: usize,
        map_h: usize,
        found_w: usize,
        found_h: usize,
    },
    #[error("prediction value {value} at index {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("prediction grid needs {expected} values, got {found}")]
    ValueCount { expected: usize, found: usize },
    #[error("invalid reward parameters: {0}")]
    InvalidParams(&'static str),
    #[error("threshold {0} is outside (0, 1)")]
    InvalidThreshold(f64),
    #[error("no threshold in 0.99..=0.01 connects start and goal")]
    NoConnectivity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PredictionKind {
    /// Narrow band around the predicted optimal path.
    Guideline,
    /// Broad area of near-optimal routes.
    Region,
}

impl PredictionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PredictionKind::Guideline => "guideline",
            PredictionKind::Region => "region",
        }
    }
}

/// Per-cell prediction values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionGrid {
    kind: PredictionKind,
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl PredictionGrid {
    pub fn new(kind: PredictionKind, width: usize, height: usize, values: Vec<f64>) -> Result<Self, HeuristicError> {
        if values.len() != width * height {
            return Err(HeuristicError::ValueCount {
                expected: width * height,
                found: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(HeuristicError::OutOfRange { index, value });
        }
        Ok(Self {
            kind,
            width,
            height,
            values,
        })
    }

    pub fn uniform(kind: PredictionKind, width: usize, height: usize, value: f64) -> Result<Self, HeuristicError> {
        Self::new(kind, width, height, vec![value; width * height])
    }

    pub fn kind(&self) -> PredictionKind {
        self.kind
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, pos: Position) -> f64 {
        self.values[pos.y * self.width + pos.x]
    }

    pub fn check_matches(&self, map: &GridMap) -> Result<(), HeuristicError> {
        if self.width != map.width() || self.height != map.height() {
            return Err(HeuristicError::DimensionMismatch {
                map_w: map.width(),
                map_h: map.height(),
                found_w: self.width,
                found_h: self.height,
            });
        }
        Ok(())
    }

    fn expect_kind(&self, expected: PredictionKind) -> Result<(), HeuristicError> {
        if self.kind != expected {
            return Err(HeuristicError::KindMismatch {
                expected,
                found: self.kind,
            });
        }
        Ok(())
    }
}

/// Parameters of the continuous reward functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardParams {
    /// Base reward added by the distance-based field.
    pub r0: f64,
    /// Peak reward of the continuous field.
    pub r_max: f64,
    /// Decay scale along x.
    pub gx: f64,
    /// Decay scale along y.
    pub gy: f64,
    /// Weight of the prediction term in the blended field.
    pub omega: f64,
}

impl RewardParams {
    /// Default peak reward for continuous fields.
    ///
    /// Must stay below `goal_reward * (1 - gamma)` (4.0 for the default
    /// learner) or detours that collect field reward outscore reaching the goal.
    pub const DEFAULT_R_MAX: f64 = 3.0;
    pub const DEFAULT_OMEGA: f64 = 0.5;

    /// Defaults for `map`: `r0 = 0`, `gx = gy = width / 5`, `omega = 0.5`.
    pub fn for_map(map: &GridMap) -> Self {
        let scale = map.width() as f64 / 5.0;
        Self {
            r0: 0.0,
            r_max: Self::DEFAULT_R_MAX,
            gx: scale,
            gy: scale,
            omega: Self::DEFAULT_OMEGA,
        }
    }

    pub fn validate(&self) -> Result<(), HeuristicError> {
        if !(self.gx > 0.0 && self.gx.is_finite()) || !(self.gy > 0.0 && self.gy.is_finite()) {
            return Err(HeuristicError::InvalidParams("gx and gy must be positive"));
        }
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(HeuristicError::InvalidParams("omega must lie in [0, 1]"));
        }
        if !(self.r_max > 0.0 && self.r_max.is_finite()) {
            return Err(HeuristicError::InvalidParams("r_max must be positive"));
        }
        if !self.r0.is_finite() {
            return Err(HeuristicError::InvalidParams("r0 must be finite"));
        }
        Ok(())
    }
}

/// Precomputed per-cell reward for ordinary moves.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardField {
    width: usize,
    height: usize,
    values: Vec<f64>,
    params: RewardParams,
}

impl RewardField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn params(&self) -> &RewardParams {
        &self.params
    }

    pub fn get(&self, pos: Position) -> f64 {
        self.values[pos.y * self.width + pos.x]
    }
}

/// `r_max * exp(-|x - xd| / gx - |y - yd| / gy)`.
fn distance_decay(pos: Position, goal: Position, params: &RewardParams) -> f64 {
    let dx = pos.x.abs_diff(goal.x) as f64;
    let dy = pos.y.abs_diff(goal.y) as f64;
    params.r_max * (-dx / params.gx - dy / params.gy).exp()
}

fn euclidean_decay(pos: Position, goal: Position) -> f64 {
    let dx = pos.x.abs_diff(goal.x) as f64;
    let dy = pos.y.abs_diff(goal.y) as f64;
    (-(dx * dx + dy * dy).sqrt()).exp()
}

/// Distance-based continuous reward: peaks at `r0 + r_max` on the goal and
/// decays with the scaled L1 offset.
pub fn d_crf(map: &GridMap, params: &RewardParams) -> Result<RewardField, HeuristicError> {
    params.validate()?;
    let goal = map.goal();
    let values = map
        .positions()
        .map(|p| params.r0 + distance_decay(p, goal, params))
        .collect();
    Ok(RewardField {
        width: map.width(),
        height: map.height(),
        values,
        params: *params,
    })
}

/// Prediction-based continuous reward: `guideline * r_max`.
pub fn ndr_crf(guideline: &PredictionGrid, params: &RewardParams) -> Result<RewardField, HeuristicError> {
    guideline.expect_kind(PredictionKind::Guideline)?;
    params.validate()?;
    let values = guideline.values.iter().map(|g| g * params.r_max).collect();
    Ok(RewardField {
        width: guideline.width,
        height: guideline.height,
        values,
        params: *params,
    })
}

/// `omega * guideline * r_max + (1 - omega) * distance decay`, without `r0`.
pub fn blended_crf(
    map: &GridMap,
    guideline: &PredictionGrid,
    params: &RewardParams,
) -> Result<RewardField, HeuristicError> {
    guideline.expect_kind(PredictionKind::Guideline)?;
    guideline.check_matches(map)?;
    params.validate()?;
    let goal = map.goal();
    let w = params.omega;
    let values = map
        .positions()
        .map(|p| w * (guideline.get(p) * params.r_max) + (1.0 - w) * distance_decay(p, goal, params))
        .collect();
    Ok(RewardField {
        width: map.width(),
        height: map.height(),
        values,
        params: *params,
    })
}

/// Per-cell Q-table prior.
#[derive(Debug, Clone, PartialEq)]
pub struct QInitField {
    width: usize,
    height: usize,
    values: Vec<f64>,
    omega: f64,
    thd: Option<f64>,
}

impl QInitField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Weight of the region mask; 0 for the distance-only field.
    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Region threshold, or `None` for the distance-only field.
    pub fn thd(&self) -> Option<f64> {
        self.thd
    }

    pub fn get(&self, pos: Position) -> f64 {
        self.values[pos.y * self.width + pos.x]
    }
}

/// Distance prior `exp(-euclidean(cell, goal))`.
pub fn d_qi(map: &GridMap) -> QInitField {
    let goal = map.goal();
    QInitField {
        width: map.width(),
        height: map.height(),
        values: map.positions().map(|p| euclidean_decay(p, goal)).collect(),
        omega: 0.0,
        thd: None,
    }
}

/// Binary mask: [`MASK_INSIDE`] where the region value is strictly above
/// `thd`, [`MASK_OUTSIDE`] elsewhere.
pub fn region_mask(region: &PredictionGrid, thd: f64) -> Result<Vec<f64>, HeuristicError> {
    region.expect_kind(PredictionKind::Region)?;
    if !(thd > 0.0 && thd < 1.0) {
        return Err(HeuristicError::InvalidThreshold(thd));
    }
    Ok(region
        .values
        .iter()
        .map(|&v| if v > thd { MASK_INSIDE } else { MASK_OUTSIDE })
        .collect())
}

/// True if start and goal are 4-connected through free cells whose region
/// value exceeds `thd` (start and goal themselves always count).
fn region_connects(map: &GridMap, region: &PredictionGrid, thd: f64) -> bool {
    let admissible = |p: Position| p == map.start() || p == map.goal() || region.get(p) > thd;
    let mut seen = vec![false; map.cell_count()];
    let mut queue = VecDeque::new();
    seen[map.index(map.start())] = true;
    queue.push_back(map.start());
    while let Some(pos) = queue.pop_front() {
        if pos == map.goal() {
            return true;
        }
        for next in map.neighbors(pos) {
            let idx = map.index(next);
            if !seen[idx] && admissible(next) {
                seen[idx] = true;
                queue.push_back(next);
            }
        }
    }
    false
}

/// Largest threshold in `0.99, 0.98, ..., 0.01` whose region connects start
/// and goal.
pub fn adaptive_threshold(map: &GridMap, region: &PredictionGrid) -> Result<f64, HeuristicError> {
    region.expect_kind(PredictionKind::Region)?;
    region.check_matches(map)?;
    // Integer hundredths keep the sequence free of accumulated drift.
    (1..=99u32)
        .rev()
        .map(|k| f64::from(k) / 100.0)
        .find(|&thd| region_connects(map, region, thd))
        .ok_or(HeuristicError::NoConnectivity)
}

/// Region prior `omega * mask + (1 - omega) * exp(-euclidean)`, with the mask
/// taken at the adaptive threshold.
pub fn ndr_qi(map: &GridMap, region: &PredictionGrid, omega: f64) -> Result<QInitField, HeuristicError> {
    if !(0.0..=1.0).contains(&omega) {
        return Err(HeuristicError::InvalidParams("omega must lie in [0, 1]"));
    }
    let thd = adaptive_threshold(map, region)?;
    let mask = region_mask(region, thd)?;
    let goal = map.goal();
    let values = map
        .positions()
        .zip(mask)
        .map(|(p, m)| omega * m + (1.0 - omega) * euclidean_decay(p, goal))
        .collect();
    Ok(QInitField {
        width: map.width(),
        height: map.height(),
        values,
        omega,
        thd: Some(thd),
    })
}
