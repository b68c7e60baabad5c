//! Deterministic prediction grids computed from exact BFS distances.
//!
//! These stand in for a learned predictor: the guideline is a Gaussian band
//! around one optimal path and the region covers every route within a
//! relative detour budget.

use std::collections::VecDeque;

use thiserror::Error;

use crate::gridworld::{distance_field, shortest_path, GridMap};
use crate::heuristics::{PredictionGrid, PredictionKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("goal is unreachable from start")]
    Unreachable,
    #[error("invalid oracle parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleParams {
    /// Width of the guideline band, in cells.
    pub guideline_sigma: f64,
    /// Relative detour tolerance of the region.
    pub region_slack: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            guideline_sigma: 1.5,
            region_slack: 0.15,
        }
    }
}

impl OracleParams {
    pub fn validate(&self) -> Result<(), OracleError> {
        if !(self.guideline_sigma > 0.0 && self.guideline_sigma.is_finite()) {
            return Err(OracleError::InvalidParams("guideline sigma must be positive"));
        }
        if !(self.region_slack >= 0.0 && self.region_slack.is_finite()) {
            return Err(OracleError::InvalidParams("region slack must be non-negative"));
        }
        Ok(())
    }
}

/// Gaussian band around the action-ordered BFS path from start to goal.
/// Distances to the path are BFS distances through free cells; obstacles and
/// free cells cut off from the path get 0.
pub fn oracle_guideline(map: &GridMap, params: &OracleParams) -> Result<PredictionGrid, OracleError> {
    params.validate()?;
    let path = shortest_path(map, map.start(), map.goal()).ok_or(OracleError::Unreachable)?;

    let mut dist: Vec<Option<u32>> = vec![None; map.cell_count()];
    let mut queue = VecDeque::new();
    for &p in &path {
        dist[map.index(p)] = Some(0);
        queue.push_back(p);
    }
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

    let two_sigma_sq = 2.0 * params.guideline_sigma * params.guideline_sigma;
    let values = dist
        .iter()
        .map(|d| match d {
            Some(0) => 1.0,
            Some(d) => {
                let d = f64::from(*d);
                (-d * d / two_sigma_sq).exp()
            }
            None => 0.0,
        })
        .collect();
    Ok(
        PredictionGrid::new(PredictionKind::Guideline, map.width(), map.height(), values)
            .expect("oracle values lie in [0, 1]"),
    )
}

/// Region of near-optimal routes: 1 where the detour through the cell is within
/// `(1 + slack)` of the optimum, decaying exponentially beyond it.
pub fn oracle_region(map: &GridMap, params: &OracleParams) -> Result<PredictionGrid, OracleError> {
    params.validate()?;
    let from_start = distance_field(map, map.start());
    let from_goal = distance_field(map, map.goal());
    let optimum = from_start[map.index(map.goal())].ok_or(OracleError::Unreachable)?;
    let optimum = f64::from(optimum);
    let budget = (1.0 + params.region_slack) * optimum;

    let values = from_start
        .iter()
        .zip(&from_goal)
        .map(|pair| match pair {
            (Some(ds), Some(dg)) => {
                let through = f64::from(ds + dg);
                if through <= budget {
                    1.0
                } else {
                    (-(through - budget) / optimum).exp()
                }
            }
            _ => 0.0,
        })
        .collect();
    Ok(
        PredictionGrid::new(PredictionKind::Region, map.width(), map.height(), values)
            .expect("oracle values lie in [0, 1]"),
    )
}
