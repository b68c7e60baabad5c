//! Heuristic-accelerated tabular Q-learning for occupancy-grid path planning.
//!
//! Continuous reward fields and Q-table priors are built either from plain
//! distance heuristics or from per-cell prediction grids (a narrow
//! *guideline* band and a broader *region*), then fed to an epsilon-greedy
//! Q-learner whose convergence speed is benchmarked by [`harness`].

pub mod gridworld;
pub mod harness;
pub mod heuristics;
pub mod oracle;
pub mod pgrid;
pub mod qlearning;

pub use gridworld::{Action, Cell, GridMap, MapError, Position, Scenario, StepOutcome};
pub use heuristics::{PredictionGrid, PredictionKind, QInitField, RewardField, RewardParams};
pub use oracle::OracleParams;
pub use qlearning::{LearnerConfig, QTable, RunMetrics};
