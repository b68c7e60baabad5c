//! Plain-text prediction grid files.
//!
//! ```text
//! PGRID 1 <guideline|region> <width> <height>
//! v v v ...   (height rows of width values, row 0 on top)
//! ```

use std::fmt::Write as _;

use thiserror::Error;

use crate::gridworld::GridMap;
use crate::heuristics::{HeuristicError, PredictionGrid, PredictionKind};

const MAGIC: &str = "PGRID";
const VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PgridError {
    #[error("missing PGRID header")]
    MissingHeader,
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("unsupported PGRID version {0:?}")]
    UnsupportedVersion(String),
    #[error("unknown prediction kind {0:?}")]
    UnknownKind(String),
    #[error("expected {expected} rows, found {found}")]
    RowCount { expected: usize, found: usize },
    #[error("row {row}: expected {expected} values, found {found}")]
    ColumnCount { row: usize, expected: usize, found: usize },
    #[error("row {row}, column {column}: {token:?} is not a number")]
    BadNumber { row: usize, column: usize, token: String },
    #[error("expected a {expected} grid, file holds {found}")]
    WrongKind {
        expected: &'static str,
        found: &'static str,
    },
    #[error(transparent)]
    Grid(#[from] HeuristicError),
}

impl std::str::FromStr for PredictionKind {
    type Err = PgridError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "guideline" => Ok(PredictionKind::Guideline),
            "region" => Ok(PredictionKind::Region),
            other => Err(PgridError::UnknownKind(other.to_string())),
        }
    }
}

/// Parses a PGRID document. Values must be finite decimals in `[0, 1]`.
pub fn parse(text: &str) -> Result<PredictionGrid, PgridError> {
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));
    let header = lines.next().ok_or(PgridError::MissingHeader)?;
    let fields: Vec<&str> = header.split_ascii_whitespace().collect();
    if fields.first() != Some(&MAGIC) {
        return Err(PgridError::MissingHeader);
    }
    if fields.len() != 5 {
        return Err(PgridError::BadHeader(header.to_string()));
    }
    if fields[1] != VERSION {
        return Err(PgridError::UnsupportedVersion(fields[1].to_string()));
    }
    let kind: PredictionKind = fields[2].parse()?;
    let dim = |s: &str| {
        s.parse::<usize>()
            .ok()
            .filter(|&d| d > 0 && d <= 1 << 16)
            .ok_or_else(|| PgridError::BadHeader(header.to_string()))
    };
    let width = dim(fields[3])?;
    let height = dim(fields[4])?;

    let rows: Vec<&str> = lines.collect();
    let data_rows = rows
        .iter()
        .rposition(|l| !l.trim().is_empty())
        .map_or(0, |last| last + 1);
    if data_rows != height {
        return Err(PgridError::RowCount {
            expected: height,
            found: data_rows,
        });
    }
    let mut values = Vec::with_capacity(width.saturating_mul(height).min(1 << 20));
    for (row, line) in rows[..data_rows].iter().enumerate() {
        let mut found = 0;
        for (column, token) in line.split_ascii_whitespace().enumerate() {
            if column >= width {
                return Err(PgridError::ColumnCount {
                    row,
                    expected: width,
                    found: line.split_ascii_whitespace().count(),
                });
            }
            let value: f64 = token.parse().map_err(|_| PgridError::BadNumber {
                row,
                column,
                token: token.to_string(),
            })?;
            values.push(value);
            found += 1;
        }
        if found != width {
            return Err(PgridError::ColumnCount {
                row,
                expected: width,
                found,
            });
        }
    }
    Ok(PredictionGrid::new(kind, width, height, values)?)
}

/// Parses a PGRID document and checks its kind and its dimensions against
/// `map`.
pub fn parse_for_map(text: &str, map: &GridMap, kind: PredictionKind) -> Result<PredictionGrid, PgridError> {
    let grid = parse(text)?;
    if grid.kind() != kind {
        return Err(PgridError::WrongKind {
            expected: kind.as_str(),
            found: grid.kind().as_str(),
        });
    }
    grid.check_matches(map)?;
    Ok(grid)
}

/// Serializes `grid`. Values use the shortest decimal form that parses back
/// to the same `f64`.
pub fn emit(grid: &PredictionGrid) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{MAGIC} {VERSION} {} {} {}",
        grid.kind().as_str(),
        grid.width(),
        grid.height()
    );
    for row in grid.values().chunks(grid.width()) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}
