//! Method definitions: which reward field and which Q-table prior a run uses,
//! and where its prediction grids come from.

use std::fmt;
use std::path::PathBuf;

use crate::gridworld::GridMap;
use crate::heuristics::{self, PredictionGrid, PredictionKind, RewardField, RewardParams};
use crate::oracle::{self, OracleParams};
use crate::pgrid;
use crate::qlearning::{init_qtable, QInit, QTable};

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RewardKind {
    /// Discrete rewards only; ordinary moves earn the constant `free` reward.
    Sparse,
    /// Distance-based continuous field.
    DCrf,
    /// Guideline-based continuous field.
    NdrCrf,
    /// Weighted blend of the guideline and distance fields.
    Blended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitKind {
    Uniform,
    /// Euclidean distance prior.
    DQi,
    /// Region mask alone (blend weight 1).
    NdrQi,
    /// Region mask blended with the distance prior.
    BlendedQi,
}

impl RewardKind {
    pub fn needs_guideline(self) -> bool {
        matches!(self, RewardKind::NdrCrf | RewardKind::Blended)
    }
}

impl InitKind {
    pub fn needs_region(self) -> bool {
        matches!(self, InitKind::NdrQi | InitKind::BlendedQi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredictionSource {
    /// Synthesize predictions from exact shortest-path distances.
    Oracle(OracleParams),
    /// Read PGRID files.
    Files {
        guideline: Option<PathBuf>,
        region: Option<PathBuf>,
    },
}

impl Default for PredictionSource {
    fn default() -> Self {
        PredictionSource::Oracle(OracleParams::default())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub name: String,
    pub reward: RewardKind,
    pub init: InitKind,
    pub predictions: PredictionSource,
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Names accepted by [`MethodSpec::named`].
pub const METHOD_NAMES: [&str; 4] = ["ql", "o-ql", "iql", "ndr-ql"];

impl MethodSpec {
    pub fn new(name: impl Into<String>, reward: RewardKind, init: InitKind, predictions: PredictionSource) -> Self {
        Self {
            name: name.into(),
            reward,
            init,
            predictions,
        }
    }

    /// Comparison methods:
    ///
    /// * `ql` - sparse rewards, zero table
    /// * `o-ql` - sparse rewards, distance prior
    /// * `iql` - distance reward field, zero table
    /// * `ndr-ql` - blended reward field, blended region prior
    ///
    /// `o-ql` and `iql` carry only the heuristic priors of those methods, not
    /// their learning-rate or action-selection changes.
    pub fn named(name: &str, predictions: PredictionSource) -> Option<Self> {
        let (reward, init) = match name {
            "ql" => (RewardKind::Sparse, InitKind::Uniform),
            "o-ql" => (RewardKind::Sparse, InitKind::DQi),
            "iql" => (RewardKind::DCrf, InitKind::Uniform),
            "ndr-ql" => (RewardKind::Blended, InitKind::BlendedQi),
            _ => return None,
        };
        Some(Self::new(name, reward, init, predictions))
    }

    /// The four comparison methods in table order.
    pub fn comparison_set(predictions: &PredictionSource) -> Vec<Self> {
        METHOD_NAMES
            .iter()
            .map(|n| Self::named(n, predictions.clone()).expect("known name"))
            .collect()
    }

    /// Ablation settings: each heuristic alone, the pairs, all four, and the
    /// plain baseline.
    pub fn ablation_set(predictions: &PredictionSource) -> Vec<Self> {
        use InitKind as I;
        use RewardKind as R;
        [
            ("D-C", R::DCrf, I::Uniform),
            ("N-C", R::NdrCrf, I::Uniform),
            ("D-C+N-C", R::Blended, I::Uniform),
            ("D-Q", R::Sparse, I::DQi),
            ("N-Q", R::Sparse, I::NdrQi),
            ("D-Q+N-Q", R::Sparse, I::BlendedQi),
            ("all", R::Blended, I::BlendedQi),
            ("baseline", R::Sparse, I::Uniform),
        ]
        .into_iter()
        .map(|(n, r, i)| Self::new(n, r, i, predictions.clone()))
        .collect()
    }

    pub fn needs_guideline(&self) -> bool {
        self.reward.needs_guideline()
    }

    pub fn needs_region(&self) -> bool {
        self.init.needs_region()
    }

    /// Checks that file-backed predictions name every grid the method uses.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if let PredictionSource::Files { guideline, region } = &self.predictions {
            if self.needs_guideline() && guideline.is_none() {
                return Err(HarnessError::MissingPrediction {
                    method: self.name.clone(),
                    kind: PredictionKind::Guideline,
                });
            }
            if self.needs_region() && region.is_none() {
                return Err(HarnessError::MissingPrediction {
                    method: self.name.clone(),
                    kind: PredictionKind::Region,
                });
            }
        }
        Ok(())
    }
}

/// Prediction grids bound to one map.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Predictions {
    pub guideline: Option<PredictionGrid>,
    pub region: Option<PredictionGrid>,
}

fn read_grid(path: &PathBuf, map: &GridMap, kind: PredictionKind) -> Result<PredictionGrid, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.clone(),
        source,
    })?;
    pgrid::parse_for_map(&text, map, kind).map_err(|source| HarnessError::Pgrid {
        path: path.clone(),
        source,
    })
}

/// Builds or loads the grids requested by `need_guideline` / `need_region`.
pub fn load_predictions(
    map: &GridMap,
    source: &PredictionSource,
    need_guideline: bool,
    need_region: bool,
) -> Result<Predictions, HarnessError> {
    let mut out = Predictions::default();
    match source {
        PredictionSource::Oracle(params) => {
            if need_guideline {
                out.guideline = Some(oracle::oracle_guideline(map, params)?);
            }
            if need_region {
                out.region = Some(oracle::oracle_region(map, params)?);
            }
        }
        PredictionSource::Files { guideline, region } => {
            if need_guideline {
                if let Some(path) = guideline {
                    out.guideline = Some(read_grid(path, map, PredictionKind::Guideline)?);
                }
            }
            if need_region {
                if let Some(path) = region {
                    out.region = Some(read_grid(path, map, PredictionKind::Region)?);
                }
            }
        }
    }
    Ok(out)
}

/// Reward field and initial table for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedRun {
    pub reward_field: Option<RewardField>,
    pub qtable: QTable,
    /// Region threshold picked for the mask, when a region prior is used.
    pub thd: Option<f64>,
}

fn require<'a>(
    grid: &'a Option<PredictionGrid>,
    method: &MethodSpec,
    kind: PredictionKind,
) -> Result<&'a PredictionGrid, HarnessError> {
    grid.as_ref().ok_or_else(|| HarnessError::MissingPrediction {
        method: method.name.clone(),
        kind,
    })
}

/// Builds the reward field and initial Q-table of `method` on `map`.
pub fn prepare(
    map: &GridMap,
    method: &MethodSpec,
    predictions: &Predictions,
    params: &RewardParams,
) -> Result<PreparedRun, HarnessError> {
    let reward_field = match method.reward {
        RewardKind::Sparse => None,
        RewardKind::DCrf => Some(heuristics::d_crf(map, params)?),
        RewardKind::NdrCrf => {
            let g = require(&predictions.guideline, method, PredictionKind::Guideline)?;
            g.check_matches(map)?;
            Some(heuristics::ndr_crf(g, params)?)
        }
        RewardKind::Blended => {
            let g = require(&predictions.guideline, method, PredictionKind::Guideline)?;
            Some(heuristics::blended_crf(map, g, params)?)
        }
    };
    let field = match method.init {
        InitKind::Uniform => None,
        InitKind::DQi => Some(heuristics::d_qi(map)),
        InitKind::NdrQi => {
            let r = require(&predictions.region, method, PredictionKind::Region)?;
            Some(heuristics::ndr_qi(map, r, 1.0)?)
        }
        InitKind::BlendedQi => {
            let r = require(&predictions.region, method, PredictionKind::Region)?;
            Some(heuristics::ndr_qi(map, r, params.omega)?)
        }
    };
    let qtable = match &field {
        Some(f) => init_qtable(map, QInit::Field(f))?,
        None => init_qtable(map, QInit::Uniform)?,
    };
    Ok(PreparedRun {
        reward_field,
        qtable,
        thd: field.and_then(|f| f.thd()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::Position;

    #[test]
    fn ablation_has_eight_distinct_settings() {
        let set = MethodSpec::ablation_set(&PredictionSource::default());
        assert_eq!(set.len(), 8);
        for (i, a) in set.iter().enumerate() {
            for b in &set[i + 1..] {
                assert!((a.reward, a.init) != (b.reward, b.init));
            }
        }
    }

    #[test]
    fn named_methods() {
        for name in METHOD_NAMES {
            assert!(MethodSpec::named(name, PredictionSource::default()).is_some());
        }
        assert!(MethodSpec::named("sarsa", PredictionSource::default()).is_none());
    }

    #[test]
    fn file_source_must_cover_method() {
        let files = PredictionSource::Files {
            guideline: None,
            region: Some("r.pgrid".into()),
        };
        let m = MethodSpec::named("ndr-ql", files.clone()).unwrap();
        assert!(matches!(
            m.validate(),
            Err(HarnessError::MissingPrediction {
                kind: PredictionKind::Guideline,
                ..
            })
        ));
        assert!(MethodSpec::named("o-ql", files).unwrap().validate().is_ok());
    }

    #[test]
    fn prepare_builds_expected_pieces() {
        let map = GridMap::parse("S...\n.##.\n...G\n").unwrap();
        let params = RewardParams::for_map(&map);
        let source = PredictionSource::default();
        let preds = load_predictions(&map, &source, true, true).unwrap();
        let ndr = prepare(
            &map,
            &MethodSpec::named("ndr-ql", source.clone()).unwrap(),
            &preds,
            &params,
        )
        .unwrap();
        assert!(ndr.reward_field.is_some());
        assert_eq!(ndr.thd, Some(0.99));
        let ql = prepare(
            &map,
            &MethodSpec::named("ql", source).unwrap(),
            &Predictions::default(),
            &params,
        )
        .unwrap();
        assert!(ql.reward_field.is_none());
        assert_eq!(ql.qtable.get(Position::new(0, 0)), &[0.0; 4]);
    }

    #[test]
    fn prepare_reports_missing_grid() {
        let map = GridMap::parse("S.\n.G\n").unwrap();
        let params = RewardParams::for_map(&map);
        let m = MethodSpec::named("ndr-ql", PredictionSource::default()).unwrap();
        assert!(matches!(
            prepare(&map, &m, &Predictions::default(), &params),
            Err(HarnessError::MissingPrediction { .. })
        ));
    }
}
