//! TOML instance files.
//!
//! ```toml
//! arms = 6
//! K = 2
//! means = [0.49, 0.2, 0.3, 0.3, 0.16, 0.48]
//! outcome_model = "deterministic"   # or "bernoulli", "gaussian-unit-var"
//! reward_kind = "pmc"               # or "linear"
//!
//! [[units]]
//! id = "u1"
//! arms = [0]
//!
//! # pmc only: one edge per arm, in arm order
//! [[edges]]
//! left = "u1"
//! right = "v1"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CmabError, Result};
use crate::model::{Instance, MeanVector, OutcomeModel};
use crate::rewards::{CoverageGraph, RewardFunction, RewardKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardKindTag {
    Pmc,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitEntry {
    pub id: String,
    pub arms: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub arms: usize,
    #[serde(rename = "K")]
    pub action_size: usize,
    pub means: Vec<f64>,
    pub outcome_model: OutcomeModel,
    pub reward_kind: RewardKindTag,
    pub units: Vec<UnitEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<EdgeEntry>,
}

impl InstanceFile {
    pub fn from_instance(instance: &Instance) -> Self {
        let (reward_kind, edges) = match instance.reward().kind() {
            RewardKind::Linear => (RewardKindTag::Linear, Vec::new()),
            RewardKind::Pmc(graph) => (
                RewardKindTag::Pmc,
                (0..graph.arm_count())
                    .map(|arm| {
                        let (left, right) = graph.edge(arm);
                        EdgeEntry {
                            left: left.to_string(),
                            right: right.to_string(),
                        }
                    })
                    .collect(),
            ),
        };
        InstanceFile {
            arms: instance.arm_count(),
            action_size: instance.action_size(),
            means: instance.means().values().to_vec(),
            outcome_model: instance.outcome_model(),
            reward_kind,
            units: instance
                .units()
                .iter()
                .map(|u| UnitEntry {
                    id: u.name.clone(),
                    arms: u.arms.clone(),
                })
                .collect(),
            edges,
        }
    }

    pub fn into_instance(self) -> Result<Instance> {
        let reward = match self.reward_kind {
            RewardKindTag::Linear => {
                if !self.edges.is_empty() {
                    return Err(CmabError::InvalidInstance(
                        "edges given for a linear reward".into(),
                    ));
                }
                RewardFunction::linear()
            }
            RewardKindTag::Pmc => RewardFunction::pmc(CoverageGraph::from_edges(
                self.edges.into_iter().map(|e| (e.left, e.right)).collect(),
            )),
        };
        Instance::new(
            self.arms,
            self.units.into_iter().map(|u| (u.id, u.arms)).collect(),
            self.action_size,
            MeanVector(self.means),
            self.outcome_model,
            reward,
        )
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("instance file is always representable")
    }
}

pub fn parse_instance(text: &str) -> std::result::Result<Instance, String> {
    let file: InstanceFile = toml::from_str(text).map_err(|e| e.to_string())?;
    file.into_instance().map_err(|e| e.to_string())
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    let text = std::fs::read_to_string(path).map_err(|e| CmabError::io(path, e))?;
    parse_instance(&text).map_err(|message| CmabError::Parse {
        path: path.to_path_buf(),
        message,
    })
}

pub fn save_instance(instance: &Instance, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CmabError::io(parent, e))?;
    }
    let text = InstanceFile::from_instance(instance).to_toml();
    std::fs::write(path, text).map_err(|e| CmabError::io(path, e))
}
