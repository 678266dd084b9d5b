//! Expected-reward functions `r(S, theta)`.
//!
//! Two families are supported: probabilistic maximum coverage on a bipartite
//! graph whose edges are the base arms, and a linear sum over the covered
//! arms. Both are 1-Lipschitz in the per-arm sense.

use std::collections::BTreeMap;

use crate::error::{CmabError, Result};
use crate::model::{Action, Instance, MeanVector, Unit, UnitId};

/// Lipschitz coefficient shared by both reward families.
pub const LIPSCHITZ_B: f64 = 1.0;

/// Bipartite coverage graph: arm `i` is the edge `left_of_arm[i] -> right_of_arm[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageGraph {
    left_of_arm: Vec<String>,
    right_of_arm: Vec<usize>,
    right_names: Vec<String>,
}

impl CoverageGraph {
    /// Builds the graph from one `(left, right)` node-name pair per arm.
    /// Right nodes are indexed in order of first appearance.
    pub fn from_edges<L: Into<String>, R: AsRef<str>>(edges: Vec<(L, R)>) -> Self {
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        let mut right_names = Vec::new();
        let mut left_of_arm = Vec::with_capacity(edges.len());
        let mut right_of_arm = Vec::with_capacity(edges.len());
        for (left, right) in edges {
            let right = right.as_ref();
            let idx = *index.entry(right.to_string()).or_insert_with(|| {
                right_names.push(right.to_string());
                right_names.len() - 1
            });
            left_of_arm.push(left.into());
            right_of_arm.push(idx);
        }
        CoverageGraph {
            left_of_arm,
            right_of_arm,
            right_names,
        }
    }

    pub fn edge(&self, arm: usize) -> (&str, &str) {
        (
            &self.left_of_arm[arm],
            &self.right_names[self.right_of_arm[arm]],
        )
    }

    pub fn right_count(&self) -> usize {
        self.right_names.len()
    }

    pub fn arm_count(&self) -> usize {
        self.right_of_arm.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RewardKind {
    /// `sum_v (1 - prod_{(u,v) in E, u in S} (1 - theta_(u,v)))`
    Pmc(CoverageGraph),
    /// `sum_{i in ∪S} theta_i`
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardFunction {
    kind: RewardKind,
    clamp_theta: bool,
}

impl RewardFunction {
    pub fn pmc(graph: CoverageGraph) -> Self {
        RewardFunction {
            kind: RewardKind::Pmc(graph),
            clamp_theta: false,
        }
    }

    pub fn linear() -> Self {
        RewardFunction {
            kind: RewardKind::Linear,
            clamp_theta: false,
        }
    }

    /// When set, `theta` is clamped to `[0, 1]` before evaluation.
    pub fn with_clamp_theta(mut self, clamp: bool) -> Self {
        self.clamp_theta = clamp;
        self
    }

    pub fn clamp_theta(&self) -> bool {
        self.clamp_theta
    }

    pub fn kind(&self) -> &RewardKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            RewardKind::Pmc(_) => "pmc",
            RewardKind::Linear => "linear",
        }
    }

    pub fn lipschitz_b(&self) -> f64 {
        LIPSCHITZ_B
    }

    pub(crate) fn validate(&self, arm_count: usize, units: &[Unit]) -> Result<()> {
        let RewardKind::Pmc(graph) = &self.kind else {
            return Ok(());
        };
        if graph.arm_count() != arm_count {
            return Err(CmabError::InvalidInstance(format!(
                "coverage graph has {} edges for {arm_count} arms",
                graph.arm_count()
            )));
        }
        for unit in units {
            let left = &graph.left_of_arm[unit.arms[0]];
            if let Some(&other) = unit.arms.iter().find(|&&a| &graph.left_of_arm[a] != left) {
                return Err(CmabError::InvalidInstance(format!(
                    "unit '{}' mixes left nodes '{left}' and '{}'",
                    unit.name, graph.left_of_arm[other]
                )));
            }
        }
        Ok(())
    }

    /// Value over an explicit arm set. Arms may appear in any order.
    pub fn value_of_arms<I>(&self, arms: I, theta: &[f64]) -> f64
    where
        I: IntoIterator<Item = usize>,
    {
        let get = |i: usize| {
            let v = theta[i];
            if self.clamp_theta {
                v.clamp(0.0, 1.0)
            } else {
                v
            }
        };
        match &self.kind {
            RewardKind::Linear => arms.into_iter().map(get).sum(),
            RewardKind::Pmc(graph) => {
                let mut miss = vec![1.0_f64; graph.right_count()];
                for arm in arms {
                    miss[graph.right_of_arm[arm]] *= 1.0 - get(arm);
                }
                // untouched right nodes contribute 1 - 1 = 0
                miss.iter().map(|p| 1.0 - p).sum()
            }
        }
    }

    /// `r(S, theta)`; independent of the order of units in `action`.
    pub fn reward(&self, instance: &Instance, action: &Action, theta: &MeanVector) -> Result<f64> {
        check_theta(instance, theta)?;
        let arms = action
            .units()
            .iter()
            .map(|u| instance.unit(*u).map(|unit| unit.arms.iter().copied()))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.value_of_arms(arms.into_iter().flatten(), theta.values()))
    }

    /// `r(prefix ∪ {unit}) - r(prefix)`.
    pub fn marginal_gain(
        &self,
        instance: &Instance,
        prefix: &Action,
        unit: UnitId,
        theta: &MeanVector,
    ) -> Result<f64> {
        let extended = prefix.with(unit)?;
        Ok(self.reward(instance, &extended, theta)? - self.reward(instance, prefix, theta)?)
    }

    /// Checks `|r(S,theta) - r(S,theta')| <= B * sum_{i in ∪S} |theta_i - theta'_i|`,
    /// allowing `1e-12` of floating-point slack.
    pub fn verify_lipschitz(
        &self,
        instance: &Instance,
        action: &Action,
        theta: &MeanVector,
        theta_prime: &MeanVector,
    ) -> Result<bool> {
        let lhs = (self.reward(instance, action, theta)?
            - self.reward(instance, action, theta_prime)?)
        .abs();
        let rhs = self.lipschitz_b()
            * crate::model::union_arms(action, instance)?
                .into_iter()
                .map(|i| (theta[i] - theta_prime[i]).abs())
                .sum::<f64>();
        Ok(lhs <= rhs + 1e-12)
    }
}

fn check_theta(instance: &Instance, theta: &MeanVector) -> Result<()> {
    if theta.len() != instance.arm_count() {
        return Err(CmabError::InvalidArgument(format!(
            "theta has {} entries for {} arms",
            theta.len(),
            instance.arm_count()
        )));
    }
    Ok(())
}
