//! Problem instances, actions, outcome generation and semi-bandit feedback.
//!
//! Base arms are indexed globally `0..m`. Units partition the arms and are
//! identified by their position in [`Instance::units`], which is also the
//! order used for every tie-breaking rule in the crate.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CmabError, Result};
use crate::rewards::RewardFunction;

/// Index of a unit inside its instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UnitId(pub usize);

impl fmt::Display for UnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub id: UnitId,
    pub name: String,
    pub arms: Vec<usize>,
}

impl Unit {
    /// Number of base arms in the unit, `|s|`.
    pub fn size(&self) -> usize {
        self.arms.len()
    }
}

/// How the environment produces per-round outcomes from the means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeModel {
    /// Every arm outputs exactly its mean.
    Deterministic,
    /// `X_i ~ Bernoulli(mu_i)`.
    Bernoulli,
    /// `X_i ~ Normal(mu_i, 1)`; outcomes may leave `[0, 1]`.
    GaussianUnitVar,
}

impl OutcomeModel {
    pub fn name(self) -> &'static str {
        match self {
            OutcomeModel::Deterministic => "deterministic",
            OutcomeModel::Bernoulli => "bernoulli",
            OutcomeModel::GaussianUnitVar => "gaussian-unit-var",
        }
    }

    /// Whether every outcome is guaranteed to lie in `[0, 1]`.
    pub fn is_unit_interval(self) -> bool {
        !matches!(self, OutcomeModel::GaussianUnitVar)
    }
}

impl std::str::FromStr for OutcomeModel {
    type Err = CmabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deterministic" => Ok(OutcomeModel::Deterministic),
            "bernoulli" => Ok(OutcomeModel::Bernoulli),
            "gaussian-unit-var" | "gaussian" => Ok(OutcomeModel::GaussianUnitVar),
            other => Err(CmabError::InvalidArgument(format!(
                "unknown outcome model '{other}'"
            ))),
        }
    }
}

/// A real-valued assignment to every base arm: true means, posterior samples
/// or empirical means.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanVector(pub Vec<f64>);

impl MeanVector {
    pub fn new(values: Vec<f64>) -> Self {
        MeanVector(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn clamped(&self) -> MeanVector {
        MeanVector(self.0.iter().map(|v| v.clamp(0.0, 1.0)).collect())
    }
}

impl std::ops::Index<usize> for MeanVector {
    type Output = f64;

    fn index(&self, arm: usize) -> &f64 {
        &self.0[arm]
    }
}

/// An ordered sequence of distinct units. The prefix of length `k` is the
/// set chosen after `k` greedy steps.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Action(Vec<UnitId>);

impl Action {
    pub fn new(units: Vec<UnitId>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for u in &units {
            if !seen.insert(*u) {
                return Err(CmabError::InvalidAction(format!("unit {u} repeated")));
            }
        }
        Ok(Action(units))
    }

    pub fn empty() -> Self {
        Action(Vec::new())
    }

    pub fn units(&self) -> &[UnitId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, unit: UnitId) -> bool {
        self.0.contains(&unit)
    }

    pub fn prefix(&self, k: usize) -> Action {
        Action(self.0[..k.min(self.0.len())].to_vec())
    }

    /// Appends `unit`, or errors if it is already present.
    pub fn push(&mut self, unit: UnitId) -> Result<()> {
        if self.contains(unit) {
            return Err(CmabError::InvalidArgument(format!(
                "unit {unit} already in action"
            )));
        }
        self.0.push(unit);
        Ok(())
    }

    pub fn with(&self, unit: UnitId) -> Result<Action> {
        let mut next = self.clone();
        next.push(unit)?;
        Ok(next)
    }

    /// Units in ascending id order; the set this action represents.
    pub fn sorted(&self) -> Action {
        let mut units = self.0.clone();
        units.sort_unstable();
        Action(units)
    }
}

impl From<Action> for Vec<UnitId> {
    fn from(a: Action) -> Self {
        a.0
    }
}

/// Observed `(arm, value)` pairs for every arm in the played action's units.
#[derive(Debug, Clone, PartialEq)]
pub struct Feedback {
    pub observations: Vec<(usize, f64)>,
}

impl Feedback {
    pub fn arms(&self) -> impl Iterator<Item = usize> + '_ {
        self.observations.iter().map(|(arm, _)| *arm)
    }
}

/// Full problem description. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Instance {
    arm_count: usize,
    units: Vec<Unit>,
    action_size: usize,
    means: MeanVector,
    outcome_model: OutcomeModel,
    reward: RewardFunction,
    unit_of_arm: Vec<UnitId>,
}

impl Instance {
    /// Builds an instance from `(unit name, arms)` pairs.
    ///
    /// Units must partition `0..arm_count`, `1 <= action_size <= units.len()`
    /// and every mean must lie in `[0, 1]`.
    pub fn new(
        arm_count: usize,
        units: Vec<(String, Vec<usize>)>,
        action_size: usize,
        means: MeanVector,
        outcome_model: OutcomeModel,
        reward: RewardFunction,
    ) -> Result<Self> {
        if arm_count == 0 {
            return Err(CmabError::InvalidInstance("no base arms".into()));
        }
        if means.len() != arm_count {
            return Err(CmabError::InvalidInstance(format!(
                "{} means for {arm_count} arms",
                means.len()
            )));
        }
        if let Some((i, v)) = means
            .values()
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(CmabError::InvalidInstance(format!(
                "mean of arm {i} is {v}, outside [0, 1]"
            )));
        }

        let mut owner: Vec<Option<UnitId>> = vec![None; arm_count];
        let mut names = BTreeSet::new();
        let mut built = Vec::with_capacity(units.len());
        for (idx, (name, arms)) in units.into_iter().enumerate() {
            let id = UnitId(idx);
            if !names.insert(name.clone()) {
                return Err(CmabError::InvalidInstance(format!(
                    "duplicate unit id '{name}'"
                )));
            }
            if arms.is_empty() {
                return Err(CmabError::InvalidInstance(format!(
                    "unit '{name}' has no arms"
                )));
            }
            for &arm in &arms {
                if arm >= arm_count {
                    return Err(CmabError::InvalidInstance(format!(
                        "unit '{name}' references arm {arm}, only {arm_count} arms"
                    )));
                }
                if let Some(prev) = owner[arm] {
                    return Err(CmabError::InvalidInstance(format!(
                        "arm {arm} belongs to units {prev} and '{name}'"
                    )));
                }
                owner[arm] = Some(id);
            }
            built.push(Unit { id, name, arms });
        }
        let unit_of_arm = owner
            .into_iter()
            .enumerate()
            .map(|(arm, u)| {
                u.ok_or_else(|| CmabError::InvalidInstance(format!("arm {arm} belongs to no unit")))
            })
            .collect::<Result<Vec<_>>>()?;

        if action_size == 0 || action_size > built.len() {
            return Err(CmabError::InvalidInstance(format!(
                "action size {action_size} must be in [1, {}]",
                built.len()
            )));
        }
        reward.validate(arm_count, &built)?;

        Ok(Instance {
            arm_count,
            units: built,
            action_size,
            means,
            outcome_model,
            reward,
            unit_of_arm,
        })
    }

    pub fn arm_count(&self) -> usize {
        self.arm_count
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn unit_count(&self) -> usize {
        self.units.len()
    }

    pub fn unit(&self, id: UnitId) -> Result<&Unit> {
        self.units
            .get(id.0)
            .ok_or_else(|| CmabError::InvalidAction(format!("unknown unit {id}")))
    }

    pub fn unit_by_name(&self, name: &str) -> Option<&Unit> {
        self.units.iter().find(|u| u.name == name)
    }

    pub fn unit_of_arm(&self, arm: usize) -> UnitId {
        self.unit_of_arm[arm]
    }

    pub fn action_size(&self) -> usize {
        self.action_size
    }

    pub fn means(&self) -> &MeanVector {
        &self.means
    }

    pub fn outcome_model(&self) -> OutcomeModel {
        self.outcome_model
    }

    pub fn reward(&self) -> &RewardFunction {
        &self.reward
    }

    /// Same instance with a different outcome model.
    pub fn with_outcome_model(mut self, model: OutcomeModel) -> Self {
        self.outcome_model = model;
        self
    }

    /// Builds an action from unit names, e.g. `["u2", "u1"]`.
    pub fn action_from_names(&self, names: &[&str]) -> Result<Action> {
        let ids = names
            .iter()
            .map(|n| {
                self.unit_by_name(n)
                    .map(|u| u.id)
                    .ok_or_else(|| CmabError::InvalidAction(format!("unknown unit '{n}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        Action::new(ids)
    }

    /// Renders an action as `(u2,u1)` using unit names.
    pub fn action_label(&self, action: &Action) -> String {
        let names: Vec<&str> = action
            .units()
            .iter()
            .map(|u| self.units.get(u.0).map_or("?", |unit| unit.name.as_str()))
            .collect();
        format!("({})", names.join(","))
    }

    /// Number of arms in `∪S`.
    pub fn union_size(&self, action: &Action) -> usize {
        action
            .units()
            .iter()
            .filter_map(|u| self.units.get(u.0))
            .map(Unit::size)
            .sum()
    }
}

/// The set of base arms covered by the action's units, `∪S`.
pub fn union_arms(action: &Action, instance: &Instance) -> Result<BTreeSet<usize>> {
    let mut arms = BTreeSet::new();
    for u in action.units() {
        arms.extend(instance.unit(*u)?.arms.iter().copied());
    }
    Ok(arms)
}

/// Draws one outcome per base arm according to the instance's outcome model.
///
/// Deterministic instances consume no randomness.
pub fn draw_outcomes<R: Rng + ?Sized>(instance: &Instance, rng: &mut R) -> Vec<f64> {
    let means = instance.means.values();
    match instance.outcome_model {
        OutcomeModel::Deterministic => means.to_vec(),
        OutcomeModel::Bernoulli => means
            .iter()
            .map(|&mu| if rng.random::<f64>() < mu { 1.0 } else { 0.0 })
            .collect(),
        OutcomeModel::GaussianUnitVar => means
            .iter()
            .map(|&mu| {
                let z: f64 = StandardNormal.sample(rng);
                mu + z
            })
            .collect(),
    }
}

/// Semi-bandit feedback: the outcomes of exactly the arms in `∪action`.
pub fn observe(action: &Action, outcomes: &[f64], instance: &Instance) -> Result<Feedback> {
    if action.len() != instance.action_size {
        return Err(CmabError::InvalidAction(format!(
            "played action has {} units, K = {}",
            action.len(),
            instance.action_size
        )));
    }
    if outcomes.len() != instance.arm_count {
        return Err(CmabError::InvalidArgument(format!(
            "{} outcomes for {} arms",
            outcomes.len(),
            instance.arm_count
        )));
    }
    let mut observations = Vec::with_capacity(instance.union_size(action));
    for u in action.units() {
        for &arm in &instance.unit(*u)?.arms {
            observations.push((arm, outcomes[arm]));
        }
    }
    Ok(Feedback { observations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::make_figure1_instance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linear_instance(unit_arms: Vec<Vec<usize>>, m: usize, k: usize) -> Result<Instance> {
        let units = unit_arms
            .into_iter()
            .enumerate()
            .map(|(i, a)| (format!("s{i}"), a))
            .collect();
        Instance::new(
            m,
            units,
            k,
            MeanVector(vec![0.5; m]),
            OutcomeModel::Bernoulli,
            RewardFunction::linear(),
        )
    }

    #[test]
    fn union_arms_on_figure1() {
        let inst = make_figure1_instance(0.04).unwrap();
        let a = inst.action_from_names(&["u2", "u1"]).unwrap();
        assert_eq!(union_arms(&a, &inst).unwrap(), BTreeSet::from([0, 1, 2]));
        let b = inst.action_from_names(&["u3", "u4"]).unwrap();
        assert_eq!(union_arms(&b, &inst).unwrap(), BTreeSet::from([3, 4, 5]));
        assert!(union_arms(&Action::empty(), &inst).unwrap().is_empty());
    }

    #[test]
    fn union_arms_rejects_unknown_unit() {
        let inst = make_figure1_instance(0.04).unwrap();
        let bad = Action::new(vec![UnitId(9)]).unwrap();
        assert!(matches!(
            union_arms(&bad, &inst),
            Err(CmabError::InvalidAction(_))
        ));
    }

    #[test]
    fn partition_is_enforced() {
        assert!(linear_instance(vec![vec![0], vec![1]], 2, 1).is_ok());
        // overlap
        assert!(linear_instance(vec![vec![0, 1], vec![1]], 2, 1).is_err());
        // uncovered arm
        assert!(linear_instance(vec![vec![0]], 2, 1).is_err());
        // empty unit
        assert!(linear_instance(vec![vec![0, 1], vec![]], 2, 1).is_err());
        // duplicate within unit
        assert!(linear_instance(vec![vec![0, 0], vec![1]], 2, 1).is_err());
        // out of range
        assert!(linear_instance(vec![vec![0], vec![1, 2]], 2, 1).is_err());
        // K bounds
        assert!(linear_instance(vec![vec![0], vec![1]], 2, 0).is_err());
        assert!(linear_instance(vec![vec![0], vec![1]], 2, 3).is_err());
    }

    #[test]
    fn means_outside_unit_interval_rejected() {
        let r = Instance::new(
            1,
            vec![("a".into(), vec![0])],
            1,
            MeanVector(vec![1.5]),
            OutcomeModel::Deterministic,
            RewardFunction::linear(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn action_rejects_duplicates() {
        assert!(Action::new(vec![UnitId(0), UnitId(0)]).is_err());
        let mut a = Action::empty();
        a.push(UnitId(1)).unwrap();
        assert!(a.push(UnitId(1)).is_err());
    }

    #[test]
    fn deterministic_outcomes_equal_means() {
        let inst = make_figure1_instance(0.04).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            assert_eq!(draw_outcomes(&inst, &mut rng), inst.means().values());
        }
    }

    #[test]
    fn bernoulli_zero_mean_never_fires() {
        let inst = Instance::new(
            2,
            vec![("a".into(), vec![0]), ("b".into(), vec![1])],
            1,
            MeanVector(vec![0.0, 1.0]),
            OutcomeModel::Bernoulli,
            RewardFunction::linear(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            assert_eq!(draw_outcomes(&inst, &mut rng), vec![0.0, 1.0]);
        }
    }

    #[test]
    fn bernoulli_sample_mean_concentrates() {
        let inst = make_figure1_instance(0.04)
            .unwrap()
            .with_outcome_model(OutcomeModel::Bernoulli);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += draw_outcomes(&inst, &mut rng)[0];
        }
        // mu = 0.49, binomial std of the mean ≈ 0.0016
        assert!((sum / n as f64 - 0.49).abs() < 0.005);
    }

    #[test]
    fn gaussian_outcomes_have_unit_variance() {
        let inst = make_figure1_instance(0.04)
            .unwrap()
            .with_outcome_model(OutcomeModel::GaussianUnitVar);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 50_000;
        let xs: Vec<f64> = (0..n).map(|_| draw_outcomes(&inst, &mut rng)[5]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 0.48).abs() < 0.02);
        assert!((var - 1.0).abs() < 0.03);
    }

    #[test]
    fn observe_returns_exactly_union_arms() {
        let inst = make_figure1_instance(0.04).unwrap();
        let x = inst.means().values().to_vec();
        let a = inst.action_from_names(&["u2", "u1"]).unwrap();
        let fb = observe(&a, &x, &inst).unwrap();
        assert_eq!(fb.observations.len(), 3);

        let b = inst.action_from_names(&["u1", "u4"]).unwrap();
        let fb = observe(&b, &x, &inst).unwrap();
        assert_eq!(fb.observations, vec![(0, 0.49), (5, 0.48)]);

        let short = inst.action_from_names(&["u1"]).unwrap();
        assert!(observe(&short, &x, &inst).is_err());
    }

    #[test]
    fn observe_single_arm_mab() {
        let inst = linear_instance(vec![vec![0], vec![1], vec![2]], 3, 1).unwrap();
        let a = Action::new(vec![UnitId(1)]).unwrap();
        let fb = observe(&a, &[0.1, 0.2, 0.3], &inst).unwrap();
        assert_eq!(fb.observations, vec![(1, 0.2)]);
    }

    #[test]
    fn seeded_outcome_stream_is_reproducible() {
        let inst = make_figure1_instance(0.02)
            .unwrap()
            .with_outcome_model(OutcomeModel::Bernoulli);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..100)
                .flat_map(|_| draw_outcomes(&inst, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }
}
