//! Offline oracles: the greedy algorithm, exhaustive search, and the set of
//! all greedy-reachable solutions when the per-step argmax is not unique.

use crate::error::{CmabError, Result};
use crate::model::{Action, Instance, MeanVector, UnitId};
use crate::rewards::RewardFunction;

/// Default cap on the number of subsets or prefixes an exhaustive routine
/// may visit.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// Default tolerance for treating near-equal step values as ties.
pub const DEFAULT_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyResult {
    /// Units in selection order.
    pub action: Action,
    /// Reward of the prefix after each step.
    pub step_values: Vec<f64>,
}

impl GreedyResult {
    pub fn value(&self) -> f64 {
        self.step_values.last().copied().unwrap_or(0.0)
    }
}

/// Greedy-reachable ordered actions of a fixed length.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSet {
    pub actions: Vec<Action>,
}

impl SolutionSet {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

fn check_k(instance: &Instance, k: usize) -> Result<()> {
    if k > instance.unit_count() {
        return Err(CmabError::Infeasible {
            k,
            units: instance.unit_count(),
        });
    }
    Ok(())
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

/// `r(prefix ∪ {s})` for every unit `s` outside `prefix`, in unit-id order.
fn extension_values(
    instance: &Instance,
    reward: &RewardFunction,
    prefix: &Action,
    prefix_arms: &[usize],
    theta: &[f64],
) -> Vec<(UnitId, f64)> {
    instance
        .units()
        .iter()
        .filter(|u| !prefix.contains(u.id))
        .map(|u| {
            let arms = prefix_arms.iter().chain(u.arms.iter()).copied();
            (u.id, reward.value_of_arms(arms, theta))
        })
        .collect()
}

/// Runs `K` greedy steps, each picking the unit that maximizes
/// `r(S ∪ {s}, theta)`. Ties go to the lowest unit id (strict `>`, no epsilon).
pub fn greedy(
    instance: &Instance,
    reward: &RewardFunction,
    theta: &MeanVector,
) -> Result<GreedyResult> {
    let k = instance.action_size();
    check_k(instance, k)?;
    check_theta(instance, theta)?;

    let mut action = Action::empty();
    let mut arms: Vec<usize> = Vec::new();
    let mut step_values = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<(UnitId, f64)> = None;
        for unit in instance.units() {
            if action.contains(unit.id) {
                continue;
            }
            let v =
                reward.value_of_arms(arms.iter().chain(unit.arms.iter()).copied(), theta.values());
            match best {
                Some((_, b)) if !(v > b) => {}
                _ => best = Some((unit.id, v)),
            }
        }
        let (id, v) = best.expect("k <= unit count leaves a candidate");
        action.push(id)?;
        arms.extend(instance.unit(id)?.arms.iter().copied());
        step_values.push(v);
    }
    Ok(GreedyResult {
        action,
        step_values,
    })
}

/// `C(n, k)`, saturating.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// All size-`k` unit subsets in lexicographic id order.
pub fn all_actions(instance: &Instance, k: usize, cap: u128) -> Result<Vec<Action>> {
    check_k(instance, k)?;
    let n = instance.unit_count();
    let needed = binomial(n, k);
    if needed > cap {
        return Err(CmabError::Capacity {
            what: "action enumeration",
            needed,
            cap,
        });
    }
    let mut out = Vec::with_capacity(needed as usize);
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(Action::new(idx.iter().map(|&i| UnitId(i)).collect())?);
        // advance to the next combination
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if idx[i] < n - k + i {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Exact maximizer over all size-`K` actions. Ties go to the
/// lexicographically smallest unit set.
pub fn brute_force_best(
    instance: &Instance,
    reward: &RewardFunction,
    theta: &MeanVector,
    cap: u128,
) -> Result<(Action, f64)> {
    check_theta(instance, theta)?;
    let mut best: Option<(Action, f64)> = None;
    for action in all_actions(instance, instance.action_size(), cap)? {
        let v = reward.reward(instance, &action, theta)?;
        match &best {
            Some((_, b)) if !(v > *b) => {}
            _ => best = Some((action, v)),
        }
    }
    // all_actions is non-empty because 1 <= K <= n
    Ok(best.expect("at least one action"))
}

/// All ordered length-`k` actions the greedy algorithm could return under
/// some tie-breaking rule, treating values within `tolerance` of the step
/// maximum as tied.
pub fn enumerate_sigma_k(
    instance: &Instance,
    reward: &RewardFunction,
    theta: &MeanVector,
    k: usize,
    tolerance: f64,
    cap: u128,
) -> Result<SolutionSet> {
    check_k(instance, k)?;
    check_theta(instance, theta)?;
    if !(tolerance >= 0.0) {
        return Err(CmabError::InvalidArgument(format!(
            "tolerance must be non-negative, got {tolerance}"
        )));
    }

    let mut frontier = vec![(Action::empty(), Vec::<usize>::new())];
    for _ in 0..k {
        let mut next = Vec::new();
        for (prefix, arms) in &frontier {
            let values = extension_values(instance, reward, prefix, arms, theta.values());
            let max = values
                .iter()
                .map(|(_, v)| *v)
                .fold(f64::NEG_INFINITY, f64::max);
            for (id, v) in values {
                if v >= max - tolerance {
                    let mut arms = arms.clone();
                    arms.extend(instance.unit(id)?.arms.iter().copied());
                    next.push((prefix.with(id)?, arms));
                    if next.len() as u128 > cap {
                        return Err(CmabError::Capacity {
                            what: "greedy solution enumeration",
                            needed: next.len() as u128,
                            cap,
                        });
                    }
                }
            }
        }
        frontier = next;
    }
    let mut actions: Vec<Action> = frontier.into_iter().map(|(a, _)| a).collect();
    actions.sort();
    Ok(SolutionSet { actions })
}

/// The member of `sigma` with the smallest reward; ties go to the
/// lexicographically smallest ordered action.
pub fn min_reward_greedy_solution(
    sigma: &SolutionSet,
    instance: &Instance,
    reward: &RewardFunction,
    theta: &MeanVector,
) -> Result<Action> {
    let mut sorted: Vec<&Action> = sigma.actions.iter().collect();
    sorted.sort();
    let mut best: Option<(&Action, f64)> = None;
    for action in sorted {
        let v = reward.reward(instance, action, theta)?;
        match best {
            Some((_, b)) if !(v < b) => {}
            _ => best = Some((action, v)),
        }
    }
    best.map(|(a, _)| a.clone())
        .ok_or_else(|| CmabError::InvalidArgument("empty solution set".into()))
}
