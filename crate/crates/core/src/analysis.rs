//! Gap analytics for the greedy solution under the true means, the
//! exploration price and regret-bound quantities derived from them, and the
//! four-node coverage instance used for the hardness experiments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CmabError, Result};
use crate::model::{Action, Instance, MeanVector, OutcomeModel, Unit, UnitId};
use crate::oracle::{
    all_actions, enumerate_sigma_k, greedy, min_reward_greedy_solution, DEFAULT_ENUMERATION_CAP,
    DEFAULT_TIE_TOLERANCE,
};
use crate::rewards::{CoverageGraph, RewardFunction};

/// Edge list of the hardness instance, one entry per arm:
/// `(left, right, weight at delta = 0)`. The `u3 -> v2` weight is `0.2 - delta`.
const FIGURE1_EDGES: [(&str, &str, f64); 6] = [
    ("u1", "v1", 0.49),
    ("u2", "v1", 0.2),
    ("u2", "v2", 0.3),
    ("u3", "v1", 0.3),
    ("u3", "v2", 0.2),
    ("u4", "v2", 0.48),
];

/// Upper end of the admissible delta range for the hardness instance.
pub const FIGURE1_MAX_DELTA: f64 = 0.04;

/// The hardness instance for a `delta` in `(0, 0.04]`: four left nodes,
/// two right nodes, six edges, `K = 2`, coverage reward, deterministic
/// outcomes. Arms are `u1v1, u2v1, u2v2, u3v1, u3v2, u4v2`.
pub fn make_figure1_instance(delta: f64) -> Result<Instance> {
    if !(delta > 0.0 && delta <= FIGURE1_MAX_DELTA) {
        return Err(CmabError::InvalidArgument(format!(
            "delta must be in (0, {FIGURE1_MAX_DELTA}], got {delta}"
        )));
    }
    figure1_instance_unchecked(delta)
}

/// Same graph without the delta range check (e.g. `delta = 0`, where the
/// first greedy step ties). Means must still land in `[0, 1]`.
pub fn figure1_instance_unchecked(delta: f64) -> Result<Instance> {
    let means = FIGURE1_EDGES
        .iter()
        .enumerate()
        .map(|(i, e)| if i == 4 { e.2 - delta } else { e.2 })
        .collect();
    let graph = CoverageGraph::from_edges(FIGURE1_EDGES.iter().map(|e| (e.0, e.1)).collect());
    Instance::new(
        6,
        vec![
            ("u1".into(), vec![0]),
            ("u2".into(), vec![1, 2]),
            ("u3".into(), vec![3, 4]),
            ("u4".into(), vec![5]),
        ],
        2,
        MeanVector(means),
        OutcomeModel::Deterministic,
        RewardFunction::pmc(graph),
    )
}

/// Which posterior the bound refers to; sets the leading constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundVariant {
    Beta,
    Gaussian,
}

impl BoundVariant {
    fn leading_constant(self) -> f64 {
        match self {
            BoundVariant::Beta => 6.0,
            BoundVariant::Gaussian => 8.0,
        }
    }

    fn arm_count_factor(self) -> f64 {
        match self {
            BoundVariant::Beta => 4.0,
            BoundVariant::Gaussian => 1.0,
        }
    }
}

/// Gap quantities relative to the unique greedy solution under the true means.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub greedy_solution: Action,
    pub greedy_value: f64,
    /// `|∪S_g|`.
    pub union_size: usize,
    /// `(unit, step k)` -> marginal gap, for `s` outside the first `k - 1`
    /// greedy picks. Steps are 1-based.
    pub marginal_gaps: BTreeMap<(UnitId, usize), f64>,
    /// Every size-K action in lexicographic order with its clipped gap.
    pub action_gaps: Vec<(Action, f64)>,
    pub unit_gap_min: BTreeMap<UnitId, f64>,
    pub unit_gap_max: BTreeMap<UnitId, f64>,
    pub delta_max: f64,
}

impl GapReport {
    /// Marginal gap `Δ_{s,k}`, if defined.
    pub fn marginal_gap(&self, unit: UnitId, step: usize) -> Option<f64> {
        self.marginal_gaps.get(&(unit, step)).copied()
    }

    /// Steps `k` at which `unit` is not among the first `k` greedy picks.
    pub fn relevant_steps(&self, unit: UnitId) -> Vec<usize> {
        let units = self.greedy_solution.units();
        (1..=units.len())
            .filter(|&k| !units[..k].contains(&unit))
            .collect()
    }

    pub fn first_pick(&self) -> UnitId {
        self.greedy_solution.units()[0]
    }

    pub fn action_gap(&self, action: &Action) -> Option<f64> {
        let key = action.sorted();
        self.action_gaps
            .iter()
            .find(|(a, _)| *a == key)
            .map(|(_, g)| *g)
    }

    /// Largest admissible `eps` scaled by 0.9:
    /// `0.9 * min Δ_{s,k} / (2 B |∪S_g|)` over `s != s_{g,1}` and relevant `k`.
    pub fn default_eps(&self, lipschitz_b: f64) -> f64 {
        let first = self.first_pick();
        let min_gap = self
            .marginal_gaps
            .iter()
            .filter(|((s, k), _)| *s != first && self.relevant_steps(*s).contains(k))
            .map(|(_, g)| *g)
            .fold(f64::INFINITY, f64::min);
        if min_gap.is_finite() {
            0.9 * min_gap / (2.0 * lipschitz_b * self.union_size as f64)
        } else {
            0.0
        }
    }

    /// Human-readable report.
    pub fn to_text(&self, instance: &Instance) -> String {
        let name = |u: &UnitId| instance.units()[u.0].name.clone();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "greedy solution: {}  value: {}",
            instance.action_label(&self.greedy_solution),
            self.greedy_value
        );
        let _ = writeln!(out, "|∪S_g|: {}", self.union_size);
        let _ = writeln!(out, "delta_max: {}", self.delta_max);
        let _ = writeln!(out, "marginal gaps:");
        for ((u, k), g) in &self.marginal_gaps {
            let _ = writeln!(out, "  {} step {}: {}", name(u), k, g);
        }
        let _ = writeln!(out, "per-unit action gaps (min, max):");
        for unit in instance.units() {
            let _ = writeln!(
                out,
                "  {}: {}, {}",
                unit.name, self.unit_gap_min[&unit.id], self.unit_gap_max[&unit.id]
            );
        }
        let _ = writeln!(out, "action gaps:");
        for (a, g) in &self.action_gaps {
            let _ = writeln!(out, "  {}: {}", instance.action_label(a), g);
        }
        out
    }

    /// CSV with header `unit,k,gap`.
    pub fn marginal_gaps_csv(&self, instance: &Instance) -> String {
        let mut out = String::from("unit,k,gap\n");
        for ((u, k), g) in &self.marginal_gaps {
            let _ = writeln!(out, "{},{},{}", instance.units()[u.0].name, k, g);
        }
        out
    }

    /// CSV with header `action,gap`; units joined by `+`.
    pub fn action_gaps_csv(&self, instance: &Instance) -> String {
        let mut out = String::from("action,gap\n");
        for (a, g) in &self.action_gaps {
            let names: Vec<&str> = a
                .units()
                .iter()
                .map(|u| instance.units()[u.0].name.as_str())
                .collect();
            let _ = writeln!(out, "{},{}", names.join("+"), g);
        }
        out
    }

    /// Writes `gaps.txt`, `marginal_gaps.csv` and `action_gaps.csv` into `dir`.
    pub fn write_to(&self, instance: &Instance, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| CmabError::io(dir, e))?;
        for (file, body) in [
            ("gaps.txt", self.to_text(instance)),
            ("marginal_gaps.csv", self.marginal_gaps_csv(instance)),
            ("action_gaps.csv", self.action_gaps_csv(instance)),
        ] {
            let path = dir.join(file);
            std::fs::write(&path, body).map_err(|e| CmabError::io(&path, e))?;
        }
        Ok(())
    }
}

/// Computes every gap quantity under the true means. Fails with
/// [`CmabError::MultipleSolutions`] when the greedy trajectory is not unique
/// (exact ties).
pub fn compute_gaps(instance: &Instance, reward: &RewardFunction) -> Result<GapReport> {
    let mu = instance.means();
    let k_max = instance.action_size();
    let sigma = enumerate_sigma_k(instance, reward, mu, k_max, 0.0, DEFAULT_ENUMERATION_CAP)?;
    if sigma.len() != 1 {
        return Err(CmabError::MultipleSolutions {
            solutions: sigma.actions.into_iter().map(Vec::from).collect(),
        });
    }
    let g = greedy(instance, reward, mu)?;
    let greedy_value = g.value();
    let solution = g.action;

    let mut marginal_gaps = BTreeMap::new();
    for k in 1..=k_max {
        let before = solution.prefix(k - 1);
        let at_k = reward.reward(instance, &solution.prefix(k), mu)?;
        for unit in instance.units() {
            if before.contains(unit.id) {
                continue;
            }
            let alt = reward.reward(instance, &before.with(unit.id)?, mu)?;
            marginal_gaps.insert((unit.id, k), at_k - alt);
        }
    }

    let mut action_gaps = Vec::new();
    let mut unit_gap_min = BTreeMap::new();
    let mut unit_gap_max = BTreeMap::new();
    let mut delta_max = 0.0_f64;
    for action in all_actions(instance, k_max, DEFAULT_ENUMERATION_CAP)? {
        let gap = (greedy_value - reward.reward(instance, &action, mu)?).max(0.0);
        for u in action.units() {
            let lo = unit_gap_min.entry(*u).or_insert(f64::INFINITY);
            *lo = f64::min(*lo, gap);
            let hi = unit_gap_max.entry(*u).or_insert(f64::NEG_INFINITY);
            *hi = f64::max(*hi, gap);
        }
        delta_max = delta_max.max(gap);
        action_gaps.push((action, gap));
    }

    Ok(GapReport {
        union_size: instance.union_size(&solution),
        greedy_solution: solution,
        greedy_value,
        marginal_gaps,
        action_gaps,
        unit_gap_min,
        unit_gap_max,
        delta_max,
    })
}

fn shrunk_gap(report: &GapReport, unit: UnitId, k: usize, b: f64, eps: f64) -> Result<f64> {
    let gap = report
        .marginal_gap(unit, k)
        .expect("relevant steps always have a gap");
    let threshold = 2.0 * b * report.union_size as f64 * eps;
    if !(gap > threshold) {
        return Err(CmabError::EpsTooLarge {
            unit,
            step: k,
            gap,
            eps,
            threshold,
        });
    }
    Ok(gap - threshold)
}

/// Exploration price
/// `L(s) = max_{k: s not in S_{g,k}} c B^2 |s|^2 ln T / (Δ_{s,k} - 2B|∪S_g| eps)^2`
/// with `c = 6` for Beta posteriors and `8` for Gaussian ones. Zero for a
/// unit with no relevant step.
pub fn exploration_price(
    report: &GapReport,
    unit: &Unit,
    lipschitz_b: f64,
    eps: f64,
    horizon: u64,
    variant: BoundVariant,
) -> Result<f64> {
    if horizon == 0 {
        return Err(CmabError::InvalidArgument("horizon must be >= 1".into()));
    }
    let numer = variant.leading_constant()
        * lipschitz_b.powi(2)
        * (unit.size() as f64).powi(2)
        * (horizon as f64).ln();
    let mut price = 0.0_f64;
    for k in report.relevant_steps(unit.id) {
        let d = shrunk_gap(report, unit.id, k, lipschitz_b, eps)?;
        price = price.max(numer / (d * d));
    }
    Ok(price)
}

/// Evaluated regret bound, split into the `log T` term and the additive
/// terms involving the unspecified universal constants `C`, `C'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpperBound {
    pub leading: f64,
    pub constant_terms: f64,
    pub eps: f64,
}

impl UpperBound {
    pub fn total(&self) -> f64 {
        self.leading + self.constant_terms
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub c: f64,
    pub c_prime: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        BoundConstants {
            c: 1.0,
            c_prime: 1.0,
        }
    }
}

/// Regret upper bound: `sum_{s != s_{g,1}} Δ_s^max L(s)` plus
/// `sum_k C/eps^2 (C'/eps^4)^{|s_{g,k}|} Δ_max + (|∪S_g|(2 + 8/eps^2) + c_m m) Δ_max`
/// with `c_m = 4` (Beta) or `1` (Gaussian).
pub fn upper_bound_value(
    report: &GapReport,
    instance: &Instance,
    lipschitz_b: f64,
    eps: f64,
    horizon: u64,
    variant: BoundVariant,
    constants: BoundConstants,
) -> Result<UpperBound> {
    let first = report.first_pick();
    let mut leading = 0.0;
    for unit in instance.units() {
        if unit.id == first {
            continue;
        }
        let price = exploration_price(report, unit, lipschitz_b, eps, horizon, variant)?;
        leading += report.unit_gap_max[&unit.id] * price;
    }

    let dmax = report.delta_max;
    let mut constant_terms = 0.0;
    for u in report.greedy_solution.units() {
        let size = instance.unit(*u)?.size() as i32;
        constant_terms +=
            constants.c / eps.powi(2) * (constants.c_prime / eps.powi(4)).powi(size) * dmax;
    }
    constant_terms += (report.union_size as f64 * (2.0 + 8.0 / eps.powi(2))
        + variant.arm_count_factor() * instance.arm_count() as f64)
        * dmax;

    Ok(UpperBound {
        leading,
        constant_terms,
        eps,
    })
}

/// Per-round greedy regret `max(r(S_g, mu) - r(action, mu), 0)`.
pub fn greedy_regret(
    instance: &Instance,
    reward: &RewardFunction,
    greedy_value: f64,
    action: &Action,
) -> Result<f64> {
    Ok((greedy_value - reward.reward(instance, action, instance.means())?).max(0.0))
}

/// The reference solution regret is measured against.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretBaseline {
    pub action: Action,
    pub value: f64,
    /// Number of greedy-reachable solutions; above 1 the minimum-reward one
    /// is used.
    pub reachable: usize,
}

/// Greedy solution under the true means, or the minimum-reward member of
/// the reachable set when ties make it ambiguous.
pub fn regret_baseline(instance: &Instance, reward: &RewardFunction) -> Result<RegretBaseline> {
    let mu = instance.means();
    let sigma = enumerate_sigma_k(
        instance,
        reward,
        mu,
        instance.action_size(),
        DEFAULT_TIE_TOLERANCE,
        DEFAULT_ENUMERATION_CAP,
    )?;
    let action = if sigma.len() == 1 {
        greedy(instance, reward, mu)?.action
    } else {
        min_reward_greedy_solution(&sigma, instance, reward, mu)?
    };
    let value = reward.reward(instance, &action, mu)?;
    Ok(RegretBaseline {
        action,
        value,
        reachable: sigma.len(),
    })
}
