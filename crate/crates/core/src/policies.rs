//! Online policies: combinatorial Thompson sampling with Beta or Gaussian
//! posteriors over the greedy oracle, plus a CUCB baseline.
//!
//! Every policy keeps one flat per-arm array. Updates touch only the arms in
//! the feedback. RNG draws happen in a fixed order so that a seeded run is
//! reproducible: posterior sampling draws one value per arm in arm order, and
//! the Beta update draws one uniform per observed arm in feedback order, even
//! when the observation is exactly 0 or 1.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CmabError, Result};
use crate::model::{draw_outcomes, observe, Action, Feedback, Instance, MeanVector, UnitId};
use crate::oracle::greedy;
use crate::rewards::RewardFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    CtsBeta,
    CtsGaussian,
    Cucb,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::CtsBeta => "cts-beta",
            PolicyKind::CtsGaussian => "cts-gaussian",
            PolicyKind::Cucb => "cucb",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = CmabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cts-beta" => Ok(PolicyKind::CtsBeta),
            "cts-gaussian" => Ok(PolicyKind::CtsGaussian),
            "cucb" => Ok(PolicyKind::Cucb),
            other => Err(CmabError::InvalidArgument(format!(
                "unknown policy '{other}' (expected cts-beta, cts-gaussian or cucb)"
            ))),
        }
    }
}

/// Beta posterior counts, starting from `a_i = b_i = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaState {
    pub a: Vec<u64>,
    pub b: Vec<u64>,
}

impl BetaState {
    pub fn new(arm_count: usize) -> Self {
        BetaState {
            a: vec![1; arm_count],
            b: vec![1; arm_count],
        }
    }

    pub fn posterior_mean(&self, arm: usize) -> f64 {
        self.a[arm] as f64 / (self.a[arm] + self.b[arm]) as f64
    }

    /// Total pseudo-observations, `sum_i (a_i + b_i - 2)`.
    pub fn update_count(&self) -> u64 {
        self.a.iter().zip(&self.b).map(|(a, b)| a + b - 2).sum()
    }

    /// One independent `Beta(a_i, b_i)` draw per arm.
    pub fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> MeanVector {
        let values = self
            .a
            .iter()
            .zip(&self.b)
            .map(|(&a, &b)| {
                Beta::new(a as f64, b as f64)
                    .expect("beta parameters are >= 1")
                    .sample(rng)
            })
            .collect();
        MeanVector(values)
    }

    /// Rounds each observation `X` to `Y ~ Bernoulli(X)` and adds it to the
    /// counts. Rejects the whole feedback if any `X` is outside `[0, 1]`.
    pub fn update<R: Rng + ?Sized>(&mut self, feedback: &Feedback, rng: &mut R) -> Result<()> {
        if let Some(&(arm, value)) = feedback
            .observations
            .iter()
            .find(|(_, x)| !(0.0..=1.0).contains(x))
        {
            return Err(CmabError::Domain { arm, value });
        }
        for &(arm, x) in &feedback.observations {
            let u: f64 = rng.random();
            if u < x {
                self.a[arm] += 1;
            } else {
                self.b[arm] += 1;
            }
        }
        Ok(())
    }
}

/// Gaussian posterior `N(mu_hat_i, 1 / N_i)` per arm.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub counts: Vec<u64>,
    pub emp_means: Vec<f64>,
}

impl GaussianState {
    pub fn new(arm_count: usize) -> Self {
        GaussianState {
            counts: vec![0; arm_count],
            emp_means: vec![0.0; arm_count],
        }
    }

    pub fn is_initialized(&self) -> bool {
        self.counts.iter().all(|&n| n > 0)
    }

    pub fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<MeanVector> {
        if let Some(arm) = self.counts.iter().position(|&n| n == 0) {
            return Err(CmabError::Uninitialized { arm });
        }
        let values = self
            .counts
            .iter()
            .zip(&self.emp_means)
            .map(|(&n, &mu)| {
                let z: f64 = StandardNormal.sample(rng);
                mu + z * Self::std_dev(n)
            })
            .collect();
        Ok(MeanVector(values))
    }

    /// Posterior standard deviation `sqrt(1 / N)`.
    pub fn std_dev(count: u64) -> f64 {
        (1.0 / count as f64).sqrt()
    }

    /// `mu_hat <- (mu_hat * N + X) / (N + 1)`, `N <- N + 1`, computed as
    /// `mu_hat + (X - mu_hat) / (N + 1)` so a constant stream stays exact.
    pub fn update(&mut self, feedback: &Feedback) {
        for &(arm, x) in &feedback.observations {
            running_mean(&mut self.emp_means[arm], &mut self.counts[arm], x);
        }
    }
}

fn running_mean(mean: &mut f64, count: &mut u64, x: f64) {
    let n = *count as f64;
    *mean += (x - *mean) / (n + 1.0);
    *count += 1;
}

/// The actions played by the Gaussian initialization phase: units in id
/// order; each not-yet-covered unit is played together with the `K - 1`
/// lowest-id other units.
pub fn covering_schedule(instance: &Instance) -> Result<Vec<Action>> {
    let k = instance.action_size();
    if k > instance.unit_count() {
        return Err(CmabError::Infeasible {
            k,
            units: instance.unit_count(),
        });
    }
    let mut covered = vec![false; instance.unit_count()];
    let mut schedule = Vec::new();
    for unit in instance.units() {
        if covered[unit.id.0] {
            continue;
        }
        let mut ids = vec![unit.id];
        ids.extend(
            (0..instance.unit_count())
                .map(UnitId)
                .filter(|&u| u != unit.id)
                .take(k - 1),
        );
        for u in &ids {
            covered[u.0] = true;
        }
        schedule.push(Action::new(ids)?);
    }
    Ok(schedule)
}

/// Plays the covering schedule, drawing fresh outcomes for each round, and
/// returns the resulting state with the played actions and their feedback.
pub fn initialize_gaussian<R: Rng + ?Sized>(
    instance: &Instance,
    rng: &mut R,
) -> Result<(GaussianState, Vec<Action>, Vec<Feedback>)> {
    let schedule = covering_schedule(instance)?;
    let mut state = GaussianState::new(instance.arm_count());
    let mut feedback = Vec::with_capacity(schedule.len());
    for action in &schedule {
        let outcomes = draw_outcomes(instance, rng);
        let fb = observe(action, &outcomes, instance)?;
        state.update(&fb);
        feedback.push(fb);
    }
    Ok((state, schedule, feedback))
}

/// Empirical means with the index `mu_hat + sqrt(3 ln t / (2 N))`,
/// truncated to `[0, 1]`; unobserved arms get index 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CucbState {
    pub counts: Vec<u64>,
    pub emp_means: Vec<f64>,
}

impl CucbState {
    pub fn new(arm_count: usize) -> Self {
        CucbState {
            counts: vec![0; arm_count],
            emp_means: vec![0.0; arm_count],
        }
    }

    pub fn indices(&self, round: u64) -> MeanVector {
        let log_t = (round.max(1) as f64).ln();
        let values = self
            .counts
            .iter()
            .zip(&self.emp_means)
            .map(|(&n, &mu)| {
                if n == 0 {
                    1.0
                } else {
                    (mu + (3.0 * log_t / (2.0 * n as f64)).sqrt()).clamp(0.0, 1.0)
                }
            })
            .collect();
        MeanVector(values)
    }

    pub fn update(&mut self, feedback: &Feedback) {
        for &(arm, x) in &feedback.observations {
            running_mean(&mut self.emp_means[arm], &mut self.counts[arm], x);
        }
    }
}

/// Per-replication learner state.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyState {
    Beta(BetaState),
    Gaussian(GaussianState),
    Cucb(CucbState),
}

impl PolicyState {
    /// Fresh state for `kind`. Beta posteriors need outcomes in `[0, 1]`.
    pub fn new(kind: PolicyKind, instance: &Instance) -> Result<Self> {
        let m = instance.arm_count();
        match kind {
            PolicyKind::CtsBeta => {
                if !instance.outcome_model().is_unit_interval() {
                    return Err(CmabError::Config(format!(
                        "cts-beta needs outcomes in [0, 1], instance uses {}",
                        instance.outcome_model().name()
                    )));
                }
                Ok(PolicyState::Beta(BetaState::new(m)))
            }
            PolicyKind::CtsGaussian => Ok(PolicyState::Gaussian(GaussianState::new(m))),
            PolicyKind::Cucb => Ok(PolicyState::Cucb(CucbState::new(m))),
        }
    }

    pub fn kind(&self) -> PolicyKind {
        match self {
            PolicyState::Beta(_) => PolicyKind::CtsBeta,
            PolicyState::Gaussian(_) => PolicyKind::CtsGaussian,
            PolicyState::Cucb(_) => PolicyKind::Cucb,
        }
    }

    /// Runs the policy's warm-up rounds, if any, returning what was played.
    pub fn initialize<R: Rng + ?Sized>(
        &mut self,
        instance: &Instance,
        rng: &mut R,
    ) -> Result<Vec<(Action, Feedback)>> {
        match self {
            PolicyState::Gaussian(state) => {
                let (init, actions, feedback) = initialize_gaussian(instance, rng)?;
                *state = init;
                Ok(actions.into_iter().zip(feedback).collect())
            }
            PolicyState::Beta(_) | PolicyState::Cucb(_) => Ok(Vec::new()),
        }
    }

    /// Samples (or computes) a parameter vector and hands it to the greedy
    /// oracle. `round` is the 1-based round index used by CUCB.
    pub fn select_action<R: Rng + ?Sized>(
        &self,
        instance: &Instance,
        reward: &RewardFunction,
        round: u64,
        rng: &mut R,
    ) -> Result<Action> {
        let theta = match self {
            PolicyState::Beta(s) => s.sample_theta(rng),
            PolicyState::Gaussian(s) => s.sample_theta(rng)?,
            PolicyState::Cucb(s) => s.indices(round),
        };
        Ok(greedy(instance, reward, &theta)?.action)
    }

    pub fn update<R: Rng + ?Sized>(&mut self, feedback: &Feedback, rng: &mut R) -> Result<()> {
        match self {
            PolicyState::Beta(s) => s.update(feedback, rng),
            PolicyState::Gaussian(s) => {
                s.update(feedback);
                Ok(())
            }
            PolicyState::Cucb(s) => {
                s.update(feedback);
                Ok(())
            }
        }
    }
}
