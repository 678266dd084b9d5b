//! Replicated bandit simulations, regret traces and CSV reports.
//!
//! Replication `j` of an experiment draws everything from one
//! `ChaCha8Rng` seeded with the experiment seed and switched to stream `j`.
//! Within a round the draw order is: environment outcomes, posterior
//! sample, Bernoulli rounding of the feedback (Beta posteriors only).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    compute_gaps, make_figure1_instance, regret_baseline, upper_bound_value, BoundConstants,
    BoundVariant, RegretBaseline,
};
use crate::error::{CmabError, Result};
use crate::instance_file::load_instance;
use crate::model::{draw_outcomes, observe, Action, Instance, OutcomeModel, UnitId};
use crate::policies::{PolicyKind, PolicyState};
use crate::rewards::RewardFunction;

/// Number of log-spaced checkpoints recorded per trace.
pub const CHECKPOINT_COUNT: usize = 50;

/// Where the instance comes from. Exactly one of `path` and
/// `figure1_delta` must be set; `outcome_model` overrides the source's model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub path: Option<PathBuf>,
    pub figure1_delta: Option<f64>,
    pub outcome_model: Option<OutcomeModel>,
}

impl InstanceSpec {
    pub fn figure1(delta: f64) -> Self {
        InstanceSpec {
            figure1_delta: Some(delta),
            ..InstanceSpec::default()
        }
    }

    pub fn file(path: impl Into<PathBuf>) -> Self {
        InstanceSpec {
            path: Some(path.into()),
            ..InstanceSpec::default()
        }
    }

    pub fn with_outcome_model(mut self, model: OutcomeModel) -> Self {
        self.outcome_model = Some(model);
        self
    }

    pub fn load(&self) -> Result<Instance> {
        let inst = match (&self.path, self.figure1_delta) {
            (Some(path), None) => load_instance(path)?,
            (None, Some(delta)) => make_figure1_instance(delta)?,
            _ => {
                return Err(CmabError::Config(
                    "set exactly one of instance path or figure1 delta".into(),
                ))
            }
        };
        Ok(match self.outcome_model {
            Some(model) => inst.with_outcome_model(model),
            None => inst,
        })
    }

    /// Directory label: the delta for the built-in instance, else the file stem.
    pub fn label(&self) -> String {
        match (&self.path, self.figure1_delta) {
            (_, Some(delta)) => format!("{delta}"),
            (Some(path), None) => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "instance".into()),
            (None, None) => "instance".into(),
        }
    }
}

fn default_name() -> String {
    "experiment".into()
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub instance: InstanceSpec,
    pub policy: PolicyKind,
    pub horizon: u64,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Count the Gaussian warm-up rounds as ordinary rounds.
    #[serde(default)]
    pub include_init_rounds: bool,
    #[serde(default)]
    pub clamp_theta: bool,
    /// Record every round instead of the checkpoints only.
    #[serde(default)]
    pub full_trace: bool,
    /// Round indices to checkpoint in addition to the log-spaced grid.
    #[serde(default)]
    pub extra_checkpoints: Vec<u64>,
    #[serde(default = "default_true")]
    pub parallel: bool,
}

impl ExperimentConfig {
    pub fn new(
        instance: InstanceSpec,
        policy: PolicyKind,
        horizon: u64,
        replications: usize,
    ) -> Self {
        ExperimentConfig {
            name: default_name(),
            instance,
            policy,
            horizon,
            replications,
            seed: 0,
            out_dir: None,
            include_init_rounds: false,
            clamp_theta: false,
            full_trace: false,
            extra_checkpoints: Vec::new(),
            parallel: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(CmabError::Config("horizon must be >= 1".into()));
        }
        if self.replications < 1 {
            return Err(CmabError::Config("replications must be >= 1".into()));
        }
        Ok(())
    }

    /// `<out>/<experiment>/<policy>/<delta>`.
    pub fn output_dir(&self) -> Option<PathBuf> {
        self.out_dir.as_ref().map(|out| {
            out.join(&self.name)
                .join(self.policy.name())
                .join(self.instance.label())
        })
    }

    /// RNG for replication `index`.
    pub fn rng_for(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }
}

/// Instance, reward function and regret baseline shared by all replications.
#[derive(Debug, Clone)]
pub struct PreparedExperiment {
    pub instance: Instance,
    pub reward: RewardFunction,
    pub baseline: RegretBaseline,
}

impl PreparedExperiment {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let instance = config.instance.load()?;
        let reward = instance
            .reward()
            .clone()
            .with_clamp_theta(config.clamp_theta);
        // the baseline is always evaluated on the true means with the plain formula
        let baseline = regret_baseline(&instance, instance.reward())?;
        PolicyState::new(config.policy, &instance)?;
        Ok(PreparedExperiment {
            instance,
            reward,
            baseline,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: u64,
    pub action: Action,
    pub instant_regret: f64,
    pub cumulative_regret: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub replication: usize,
    /// Warm-up rounds the policy played before round 1.
    pub init_rounds: usize,
    pub init_included: bool,
    /// Rounds covered by the trace: the horizon, plus the warm-up rounds when
    /// they are included.
    pub rounds: u64,
    /// Checkpoint rows, or every row with `full_trace`.
    pub rows: Vec<RoundRecord>,
    pub checkpoints: Vec<(u64, f64)>,
    /// Per-unit selection counts at each checkpoint.
    pub unit_counts_at: Vec<Vec<u64>>,
    /// `N_{T+1,s}` per unit.
    pub unit_counts: Vec<u64>,
    /// `N_{T+1,i}` per arm.
    pub arm_counts: Vec<u64>,
}

impl RegretTrace {
    pub fn final_regret(&self) -> f64 {
        self.checkpoints.last().map_or(0.0, |c| c.1)
    }

    /// Selections of `unit` at checkpoint `t`.
    pub fn unit_count_at(&self, t: u64, unit: UnitId) -> Option<u64> {
        self.checkpoints
            .iter()
            .position(|(ct, _)| *ct == t)
            .map(|idx| self.unit_counts_at[idx][unit.0])
    }

    pub fn regret_at(&self, t: u64) -> Option<f64> {
        self.checkpoints
            .iter()
            .find(|(ct, _)| *ct == t)
            .map(|(_, r)| *r)
    }

    /// `t,action,instant_regret,cumulative_regret`; units joined by `+` in
    /// selection order.
    pub fn to_csv(&self, instance: &Instance) -> String {
        let mut out = String::from("t,action,instant_regret,cumulative_regret\n");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                row.t,
                action_field(instance, &row.action),
                row.instant_regret,
                row.cumulative_regret
            );
        }
        out
    }

    /// `kind,id,count` for every unit then every arm.
    pub fn counts_csv(&self, instance: &Instance) -> String {
        let mut out = String::from("kind,id,count\n");
        for (unit, n) in instance.units().iter().zip(&self.unit_counts) {
            let _ = writeln!(out, "unit,{},{}", unit.name, n);
        }
        for (arm, n) in self.arm_counts.iter().enumerate() {
            let _ = writeln!(out, "arm,{},{}", arm, n);
        }
        out
    }
}

fn action_field(instance: &Instance, action: &Action) -> String {
    action
        .units()
        .iter()
        .map(|u| instance.units()[u.0].name.as_str())
        .collect::<Vec<_>>()
        .join("+")
}

/// `CHECKPOINT_COUNT` log-spaced round indices in `[1, rounds]`, plus every
/// power of ten up to `rounds`; sorted, deduplicated, always ending at `rounds`.
pub fn checkpoints(rounds: u64) -> Vec<u64> {
    let mut ts: Vec<u64> = if rounds <= 1 {
        vec![1]
    } else {
        let top = (rounds as f64).ln();
        (0..CHECKPOINT_COUNT)
            .map(|j| {
                let t = (top * j as f64 / (CHECKPOINT_COUNT - 1) as f64)
                    .exp()
                    .round() as u64;
                t.clamp(1, rounds)
            })
            .collect()
    };
    let mut p = 10u64;
    while p <= rounds {
        ts.push(p);
        p = p.saturating_mul(10);
    }
    ts.push(rounds);
    ts.sort_unstable();
    ts.dedup();
    ts
}

/// One replication against a prepared experiment.
pub fn simulate(
    prepared: &PreparedExperiment,
    config: &ExperimentConfig,
    replication: usize,
) -> Result<RegretTrace> {
    let inst = &prepared.instance;
    let reward = &prepared.reward;
    let mu = inst.means();
    let base = prepared.baseline.value;
    let mut rng = config.rng_for(replication);
    let mut state = PolicyState::new(config.policy, inst)?;

    let warmup = state.initialize(inst, &mut rng)?;
    let init_rounds = warmup.len();
    let include = config.include_init_rounds;
    let rounds = config.horizon + if include { init_rounds as u64 } else { 0 };
    let mut marks = checkpoints(rounds);
    marks.extend(
        config
            .extra_checkpoints
            .iter()
            .filter(|&&t| t >= 1 && t <= rounds),
    );
    marks.sort_unstable();
    marks.dedup();

    let mut unit_counts = vec![0u64; inst.unit_count()];
    let mut arm_counts = vec![0u64; inst.arm_count()];
    let mut rows = Vec::new();
    let mut cps = Vec::with_capacity(marks.len());
    let mut counts_at = Vec::with_capacity(marks.len());
    let mut next_mark = 0;
    let mut cumulative = 0.0;
    let mut t = 0u64;

    let mut record = |t: u64, action: &Action, cumulative: &mut f64| -> Result<()> {
        let instant = (base - inst.reward().reward(inst, action, mu)?).max(0.0);
        *cumulative += instant;
        for u in action.units() {
            unit_counts[u.0] += 1;
            for &arm in &inst.units()[u.0].arms {
                arm_counts[arm] += 1;
            }
        }
        let at_mark = next_mark < marks.len() && marks[next_mark] == t;
        if at_mark {
            cps.push((t, *cumulative));
            counts_at.push(unit_counts.clone());
            next_mark += 1;
        }
        if at_mark || config.full_trace {
            rows.push(RoundRecord {
                t,
                action: action.clone(),
                instant_regret: instant,
                cumulative_regret: *cumulative,
            });
        }
        Ok(())
    };

    if include {
        for (action, _) in &warmup {
            t += 1;
            record(t, action, &mut cumulative)?;
        }
    }
    for round in 1..=config.horizon {
        t += 1;
        let outcomes = draw_outcomes(inst, &mut rng);
        let action = state.select_action(inst, reward, round, &mut rng)?;
        let feedback = observe(&action, &outcomes, inst)?;
        state.update(&feedback, &mut rng)?;
        record(t, &action, &mut cumulative)?;
    }

    Ok(RegretTrace {
        replication,
        init_rounds,
        init_included: include,
        rounds,
        rows,
        checkpoints: cps,
        unit_counts_at: counts_at,
        unit_counts,
        arm_counts,
    })
}

/// Runs replication `replication` of `config` from scratch.
pub fn run_replication(config: &ExperimentConfig, replication: usize) -> Result<RegretTrace> {
    let prepared = PreparedExperiment::new(config)?;
    simulate(&prepared, config, replication)
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let std = if n > 1.0 {
        (xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub instance: Instance,
    pub baseline: RegretBaseline,
    pub traces: Vec<RegretTrace>,
    /// `(t, mean, sample std)` of cumulative regret across replications.
    pub aggregate: Vec<(u64, f64, f64)>,
    /// Mean and sample std of `N_{T+1,s}` per unit.
    pub unit_count_stats: Vec<(f64, f64)>,
    pub summary: String,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentReport {
    pub fn final_regret(&self) -> (f64, f64) {
        self.aggregate.last().map_or((0.0, 0.0), |a| (a.1, a.2))
    }

    pub fn mean_regret_at(&self, t: u64) -> Option<f64> {
        self.aggregate.iter().find(|a| a.0 == t).map(|a| a.1)
    }

    pub fn mean_unit_count(&self, name: &str) -> Option<f64> {
        self.instance
            .unit_by_name(name)
            .map(|u| self.unit_count_stats[u.id.0].0)
    }

    pub fn aggregate_csv(&self) -> String {
        let mut out =
            String::from("t,mean_cumulative_regret,std_cumulative_regret,mean_regret_per_round\n");
        for (t, mean, std) in &self.aggregate {
            let _ = writeln!(out, "{},{},{},{}", t, mean, std, mean / *t as f64);
        }
        out
    }

    pub fn units_csv(&self) -> String {
        let mut out = String::from("unit,mean_count,std_count\n");
        for (unit, (mean, std)) in self.instance.units().iter().zip(&self.unit_count_stats) {
            let _ = writeln!(out, "{},{},{}", unit.name, mean, std);
        }
        out
    }
}

fn build_summary(
    config: &ExperimentConfig,
    prepared: &PreparedExperiment,
    aggregate: &[(u64, f64, f64)],
) -> String {
    let inst = &prepared.instance;
    let mut out = String::new();
    let _ = writeln!(out, "experiment: {}", config.name);
    let _ = writeln!(out, "policy: {}", config.policy);
    let _ = writeln!(out, "instance: {}", config.instance.label());
    let _ = writeln!(out, "outcome model: {}", inst.outcome_model().name());
    let _ = writeln!(out, "horizon: {}", config.horizon);
    let _ = writeln!(out, "replications: {}", config.replications);
    let _ = writeln!(out, "seed: {}", config.seed);
    let _ = writeln!(out, "include init rounds: {}", config.include_init_rounds);
    let _ = writeln!(out, "clamp theta: {}", config.clamp_theta);
    let _ = writeln!(
        out,
        "regret baseline: {} value {}",
        inst.action_label(&prepared.baseline.action),
        prepared.baseline.value
    );
    if prepared.baseline.reachable > 1 {
        let _ = writeln!(
            out,
            "note: {} greedy-reachable solutions; baseline is the minimum-reward one",
            prepared.baseline.reachable
        );
    }
    if let Some((t, mean, std)) = aggregate.last() {
        let _ = writeln!(
            out,
            "final mean cumulative regret at t={t}: {mean} (std {std})"
        );
    }
    match compute_gaps(inst, inst.reward()) {
        Ok(report) => {
            let variant = match config.policy {
                PolicyKind::CtsGaussian => BoundVariant::Gaussian,
                _ => BoundVariant::Beta,
            };
            let b = inst.reward().lipschitz_b();
            let eps = report.default_eps(b);
            match upper_bound_value(
                &report,
                inst,
                b,
                eps,
                config.horizon,
                variant,
                BoundConstants::default(),
            ) {
                Ok(ub) => {
                    let _ = writeln!(
                        out,
                        "upper bound leading term (eps={}): {}",
                        ub.eps, ub.leading
                    );
                    let _ = writeln!(
                        out,
                        "upper bound constant terms (C=C'=1): {}",
                        ub.constant_terms
                    );
                }
                Err(e) => {
                    let _ = writeln!(out, "upper bound not evaluated: {e}");
                }
            }
            out.push('\n');
            out.push_str(&report.to_text(inst));
        }
        Err(e) => {
            let _ = writeln!(out, "gap report unavailable: {e}");
        }
    }
    out
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| CmabError::io(path, e))
}

/// Runs every replication, aggregates, and writes CSVs when `out_dir` is set.
/// Output is identical whether replications run in parallel or serially.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let prepared = PreparedExperiment::new(config)?;
    let run = |j: usize| simulate(&prepared, config, j);
    let traces: Vec<RegretTrace> = if config.parallel {
        (0..config.replications)
            .into_par_iter()
            .map(run)
            .collect::<Result<_>>()?
    } else {
        (0..config.replications).map(run).collect::<Result<_>>()?
    };

    let marks: Vec<u64> = traces[0].checkpoints.iter().map(|c| c.0).collect();
    let aggregate = marks
        .iter()
        .enumerate()
        .map(|(idx, &t)| {
            let (mean, std) = mean_std(traces.iter().map(move |tr| tr.checkpoints[idx].1));
            (t, mean, std)
        })
        .collect::<Vec<_>>();
    let unit_count_stats = (0..prepared.instance.unit_count())
        .map(|u| mean_std(traces.iter().map(move |tr| tr.unit_counts[u] as f64)))
        .collect();

    let summary = build_summary(config, &prepared, &aggregate);
    let report = ExperimentReport {
        config: config.clone(),
        instance: prepared.instance.clone(),
        baseline: prepared.baseline.clone(),
        traces,
        aggregate,
        unit_count_stats,
        summary,
        output_dir: config.output_dir(),
    };

    if let Some(dir) = &report.output_dir {
        std::fs::create_dir_all(dir).map_err(|e| CmabError::io(dir, e))?;
        for trace in &report.traces {
            let j = trace.replication;
            write_file(
                &dir.join(format!("rep{j}.csv")),
                &trace.to_csv(&report.instance),
            )?;
            write_file(
                &dir.join(format!("rep{j}_counts.csv")),
                &trace.counts_csv(&report.instance),
            )?;
        }
        write_file(&dir.join("aggregate.csv"), &report.aggregate_csv())?;
        write_file(&dir.join("units.csv"), &report.units_csv())?;
        write_file(&dir.join("summary.txt"), &report.summary)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub delta: f64,
    pub horizon: u64,
    pub mean_regret: f64,
    pub std_regret: f64,
    pub mean_n_u3: f64,
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    /// `"inverse-delta"` (fixed horizon) or `"log-horizon"` (fixed delta).
    pub axis: &'static str,
    /// The fixed delta or horizon.
    pub fixed: f64,
    /// Log-log exponent of mean regret.
    pub regret_exponent: Option<f64>,
    /// Log-log exponent of mean `N_{T+1,u3}`.
    pub n_u3_exponent: Option<f64>,
    /// Linear slope of mean `N_{T+1,u3}` against the axis (`1/delta` or `ln T`).
    pub n_u3_slope: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
    pub fits: Vec<ScalingFit>,
}

impl ScalingTable {
    pub fn row(&self, delta: f64, horizon: u64) -> Option<&ScalingRow> {
        self.rows
            .iter()
            .find(|r| r.delta == delta && r.horizon == horizon)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,T,mean_regret,std_regret,mean_Nu3\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.delta, r.horizon, r.mean_regret, r.std_regret, r.mean_n_u3
            );
        }
        out
    }

    pub fn fits_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from("axis,fixed,regret_exponent,Nu3_exponent,Nu3_slope\n");
        for f in &self.fits {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                f.axis,
                f.fixed,
                opt(f.regret_exponent),
                opt(f.n_u3_exponent),
                opt(f.n_u3_slope)
            );
        }
        out
    }
}

fn log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if ys.iter().any(|y| *y <= 0.0) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_slope(&lx, &ly)
}

/// Runs the hardness instance for every `(delta, horizon)` cell. Each cell
/// is a full experiment named `<name>-T<horizon>`.
pub fn scaling_study(
    base: &ExperimentConfig,
    deltas: &[f64],
    horizons: &[u64],
) -> Result<ScalingTable> {
    if deltas.is_empty() {
        return Err(CmabError::Config("empty delta grid".into()));
    }
    if horizons.is_empty() {
        return Err(CmabError::Config("empty horizon grid".into()));
    }
    if base.instance.path.is_some() {
        return Err(CmabError::Config(
            "scaling study runs on the built-in figure1 instance".into(),
        ));
    }

    let mut rows = Vec::new();
    for &delta in deltas {
        for &horizon in horizons {
            let mut cfg = base.clone();
            cfg.instance.figure1_delta = Some(delta);
            cfg.horizon = horizon;
            cfg.name = format!("{}-T{}", base.name, horizon);
            let report = run_experiment(&cfg)?;
            let (mean_regret, std_regret) = report.final_regret();
            rows.push(ScalingRow {
                delta,
                horizon,
                mean_regret,
                std_regret,
                mean_n_u3: report.mean_unit_count("u3").unwrap_or(f64::NAN),
            });
        }
    }

    let mut fits = Vec::new();
    for &horizon in horizons {
        let cell: Vec<&ScalingRow> = rows.iter().filter(|r| r.horizon == horizon).collect();
        let xs: Vec<f64> = cell.iter().map(|r| 1.0 / r.delta).collect();
        let reg: Vec<f64> = cell.iter().map(|r| r.mean_regret).collect();
        let n3: Vec<f64> = cell.iter().map(|r| r.mean_n_u3).collect();
        fits.push(ScalingFit {
            axis: "inverse-delta",
            fixed: horizon as f64,
            regret_exponent: log_slope(&xs, &reg),
            n_u3_exponent: log_slope(&xs, &n3),
            n_u3_slope: fit_slope(&xs, &n3),
        });
    }
    for &delta in deltas {
        let cell: Vec<&ScalingRow> = rows.iter().filter(|r| r.delta == delta).collect();
        let xs: Vec<f64> = cell.iter().map(|r| (r.horizon as f64).ln()).collect();
        let reg: Vec<f64> = cell.iter().map(|r| r.mean_regret).collect();
        let n3: Vec<f64> = cell.iter().map(|r| r.mean_n_u3).collect();
        fits.push(ScalingFit {
            axis: "log-horizon",
            fixed: delta,
            regret_exponent: log_slope(&xs, &reg),
            n_u3_exponent: log_slope(&xs, &n3),
            n_u3_slope: fit_slope(&xs, &n3),
        });
    }

    let table = ScalingTable { rows, fits };
    if let Some(out) = &base.out_dir {
        let dir = out.join(&base.name);
        std::fs::create_dir_all(&dir).map_err(|e| CmabError::io(&dir, e))?;
        write_file(&dir.join("scaling.csv"), &table.to_csv())?;
        write_file(&dir.join("fits.csv"), &table.fits_csv())?;
    }
    Ok(table)
}
