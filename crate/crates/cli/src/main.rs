use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cmab::analysis::{compute_gaps, make_figure1_instance};
use cmab::harness::{run_experiment, scaling_study, ExperimentConfig, InstanceSpec};
use cmab::instance_file::{save_instance, InstanceFile};
use cmab::oracle::{brute_force_best, greedy, DEFAULT_ENUMERATION_CAP};
use cmab::{CmabError, OutcomeModel, PolicyKind};

#[derive(Parser)]
#[command(
    name = "cmab",
    version,
    about = "Combinatorial Thompson sampling experiments"
)]
struct Cli {
    /// Base RNG seed; replication j uses stream j of this seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of replications.
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Rounds per replication.
    #[arg(long, global = true)]
    horizon: Option<u64>,
    /// Output directory (output file for gen-figure1).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one replicated experiment.
    Run(RunArgs),
    /// Run the delta x horizon grid on the built-in instance.
    Scaling {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.04,0.02,0.01")]
        deltas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "10000,100000")]
        horizons: Vec<u64>,
    },
    /// Print the gap report of an instance.
    Gaps(InstanceArgs),
    /// Compare greedy against exhaustive search.
    Oracle(InstanceArgs),
    /// Write the built-in instance as a TOML file.
    GenFigure1 {
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        outcome_model: Option<OutcomeModel>,
    },
}

#[derive(Args, Clone)]
struct InstanceArgs {
    /// Instance TOML file.
    #[arg(long, conflicts_with = "figure1_delta")]
    instance: Option<PathBuf>,
    /// Use the built-in instance with this delta.
    #[arg(long)]
    figure1_delta: Option<f64>,
    /// deterministic, bernoulli or gaussian-unit-var.
    #[arg(long)]
    outcome_model: Option<OutcomeModel>,
}

impl InstanceArgs {
    fn spec(&self) -> Option<InstanceSpec> {
        if self.instance.is_none() && self.figure1_delta.is_none() {
            return None;
        }
        Some(InstanceSpec {
            path: self.instance.clone(),
            figure1_delta: self.figure1_delta,
            outcome_model: self.outcome_model,
        })
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    instance: InstanceArgs,
    /// cts-beta, cts-gaussian or cucb.
    #[arg(long)]
    policy: Option<PolicyKind>,
    #[arg(long)]
    name: Option<String>,
    /// Number the Gaussian warm-up rounds first and charge their regret.
    #[arg(long)]
    include_init_rounds: bool,
    /// Clamp sampled parameters to [0, 1] before calling the oracle.
    #[arg(long)]
    clamp_theta: bool,
    /// Write every round instead of the checkpoints only.
    #[arg(long)]
    full_trace: bool,
    /// Run replications one after another.
    #[arg(long)]
    serial: bool,
}

fn build_config(cli: &Cli, args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            toml::from_str::<ExperimentConfig>(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => ExperimentConfig::new(
            InstanceSpec::figure1(0.04),
            PolicyKind::CtsGaussian,
            10_000,
            20,
        ),
    };
    if let Some(spec) = args.instance.spec() {
        cfg.instance = spec;
    } else if let Some(model) = args.instance.outcome_model {
        cfg.instance.outcome_model = Some(model);
    }
    if let Some(policy) = args.policy {
        cfg.policy = policy;
    }
    if let Some(name) = &args.name {
        cfg.name = name.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = cli.reps {
        cfg.replications = reps;
    }
    if let Some(horizon) = cli.horizon {
        cfg.horizon = horizon;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = Some(out.clone());
    }
    cfg.include_init_rounds |= args.include_init_rounds;
    cfg.clamp_theta |= args.clamp_theta;
    cfg.full_trace |= args.full_trace;
    if args.serial {
        cfg.parallel = false;
    }
    Ok(cfg)
}

fn load(args: &InstanceArgs) -> Result<cmab::Instance> {
    match args.spec() {
        Some(spec) => Ok(spec.load()?),
        None => bail!("pass --instance <file> or --figure1-delta <x>"),
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => {
            let cfg = build_config(&cli, args)?;
            let report = run_experiment(&cfg)?;
            print!("{}", report.summary);
            if let Some(dir) = &report.output_dir {
                println!("wrote {}", dir.display());
            }
        }
        Command::Scaling {
            run,
            deltas,
            horizons,
        } => {
            let cfg = build_config(&cli, run)?;
            let table = scaling_study(&cfg, deltas, horizons)?;
            print!("{}", table.to_csv());
            println!();
            print!("{}", table.fits_csv());
        }
        Command::Gaps(args) => {
            let inst = load(args)?;
            match compute_gaps(&inst, inst.reward()) {
                Ok(report) => {
                    print!("{}", report.to_text(&inst));
                    if let Some(dir) = &cli.out {
                        report.write_to(&inst, dir)?;
                        println!("wrote {}", dir.display());
                    }
                }
                Err(CmabError::MultipleSolutions { solutions }) => {
                    println!("greedy solution is not unique; reachable solutions:");
                    for s in solutions {
                        let action = cmab::Action::new(s)?;
                        println!("  {}", inst.action_label(&action));
                    }
                }
                Err(e) => return Err(e.into()),
            }
        }
        Command::Oracle(args) => {
            let inst = load(args)?;
            let g = greedy(&inst, inst.reward(), inst.means())?;
            let (best, value) =
                brute_force_best(&inst, inst.reward(), inst.means(), DEFAULT_ENUMERATION_CAP)?;
            println!(
                "greedy: {} value {}",
                inst.action_label(&g.action),
                g.value()
            );
            println!("step values: {:?}", g.step_values);
            println!("optimal: {} value {}", inst.action_label(&best), value);
            if value > 0.0 {
                println!("ratio: {}", g.value() / value);
            }
        }
        Command::GenFigure1 {
            delta,
            outcome_model,
        } => {
            let mut inst = make_figure1_instance(*delta)?;
            if let Some(model) = outcome_model {
                inst = inst.with_outcome_model(*model);
            }
            match &cli.out {
                Some(path) => {
                    save_instance(&inst, path)?;
                    println!("wrote {}", path.display());
                }
                None => print!("{}", InstanceFile::from_instance(&inst).to_toml()),
            }
        }
    }
    Ok(())
}
