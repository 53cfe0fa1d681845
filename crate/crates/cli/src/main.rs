//! `turbid`: figure data, Monte Carlo runs, the attack harness and the
//! health monitor from the command line.

mod attack;
mod figures;
mod monitor;
mod output;
mod simulate;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand};
use turbidity::campaign::toxic_conditionals;
use turbidity::export::read_samples_csv;
use turbidity::mitigation::repair_posterior;
use turbidity::roc::{default_thetas, empirical_roc, youden_point};
use turbidity::{CampaignScenario, ExactRoc, ReferenceDgp};

use crate::output::{Format, Outputs};

#[derive(Parser, Debug)]
#[command(name = "turbid", version, about = "Turbidity-aware ROC analysis and detector health monitoring")]
struct Cli {
    /// Seed for every random draw; required by stochastic commands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Format for curves and figure data.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact densities, posteriors and ROCs for the reference process.
    Figures {
        /// Toxic scenario for the pinch-down and repair figures
        /// (default: symmetric 50/50).
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Labeled samples, or a bundled monitor stream.
    Simulate(simulate::SimulateArgs),
    /// High-confidence attack against a built-in scorer.
    Attack(attack::AttackArgs),
    /// Replay a score stream through the health monitor.
    Monitor(monitor::MonitorArgs),
    /// Build the mitigation lookup table.
    Precompute {
        #[arg(long, value_enum, default_value_t = monitor::Grid::Default)]
        grid: monitor::Grid,
    },
    /// Exact ROC of a scenario, or empirical ROC of a sample file.
    Roc(RocArgs),
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("input").required(true).args(["scenario", "samples"])))]
struct RocArgs {
    /// Scenario file; the regular detector is run in its environment.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// `score,label` CSV as written by `simulate`.
    #[arg(long)]
    samples: Option<PathBuf>,
    /// With `--scenario`, also compute the repaired ROC.
    #[arg(long, requires = "scenario")]
    repair: bool,
}

fn load_scenario(path: &Path) -> Result<CampaignScenario> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let s: CampaignScenario = serde_json::from_str(&text).with_context(|| format!("bad scenario file {}", path.display()))?;
    s.validate()?;
    Ok(s)
}

fn require_seed(seed: Option<u64>, command: &str) -> Result<u64> {
    seed.ok_or_else(|| anyhow!("--seed is required for `{command}`"))
}

fn roc(out: &mut Outputs, args: &RocArgs) -> Result<()> {
    let dgp = ReferenceDgp::default();
    if let Some(path) = &args.samples {
        let file = std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        let set = read_samples_csv(file)?;
        let roc = empirical_roc(&set.scores, &set.labels, 1)?;
        out.rocs("roc", "Empirical ROC", &[("sample", &roc)])?;
        let op = youden_point(&roc)?;
        println!("AUC {:.4}; Youden point at score {} (fpr {:.4}, tpr {:.4})", roc.auc, op.theta, op.fpr, op.tpr);
        return Ok(());
    }
    let scenario = load_scenario(args.scenario.as_deref().expect("clap enforces one input"))?;
    let (t0, t1) = toxic_conditionals(&dgp, &scenario)?;
    let regular = dgp.regular_posterior();
    let roc = ExactRoc::new(&regular, &t0, &t1).curve(&default_thetas(&regular))?;
    let op = youden_point(&roc)?;
    println!("AUC {:.4}; Youden point at θ {:.4} (fpr {:.4}, tpr {:.4})", roc.auc, op.theta, op.fpr, op.tpr);
    if args.repair {
        let artifact = repair_posterior(&t0, &t1, scenario.prior_mal, dgp.bayes_threshold())?;
        let post = artifact.posterior();
        let repaired = ExactRoc::new(post, &t0, &t1).curve(&default_thetas(post))?;
        out.rocs("roc", "Exact ROC", &[("unmitigated", &roc), ("repaired", &repaired)])?;
        // CSV holds one curve per file.
        if out.format() == Format::Csv {
            out.rocs("roc_repaired", "Repaired ROC", &[("repaired", &repaired)])?;
        }
        println!("repaired AUC {:.4}, {} branches", repaired.auc, repaired.branch_count);
    } else {
        out.rocs("roc", "Exact ROC", &[("unmitigated", &roc)])?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<Outputs> {
    let mut out = Outputs::new(&cli.out, cli.format)?;
    match &cli.command {
        Command::Figures { scenario } => {
            let scenario = match scenario {
                Some(path) => load_scenario(path)?,
                None => CampaignScenario::symmetric(),
            };
            figures::run(&mut out, &scenario)?;
        }
        Command::Simulate(args) => {
            let seed = require_seed(cli.seed, "simulate")?;
            let scenario = args.scenario.as_deref().map(load_scenario).transpose()?;
            simulate::run(&mut out, args, scenario, seed)?;
        }
        Command::Attack(args) => attack::run(&mut out, args, require_seed(cli.seed, "attack")?)?,
        Command::Monitor(args) => monitor::run(&mut out, args, cli.seed)?,
        Command::Precompute { grid } => {
            let seed = require_seed(cli.seed, "precompute")?;
            let table = monitor::build_table(&ReferenceDgp::default(), *grid, seed)?;
            let path = out.write("table.json", |w| Ok(serde_json::to_writer(w, &table)?))?;
            println!("{} entries written to {}", table.entries().len(), path.display());
        }
        Command::Roc(args) => roc(&mut out, args)?,
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) if out.violations().is_empty() => ExitCode::SUCCESS,
        Ok(out) => {
            for v in out.violations() {
                eprintln!("invariant violated: {v}");
            }
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
