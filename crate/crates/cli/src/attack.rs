//! Runs the high-confidence attack over a set of seed inputs.

use std::io::{BufRead, BufReader};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use turbidity::attack::{
    high_confidence_attack_with, random_seed_inputs, AttackConfig, AttackResult, BlackBoxScorer, ByteSumScorer,
    ConstantScorer,
};

use crate::output::Outputs;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScorerId {
    /// Logistic in the mean byte value.
    ByteSum,
    /// Returns `--value` for every input.
    Constant,
}

#[derive(Args, Debug)]
pub struct AttackArgs {
    #[arg(long, value_enum, default_value_t = ScorerId::ByteSum)]
    pub scorer: ScorerId,
    /// Scorer input size in bytes.
    #[arg(long, default_value_t = 256)]
    pub max_size: usize,
    /// Output of the constant scorer.
    #[arg(long, default_value_t = 0.5)]
    pub value: f64,
    /// Seed inputs, one hex string per line; random inputs when absent.
    #[arg(long)]
    pub inputs: Option<PathBuf>,
    /// Number of random seed inputs when `--inputs` is absent.
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 0.97)]
    pub bar: f64,
    #[arg(long, default_value_t = 1000)]
    pub random_trials: usize,
}

fn read_inputs(path: &PathBuf) -> Result<Vec<Vec<u8>>> {
    let file = std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut inputs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        inputs.push(hex::decode(line).with_context(|| format!("{}:{}: not a hex string", path.display(), i + 1))?);
    }
    Ok(inputs)
}

pub fn run(out: &mut Outputs, args: &AttackArgs, seed: u64) -> Result<()> {
    let scorer: Box<dyn BlackBoxScorer> = match args.scorer {
        ScorerId::ByteSum => Box::new(ByteSumScorer::new(args.max_size)),
        ScorerId::Constant => {
            if !(0.0..=1.0).contains(&args.value) {
                bail!("--value must lie in [0, 1], got {}", args.value);
            }
            Box::new(ConstantScorer { value: args.value, max_size: args.max_size })
        }
    };
    let inputs = match &args.inputs {
        Some(path) => read_inputs(path)?,
        None => random_seed_inputs(args.count, args.max_size, seed),
    };
    let config = AttackConfig { confidence_bar: args.bar, random_trials: args.random_trials };
    let results: Vec<AttackResult> = inputs
        .iter()
        .enumerate()
        .map(|(i, x)| high_confidence_attack_with(scorer.as_ref(), x, args.max_size, seed.wrapping_add(i as u64), &config))
        .collect::<turbidity::Result<_>>()?;

    for (i, r) in results.iter().enumerate() {
        out.check((0.0..=1.0).contains(&r.confidence), || format!("seed {i}: confidence {} outside [0, 1]", r.confidence));
        out.check(!r.succeeded() || r.confidence > args.bar, || format!("seed {i}: success below the bar"));
    }
    out.write("attack.csv", |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["seed_index", "phase", "confidence", "trials", "seed_len", "adversarial_input"])?;
        for (i, (r, x)) in results.iter().zip(&inputs).enumerate() {
            let phase = serde_json::to_value(r.phase)?;
            csv.write_record([
                i.to_string(),
                phase.as_str().unwrap_or_default().to_string(),
                r.confidence.to_string(),
                r.trials.to_string(),
                x.len().to_string(),
                hex::encode(&r.adversarial_input),
            ])?;
        }
        csv.flush()?;
        Ok(())
    })?;
    let wins = results.iter().filter(|r| r.succeeded()).count();
    println!("{wins}/{} seeds reached confidence > {}", results.len(), args.bar);
    Ok(())
}
