//! Monte Carlo draws from the reference process or a toxic environment,
//! and the bundled monitor streams.

use anyhow::Result;
use clap::{Args, ValueEnum};
use turbidity::campaign::sample_scenario;
use turbidity::export::write_samples_csv;
use turbidity::monitor::stream::{campaign_stream, regular_stream, with_label_lag, write_jsonl};
use turbidity::roc::empirical_roc;
use turbidity::{CampaignScenario, Clarity, ReferenceDgp};

use crate::output::Outputs;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StreamKind {
    Regular,
    Campaign,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Number of samples (records, for a regular stream).
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// Sample the symmetric 50/50 toxic environment instead of the
    /// regular one.
    #[arg(long, conflicts_with = "scenario")]
    pub toxic: bool,
    /// Scenario file to sample from.
    #[arg(long)]
    pub scenario: Option<std::path::PathBuf>,
    /// Write a JSONL monitor stream instead of a labeled sample.
    #[arg(long, value_enum, conflicts_with_all = ["toxic", "scenario"])]
    pub stream: Option<StreamKind>,
    /// Deliver each stream label this many records after its score.
    #[arg(long, default_value_t = 0, requires = "stream")]
    pub label_lag: usize,
}

pub fn run(out: &mut Outputs, args: &SimulateArgs, scenario: Option<CampaignScenario>, seed: u64) -> Result<()> {
    let dgp = ReferenceDgp::default();
    if let Some(kind) = args.stream {
        let (name, records) = match kind {
            StreamKind::Regular => ("regular_stream.jsonl", regular_stream(&dgp, args.n, seed)?),
            StreamKind::Campaign => ("campaign_stream.jsonl", campaign_stream(&dgp, seed)?),
        };
        let records = if args.label_lag > 0 { with_label_lag(&records, args.label_lag) } else { records };
        out.write(name, |w| Ok(write_jsonl(w, &records)?))?;
        println!("{} records written to {name}", records.len());
        return Ok(());
    }

    let scenario = scenario.or(args.toxic.then(CampaignScenario::symmetric));
    let set = match &scenario {
        Some(s) => sample_scenario(&dgp, s, args.n, seed)?,
        None => dgp.sample(args.n, seed),
    };
    out.write("samples.csv", |w| Ok(write_samples_csv(w, &set)?))?;
    let (clear, turbid) = (set.count(Clarity::Clear), set.count(Clarity::Turbid));
    out.check(clear + turbid == set.len(), || "clarity tags do not cover every sample".into());
    println!("n = {}: {clear} clear, {turbid} turbid", set.len());

    // Adding zero turns a -0 threshold into 0 for display.
    let t = dgp.bayes_threshold() + 0.0;
    if !set.is_empty() {
        let correct = set.scores.iter().zip(&set.labels).filter(|(s, y)| u8::from(**s >= t) == **y).count();
        println!("accuracy at threshold {t}: {:.4}", correct as f64 / set.len() as f64);
    }
    match empirical_roc(&set.scores, &set.labels, 1) {
        Ok(roc) => {
            out.rocs("roc", "Empirical ROC", &[("sample", &roc)])?;
            println!("empirical AUC {:.4}", roc.auc);
        }
        // Fewer than two classes: there is no curve to draw.
        Err(e) => println!("no ROC written: {e}"),
    }
    Ok(())
}
