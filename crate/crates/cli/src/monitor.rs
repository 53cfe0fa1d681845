//! Replays a JSONL score stream through the health monitor.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use turbidity::campaign::natural_clear_fractions;
use turbidity::monitor::stream::read_jsonl;
use turbidity::monitor::table::{default_grid, precompute_table, Fingerprint};
use turbidity::monitor::{Event, MitigationTable};
use turbidity::roc::empirical_roc;
use turbidity::{Mode, Monitor, MonitorConfig, ReferenceDgp};

use crate::output::Outputs;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Grid {
    /// 75 fingerprints over three priors.
    Default,
    /// 16 fingerprints at balanced priors.
    Compact,
}

/// Clear fractions `{0.3, 0.5, 0.7, natural}` per class at prior ½, with
/// the regular fingerprint first.
fn compact_grid(dgp: &ReferenceDgp) -> Vec<Fingerprint> {
    let (n0, n1) = natural_clear_fractions(dgp);
    let mut grid = vec![Fingerprint { clear_frac_class0: n0, clear_frac_class1: n1, prior_mal: dgp.prior_mal }];
    for f0 in [0.3, 0.5, 0.7, n0] {
        for f1 in [0.3, 0.5, 0.7, n1] {
            let fp = Fingerprint { clear_frac_class0: f0, clear_frac_class1: f1, prior_mal: 0.5 };
            if !grid.contains(&fp) {
                grid.push(fp);
            }
        }
    }
    grid
}

pub fn build_table(dgp: &ReferenceDgp, grid: Grid, seed: u64) -> Result<MitigationTable> {
    let fingerprints = match grid {
        Grid::Default => default_grid(dgp),
        Grid::Compact => compact_grid(dgp),
    };
    Ok(precompute_table(dgp, &fingerprints, seed)?)
}

#[derive(Args, Debug)]
pub struct MonitorArgs {
    /// JSONL stream of `{id, score, label, ts}` records.
    #[arg(long)]
    pub stream: PathBuf,
    /// Precomputed mitigation table; built from `--grid` and `--seed` when
    /// absent.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Grid::Default)]
    pub grid: Grid,
    /// Records ingested between evaluations.
    #[arg(long, default_value_t = 1000)]
    pub chunk: usize,
    /// Route decisions through the selected mitigation at all times.
    #[arg(long)]
    pub prophylactic: bool,
}

/// What the monitor decided for a sample when its score first arrived.
struct Decision {
    score: f64,
    posterior: f64,
    mitigated: bool,
}

pub fn run(out: &mut Outputs, args: &MonitorArgs, seed: Option<u64>) -> Result<()> {
    if args.chunk == 0 {
        bail!("--chunk must be positive");
    }
    let file = File::open(&args.stream).with_context(|| format!("cannot open {}", args.stream.display()))?;
    let records = read_jsonl(BufReader::new(file)).with_context(|| format!("in {}", args.stream.display()))?;
    let dgp = ReferenceDgp::default();
    let table = match (&args.table, seed) {
        (Some(path), _) => MitigationTable::load(path).with_context(|| format!("cannot load table {}", path.display()))?,
        (None, Some(seed)) => build_table(&dgp, args.grid, seed)?,
        (None, None) => bail!("--seed is required to precompute a table; pass --table to reuse one"),
    };

    let config = MonitorConfig { prophylactic: args.prophylactic, ..MonitorConfig::new(dgp) };
    let mut monitor = Monitor::new(config);
    let mut decided: HashMap<&str, Decision> = HashMap::new();
    let mut decision_rows = Vec::new();
    // (label, raw score, routed posterior) for samples scored while mitigated.
    let mut mitigated_rows: Vec<(u8, f64, f64)> = Vec::new();
    let mut all_rows: Vec<(u8, f64, f64)> = Vec::new();
    let mut trace = vec![monitor.mode()];
    let mut summaries = Vec::new();

    for chunk in records.chunks(args.chunk) {
        for r in chunk {
            if !decided.contains_key(r.id.as_str()) {
                let (posterior, decision) = monitor.transform(r.score);
                let mitigated = monitor.mode() == Mode::Mitigated;
                decision_rows.push((r.id.clone(), r.score, posterior, decision, monitor.mode()));
                decided.insert(&r.id, Decision { score: r.score, posterior, mitigated });
            }
            if let (Some(y), Some(d)) = (r.label, decided.get(r.id.as_str())) {
                let row = (y, d.score, d.posterior);
                all_rows.push(row);
                if d.mitigated {
                    mitigated_rows.push(row);
                }
            }
        }
        monitor.ingest(chunk)?;
        let mode = monitor.evaluate(&table)?;
        if trace.last() != Some(&mode) {
            trace.push(mode);
        }
        let s = monitor.state();
        summaries.push(serde_json::json!({
            "records": decided.len(),
            "mode": s.mode,
            "error_rate": s.error_rate,
            "lowconf_rate": s.lowconf_rate,
            "evaluations": s.evaluations,
            "deployments": s.deployments,
            "active": s.active_mitigation.as_ref().map(|m| m.artifact.scenario_id()),
        }));
    }

    let state = monitor.state();
    out.check(
        state.active_mitigation.is_some() == (state.mode == Mode::Mitigated),
        || "active mitigation does not match the final mode".into(),
    );
    out.write("snapshot.json", |w| Ok(w.write_all(monitor.snapshot_json()?.as_bytes())?))?;
    out.write("snapshots.jsonl", |w| {
        for s in &summaries {
            serde_json::to_writer(&mut *w, s)?;
            writeln!(w)?;
        }
        Ok(())
    })?;
    out.write("events.jsonl", |w| {
        for e in monitor.history() {
            serde_json::to_writer(&mut *w, e)?;
            writeln!(w)?;
        }
        Ok(())
    })?;
    out.write("decisions.csv", |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["id", "score", "posterior", "decision", "mode"])?;
        for (id, score, posterior, decision, mode) in &decision_rows {
            let mode = serde_json::to_value(mode)?;
            csv.write_record([id, &score.to_string(), &posterior.to_string(), &decision.to_string(), mode.as_str().unwrap_or_default()])?;
        }
        csv.flush()?;
        Ok(())
    })?;

    // Before/after curves over the mitigated stretch, or the whole labeled
    // stream when nothing was ever mitigated.
    let rows = if mitigated_rows.is_empty() { &all_rows } else { &mitigated_rows };
    let labels: Vec<u8> = rows.iter().map(|r| r.0).collect();
    let raw: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let routed: Vec<f64> = rows.iter().map(|r| r.2).collect();
    match (empirical_roc(&raw, &labels, 1), empirical_roc(&routed, &labels, 1)) {
        (Ok(before), Ok(after)) => {
            out.rocs("roc_before", "Scores before mitigation", &[("raw", &before)])?;
            out.rocs("roc_after", "Scores after mitigation", &[("routed", &after)])?;
            println!("AUC before {:.4}, after {:.4} over {} labeled samples", before.auc, after.auc, rows.len());
        }
        (Err(e), _) | (_, Err(e)) => println!("no ROC written: {e}"),
    }

    let deployments = monitor.history().iter().filter(|e| matches!(e, Event::MitigationDeployed { .. })).count();
    let names: Vec<String> = trace.iter().map(|m| serde_json::to_value(m).map(|v| v.as_str().unwrap_or_default().to_string())).collect::<Result<_, _>>()?;
    println!("mode trace: {}", names.join(" -> "));
    println!("{} evaluations, {deployments} deployments, final mode {}", state.evaluations, names.last().map_or("", |s| s.as_str()));
    Ok(())
}
