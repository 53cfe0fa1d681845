use std::io::BufReader;

use turbidity::campaign::natural_clear_fractions;
use turbidity::monitor::stream::{campaign_stream, read_jsonl, regular_stream, with_label_lag, write_jsonl};
use turbidity::monitor::table::{precompute_table, Fingerprint};
use turbidity::monitor::MitigationTable;
use turbidity::{Mode, Monitor, MonitorConfig, ReferenceDgp};

fn small_table(dgp: &ReferenceDgp) -> MitigationTable {
    let (n0, n1) = natural_clear_fractions(dgp);
    let grid = [
        Fingerprint { clear_frac_class0: n0, clear_frac_class1: n1, prior_mal: 0.5 },
        Fingerprint { clear_frac_class0: 0.5, clear_frac_class1: 0.5, prior_mal: 0.5 },
        Fingerprint { clear_frac_class0: 0.7, clear_frac_class1: 0.7, prior_mal: 0.5 },
    ];
    precompute_table(dgp, &grid, 42).unwrap()
}

fn run(config: MonitorConfig, table: &MitigationTable, records: &[turbidity::monitor::stream::StreamRecord]) -> Monitor {
    let mut m = Monitor::new(config);
    for chunk in records.chunks(1000) {
        m.ingest(chunk).unwrap();
        m.evaluate(table).unwrap();
    }
    m
}

#[test]
fn replaying_history_reproduces_snapshot() {
    let dgp = ReferenceDgp::default();
    let table = small_table(&dgp);
    let records = with_label_lag(&campaign_stream(&dgp, 7).unwrap(), 300);
    let m = run(MonitorConfig::new(dgp), &table, &records);
    assert!(m.state().deployments > 0);
    let replayed = Monitor::replay(*m.config(), m.history().iter().cloned());
    assert_eq!(replayed.snapshot_json().unwrap(), m.snapshot_json().unwrap());
    assert_eq!(replayed.mode(), m.mode());
}

#[test]
fn prophylactic_identity_matches_plain_rule() {
    let dgp = ReferenceDgp::default();
    let table = small_table(&dgp);
    let records = regular_stream(&dgp, 20_000, 5).unwrap();
    let plain = run(MonitorConfig::new(dgp), &table, &records);
    let config = MonitorConfig { prophylactic: true, ..MonitorConfig::new(dgp) };
    let guarded = run(config, &table, &records);
    assert_eq!(guarded.mode(), Mode::Regular);
    let selected = guarded.state().selected_mitigation.as_ref().expect("a selection");
    assert!(selected.artifact.is_identity());
    for r in &records {
        assert_eq!(guarded.transform(r.score).1, plain.transform(r.score).1, "score {}", r.score);
    }
}

#[test]
fn table_survives_save_and_load() {
    let dgp = ReferenceDgp::default();
    let table = small_table(&dgp);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.json");
    table.save(&path).unwrap();
    let back = MitigationTable::load(&path).unwrap();
    assert_eq!(back.entries().len(), table.entries().len());
    let probe = Fingerprint { clear_frac_class0: 0.68, clear_frac_class1: 0.71, prior_mal: 0.5 };
    let (a, da) = table.lookup(&probe);
    let (b, db) = back.lookup(&probe);
    assert_eq!(da, db);
    assert_eq!(a.scenario_id(), b.scenario_id());
    for s in turbidity::numerics::linspace(-10.0, 10.0, 401) {
        assert_eq!(a.decide(s), b.decide(s), "score {s}");
    }
}

#[test]
fn stream_jsonl_round_trip() {
    let dgp = ReferenceDgp::default();
    let records = with_label_lag(&regular_stream(&dgp, 500, 2).unwrap(), 10);
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &records).unwrap();
    let back = read_jsonl(BufReader::new(buf.as_slice())).unwrap();
    assert_eq!(back, records);
}
