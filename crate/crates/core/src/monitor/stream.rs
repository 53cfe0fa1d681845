//! JSONL score streams and the deterministic stream generators used for
//! bundled fixtures.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::campaign::{sample_scenario, CampaignScenario};
use crate::dgp::{LabeledScoreSet, ReferenceDgp};
use crate::error::{Error, Result};

/// One scored sample, optionally labeled. A record repeating an earlier
/// id carries a late label for that sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamRecord {
    pub id: String,
    pub score: f64,
    pub label: Option<u8>,
    pub ts: i64,
}

/// Parses one JSONL line; `line` is 1-based and only used in errors.
pub fn parse_record(text: &str, line: usize) -> Result<StreamRecord> {
    let malformed = |message: String| Error::MalformedRecord { line, message };
    let rec: StreamRecord = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    if !rec.score.is_finite() {
        return Err(malformed("score must be finite".into()));
    }
    if matches!(rec.label, Some(l) if l > 1) {
        return Err(malformed(format!("label must be 0, 1 or null, got {}", rec.label.unwrap_or_default())));
    }
    Ok(rec)
}

/// Reads a whole stream, skipping blank lines.
pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<StreamRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_record(&line, i + 1)?);
    }
    Ok(out)
}

pub fn write_jsonl<W: Write>(mut w: W, records: &[StreamRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// A stretch of stream drawn from one environment; `None` is the regular
/// process.
#[derive(Clone, Copy, Debug)]
pub struct Phase {
    pub scenario: Option<CampaignScenario>,
    pub n: usize,
}

/// Concatenated phases with sequential ids and timestamps. Phase `k` is
/// sampled with seed `seed + k`.
pub fn phased_stream(dgp: &ReferenceDgp, phases: &[Phase], seed: u64) -> Result<Vec<StreamRecord>> {
    let mut out = Vec::with_capacity(phases.iter().map(|p| p.n).sum());
    for (k, phase) in phases.iter().enumerate() {
        let phase_seed = seed.wrapping_add(k as u64);
        let set: LabeledScoreSet = match &phase.scenario {
            None => dgp.sample(phase.n, phase_seed),
            Some(s) => sample_scenario(dgp, s, phase.n, phase_seed)?,
        };
        for (score, label) in set.scores.iter().zip(&set.labels) {
            let ts = out.len() as i64;
            out.push(StreamRecord { id: format!("s{ts:07}"), score: *score, label: Some(*label), ts });
        }
    }
    Ok(out)
}

/// Regular traffic only.
pub fn regular_stream(dgp: &ReferenceDgp, n: usize, seed: u64) -> Result<Vec<StreamRecord>> {
    phased_stream(dgp, &[Phase { scenario: None, n }], seed)
}

/// Phases of the bundled campaign stream: 20k regular, 50k symmetric
/// toxic, 30k regular.
pub fn campaign_phases() -> [Phase; 3] {
    [
        Phase { scenario: None, n: 20_000 },
        Phase { scenario: Some(CampaignScenario::symmetric()), n: 50_000 },
        Phase { scenario: None, n: 30_000 },
    ]
}

pub fn campaign_stream(dgp: &ReferenceDgp, seed: u64) -> Result<Vec<StreamRecord>> {
    phased_stream(dgp, &campaign_phases(), seed)
}

/// Delays every label by `lag` records: each record is first emitted
/// unlabeled and its label follows as a separate record `lag` positions
/// later (or at the end).
pub fn with_label_lag(records: &[StreamRecord], lag: usize) -> Vec<StreamRecord> {
    let mut out = Vec::with_capacity(records.len() * 2);
    let mut pending: std::collections::VecDeque<(usize, StreamRecord)> = Default::default();
    for (i, r) in records.iter().enumerate() {
        while pending.front().is_some_and(|(due, _)| *due <= i) {
            out.push(pending.pop_front().unwrap().1);
        }
        out.push(StreamRecord { label: None, ..r.clone() });
        if r.label.is_some() {
            pending.push_back((i + lag, r.clone()));
        }
    }
    out.extend(pending.into_iter().map(|(_, r)| r));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects() {
        let r = parse_record(r#"{"id":"a","score":1.5,"label":null,"ts":3}"#, 1).unwrap();
        assert_eq!(r.label, None);
        assert!(matches!(
            parse_record(r#"{"id":"a","score":1.5,"label":2,"ts":3}"#, 7),
            Err(Error::MalformedRecord { line: 7, .. })
        ));
        assert!(matches!(parse_record("{not json", 2), Err(Error::MalformedRecord { line: 2, .. })));
    }

    #[test]
    fn read_reports_line_number() {
        let text = "{\"id\":\"a\",\"score\":0,\"label\":1,\"ts\":0}\n\n{\"id\":\"b\"}\n";
        match read_jsonl(text.as_bytes()) {
            Err(Error::MalformedRecord { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let recs = regular_stream(&ReferenceDgp::default(), 20, 4).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &recs).unwrap();
        assert_eq!(read_jsonl(buf.as_slice()).unwrap(), recs);
    }

    #[test]
    fn lag_emits_each_label_once() {
        let recs = regular_stream(&ReferenceDgp::default(), 10, 4).unwrap();
        let lagged = with_label_lag(&recs, 3);
        assert_eq!(lagged.len(), 20);
        assert_eq!(lagged.iter().filter(|r| r.label.is_some()).count(), 10);
        assert!(lagged[..3].iter().all(|r| r.label.is_none()));
    }
}
