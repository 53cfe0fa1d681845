//! Rolling count-based window of scored records with incremental
//! histogram and rate counters.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::Serialize;

use crate::density::Interval;
use crate::numerics::linspace;

/// Per-class score histograms over the current window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramPair {
    pub bin_edges: Vec<f64>,
    pub counts0: Vec<u64>,
    pub counts1: Vec<u64>,
    pub unlabeled_counts: Vec<u64>,
    pub window_capacity: usize,
}

impl HistogramPair {
    pub fn new(domain: Interval, bins: usize, window_capacity: usize) -> Self {
        Self {
            bin_edges: linspace(domain.lo, domain.hi, bins + 1),
            counts0: vec![0; bins],
            counts1: vec![0; bins],
            unlabeled_counts: vec![0; bins],
            window_capacity,
        }
    }

    /// Bin of `s`; out-of-domain scores land in the edge bins.
    pub fn bin(&self, s: f64) -> usize {
        let bins = self.counts0.len();
        let (lo, hi) = (self.bin_edges[0], self.bin_edges[bins]);
        let x = ((s - lo) / (hi - lo) * bins as f64).floor();
        if x.is_nan() || x < 0.0 {
            0
        } else {
            (x as usize).min(bins - 1)
        }
    }

    fn slot(&mut self, label: Option<u8>) -> &mut Vec<u64> {
        match label {
            Some(0) => &mut self.counts0,
            Some(_) => &mut self.counts1,
            None => &mut self.unlabeled_counts,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts0.iter().chain(&self.counts1).chain(&self.unlabeled_counts).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowEntry {
    pub id: String,
    pub score: f64,
    pub label: Option<u8>,
    pub lowconf: bool,
    pub bin: usize,
}

/// Running counts over the window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct WindowCounts {
    pub total: u64,
    pub lowconf: u64,
    /// Labeled records per class.
    pub labeled: [u64; 2],
    /// Labeled records per class that the reference rule gets right.
    pub clear: [u64; 2],
}

impl WindowCounts {
    pub fn labeled_total(&self) -> u64 {
        self.labeled[0] + self.labeled[1]
    }

    pub fn errors(&self) -> u64 {
        self.labeled_total() - self.clear[0] - self.clear[1]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScoreWindow {
    pub histograms: HistogramPair,
    pub counts: WindowCounts,
    pub entries: VecDeque<WindowEntry>,
    pub dropped_labels: u64,
    reference_threshold: f64,
    #[serde(skip)]
    front_seq: u64,
    #[serde(skip)]
    index: HashMap<String, u64>,
    #[serde(skip)]
    evicted: VecDeque<String>,
    #[serde(skip)]
    evicted_set: HashSet<String>,
}

impl ScoreWindow {
    pub fn new(domain: Interval, bins: usize, capacity: usize, reference_threshold: f64) -> Self {
        Self {
            histograms: HistogramPair::new(domain, bins, capacity),
            counts: WindowCounts::default(),
            entries: VecDeque::with_capacity(capacity),
            dropped_labels: 0,
            reference_threshold,
            front_seq: 0,
            index: HashMap::new(),
            evicted: VecDeque::new(),
            evicted_set: HashSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn count(&mut self, e: &WindowEntry, sign: i64) {
        let add = |x: &mut u64| *x = x.wrapping_add_signed(sign);
        add(&mut self.counts.total);
        if e.lowconf {
            add(&mut self.counts.lowconf);
        }
        add(&mut self.histograms.slot(e.label)[e.bin]);
        if let Some(y) = e.label {
            let y = usize::from(y == 1);
            add(&mut self.counts.labeled[y]);
            if u8::from(e.score >= self.reference_threshold) as usize == y {
                add(&mut self.counts.clear[y]);
            }
        }
    }

    /// Adds a record, or applies a late label to one already in the window.
    ///
    /// A record whose id was recently evicted is a label for a sample that
    /// has left the window; it is dropped and counted.
    pub fn push(&mut self, id: &str, score: f64, label: Option<u8>, lowconf: bool) {
        if let Some(&seq) = self.index.get(id) {
            let k = (seq - self.front_seq) as usize;
            if label.is_some() && self.entries[k].label != label {
                let old = self.entries[k].clone();
                self.count(&old, -1);
                self.entries[k].label = label;
                let new = self.entries[k].clone();
                self.count(&new, 1);
            }
            return;
        }
        if self.evicted_set.contains(id) {
            self.dropped_labels += 1;
            return;
        }
        let entry = WindowEntry { id: id.to_owned(), score, label, lowconf, bin: self.histograms.bin(score) };
        self.count(&entry, 1);
        self.index.insert(entry.id.clone(), self.front_seq + self.entries.len() as u64);
        self.entries.push_back(entry);
        while self.entries.len() > self.histograms.window_capacity {
            self.evict();
        }
    }

    fn evict(&mut self) {
        let Some(old) = self.entries.pop_front() else { return };
        self.count(&old, -1);
        self.index.remove(&old.id);
        self.front_seq += 1;
        // Remember as many evicted ids as the window holds.
        self.evicted_set.insert(old.id.clone());
        self.evicted.push_back(old.id);
        while self.evicted.len() > self.histograms.window_capacity {
            if let Some(id) = self.evicted.pop_front() {
                self.evicted_set.remove(&id);
            }
        }
    }

    /// Labeled scores per class.
    pub fn labeled_scores(&self) -> (Vec<f64>, Vec<f64>) {
        let (mut s0, mut s1) = (Vec::new(), Vec::new());
        for e in &self.entries {
            match e.label {
                Some(0) => s0.push(e.score),
                Some(_) => s1.push(e.score),
                None => {}
            }
        }
        (s0, s1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(capacity: usize) -> ScoreWindow {
        ScoreWindow::new(Interval { lo: -10.0, hi: 10.0 }, 100, capacity, 0.0)
    }

    #[test]
    fn binning_clamps() {
        let w = window(4);
        assert_eq!(w.histograms.bin(-10.0), 0);
        assert_eq!(w.histograms.bin(-50.0), 0);
        assert_eq!(w.histograms.bin(10.0), 99);
        assert_eq!(w.histograms.bin(0.0), 50);
    }

    #[test]
    fn eviction_keeps_capacity_and_counts() {
        let mut w = window(3);
        for i in 0..5 {
            w.push(&i.to_string(), i as f64 - 2.0, Some(1), false);
        }
        assert_eq!(w.len(), 3);
        assert_eq!(w.histograms.total(), 3);
        assert_eq!(w.counts.labeled, [0, 3]);
        // Scores 0, 1, 2 are all at or above the threshold.
        assert_eq!(w.counts.clear, [0, 3]);
    }

    #[test]
    fn late_label_updates_in_place() {
        let mut w = window(3);
        w.push("a", 1.0, None, true);
        assert_eq!(w.counts.labeled_total(), 0);
        w.push("a", 1.0, Some(0), false);
        assert_eq!(w.len(), 1);
        assert_eq!(w.counts.labeled, [1, 0]);
        assert_eq!(w.counts.errors(), 1);
        assert_eq!(w.counts.lowconf, 1);
        assert_eq!(w.histograms.unlabeled_counts.iter().sum::<u64>(), 0);
    }

    #[test]
    fn label_for_evicted_record_is_dropped() {
        let mut w = window(1);
        w.push("a", 1.0, None, false);
        w.push("b", 1.0, None, false);
        w.push("a", 1.0, Some(1), false);
        assert_eq!(w.dropped_labels, 1);
        assert_eq!(w.len(), 1);
        assert_eq!(w.entries[0].id, "b");
    }
}
