//! Brute-force append attack against a black-box byte scorer.
//!
//! The input is padded to the scorer's maximum size and the padding is
//! searched: first every constant fill byte, then random chunk
//! perturbations of the best input so far. The search stops as soon as the
//! best confidence clears the bar.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::seeded;

/// A deterministic scorer returning a pseudo-probability in `[0, 1]`.
pub trait BlackBoxScorer {
    fn predict(&self, input: &[u8]) -> f64;
    fn max_input_size(&self) -> usize;
}

/// Logistic in the mean byte value over the full input size:
/// `σ(bias + weight · Σbytes / (255 · max_size))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ByteSumScorer {
    pub max_size: usize,
    pub weight: f64,
    pub bias: f64,
}

impl ByteSumScorer {
    pub fn new(max_size: usize) -> Self {
        Self { max_size, weight: 16.0, bias: -8.0 }
    }
}

impl BlackBoxScorer for ByteSumScorer {
    fn predict(&self, input: &[u8]) -> f64 {
        let total: u64 = input.iter().map(|b| u64::from(*b)).sum();
        let z = self.bias + self.weight * total as f64 / (255.0 * self.max_size.max(1) as f64);
        1.0 / (1.0 + (-z).exp())
    }

    fn max_input_size(&self) -> usize {
        self.max_size
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantScorer {
    pub value: f64,
    pub max_size: usize,
}

impl BlackBoxScorer for ConstantScorer {
    fn predict(&self, _: &[u8]) -> f64 {
        self.value
    }

    fn max_input_size(&self) -> usize {
        self.max_size
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub confidence_bar: f64,
    pub random_trials: usize,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self { confidence_bar: 0.97, random_trials: 1000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackPhase {
    ConstantFill,
    RandomChunk,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub adversarial_input: Vec<u8>,
    pub confidence: f64,
    pub phase: AttackPhase,
    /// Candidate inputs scored, excluding the initial zero-padded input.
    pub trials: usize,
}

impl AttackResult {
    pub fn succeeded(&self) -> bool {
        self.phase != AttackPhase::Failed
    }
}

struct Search<'a, S: BlackBoxScorer + ?Sized> {
    scorer: &'a S,
    best: Vec<u8>,
    pred_max: f64,
    trials: usize,
    bar: f64,
}

impl<S: BlackBoxScorer + ?Sized> Search<'_, S> {
    /// Scores `x`, keeps it if it beats the best so far, and reports
    /// whether the bar has been cleared.
    fn check(&mut self, x: Vec<u8>) -> bool {
        self.trials += 1;
        let pred = self.scorer.predict(&x);
        if pred > self.pred_max {
            self.best = x;
            self.pred_max = pred;
        }
        self.pred_max > self.bar
    }
}

/// Runs the attack with the default bar of 0.97 and 1000 random trials.
pub fn high_confidence_attack<S: BlackBoxScorer + ?Sized>(
    scorer: &S,
    seed_input: &[u8],
    max_size: usize,
    rng_seed: u64,
) -> Result<AttackResult> {
    high_confidence_attack_with(scorer, seed_input, max_size, rng_seed, &AttackConfig::default())
}

pub fn high_confidence_attack_with<S: BlackBoxScorer + ?Sized>(
    scorer: &S,
    seed_input: &[u8],
    max_size: usize,
    rng_seed: u64,
    config: &AttackConfig,
) -> Result<AttackResult> {
    if seed_input.len() > max_size {
        return Err(invalid(format!("seed input has {} bytes, more than max_size {max_size}", seed_input.len())));
    }
    let base = seed_input.len();
    let pad_len = max_size - base;
    let padded = |fill: u8| {
        let mut x = seed_input.to_vec();
        x.resize(max_size, fill);
        x
    };
    let start = padded(0x00);
    let pred0 = scorer.predict(&start);
    let mut search = Search { scorer, best: start, pred_max: pred0, trials: 0, bar: config.confidence_bar };

    for fill in 0x01..=0xffu8 {
        if search.check(padded(fill)) {
            return Ok(finish(search, AttackPhase::ConstantFill));
        }
    }

    if pad_len > 0 {
        let mut rng = seeded(rng_seed, 3);
        for _ in 0..config.random_trials {
            let len = rng.gen_range(1..=pad_len);
            let offset = base + rng.gen_range(0..=pad_len - len);
            let mut x = search.best.clone();
            for b in &mut x[offset..offset + len] {
                *b = b.wrapping_add(rng.gen::<u8>());
            }
            if search.check(x) {
                return Ok(finish(search, AttackPhase::RandomChunk));
            }
        }
    }
    Ok(finish(search, AttackPhase::Failed))
}

fn finish<S: BlackBoxScorer + ?Sized>(search: Search<'_, S>, phase: AttackPhase) -> AttackResult {
    AttackResult { adversarial_input: search.best, confidence: search.pred_max, phase, trials: search.trials }
}

/// `count` random byte strings, each of uniform length in
/// `[1, max_size / 2]`, for exercising the attack.
pub fn random_seed_inputs(count: usize, max_size: usize, seed: u64) -> Vec<Vec<u8>> {
    let mut rng = seeded(seed, 4);
    let longest = (max_size / 2).max(1);
    (0..count)
        .map(|_| {
            let len = rng.gen_range(1..=longest);
            (0..len).map(|_| rng.gen::<u8>()).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_sum_scorer_succeeds_by_fill() {
        let scorer = ByteSumScorer::new(64);
        let r = high_confidence_attack(&scorer, &[128; 32], 64, 1).unwrap();
        assert_eq!(r.phase, AttackPhase::ConstantFill);
        assert!(r.confidence > 0.97);
        assert!(r.trials <= 255);
        assert_eq!(r.adversarial_input.len(), 64);
        assert_eq!(&r.adversarial_input[..32], &[128; 32]);
    }

    #[test]
    fn constant_scorer_exhausts_budget() {
        let scorer = ConstantScorer { value: 0.5, max_size: 16 };
        let r = high_confidence_attack(&scorer, &[1, 2, 3], 16, 9).unwrap();
        assert_eq!(r.phase, AttackPhase::Failed);
        assert_eq!(r.trials, 255 + 1000);
        // Nothing beat the zero-padded start.
        assert_eq!(r.adversarial_input, [vec![1, 2, 3], vec![0; 13]].concat());
    }

    #[test]
    fn confident_seed_breaks_on_first_check() {
        let scorer = ConstantScorer { value: 0.99, max_size: 8 };
        let r = high_confidence_attack(&scorer, &[7], 8, 0).unwrap();
        assert_eq!(r.phase, AttackPhase::ConstantFill);
        assert_eq!(r.trials, 1);
        assert_eq!(r.confidence, 0.99);
    }

    #[test]
    fn full_seed_skips_random_phase() {
        let scorer = ConstantScorer { value: 0.1, max_size: 4 };
        let r = high_confidence_attack(&scorer, &[1, 2, 3, 4], 4, 0).unwrap();
        assert_eq!(r.phase, AttackPhase::Failed);
        assert_eq!(r.trials, 255);
        assert!(high_confidence_attack(&scorer, &[0; 5], 4, 0).is_err());
    }

    #[test]
    fn random_phase_can_succeed() {
        // Uniform padding always scores 0.5; otherwise the score is the
        // last byte, so only the random phase can clear the bar.
        struct LastByte;
        impl BlackBoxScorer for LastByte {
            fn predict(&self, x: &[u8]) -> f64 {
                let fill_all = x[1..].iter().all(|b| *b == x[1]);
                if fill_all { 0.5 } else { f64::from(x[x.len() - 1]) / 255.0 }
            }
            fn max_input_size(&self) -> usize {
                8
            }
        }
        let r = high_confidence_attack(&LastByte, &[0], 8, 5).unwrap();
        assert_eq!(r.phase, AttackPhase::RandomChunk);
        assert!(r.trials > 255 && r.trials <= 1255);
    }
}
