//! Acceptance checks for the reference process, campaign environments,
//! mitigation, the attack harness and the monitor.
//!
//! Runs without the libtest harness so each check prints exactly one
//! PASS/FAIL line; the process exits nonzero if any check fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::OnceLock;

use turbidity::attack::{high_confidence_attack, random_seed_inputs, ByteSumScorer, ConstantScorer};
use turbidity::campaign::{
    augmented_posterior, covariate_shift_env, default_cutoff, sample_scenario, tail_dominant_campaign,
    toxic_conditionals,
};
use turbidity::estimator::{empirical_repair, unfold_scores};
use turbidity::mitigation::repair_posterior;
use turbidity::monitor::stream::{campaign_phases, campaign_stream, regular_stream};
use turbidity::monitor::table::{default_grid, precompute_table};
use turbidity::monitor::MitigationTable;
use turbidity::numerics::linspace;
use turbidity::roc::{accuracy_at, default_thetas, empirical_roc, sup_distance};
use turbidity::rng::seeded;
use turbidity::{
    CampaignKind, CampaignScenario, ExactRoc, Mode, Monitor, MonitorConfig, MulticlassScores, PosteriorCurve,
    ReferenceDgp, ScoreDensity,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Closed-form `F₁(0)` for uniform scores on `[−10, 10]` and logistic
/// noise: `∫σ` over the lower half, normalized by the class-1 mass ½.
fn f1_at_zero() -> f64 {
    (softplus(0.0) - softplus(-10.0)) / 10.0
}

fn dgp() -> ReferenceDgp {
    ReferenceDgp::default()
}

fn symmetric_env() -> (ScoreDensity, ScoreDensity) {
    toxic_conditionals(&dgp(), &CampaignScenario::symmetric()).unwrap()
}

fn balanced_at_half(post: &PosteriorCurve, d0: &ScoreDensity, d1: &ScoreDensity) -> f64 {
    let (fpr, tpr, _) = ExactRoc::new(post, d0, d1).point(0.5);
    0.5 * (1.0 - fpr + tpr)
}

fn turbid_mass() -> Outcome {
    let dgp = dgp();
    let quad = dgp.regular_conditional(1).cdf(0.0);
    let oracle = f1_at_zero();
    ensure((quad - oracle).abs() < 1e-9, || format!("quadrature {quad} vs closed form {oracle}"))?;
    ensure((quad - 0.0693).abs() <= 0.0005, || format!("F1(0) = {quad}"))?;
    Ok(format!("F1(0) = {quad:.6}"))
}

fn bayes_accuracy() -> Outcome {
    let dgp = dgp();
    let acc = accuracy_at(0.0, &dgp.regular_conditional(0), &dgp.regular_conditional(1), 0.5).unwrap();
    let oracle = 1.0 - f1_at_zero();
    ensure((acc - oracle).abs() < 1e-9, || format!("accuracy {acc} vs oracle {oracle}"))?;
    ensure((acc - 0.9307).abs() <= 0.001, || format!("accuracy {acc}"))?;
    Ok(format!("accuracy at 0 = {acc:.6}"))
}

fn turbidity_crossings() -> Outcome {
    let post = dgp().turbidity_posterior(0.5).map_err(|e| e.to_string())?;
    let c = post.crossings(0.5);
    let f1 = f1_at_zero();
    let oracle = ((1.0 - f1) / f1).ln();
    ensure(c.len() == 2, || format!("expected two crossings, got {c:?}"))?;
    ensure((c[0] + oracle).abs() < 1e-6 && (c[1] - oracle).abs() < 1e-6, || format!("{c:?} vs ±{oracle}"))?;
    ensure((c[1] - 2.597).abs() <= 0.005 && (c[0] + 2.597).abs() <= 0.005, || format!("{c:?}"))?;
    Ok(format!("crossings {:.4}, {:.4}", c[0], c[1]))
}

fn inversion_harm() -> Outcome {
    let dgp = dgp();
    let cut = default_cutoff(&dgp).map_err(|e| e.to_string())?;
    let aug = augmented_posterior(&dgp, cut).map_err(|e| e.to_string())?;
    let (d0, d1) = (dgp.regular_conditional(0), dgp.regular_conditional(1));
    let acc = balanced_at_half(&aug, &d0, &d1);
    // Decision 1 on [−c, 0) ∪ (c, 10]; integrate the matching label
    // probability over each piece.
    let oracle = (2.0 * (softplus(10.0) - softplus(cut)) + 2.0 * (softplus(0.0) - softplus(-cut))) / 20.0;
    ensure((acc - oracle).abs() < 1e-6, || format!("accuracy {acc} vs oracle {oracle}"))?;
    ensure((acc - 0.79).abs() <= 0.01, || format!("accuracy {acc}"))?;
    let roc = ExactRoc::new(&aug, &d0, &d1).curve(&default_thetas(&aug)).map_err(|e| e.to_string())?;
    // Above the Bayes threshold a proper ROC only gains tpr faster than
    // fpr. The inverted curve has a stretch there that runs below its own
    // chance slope, from accepting the class-0 band next to −cutoff.
    let sub_chance = |roc: &turbidity::RocCurve| {
        roc.points
            .windows(2)
            .filter(|w| w[1].theta > 0.5 && w[1].fpr - w[0].fpr > 1e-9 && w[1].tpr - w[0].tpr < w[1].fpr - w[0].fpr)
            .count()
    };
    let below = sub_chance(&roc);
    ensure(below > 0, || "no sub-chance segment above the Bayes threshold".into())?;
    let reg = dgp.regular_posterior();
    let proper = ExactRoc::new(&reg, &d0, &d1).curve(&default_thetas(&reg)).map_err(|e| e.to_string())?;
    ensure(sub_chance(&proper) == 0, || "regular ROC also has sub-chance segments".into())?;
    let regular = 1.0 - f1_at_zero();
    ensure(regular > acc, || "inversion did not hurt".into())?;
    Ok(format!("augmented accuracy {acc:.4} < {regular:.4}; {below} sub-chance segments above θ = ½"))
}

fn mass_ratio() -> Outcome {
    let dgp = dgp();
    let ratio = dgp.regular_conditional(0).cdf(0.0) / dgp.regular_conditional(1).cdf(0.0);
    let f1 = f1_at_zero();
    let oracle = (1.0 - f1) / f1;
    ensure((ratio - oracle).abs() < 1e-6, || format!("{ratio} vs {oracle}"))?;
    ensure((ratio - 13.4).abs() <= 0.1, || format!("ratio {ratio}"))?;
    Ok(format!("F0(0)/F1(0) = {ratio:.4}"))
}

fn monte_carlo_clear_count() -> Outcome {
    let set = dgp().sample(10_000, 20_240_601);
    let clear = set.count(turbidity::Clarity::Clear) as f64;
    let p = 1.0 - f1_at_zero();
    let sigma = (10_000.0 * p * (1.0 - p)).sqrt();
    ensure((clear - 9303.0).abs() <= 3.0 * sigma, || format!("{clear} clear, band ±{:.1}", 3.0 * sigma))?;
    Ok(format!("{clear} clear of 10000 (3σ = {:.1})", 3.0 * sigma))
}

fn symmetric_pinch() -> Outcome {
    let dgp = dgp();
    let (t0, t1) = symmetric_env();
    let acc = accuracy_at(0.0, &t0, &t1, 0.5).unwrap();
    ensure((acc - 0.5).abs() <= 0.005, || format!("balanced accuracy {acc}"))?;
    let reg = dgp.regular_posterior();
    let roc = ExactRoc::new(&reg, &t0, &t1).curve(&default_thetas(&reg)).map_err(|e| e.to_string())?;
    let pinch = roc
        .points
        .iter()
        .filter(|p| p.fpr > 0.01 && p.fpr < 0.99)
        .map(|p| (p.tpr - p.fpr).abs())
        .fold(f64::INFINITY, f64::min);
    ensure(pinch <= 0.01, || format!("closest interior approach to the diagonal {pinch}"))?;
    Ok(format!("accuracy {acc:.4}; interior |tpr-fpr| reaches {pinch:.2e}"))
}

fn repair_dominance() -> Outcome {
    let dgp = dgp();
    let (t0, t1) = symmetric_env();
    let art = repair_posterior(&t0, &t1, 0.5, 0.0).map_err(|e| e.to_string())?;
    let reg = dgp.regular_posterior();
    let pinched = ExactRoc::new(&reg, &t0, &t1);
    let repaired = ExactRoc::new(art.posterior(), &t0, &t1);
    let mut worst = f64::INFINITY;
    for k in 0..512 {
        let fpr = k as f64 / 511.0;
        worst = worst.min(repaired.tpr_at_fpr(fpr) - pinched.tpr_at_fpr(fpr));
    }
    ensure(worst >= -1e-6, || format!("repaired ROC falls {worst} below the pinched one"))?;
    let bal = balanced_at_half(art.posterior(), &t0, &t1);
    ensure(bal >= 0.70, || format!("repaired balanced accuracy {bal}"))?;
    Ok(format!("min gap {worst:.2e}; repaired balanced accuracy {bal:.4}"))
}

fn covariate_shift() -> Outcome {
    let dgp = dgp();
    let (c0, c1) = covariate_shift_env(&dgp).map_err(|e| e.to_string())?;
    let post = PosteriorCurve::from_densities(&c0, &c1, 0.5);
    let worst = linspace(-10.0, 10.0, 1001).into_iter().map(|s| (post.eval(s) - sigmoid(s)).abs()).fold(0.0, f64::max);
    ensure(worst <= 1e-6, || format!("posterior deviates from the noise CDF by {worst}"))?;
    Ok(format!("max |P(1|s) - F(s)| = {worst:.2e}"))
}

fn exact_vs_monte_carlo() -> Outcome {
    let dgp = dgp();
    let n = 200_000;
    let regular = dgp.sample(n, 7);
    let sym = CampaignScenario::symmetric();
    let toxic = sample_scenario(&dgp, &sym, n, 8).map_err(|e| e.to_string())?;
    let (d0, d1) = (dgp.regular_conditional(0), dgp.regular_conditional(1));
    let (t0, t1) = symmetric_env();
    let reg_post = dgp.regular_posterior();
    let aug = augmented_posterior(&dgp, default_cutoff(&dgp).unwrap()).unwrap();
    let repaired = repair_posterior(&t0, &t1, 0.5, 0.0).map_err(|e| e.to_string())?;

    let cases: [(&str, &PosteriorCurve, &ScoreDensity, &ScoreDensity, &turbidity::LabeledScoreSet); 4] = [
        ("regular", &reg_post, &d0, &d1, &regular),
        ("inverted", &aug, &d0, &d1, &regular),
        ("pinched", &reg_post, &t0, &t1, &toxic),
        ("repaired", repaired.posterior(), &t0, &t1, &toxic),
    ];
    let mut notes = Vec::new();
    for (name, post, n0, n1, set) in cases {
        let exact = ExactRoc::new(post, n0, n1).curve(&default_thetas(post)).map_err(|e| e.to_string())?;
        let values: Vec<f64> = set.scores.iter().map(|s| post.eval(*s)).collect();
        let empirical = empirical_roc(&values, &set.labels, 1).map_err(|e| e.to_string())?;
        let d = sup_distance(&exact, &empirical);
        ensure(d <= 0.02, || format!("{name}: sup distance {d}"))?;
        notes.push(format!("{name} {d:.4}"));
    }
    Ok(notes.join(", "))
}

fn no_repair_regime() -> Outcome {
    let dgp = dgp();
    let prior = 0.95;
    let f1 = f1_at_zero();
    ensure(!(f1 < prior && prior < 1.0 - f1), || "prior is inside the repairable interval".into())?;
    let scenario = CampaignScenario::new(CampaignKind::SymmetricToxic, 0.5, 0.5, prior).unwrap();
    let (t0, t1) = toxic_conditionals(&dgp, &scenario).unwrap();
    let art = repair_posterior(&t0, &t1, prior, 0.0).map_err(|e| e.to_string())?;
    ensure(art.reversal_intervals().is_empty(), || format!("reversals {:?}", art.reversal_intervals()))?;
    ensure(art.crossings().len() == 1, || format!("crossings {:?}", art.crossings()))?;
    // The posterior only dips toward ½ once, and never back below it.
    let dt = art.decision_threshold();
    let rule_ok = linspace(-10.0, 10.0, 2001).into_iter().all(|s| art.decide(s) == u8::from(art.posterior().eval(s) >= 0.5) || (s - dt).abs() < 1e-6);
    ensure(rule_ok, || "threshold rule disagrees with the posterior".into())?;
    Ok(format!("threshold-only at {dt:.4}, no reversals"))
}

fn attack_harness() -> Outcome {
    let max = 256;
    let seeds = random_seed_inputs(100, max, 99);
    let scorer = ByteSumScorer::new(max);
    let mut wins = 0;
    for (i, seed) in seeds.iter().enumerate() {
        let r = high_confidence_attack(&scorer, seed, max, i as u64).map_err(|e| e.to_string())?;
        ensure(r.trials <= 255 + 1000, || format!("seed {i} used {} trials", r.trials))?;
        if r.succeeded() {
            ensure(r.confidence > 0.97, || format!("seed {i} succeeded at {}", r.confidence))?;
            wins += 1;
        }
    }
    ensure(wins >= 95, || format!("{wins}/100 successes"))?;
    let flat = ConstantScorer { value: 0.5, max_size: max };
    let flat_wins = seeds
        .iter()
        .enumerate()
        .filter(|(i, s)| high_confidence_attack(&flat, s, max, *i as u64).map(|r| r.succeeded()).unwrap_or(true))
        .count();
    ensure(flat_wins == 0, || format!("constant scorer was beaten {flat_wins} times"))?;
    Ok(format!("byte-sum scorer {wins}/100, constant scorer 0/100"))
}

fn table() -> &'static MitigationTable {
    static TABLE: OnceLock<MitigationTable> = OnceLock::new();
    TABLE.get_or_init(|| precompute_table(&dgp(), &default_grid(&dgp()), 42).expect("table"))
}

fn balanced(c: [[u64; 2]; 2]) -> f64 {
    0.5 * (c[0][0] as f64 / (c[0][0] + c[0][1]) as f64 + c[1][1] as f64 / (c[1][0] + c[1][1]) as f64)
}

fn monitor_end_to_end() -> Outcome {
    let dgp = dgp();
    let table = table();
    let records = campaign_stream(&dgp, 7).map_err(|e| e.to_string())?;
    let toxic_range = campaign_phases()[0].n..campaign_phases()[0].n + campaign_phases()[1].n;
    let mut m = Monitor::new(MonitorConfig::new(dgp));
    let mut trace = vec![m.mode()];
    let (mut mitigated, mut raw) = ([[0u64; 2]; 2], [[0u64; 2]; 2]);
    let mut offset = 0;
    for chunk in records.chunks(1000) {
        for (i, r) in chunk.iter().enumerate() {
            let y = r.label.unwrap() as usize;
            if m.mode() == Mode::Mitigated && toxic_range.contains(&(offset + i)) {
                mitigated[y][m.transform(r.score).1 as usize] += 1;
                raw[y][usize::from(r.score >= 0.0)] += 1;
            }
        }
        offset += chunk.len();
        m.ingest(chunk).map_err(|e| e.to_string())?;
        let mode = m.evaluate(table).map_err(|e| e.to_string())?;
        if *trace.last().unwrap() != mode {
            trace.push(mode);
        }
    }
    let expected = [Mode::Regular, Mode::Suspected, Mode::Mitigated, Mode::Restoring, Mode::Regular];
    ensure(trace == expected, || format!("mode trace {trace:?}"))?;
    ensure(m.state().active_mitigation.is_none(), || "mitigation still active at the end".into())?;
    let (bm, bu) = (balanced(mitigated), balanced(raw));
    let scored: u64 = mitigated.iter().flatten().sum();
    ensure(bm >= 0.70 && bu <= 0.55, || format!("balanced accuracy {bm} mitigated vs {bu} raw"))?;

    let mut quiet = Monitor::new(MonitorConfig::new(dgp));
    let stream = regular_stream(&dgp, 502_000, 11).map_err(|e| e.to_string())?;
    for chunk in stream.chunks(500) {
        quiet.ingest(chunk).map_err(|e| e.to_string())?;
        quiet.evaluate(table).map_err(|e| e.to_string())?;
        if quiet.state().evaluations == 1000 {
            break;
        }
    }
    let evals = quiet.state().evaluations;
    ensure(evals == 1000, || format!("only {evals} evaluations ran"))?;
    ensure(quiet.state().deployments == 0, || format!("{} false deployments", quiet.state().deployments))?;
    Ok(format!(
        "trace ok; balanced accuracy {bm:.3} mitigated vs {bu:.3} raw over {scored} samples; 0 deployments in {evals} regular evaluations"
    ))
}

fn desk_scale_substitutes() -> Outcome {
    let dgp = dgp();
    let set = tail_dominant_campaign(&dgp, 40_000, 20_000, 3);
    let art = empirical_repair(&set.class_scores(0), &set.class_scores(1), 0.5, 0.0).map_err(|e| e.to_string())?;
    let c = art.crossings();
    ensure(c.len() == 4, || format!("crossings {c:?}"))?;
    ensure(!c.iter().any(|x| x.abs() > 0.5 && x.abs() < 4.0), || format!("crossing inside the quiet centre: {c:?}"))?;

    let two = MulticlassScores::new(vec![vec![0.3, 1.7]], 1).unwrap();
    ensure((unfold_scores(&two)[0] - 0.7).abs() < 1e-12, || "two-class unfolding".into())?;
    let mut rng = seeded(5, 0);
    use rand::Rng;
    for _ in 0..1000 {
        let k = rng.gen_range(2..=10);
        let row: Vec<f64> = (0..k).map(|_| rng.gen_range(-20.0..20.0)).collect();
        let shift = rng.gen_range(-100.0..100.0);
        let shifted: Vec<f64> = row.iter().map(|v| v + shift).collect();
        let t = rng.gen_range(0..k);
        let a = unfold_scores(&MulticlassScores::new(vec![row.clone()], t).unwrap())[0];
        let b = unfold_scores(&MulticlassScores::new(vec![shifted], t).unwrap())[0];
        ensure((a - b).abs() < 1e-9, || format!("shift changed {a} to {b} for {row:?}"))?;
    }
    Ok(format!("4 crossings at {:.2}, {:.2}, {:.2}, {:.2}; unfolding shift-invariant", c[0], c[1], c[2], c[3]))
}

fn main() -> ExitCode {
    let checks: [(&str, fn() -> Outcome); 14] = [
        ("turbid class-1 mass F1(0)", turbid_mass),
        ("regular Bayes accuracy", bayes_accuracy),
        ("turbidity posterior crossings", turbidity_crossings),
        ("augmented detector inversion", inversion_harm),
        ("clear to turbid mass ratio", mass_ratio),
        ("Monte Carlo clear count", monte_carlo_clear_count),
        ("symmetric campaign pinch", symmetric_pinch),
        ("repair dominance", repair_dominance),
        ("covariate shift keeps posterior", covariate_shift),
        ("exact vs Monte Carlo ROC", exact_vs_monte_carlo),
        ("no-repair regime", no_repair_regime),
        ("attack harness", attack_harness),
        ("monitor end to end", monitor_end_to_end),
        ("desk-scale substitutes", desk_scale_substitutes),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} acceptance checks passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
