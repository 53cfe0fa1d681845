//! Exact figure data for the reference process: regular detector,
//! turbidity split, inversion, pinch-down and repair.

use anyhow::Result;
use turbidity::campaign::{augmented_posterior, default_cutoff, toxic_conditionals};
use turbidity::mitigation::repair_posterior;
use turbidity::numerics::linspace;
use turbidity::roc::{default_thetas, RocCurve};
use turbidity::{CampaignScenario, ExactRoc, PosteriorCurve, ReferenceDgp, ScoreDensity};

use crate::output::Outputs;

/// Points per density/posterior table.
const GRID: usize = 1001;

fn exact_roc(post: &PosteriorCurve, d0: &ScoreDensity, d1: &ScoreDensity) -> Result<RocCurve> {
    Ok(ExactRoc::new(post, d0, d1).curve(&default_thetas(post))?)
}

fn table(support: (f64, f64), columns: &[&dyn Fn(f64) -> f64]) -> Vec<Vec<f64>> {
    linspace(support.0, support.1, GRID)
        .into_iter()
        .map(|s| std::iter::once(s).chain(columns.iter().map(|f| f(s))).collect())
        .collect()
}

/// Point of the curve nearest the chance line, away from the corners.
fn closest_to_diagonal(roc: &RocCurve) -> Option<(f64, f64)> {
    roc.points
        .iter()
        .filter(|p| p.fpr > 0.01 && p.fpr < 0.99)
        .min_by(|a, b| (a.tpr - a.fpr).abs().total_cmp(&(b.tpr - b.fpr).abs()))
        .map(|p| (p.fpr, p.tpr))
}

pub fn run(out: &mut Outputs, scenario: &CampaignScenario) -> Result<()> {
    let dgp = ReferenceDgp::default();
    let sup = dgp.support();
    let range = (sup.lo, sup.hi);
    let t = dgp.bayes_threshold();

    let (d0, d1) = (dgp.regular_conditional(0), dgp.regular_conditional(1));
    let regular = dgp.regular_posterior();
    out.check_density("regular class 0", &d0);
    out.check_density("regular class 1", &d1);
    out.curves(
        "regular",
        "Regular class conditionals and posterior",
        &["s", "pdf0", "pdf1", "posterior"],
        &table(range, &[&|s| d0.pdf(s), &|s| d1.pdf(s), &|s| regular.eval(s)]),
    )?;
    let regular_roc = exact_roc(&regular, &d0, &d1)?;
    out.rocs("regular_roc", "Regular ROC", &[("regular", &regular_roc)])?;

    let pair = dgp.turbidity_conditionals(t)?;
    let turbid_post = dgp.turbidity_posterior(0.5)?;
    out.check_density("clear", &pair.clear);
    out.check_density("turbid", &pair.turbid);
    out.curves(
        "turbidity",
        "Clear and turbid conditionals, turbidity posterior",
        &["s", "pdf_clear", "pdf_turbid", "posterior_turbid"],
        &table(range, &[&|s| pair.clear.pdf(s), &|s| pair.turbid.pdf(s), &|s| turbid_post.eval(s)]),
    )?;

    let cutoff = default_cutoff(&dgp)?;
    let aug = augmented_posterior(&dgp, cutoff)?;
    out.curves(
        "inversion",
        "Regular and augmented posteriors",
        &["s", "posterior_regular", "posterior_augmented"],
        &table(range, &[&|s| regular.eval(s), &|s| aug.eval(s)]),
    )?;
    let inverted = exact_roc(&aug, &d0, &d1)?;
    out.rocs("inversion_roc", "ROC inversion", &[("augmented", &inverted), ("regular", &regular_roc)])?;

    let (t0, t1) = toxic_conditionals(&dgp, scenario)?;
    out.check_density("toxic class 0", &t0);
    out.check_density("toxic class 1", &t1);
    let pinched = exact_roc(&regular, &t0, &t1)?;
    out.rocs("pinch_roc", "ROC pinch-down", &[("toxic", &pinched), ("regular", &regular_roc)])?;

    let artifact = repair_posterior(&t0, &t1, scenario.prior_mal, t)?;
    let repaired_post = artifact.posterior();
    out.curves(
        "repair",
        "Toxic conditionals and repair posterior",
        &["s", "pdf0_toxic", "pdf1_toxic", "posterior_repaired"],
        &table(range, &[&|s| t0.pdf(s), &|s| t1.pdf(s), &|s| repaired_post.eval(s)]),
    )?;
    let repaired = exact_roc(repaired_post, &t0, &t1)?;
    out.rocs("repair_roc", "Repaired ROC", &[("repaired", &repaired), ("pinched", &pinched)])?;
    out.check(repaired.auc >= pinched.auc - 1e-6, || {
        format!("repair lowered AUC from {} to {}", pinched.auc, repaired.auc)
    });

    println!("cutoff: ±{cutoff:.4}");
    println!("AUC regular {:.4}, augmented {:.4}", regular_roc.auc, inverted.auc);
    if let Some((fpr, tpr)) = closest_to_diagonal(&pinched) {
        println!("scenario {}: pinch nearest the diagonal at fpr {fpr:.4}, tpr {tpr:.4}", scenario.id());
    }
    println!("AUC pinched {:.4}, repaired {:.4}; crossings {:?}", pinched.auc, repaired.auc, artifact.crossings());
    Ok(())
}
