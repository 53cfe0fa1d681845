//! Exact and empirical ROC curves, including the multibranched sweep for
//! nonmonotonic posteriors, plus operating-point selection.

use serde::{Deserialize, Serialize};

use crate::density::ScoreDensity;
use crate::error::{invalid, Error, Result};
use crate::numerics::{brent, linspace, ROOT_TOL};
use crate::posterior::{Direction, PosteriorCurve};

/// Uniform posterior-threshold grid size used by default sweeps.
pub const THETA_GRID: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Posterior threshold (multibranched sweep) or score (raw sweeps).
    pub theta: f64,
    pub branch: u32,
}

/// ROC points ordered by descending threshold, from `(0, 0)` to `(1, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub branch_count: usize,
    pub auc: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub theta: f64,
    pub fpr: f64,
    pub tpr: f64,
    pub youden: f64,
}

impl OperatingPoint {
    pub fn balanced_accuracy(&self) -> f64 {
        balanced_accuracy(self.fpr, self.tpr)
    }

    pub fn accuracy(&self, prior_target: f64) -> f64 {
        (1.0 - self.fpr) * (1.0 - prior_target) + self.tpr * prior_target
    }
}

pub fn balanced_accuracy(fpr: f64, tpr: f64) -> f64 {
    0.5 * (1.0 - fpr + tpr)
}

impl RocCurve {
    /// Assembles a curve from points already in descending-threshold order,
    /// pinning the first and last points to the corners exactly.
    fn finish(mut points: Vec<RocPoint>) -> Self {
        for p in &mut points {
            p.fpr = p.fpr.clamp(0.0, 1.0);
            p.tpr = p.tpr.clamp(0.0, 1.0);
        }
        if let Some(first) = points.first_mut() {
            first.fpr = 0.0;
            first.tpr = 0.0;
        }
        if let Some(last) = points.last_mut() {
            last.fpr = 1.0;
            last.tpr = 1.0;
        }
        let branch_count = points.iter().map(|p| p.branch).max().map_or(0, |b| b as usize + 1);
        let mut curve = Self { points, branch_count, auc: 0.0 };
        curve.auc = auc(&curve);
        curve
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The curve in 45°-rotated coordinates `(fpr + tpr, tpr − fpr)`.
    fn rotated(&self) -> Vec<(f64, f64)> {
        let mut uv: Vec<(f64, f64)> = self.points.iter().map(|p| (p.fpr + p.tpr, p.tpr - p.fpr)).collect();
        // Exact curves can wobble by quadrature noise; keep u nondecreasing.
        for i in 1..uv.len() {
            if uv[i].0 < uv[i - 1].0 {
                uv[i].0 = uv[i - 1].0;
            }
        }
        uv
    }

    /// Youden index `tpr − fpr` interpolated at position `u = fpr + tpr`.
    fn youden_profile_at(uv: &[(f64, f64)], u: f64) -> f64 {
        let k = uv.partition_point(|p| p.0 < u);
        if k == 0 {
            return uv[0].1;
        }
        if k >= uv.len() {
            return uv[uv.len() - 1].1;
        }
        let (u0, v0) = uv[k - 1];
        let (u1, v1) = uv[k];
        if u1 == u0 {
            v1
        } else {
            v0 + (v1 - v0) * (u - u0) / (u1 - u0)
        }
    }
}

/// Sup-norm distance between two ROC curves, measured perpendicular to the
/// chance diagonal: the largest gap in `tpr − fpr` at equal `fpr + tpr`.
///
/// Both curves are treated as polylines, so the maximum is attained at a
/// vertex of one of them; all vertices and a 512-point grid are checked.
/// Unlike a vertical gap this stays bounded where a curve is nearly
/// vertical or horizontal.
pub fn sup_distance(a: &RocCurve, b: &RocCurve) -> f64 {
    let (ua, ub) = (a.rotated(), b.rotated());
    let mut probes: Vec<f64> = linspace(0.0, 2.0, THETA_GRID);
    probes.extend(ua.iter().map(|p| p.0));
    probes.extend(ub.iter().map(|p| p.0));
    probes
        .into_iter()
        .map(|u| (RocCurve::youden_profile_at(&ua, u) - RocCurve::youden_profile_at(&ub, u)).abs())
        .fold(0.0, f64::max)
}

/// Trapezoidal area, signed by the direction of travel in `fpr`.
///
/// Below-diagonal stretches are reported as they are, not clipped.
pub fn auc(roc: &RocCurve) -> f64 {
    roc.points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) * 0.5).sum()
}

/// ROC of the rule `s ≥ threshold` swept over the score axis:
/// `(1 − F_nontarget(s), 1 − F_target(s))`.
///
/// The score grid is `n_points` uniform points plus both densities'
/// breakpoints. `theta` holds the score.
pub fn roc_monotone_sweep(nontarget: &ScoreDensity, target: &ScoreDensity, n_points: usize) -> RocCurve {
    let support = nontarget.support().union(&target.support());
    let mut grid = linspace(support.lo, support.hi, n_points.max(2));
    grid.extend(nontarget.breakpoints().iter().chain(target.breakpoints()).copied());
    grid.sort_by(|a, b| b.total_cmp(a));
    grid.dedup();
    let points = grid
        .into_iter()
        .map(|s| RocPoint { fpr: 1.0 - nontarget.cdf(s), tpr: 1.0 - target.cdf(s), theta: s, branch: 0 })
        .collect();
    RocCurve::finish(points)
}

#[derive(Clone, Copy, Debug)]
struct Segment {
    a: f64,
    b: f64,
    dir: Direction,
    pa: f64,
    pb: f64,
    fa: (f64, f64),
    fb: (f64, f64),
}

/// Exact ROC of thresholding a (possibly nonmonotonic) posterior.
///
/// For a threshold `θ`, every monotone segment of the posterior contributes
/// the class masses of its part of `{s : P(s) > θ}`. On an increasing
/// segment `[a, b]` that part is `(c, b]`, on a decreasing one `[a, c)`,
/// where `c` is the root of `P(s) − θ` or, when `θ` lies outside the
/// segment's range, the endpoint that makes the part empty or full. With
/// alternating directions starting upward this telescopes to
/// `B + Σ_seg (−1)^seg F(c_seg)` with `B = (1 − (−1)^N_seg)/2`.
pub struct ExactRoc<'a> {
    posterior: &'a PosteriorCurve,
    nontarget: &'a ScoreDensity,
    target: &'a ScoreDensity,
    segments: Vec<Segment>,
}

impl<'a> ExactRoc<'a> {
    pub fn new(posterior: &'a PosteriorCurve, nontarget: &'a ScoreDensity, target: &'a ScoreDensity) -> Self {
        let segments = posterior
            .segments()
            .map(|(a, b)| {
                let (pa, pb) = posterior.segment_limits(a, b);
                Segment {
                    a,
                    b,
                    dir: if pb >= pa { Direction::Increasing } else { Direction::Decreasing },
                    pa,
                    pb,
                    fa: (nontarget.cdf(a), target.cdf(a)),
                    fb: (nontarget.cdf(b), target.cdf(b)),
                }
            })
            .collect();
        Self { posterior, nontarget, target, segments }
    }

    fn root(&self, seg: &Segment, theta: f64) -> f64 {
        let eps = (seg.b - seg.a) * 1e-12;
        brent(|s| self.posterior.eval(s) - theta, seg.a + eps, seg.b - eps, ROOT_TOL).unwrap_or_else(|_| {
            // Jumps can defeat the sign check near the ends; fall back to a
            // predicate bisection, which only needs monotonicity.
            let up = seg.dir == Direction::Increasing;
            crate::numerics::bisect_predicate(
                |s| (self.posterior.eval(s) > theta) == up,
                seg.a,
                seg.b,
                ROOT_TOL,
            )
        })
    }

    /// `(fpr, tpr, interior_roots)` for the rule `P(s) > θ`.
    pub fn point(&self, theta: f64) -> (f64, f64, usize) {
        let (fpr, tpr, active) = self.point_detail(theta);
        (fpr, tpr, active.len())
    }

    /// Like [`point`](Self::point), but lists the segments holding a root.
    fn point_detail(&self, theta: f64) -> (f64, f64, Vec<usize>) {
        let (mut fpr, mut tpr, mut roots) = (0.0, 0.0, Vec::new());
        for (i, seg) in self.segments.iter().enumerate() {
            match seg.dir {
                Direction::Increasing => {
                    let (c_non, c_tgt) = if seg.pa > theta {
                        seg.fa
                    } else if seg.pb <= theta {
                        seg.fb
                    } else {
                        roots.push(i);
                        let c = self.root(seg, theta);
                        (self.nontarget.cdf(c), self.target.cdf(c))
                    };
                    fpr += seg.fb.0 - c_non;
                    tpr += seg.fb.1 - c_tgt;
                }
                Direction::Decreasing => {
                    let (c_non, c_tgt) = if seg.pa <= theta {
                        seg.fa
                    } else if seg.pb > theta {
                        seg.fb
                    } else {
                        roots.push(i);
                        let c = self.root(seg, theta);
                        (self.nontarget.cdf(c), self.target.cdf(c))
                    };
                    fpr += c_non - seg.fa.0;
                    tpr += c_tgt - seg.fa.1;
                }
            }
        }
        (fpr.clamp(0.0, 1.0), tpr.clamp(0.0, 1.0), roots)
    }

    /// Samples the curve at `thetas` (each in `(0, 1)`), adding the exact
    /// corner points at `θ = 1` and `θ = 0`.
    pub fn curve(&self, thetas: &[f64]) -> Result<RocCurve> {
        if thetas.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(invalid("posterior thresholds must lie strictly inside (0, 1)"));
        }
        let mut sorted = thetas.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        sorted.dedup();
        let mut points = Vec::with_capacity(sorted.len() + 2);
        points.push(RocPoint { fpr: 0.0, tpr: 0.0, theta: 1.0, branch: 0 });
        let mut branch = 0u32;
        let mut last_roots: Option<Vec<usize>> = None;
        for theta in sorted {
            let (fpr, tpr, roots) = self.point_detail(theta);
            // A branch is the set of segments holding a root. A θ sitting
            // exactly on an extremum value has none and stays on the
            // current branch.
            if !roots.is_empty() {
                if last_roots.as_ref().is_some_and(|prev| *prev != roots) {
                    branch += 1;
                }
                last_roots = Some(roots);
            }
            points.push(RocPoint { fpr, tpr, theta, branch });
        }
        points.push(RocPoint { fpr: 1.0, tpr: 1.0, theta: 0.0, branch });
        Ok(RocCurve::finish(points))
    }

    /// Default threshold set: a uniform grid on `(0, 1)` joined with the
    /// posterior values at every extremum preimage.
    pub fn default_thetas(&self) -> Vec<f64> {
        default_thetas(self.posterior)
    }

    /// True-positive rate at a given false-positive rate, found by
    /// bisection on `θ`. Across a jump in `fpr(θ)` the two sides are joined
    /// linearly.
    pub fn tpr_at_fpr(&self, fpr: f64) -> f64 {
        let fpr = fpr.clamp(0.0, 1.0);
        // fpr(θ) is nonincreasing: hi_theta side has fpr ≤ target.
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let (mut p_lo, mut p_hi) = ((1.0, 1.0), (0.0, 0.0));
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            let (f, t, _) = self.point(mid);
            if f > fpr {
                lo = mid;
                p_lo = (f, t);
            } else {
                hi = mid;
                p_hi = (f, t);
            }
        }
        if p_lo.0 - p_hi.0 <= 1e-12 {
            return p_hi.1;
        }
        p_hi.1 + (p_lo.1 - p_hi.1) * (fpr - p_hi.0) / (p_lo.0 - p_hi.0)
    }
}

pub fn default_thetas(posterior: &PosteriorCurve) -> Vec<f64> {
    let mut thetas: Vec<f64> = (1..=THETA_GRID).map(|k| k as f64 / (THETA_GRID + 1) as f64).collect();
    thetas.extend(posterior.extremum_values().into_iter().filter(|t| *t > 0.0 && *t < 1.0));
    thetas.sort_by(|a, b| b.total_cmp(a));
    thetas.dedup();
    thetas
}

/// Multibranched exact ROC of thresholding `posterior` at each of `thetas`.
pub fn roc_multibranched(
    posterior: &PosteriorCurve,
    nontarget: &ScoreDensity,
    target: &ScoreDensity,
    thetas: &[f64],
) -> Result<RocCurve> {
    ExactRoc::new(posterior, nontarget, target).curve(thetas)
}

/// Empirical ROC over observed values with one point per distinct value.
///
/// `theta` of the leading `(0, 0)` point is `+∞`.
pub fn empirical_roc(values: &[f64], labels: &[u8], target: u8) -> Result<RocCurve> {
    if values.len() != labels.len() {
        return Err(invalid("values and labels differ in length"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(invalid("values contain NaN"));
    }
    let positives = labels.iter().filter(|l| **l == target).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedRoc("both target and non-target labels are required".into()));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let mut points = Vec::with_capacity(values.len() + 1);
    points.push(RocPoint { fpr: 0.0, tpr: 0.0, theta: f64::INFINITY, branch: 0 });
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let v = values[order[i]];
        while i < order.len() && values[order[i]] == v {
            if labels[order[i]] == target {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
            theta: v,
            branch: 0,
        });
    }
    Ok(RocCurve::finish(points))
}

/// Operating point maximizing `tpr − fpr`; ties (within 1e-12) go to the
/// smaller `fpr`, then the larger threshold.
pub fn youden_point(roc: &RocCurve) -> Result<OperatingPoint> {
    const TIE: f64 = 1e-12;
    let mut best: Option<&RocPoint> = None;
    for p in &roc.points {
        let better = match best {
            None => true,
            Some(b) => {
                let (jp, jb) = (p.tpr - p.fpr, b.tpr - b.fpr);
                if (jp - jb).abs() > TIE {
                    jp > jb
                } else if p.fpr != b.fpr {
                    p.fpr < b.fpr
                } else {
                    p.theta > b.theta
                }
            }
        };
        if better {
            best = Some(p);
        }
    }
    let best = best.ok_or_else(|| invalid("empty ROC"))?;
    Ok(OperatingPoint { theta: best.theta, fpr: best.fpr, tpr: best.tpr, youden: best.tpr - best.fpr })
}

/// Accuracy of the rule `s ≥ θ`: `F₀(θ)(1 − π₁) + (1 − F₁(θ))π₁`.
pub fn accuracy_at(theta: f64, class0: &ScoreDensity, class1: &ScoreDensity, prior_mal: f64) -> Result<f64> {
    if !(prior_mal > 0.0 && prior_mal < 1.0) {
        return Err(invalid(format!("prior_mal must lie in (0, 1), got {prior_mal}")));
    }
    Ok(class0.cdf(theta) * (1.0 - prior_mal) + (1.0 - class1.cdf(theta)) * prior_mal)
}
