//! Evaluation: worst best-effort violation (MAE_δ), the per-prefix lower
//! bound, cumulative accuracy curves and overall accuracy.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::befair::{Adversary, BefairConfig, BefairOutcome, FictitiousPlay, PlayState, ViolationReport};
use crate::error::{Error, Result};
use crate::model::{dot, group_error, group_size, Dataset, Hypothesis, RandomizedClassifier};
use crate::oracle::{restricted_best_response, Oracle};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x_index: usize,
    pub value: f64,
    pub subset_size: usize,
}

/// Largest violation `err_g(D) − δ·err_g(h')` the adversary can find against
/// a fixed `D`, in error counts. The search is heuristic, so this is a lower
/// estimate of the true maximum.
pub fn mae_delta(ds: &Dataset, d: &RandomizedClassifier, delta: f64, adversary: &dyn Adversary) -> Result<(f64, ViolationReport)> {
    if !(delta >= 1.0) {
        return Err(Error::Config(format!("delta must be >= 1, got {delta}")));
    }
    let t = d.expected_error(ds)?;
    let c = adversary.search(ds, &t, delta)?;
    let v = c.violation(0.0);
    Ok((
        v,
        ViolationReport {
            round: 0,
            group_size: group_size(&c.mask),
            group: c.group,
            challenger: c.challenger,
            violation: v,
        },
    ))
}

/// A count as a percentage of the whole data set.
pub fn as_percent(count: f64, n: usize) -> f64 {
    count * 100.0 / n as f64
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// The smallest converging γ, if any.
    pub gamma: Option<f64>,
    pub outcome: Option<BefairOutcome>,
    /// Every γ tried, with whether it converged.
    pub tried: Vec<(f64, bool)>,
}

/// The smallest γ in an ascending grid for which fictitious play converges.
///
/// Runs differing only in γ follow the same trajectory until they stop (γ
/// only decides whether a round's best violation ends the run), so one run at
/// the smallest γ is replayed for the larger ones. The result is identical to
/// running each γ separately.
pub fn gamma_sweep(
    ds: &Dataset,
    grid: &[f64],
    cfg: &BefairConfig,
    learner: &dyn Oracle,
    adversary: &dyn Adversary,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::Config("gamma grid is empty".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("gamma grid must be strictly ascending".into()));
    }
    let base = grid[0];
    let run_cfg = BefairConfig { gamma: base, ..cfg.clone() };
    let out = FictitiousPlay::new(ds, run_cfg, learner, adversary)?.run()?;
    let mut tried = vec![(base, out.converged)];
    log::info!("gamma {base}: converged = {} after {} rounds", out.converged, out.history.len());
    if out.converged {
        return Ok(SweepResult {
            gamma: Some(base),
            outcome: Some(out),
            tried,
        });
    }
    for &gamma in &grid[1..] {
        let stop = out.history.iter().position(|r| r.violation + base - gamma <= 0.0);
        tried.push((gamma, stop.is_some()));
        let Some(k) = stop else { continue };
        let rounds = k + 1;
        let state = PlayState {
            learners: out.state.learners[..rounds].to_vec(),
            duals: out.state.duals[..k].to_vec(),
            history: out.history[..rounds]
                .iter()
                .map(|r| ViolationReport {
                    violation: r.violation + base - gamma,
                    ..r.clone()
                })
                .collect(),
            converged: true,
            finished: true,
        };
        log::info!("gamma {gamma}: converged after {rounds} rounds");
        return Ok(SweepResult {
            gamma: Some(gamma),
            outcome: Some(BefairOutcome {
                classifier: state.average_classifier()?,
                history: state.history.clone(),
                converged: true,
                state,
            }),
            tried,
        });
    }
    Ok(SweepResult {
        gamma: None,
        outcome: None,
        tried,
    })
}

fn margin(h: &Hypothesis, ds: &Dataset, i: usize) -> f64 {
    match h {
        Hypothesis::Linear { theta } => ds.label(i) * dot(ds.row(i), theta),
        Hypothesis::Tabular { correct } => {
            if correct[i] {
                1.0
            } else {
                -1.0
            }
        }
    }
}

/// Point indices sorted by the scorer's expected signed margin on the true
/// label, least confident first. Ties keep index order.
pub fn score_ordering(ds: &Dataset, scorer: &RandomizedClassifier) -> Result<Vec<usize>> {
    for h in scorer.support() {
        h.check_compatible(ds)?;
    }
    let scores: Vec<f64> = (0..ds.n())
        .map(|i| scorer.support().iter().zip(scorer.probs()).map(|(h, p)| p * margin(h, ds, i)).sum())
        .collect();
    let mut order: Vec<usize> = (0..ds.n()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    Ok(order)
}

fn check_ordering(n: usize, ordering: &[usize]) -> Result<()> {
    let mut seen = vec![false; n];
    if ordering.len() != n {
        return Err(Error::Shape {
            what: "ordering",
            expected: n,
            got: ordering.len(),
        });
    }
    for &i in ordering {
        if i >= n || seen[i] {
            return Err(Error::Config("ordering is not a permutation of the points".into()));
        }
        seen[i] = true;
    }
    Ok(())
}

/// Prefix sizes `stride, 2·stride, …` plus the full set.
fn prefix_sizes(n: usize, stride: usize) -> Vec<usize> {
    let mut sizes: Vec<usize> = (1..=n / stride).map(|k| k * stride).collect();
    if sizes.last() != Some(&n) {
        sizes.push(n);
    }
    sizes
}

/// `α·û²` on each prefix, with `α = |g|/n` and `û` the accuracy of the oracle
/// trained on the prefix alone. `x_index` is the position of the prefix's
/// last point.
pub fn lower_bound_curve(ds: &Dataset, ordering: &[usize], oracle: &dyn Oracle, stride: usize) -> Result<Vec<CurvePoint>> {
    check_ordering(ds.n(), ordering)?;
    if stride == 0 {
        return Err(Error::Config("stride must be at least 1".into()));
    }
    let n = ds.n();
    prefix_sizes(n, stride)
        .into_par_iter()
        .map(|k| {
            let mut mask = vec![false; n];
            for &i in &ordering[..k] {
                mask[i] = true;
            }
            let h = restricted_best_response(oracle, ds, &mask)?;
            let u = crate::model::as_real(&h.utility_vector(ds)?);
            let acc = 1.0 - group_error(&mask, &u)? / k as f64;
            let alpha = k as f64 / n as f64;
            Ok(CurvePoint {
                x_index: k - 1,
                value: alpha * acc * acc,
                subset_size: k,
            })
        })
        .collect()
}

/// Prefix means of the mixture's per-point utility.
pub fn cumulative_accuracy(ds: &Dataset, ordering: &[usize], d: &RandomizedClassifier) -> Result<Vec<CurvePoint>> {
    check_ordering(ds.n(), ordering)?;
    let u = d.utility(ds)?;
    let mut total = 0.0;
    Ok(ordering
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            total += u[i];
            CurvePoint {
                x_index: k,
                value: total / (k + 1) as f64,
                subset_size: k + 1,
            }
        })
        .collect())
}

pub fn overall_accuracy(ds: &Dataset, d: &RandomizedClassifier) -> Result<f64> {
    let u = d.utility(ds)?;
    Ok(u.iter().sum::<f64>() / u.len() as f64)
}

pub fn write_curve_csv(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in curve {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
