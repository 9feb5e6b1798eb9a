//! The greedy covering classifier: repeatedly take the hypothesis that is
//! correct on the most not-yet-covered points and weight it by the fraction
//! of points it newly covers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Hypothesis, RandomizedClassifier};
use crate::oracle::{restricted_best_response, Oracle};
use crate::pf_exact::UtilityMatrix;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    LowestIndex,
    HighestIndex,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    /// Scan an explicit hypothesis list.
    #[default]
    ExhaustiveTabular,
    /// Build a pool from oracle calls: plain ERM plus one fit restricted to
    /// the uncovered points per round.
    WeightedErm,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GreedyConfig {
    pub tie_break: TieBreak,
    pub oracle: CandidateSource,
}

/// One round: the chosen candidate and the points it newly covered.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreedyRound {
    pub pick: usize,
    pub covered: Vec<usize>,
    pub prob: f64,
}

#[derive(Debug, Clone)]
pub struct GreedyResult {
    pub classifier: RandomizedClassifier,
    pub rounds: Vec<GreedyRound>,
}

fn better(count: usize, best: Option<(usize, usize)>, tie: TieBreak) -> bool {
    match best {
        None => true,
        Some((c, _)) => count > c || (count == c && tie == TieBreak::HighestIndex),
    }
}

fn cover_round(cols: &[Vec<bool>], remaining: &[bool], tie: TieBreak, round: usize) -> Result<(usize, Vec<usize>)> {
    let mut best: Option<(usize, usize)> = None;
    for (j, c) in cols.iter().enumerate() {
        let count = c.iter().zip(remaining).filter(|(u, r)| **u && **r).count();
        if better(count, best, tie) {
            best = Some((count, j));
        }
    }
    let left = remaining.iter().filter(|&&r| r).count();
    match best {
        Some((count, j)) if count > 0 => {
            let covered = (0..remaining.len()).filter(|&i| remaining[i] && cols[j][i]).collect();
            Ok((j, covered))
        }
        _ => Err(Error::StuckGreedy { round, remaining: left }),
    }
}

/// Greedy over the columns of an explicit utility matrix. `pick` in each
/// round is a column index.
pub fn run_greedy_matrix(u: &UtilityMatrix, tie: TieBreak) -> Result<Vec<GreedyRound>> {
    if u.m() == 0 {
        return Err(Error::Config("greedy needs at least one hypothesis".into()));
    }
    let cols: Vec<Vec<bool>> = u.columns().map(<[bool]>::to_vec).collect();
    let n = u.n();
    let mut remaining = vec![true; n];
    let mut rounds = Vec::new();
    while remaining.iter().any(|&r| r) {
        let (pick, covered) = cover_round(&cols, &remaining, tie, rounds.len() + 1)?;
        for &i in &covered {
            remaining[i] = false;
        }
        let prob = covered.len() as f64 / n as f64;
        rounds.push(GreedyRound { pick, covered, prob });
    }
    Ok(rounds)
}

/// Per-point utility of the mixture a greedy run defines.
pub fn greedy_utilities(u: &UtilityMatrix, rounds: &[GreedyRound]) -> Vec<f64> {
    let mut p = vec![0.0; u.m()];
    for r in rounds {
        p[r.pick] += r.prob;
    }
    u.mix(&p)
}

pub enum Candidates<'a> {
    List(&'a [Hypothesis]),
    Oracle(&'a dyn Oracle),
}

pub fn run_greedy(ds: &Dataset, candidates: Candidates<'_>, cfg: &GreedyConfig) -> Result<GreedyResult> {
    let n = ds.n();
    let mut pool: Vec<Hypothesis> = Vec::new();
    let mut cols: Vec<Vec<bool>> = Vec::new();
    let oracle = match candidates {
        Candidates::List(hs) => {
            if hs.is_empty() {
                return Err(Error::Config("greedy needs at least one hypothesis".into()));
            }
            for h in hs {
                cols.push(h.utility_vector(ds)?);
                pool.push(h.clone());
            }
            None
        }
        Candidates::Oracle(o) => {
            let h = o.best_response(ds, &vec![1.0; n])?;
            cols.push(h.utility_vector(ds)?);
            pool.push(h);
            Some(o)
        }
    };
    let mut remaining = vec![true; n];
    let mut rounds = Vec::new();
    while remaining.iter().any(|&r| r) {
        if let Some(o) = oracle {
            if rounds.len() > 0 {
                let h = restricted_best_response(o, ds, &remaining)?;
                if !pool.contains(&h) {
                    cols.push(h.utility_vector(ds)?);
                    pool.push(h);
                }
            }
        }
        let (pick, covered) = cover_round(&cols, &remaining, cfg.tie_break, rounds.len() + 1)?;
        for &i in &covered {
            remaining[i] = false;
        }
        let prob = covered.len() as f64 / n as f64;
        rounds.push(GreedyRound { pick, covered, prob });
    }
    let support = rounds.iter().map(|r| pool[r.pick].clone()).collect();
    let probs = rounds.iter().map(|r| r.prob).collect::<Vec<_>>();
    let total: f64 = probs.iter().sum();
    let classifier = RandomizedClassifier::new(support, probs.iter().map(|p| p / total).collect())?;
    Ok(GreedyResult { classifier, rounds })
}

/// Guaranteed average utility of the greedy classifier on a perfectly
/// classifiable set of fractional size `alpha`.
pub fn greedy_bound(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Config(format!("alpha {alpha} is not in (0, 1]")));
    }
    let excess = (2.0 * alpha - 1.0).max(0.0);
    Ok(alpha / 2.0 + excess * excess / (2.0 * alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::group_utility;
    use crate::oracle::LogisticOracle;
    use crate::pf_exact::tests::example1;
    use proptest::prelude::*;

    #[test]
    fn bound_values() {
        assert_eq!(greedy_bound(1.0).unwrap(), 1.0);
        assert_eq!(greedy_bound(0.25).unwrap(), 0.125);
        assert!((greedy_bound(0.75).unwrap() - 0.541_666_666_666_666_6).abs() < 1e-12);
        assert!(greedy_bound(0.0).is_err());
        assert!(greedy_bound(1.5).is_err());
    }

    #[test]
    fn example1_lowest_index() {
        let u = example1();
        let rounds = run_greedy_matrix(&u, TieBreak::LowestIndex).unwrap();
        assert_eq!(rounds.iter().map(|r| r.pick).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(rounds[0].prob, 0.75);
        assert_eq!(rounds[1].prob, 0.25);
        let v = greedy_utilities(&u, &rounds);
        let p_mask: Vec<bool> = (0..8).map(|i| i == 5 || i == 6).collect();
        let up = group_utility(&p_mask, &v).unwrap();
        assert!((up - 0.25).abs() < 1e-12);
        assert!(up >= greedy_bound(0.25).unwrap());
    }

    #[test]
    fn one_perfect_hypothesis() {
        let ds = Dataset::index_only(5).unwrap();
        let hs = vec![Hypothesis::tabular(vec![true, false, true, false, false]), Hypothesis::tabular(vec![true; 5])];
        let res = run_greedy(&ds, Candidates::List(&hs), &GreedyConfig::default()).unwrap();
        assert_eq!(res.classifier.support(), &hs[1..]);
        assert_eq!(res.classifier.probs(), &[1.0]);
    }

    #[test]
    fn stuck_without_complements() {
        let ds = Dataset::index_only(3).unwrap();
        let hs = vec![Hypothesis::tabular(vec![true, false, false])];
        assert!(matches!(
            run_greedy(&ds, Candidates::List(&hs), &GreedyConfig::default()),
            Err(Error::StuckGreedy { round: 2, remaining: 2 })
        ));
    }

    #[test]
    fn oracle_pool_covers_everything() {
        let (ds, _) = crate::data::synthetic_instance(&crate::data::SyntheticSpec::SeparableLinear { n: 40, d: 2, seed: 9 }).unwrap();
        let noisy: Vec<i8> = ds.labels().iter().enumerate().map(|(i, &y)| if i % 7 == 0 { -y } else { y }).collect();
        let ds = ds.with_labels(noisy).unwrap();
        let oracle = LogisticOracle::default();
        let res = run_greedy(&ds, Candidates::Oracle(&oracle), &GreedyConfig { oracle: CandidateSource::WeightedErm, ..Default::default() }).unwrap();
        let total: f64 = res.classifier.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let mut seen = vec![false; ds.n()];
        for r in &res.rounds {
            for &i in &r.covered {
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    proptest! {
        #[test]
        fn rounds_partition_points(cols in prop::collection::vec(prop::collection::vec(any::<bool>(), 9), 1..5), high in any::<bool>()) {
            let base = UtilityMatrix::from_columns(9, &cols).unwrap();
            let (u, _) = base.with_complements();
            let tie = if high { TieBreak::HighestIndex } else { TieBreak::LowestIndex };
            let rounds = run_greedy_matrix(&u, tie).unwrap();
            let total: f64 = rounds.iter().map(|r| r.prob).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            let mut seen = vec![false; 9];
            for r in &rounds {
                for &i in &r.covered {
                    prop_assert!(!seen[i]);
                    seen[i] = true;
                }
            }
            prop_assert!(seen.iter().all(|&s| s));
        }
    }
}
