//! Heuristic proportional fairness by reweighted approval voting: each round
//! trains on weights `1/(1 + c_i)`, where `c_i` counts earlier rounds that got
//! point `i` right, and the final mixture weights each round by the weight it
//! captured.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Hypothesis, RandomizedClassifier};
use crate::oracle::{Oracle, OracleConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HpfConfig {
    pub rounds: usize,
    pub oracle: OracleConfig,
}

impl Default for HpfConfig {
    fn default() -> Self {
        HpfConfig {
            rounds: 20,
            oracle: OracleConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HpfResult {
    pub classifier: RandomizedClassifier,
    pub cover_counts: Vec<u32>,
    /// `w_r`, the weight each round's hypothesis captured when it was chosen.
    pub round_scores: Vec<f64>,
}

pub fn run_hpf(ds: &Dataset, oracle: &dyn Oracle, rounds: usize) -> Result<HpfResult> {
    if rounds == 0 {
        return Err(Error::Config("hPF needs at least one round".into()));
    }
    let n = ds.n();
    let mut counts = vec![0u32; n];
    let mut support: Vec<Hypothesis> = Vec::with_capacity(rounds);
    let mut scores = Vec::with_capacity(rounds);
    for r in 0..rounds {
        let w: Vec<f64> = counts.iter().map(|&c| 1.0 / (1.0 + f64::from(c))).collect();
        let h = oracle.best_response(ds, &w)?;
        let correct = h.utility_vector(ds)?;
        let score: f64 = correct.iter().zip(&w).filter(|(c, _)| **c).map(|(_, w)| w).sum();
        for (c, &ok) in counts.iter_mut().zip(&correct) {
            if ok {
                *c += 1;
            }
        }
        log::debug!("hPF round {}: score {score:.4}", r + 1);
        support.push(h);
        scores.push(score);
    }
    let total: f64 = scores.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateOracle);
    }
    let probs = scores.iter().map(|s| s / total).collect();
    Ok(HpfResult {
        classifier: RandomizedClassifier::new(support, probs)?,
        cover_counts: counts,
        round_scores: scores,
    })
}
