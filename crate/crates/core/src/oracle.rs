//! Weighted agnostic-learning oracles.
//!
//! The production oracle trains a weighted logistic regression by full-batch
//! gradient descent and then keeps whichever of `θ` / `-θ` has the lower
//! weighted 0-1 error. The exhaustive oracle scans an explicit hypothesis list
//! and is used on small verification instances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dot, predict_sign, Dataset, Hypothesis};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub learning_rate: f64,
    pub max_iters: usize,
    pub l2_reg: f64,
    /// Stop once the gradient norm drops below this.
    pub tol: f64,
    /// Unused by the deterministic solver; kept so run configs round-trip.
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            learning_rate: 4.0,
            max_iters: 2000,
            l2_reg: 1e-4,
            tol: 1e-6,
            seed: 0,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("oracle learning_rate must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("oracle max_iters must be at least 1".into()));
        }
        if !(self.l2_reg >= 0.0) {
            return Err(Error::Config("oracle l2_reg must be non-negative".into()));
        }
        Ok(())
    }
}

/// A weighted ERM black box: returns a hypothesis (approximately) minimizing
/// `Σ_i w_i 1[h(x_i) ≠ y_i]`.
pub trait Oracle: Sync {
    fn best_response(&self, ds: &Dataset, weights: &[f64]) -> Result<Hypothesis>;
}

#[derive(Debug, Clone, Default)]
pub struct LogisticOracle {
    pub cfg: OracleConfig,
}

impl LogisticOracle {
    pub fn new(cfg: OracleConfig) -> Self {
        LogisticOracle { cfg }
    }
}

impl Oracle for LogisticOracle {
    fn best_response(&self, ds: &Dataset, weights: &[f64]) -> Result<Hypothesis> {
        weighted_erm(ds, weights, &self.cfg)
    }
}

/// Argmax over a fixed hypothesis list; ties go to the lowest index.
#[derive(Debug, Clone)]
pub struct ExhaustiveOracle {
    pub hypotheses: Vec<Hypothesis>,
}

impl ExhaustiveOracle {
    pub fn new(hypotheses: Vec<Hypothesis>) -> Self {
        ExhaustiveOracle { hypotheses }
    }
}

impl Oracle for ExhaustiveOracle {
    fn best_response(&self, ds: &Dataset, weights: &[f64]) -> Result<Hypothesis> {
        check_weights(ds, weights)?;
        let mut best: Option<(f64, &Hypothesis)> = None;
        for h in &self.hypotheses {
            let u = h.utility_vector(ds)?;
            let score: f64 = u.iter().zip(weights).filter(|(c, _)| **c).map(|(_, w)| w).sum();
            if best.map_or(true, |(s, _)| score > s) {
                best = Some((score, h));
            }
        }
        best.map(|(_, h)| h.clone())
            .ok_or_else(|| Error::Config("exhaustive oracle has no hypotheses".into()))
    }
}

fn check_weights(ds: &Dataset, weights: &[f64]) -> Result<f64> {
    if weights.len() != ds.n() {
        return Err(Error::Shape {
            what: "oracle weights",
            expected: ds.n(),
            got: weights.len(),
        });
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::BadWeights);
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroWeights);
    }
    Ok(total)
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `L(θ) = Σ_i ŵ_i log(1 + exp(-y_i x_i·θ)) + l2·‖θ‖²` with `ŵ = w / Σw`,
/// i.e. weights rescaled to mean one and the loss averaged over `n`.
/// Rows with zero weight are skipped entirely.
pub struct LogisticObjective<'a> {
    ds: &'a Dataset,
    rows: Vec<(usize, f64)>,
    l2: f64,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(ds: &'a Dataset, weights: &[f64], l2: f64) -> Result<Self> {
        let total = check_weights(ds, weights)?;
        let rows = weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(i, w)| (i, w / total))
            .collect();
        Ok(LogisticObjective { ds, rows, l2 })
    }

    pub fn dim(&self) -> usize {
        self.ds.dim()
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let mut f = 0.0;
        for &(i, w) in &self.rows {
            let m = self.ds.label(i) * dot(self.ds.row(i), theta);
            f += w * softplus(-m);
        }
        f + self.l2 * dot(theta, theta)
    }

    /// Writes the gradient into `grad` and returns the value.
    pub fn value_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().zip(theta).for_each(|(g, t)| *g = 2.0 * self.l2 * t);
        let mut f = 0.0;
        for &(i, w) in &self.rows {
            let x = self.ds.row(i);
            let y = self.ds.label(i);
            let m = y * dot(x, theta);
            f += w * softplus(-m);
            let coef = -w * y * sigmoid(-m);
            for (g, xv) in grad.iter_mut().zip(x) {
                *g += coef * xv;
            }
        }
        f + self.l2 * dot(theta, theta)
    }
}

/// Weighted 0-1 error `Σ_i w_i 1[h(x_i) ≠ y_i]`.
pub fn weighted_zero_one_error(ds: &Dataset, h: &Hypothesis, weights: &[f64]) -> Result<f64> {
    let u = h.utility_vector(ds)?;
    Ok(u.iter().zip(weights).filter(|(c, _)| !**c).map(|(_, w)| w).sum())
}

fn linear_errors(ds: &Dataset, theta: &[f64], weights: &[f64]) -> (f64, f64) {
    // errors of θ and of -θ in one pass
    let mut pos = 0.0;
    let mut neg = 0.0;
    for (i, (x, w)) in ds.rows().zip(weights).enumerate() {
        if *w == 0.0 {
            continue;
        }
        let s = dot(x, theta);
        let y = ds.labels()[i];
        if predict_sign(s) != y {
            pos += w;
        }
        if predict_sign(-s) != y {
            neg += w;
        }
    }
    (pos, neg)
}

/// Minimizes the weighted logistic loss from `θ = 0` and returns the better of
/// `θ` and its complement in weighted 0-1 error.
pub fn weighted_erm(ds: &Dataset, weights: &[f64], cfg: &OracleConfig) -> Result<Hypothesis> {
    cfg.validate()?;
    let obj = LogisticObjective::new(ds, weights, cfg.l2_reg)?;
    let d = ds.dim();
    let mut theta = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let mut f = obj.value_grad(&theta, &mut grad);
    let mut cand = vec![0.0; d];
    let mut cand_grad = vec![0.0; d];
    let mut lr = cfg.learning_rate;
    for _ in 0..cfg.max_iters {
        if dot(&grad, &grad).sqrt() < cfg.tol {
            break;
        }
        let mut accepted = false;
        while lr > 1e-14 {
            for k in 0..d {
                cand[k] = theta[k] - lr * grad[k];
            }
            let fc = obj.value_grad(&cand, &mut cand_grad);
            if fc.is_finite() && fc <= f {
                std::mem::swap(&mut theta, &mut cand);
                std::mem::swap(&mut grad, &mut cand_grad);
                f = fc;
                accepted = true;
                break;
            }
            if !fc.is_finite() && lr <= 1e-12 {
                return Err(Error::Diverged { learning_rate: cfg.learning_rate });
            }
            lr *= 0.5;
        }
        if !accepted {
            break;
        }
        lr = (lr * 2.0).min(cfg.learning_rate);
    }
    if !f.is_finite() {
        return Err(Error::Diverged { learning_rate: cfg.learning_rate });
    }
    let (pos, neg) = linear_errors(ds, &theta, weights);
    if neg < pos {
        theta.iter_mut().for_each(|t| *t = -*t);
    }
    Ok(Hypothesis::Linear { theta })
}

/// ERM restricted to the members of `mask`; approximates the best classifier
/// for that group.
pub fn restricted_erm(ds: &Dataset, mask: &[bool], cfg: &OracleConfig) -> Result<Hypothesis> {
    restricted_best_response(&LogisticOracle::new(cfg.clone()), ds, mask)
}

pub fn restricted_best_response(oracle: &dyn Oracle, ds: &Dataset, mask: &[bool]) -> Result<Hypothesis> {
    if mask.len() != ds.n() {
        return Err(Error::Shape {
            what: "group mask",
            expected: ds.n(),
            got: mask.len(),
        });
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptyGroup);
    }
    let w: Vec<f64> = mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    oracle.best_response(ds, &w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthetic_instance, SyntheticSpec};
    use crate::model::group_error;
    use proptest::prelude::*;
    use rand::Rng;

    fn line(xs: &[f64], ys: &[i8]) -> Dataset {
        Dataset::new(xs.iter().map(|&x| vec![x]).collect(), ys.to_vec(), vec!["x".into()]).unwrap()
    }

    #[test]
    fn separable_data_gets_zero_error() {
        let (ds, _) = synthetic_instance(&SyntheticSpec::SeparableLinear { n: 100, d: 2, seed: 1 }).unwrap();
        let h = weighted_erm(&ds, &vec![1.0; ds.n()], &OracleConfig::default()).unwrap();
        assert_eq!(weighted_zero_one_error(&ds, &h, &vec![1.0; ds.n()]).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_weights() {
        let ds = line(&[1.0, -1.0], &[1, -1]);
        let cfg = OracleConfig::default();
        assert!(matches!(weighted_erm(&ds, &[0.0, 0.0], &cfg), Err(Error::ZeroWeights)));
        assert!(matches!(weighted_erm(&ds, &[1.0, f64::NAN], &cfg), Err(Error::BadWeights)));
        assert!(matches!(weighted_erm(&ds, &[1.0, -1.0], &cfg), Err(Error::BadWeights)));
        assert!(weighted_erm(&ds, &[1.0], &cfg).is_err());
    }

    #[test]
    fn concentrated_weight_point_is_classified_correctly() {
        // labels nobody threshold-separates; all weight on the odd one out
        let ds = line(&[-2.0, -1.0, 0.5, 1.0, 2.0], &[1, 1, -1, 1, 1]);
        let mut w = vec![0.0; 5];
        w[2] = 1.0;
        let h = weighted_erm(&ds, &w, &OracleConfig::default()).unwrap();
        assert!(h.utility_vector(&ds).unwrap()[2]);
        // a tiny background weight does not change that
        let w2 = vec![1e-3, 1e-3, 1.0, 1e-3, 1e-3];
        let h2 = weighted_erm(&ds, &w2, &OracleConfig::default()).unwrap();
        assert!(h2.utility_vector(&ds).unwrap()[2]);
    }

    #[test]
    fn label_flip_gives_complementary_error() {
        let (ds, _) = synthetic_instance(&SyntheticSpec::SeparableLinear { n: 60, d: 3, seed: 4 }).unwrap();
        let mut rng = crate::seed::rng_from(11);
        let noisy: Vec<i8> = ds.labels().iter().map(|&y| if rng.random::<f64>() < 0.2 { -y } else { y }).collect();
        let ds = ds.with_labels(noisy).unwrap();
        let flipped = ds.with_labels(ds.labels().iter().map(|y| -y).collect()).unwrap();
        let w: Vec<f64> = (0..ds.n()).map(|_| rng.random_range(0.1..2.0)).collect();
        let cfg = OracleConfig::default();
        let h = weighted_erm(&ds, &w, &cfg).unwrap();
        let hf = weighted_erm(&flipped, &w, &cfg).unwrap();
        let total: f64 = w.iter().sum();
        let e = weighted_zero_one_error(&ds, &h, &w).unwrap();
        let ef = weighted_zero_one_error(&flipped, &hf, &w).unwrap();
        // the flipped problem's optimum is the complement of the original one
        assert!((e - ef).abs() < 1e-9, "{e} vs {ef}");
        let ef_of_h = weighted_zero_one_error(&flipped, &h, &w).unwrap();
        assert!((ef_of_h - (total - e)).abs() < 1e-9);
    }

    #[test]
    fn restricted_on_full_set_matches_uniform() {
        let (ds, _) = synthetic_instance(&SyntheticSpec::SeparableLinear { n: 40, d: 2, seed: 2 }).unwrap();
        let cfg = OracleConfig::default();
        let a = restricted_erm(&ds, &vec![true; ds.n()], &cfg).unwrap();
        let b = weighted_erm(&ds, &vec![1.0; ds.n()], &cfg).unwrap();
        assert_eq!(a, b);
        assert!(matches!(restricted_erm(&ds, &vec![false; ds.n()], &cfg), Err(Error::EmptyGroup)));
    }

    #[test]
    fn restricted_on_separable_subset_is_perfect() {
        // outside the group the labels are adversarial noise
        let xs: Vec<f64> = (0..20).map(|i| i as f64 / 4.0 - 2.5).collect();
        let ys: Vec<i8> = xs.iter().enumerate().map(|(i, &x)| if i % 2 == 0 { if x > 0.0 { 1 } else { -1 } } else { if i % 4 == 1 { 1 } else { -1 } }).collect();
        let ds = line(&xs, &ys);
        let mask: Vec<bool> = (0..20).map(|i| i % 2 == 0).collect();
        let h = restricted_erm(&ds, &mask, &OracleConfig::default()).unwrap();
        let u = crate::model::as_real(&h.utility_vector(&ds).unwrap());
        assert_eq!(group_error(&mask, &u).unwrap(), 0.0);
    }

    #[test]
    fn exhaustive_oracle_breaks_ties_low() {
        let ds = Dataset::index_only(3).unwrap();
        let hs = vec![
            Hypothesis::tabular(vec![true, false, false]),
            Hypothesis::tabular(vec![false, true, false]),
            Hypothesis::tabular(vec![false, false, true]),
        ];
        let o = ExhaustiveOracle::new(hs.clone());
        assert_eq!(o.best_response(&ds, &[1.0, 1.0, 1.0]).unwrap(), hs[0]);
        assert_eq!(o.best_response(&ds, &[1.0, 1.0, 2.0]).unwrap(), hs[2]);
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let mut rng = crate::seed::rng_from(5);
        for _ in 0..20 {
            let n = rng.random_range(3..12);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
            let ys: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
            let ds = Dataset::new(rows, ys, vec!["a".into(), "b".into(), "c".into()]).unwrap();
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
            let obj = LogisticObjective::new(&ds, &w, 1e-2).unwrap();
            let theta: Vec<f64> = (0..4).map(|_| rng.random_range(-1.5..1.5)).collect();
            let mut g = vec![0.0; 4];
            obj.value_grad(&theta, &mut g);
            for k in 0..4 {
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[k] += 1e-5;
                tm[k] -= 1e-5;
                let fd = (obj.value(&tp) - obj.value(&tm)) / 2e-5;
                assert!((fd - g[k]).abs() <= 1e-4 * fd.abs().max(1e-3), "{fd} vs {}", g[k]);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn complement_check_is_effective(
            pts in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, any::<bool>(), 0.0f64..2.0), 2..25)
        ) {
            let rows = pts.iter().map(|p| vec![p.0, p.1]).collect();
            let ys = pts.iter().map(|p| if p.2 { 1 } else { -1 }).collect();
            let ds = Dataset::new(rows, ys, vec!["a".into(), "b".into()]).unwrap();
            let mut w: Vec<f64> = pts.iter().map(|p| p.3).collect();
            w[0] += 0.5;
            let h = weighted_erm(&ds, &w, &OracleConfig::default()).unwrap();
            let e = weighted_zero_one_error(&ds, &h, &w).unwrap();
            let ec = weighted_zero_one_error(&ds, &h.complement(), &w).unwrap();
            prop_assert!(e <= ec + 1e-12);
            let again = weighted_erm(&ds, &w, &OracleConfig::default()).unwrap();
            prop_assert_eq!(h, again);
        }

        #[test]
        fn oracle_never_beats_exhaustive_minimum(
            cols in prop::collection::vec(prop::collection::vec(any::<bool>(), 8), 1..5),
            w in prop::collection::vec(0.1f64..2.0, 8),
        ) {
            // hypotheses are thresholds on a line; the exhaustive list is a subset of H
            let xs: Vec<f64> = (0..8).map(|i| i as f64 - 3.0).collect();
            let ys: Vec<i8> = cols[0].iter().map(|&b| if b { 1 } else { -1 }).collect();
            let ds = line(&xs, &ys);
            let mut hs = Vec::new();
            for t in -4..=5 {
                hs.push(Hypothesis::linear(vec![1.0, -(t as f64) + 0.5]));
                hs.push(Hypothesis::linear(vec![-1.0, t as f64 - 0.5]));
            }
            let ex = ExhaustiveOracle::new(hs).best_response(&ds, &w).unwrap();
            let best = weighted_zero_one_error(&ds, &ex, &w).unwrap();
            let lr = weighted_erm(&ds, &w, &OracleConfig::default()).unwrap();
            prop_assert!(weighted_zero_one_error(&ds, &lr, &w).unwrap() >= best - 1e-12);
        }
    }
}
