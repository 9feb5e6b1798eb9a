//! Domain types shared by every solver: the labelled point set, deterministic
//! and randomized classifiers, groups, and the utility/error algebra over them.
//!
//! Conventions:
//! - labels are stored as `-1` / `+1`;
//! - the last feature column is a constant `1.0` so linear rules carry their bias;
//! - a linear hypothesis predicts `+1` when `x·θ >= 0` (sign(0) = +1);
//! - a linear group contains point `i` when `x_i·θ_g > 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feature matrix (row-major, bias column last) with binary labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatasetRepr")]
pub struct Dataset {
    n_rows: usize,
    n_cols: usize,
    features: Vec<f64>,
    labels: Vec<i8>,
    feature_names: Vec<String>,
}

#[derive(Deserialize)]
struct DatasetRepr {
    n_rows: usize,
    n_cols: usize,
    features: Vec<f64>,
    labels: Vec<i8>,
    feature_names: Vec<String>,
}

impl TryFrom<DatasetRepr> for Dataset {
    type Error = Error;

    fn try_from(r: DatasetRepr) -> Result<Self> {
        let ds = Dataset {
            n_rows: r.n_rows,
            n_cols: r.n_cols,
            features: r.features,
            labels: r.labels,
            feature_names: r.feature_names,
        };
        ds.validate()?;
        Ok(ds)
    }
}

impl Dataset {
    /// Builds a dataset from raw feature rows; a constant bias column named
    /// `bias` is appended.
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<i8>, mut feature_names: Vec<String>) -> Result<Self> {
        let n_rows = rows.len();
        let raw_cols = rows.first().map_or(feature_names.len(), Vec::len);
        if feature_names.len() != raw_cols {
            return Err(Error::Shape {
                what: "feature names",
                expected: raw_cols,
                got: feature_names.len(),
            });
        }
        let n_cols = raw_cols + 1;
        let mut features = Vec::with_capacity(n_rows * n_cols);
        for row in &rows {
            if row.len() != raw_cols {
                return Err(Error::Shape {
                    what: "feature row",
                    expected: raw_cols,
                    got: row.len(),
                });
            }
            features.extend_from_slice(row);
            features.push(1.0);
        }
        feature_names.push("bias".to_string());
        let ds = Dataset {
            n_rows,
            n_cols,
            features,
            labels,
            feature_names,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// A featureless dataset of `n` points labelled `+1`, for instances whose
    /// hypotheses are given as explicit utility columns.
    pub fn index_only(n: usize) -> Result<Self> {
        Dataset::new(vec![Vec::new(); n], vec![1; n], Vec::new())
    }

    fn validate(&self) -> Result<()> {
        if self.n_rows == 0 {
            return Err(Error::InvalidDataset("dataset has no rows".into()));
        }
        if self.n_cols == 0 {
            return Err(Error::InvalidDataset("dataset has no columns".into()));
        }
        if self.features.len() != self.n_rows * self.n_cols {
            return Err(Error::Shape {
                what: "feature buffer",
                expected: self.n_rows * self.n_cols,
                got: self.features.len(),
            });
        }
        if self.labels.len() != self.n_rows {
            return Err(Error::Shape {
                what: "labels",
                expected: self.n_rows,
                got: self.labels.len(),
            });
        }
        if self.feature_names.len() != self.n_cols {
            return Err(Error::Shape {
                what: "feature names",
                expected: self.n_cols,
                got: self.feature_names.len(),
            });
        }
        if let Some(bad) = self.labels.iter().find(|&&y| y != 1 && y != -1) {
            return Err(Error::InvalidDataset(format!("label {bad} is not -1 or +1")));
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite feature value".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n_rows
    }

    /// Number of feature columns, bias included; the length of every `θ`.
    pub fn dim(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.n_cols)
    }

    pub fn label(&self, i: usize) -> f64 {
        f64::from(self.labels[i])
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Same features with replacement labels.
    pub fn with_labels(&self, labels: Vec<i8>) -> Result<Self> {
        let ds = Dataset {
            labels,
            ..self.clone()
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Rows `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.n_cols);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n_rows {
                return Err(Error::Shape {
                    what: "row index",
                    expected: self.n_rows,
                    got: i,
                });
            }
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        let ds = Dataset {
            n_rows: indices.len(),
            n_cols: self.n_cols,
            features,
            labels,
            feature_names: self.feature_names.clone(),
        };
        ds.validate()?;
        Ok(ds)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_theta(theta: &[f64], ds: &Dataset, what: &'static str) -> Result<()> {
    if theta.len() != ds.dim() {
        return Err(Error::Shape {
            what,
            expected: ds.dim(),
            got: theta.len(),
        });
    }
    Ok(())
}

/// A deterministic classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Hypothesis {
    /// Predicts `sign(x·θ)` with sign(0) = +1.
    Linear { theta: Vec<f64> },
    /// Stores per-point correctness directly.
    Tabular { correct: Vec<bool> },
}

impl Hypothesis {
    pub fn linear(theta: Vec<f64>) -> Self {
        Hypothesis::Linear { theta }
    }

    pub fn tabular(correct: Vec<bool>) -> Self {
        Hypothesis::Tabular { correct }
    }

    pub fn check_compatible(&self, ds: &Dataset) -> Result<()> {
        match self {
            Hypothesis::Linear { theta } => check_theta(theta, ds, "hypothesis theta"),
            Hypothesis::Tabular { correct } if correct.len() != ds.n() => Err(Error::Shape {
                what: "tabular hypothesis",
                expected: ds.n(),
                got: correct.len(),
            }),
            Hypothesis::Tabular { .. } => Ok(()),
        }
    }

    /// `u_i(h) = 1[h(x_i) = y_i]` for every point.
    pub fn utility_vector(&self, ds: &Dataset) -> Result<Vec<bool>> {
        self.check_compatible(ds)?;
        Ok(match self {
            Hypothesis::Linear { theta } => ds
                .rows()
                .zip(ds.labels())
                .map(|(x, &y)| predict_sign(dot(x, theta)) == y)
                .collect(),
            Hypothesis::Tabular { correct } => correct.clone(),
        })
    }

    /// The label-flipped classifier. For linear rules this negates `θ`; a point
    /// exactly on the boundary is predicted `+1` by both `θ` and `-θ`.
    pub fn complement(&self) -> Self {
        match self {
            Hypothesis::Linear { theta } => Hypothesis::Linear {
                theta: theta.iter().map(|v| -v).collect(),
            },
            Hypothesis::Tabular { correct } => Hypothesis::Tabular {
                correct: correct.iter().map(|c| !c).collect(),
            },
        }
    }
}

pub(crate) fn predict_sign(score: f64) -> i8 {
    if score >= 0.0 {
        1
    } else {
        -1
    }
}

/// A finite mixture over deterministic classifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureRepr")]
pub struct RandomizedClassifier {
    support: Vec<Hypothesis>,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct MixtureRepr {
    support: Vec<Hypothesis>,
    probs: Vec<f64>,
}

impl TryFrom<MixtureRepr> for RandomizedClassifier {
    type Error = Error;

    fn try_from(r: MixtureRepr) -> Result<Self> {
        RandomizedClassifier::new(r.support, r.probs)
    }
}

impl RandomizedClassifier {
    pub fn new(support: Vec<Hypothesis>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if support.len() != probs.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} hypotheses but {} probabilities",
                support.len(),
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidDistribution("negative or non-finite probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        Ok(RandomizedClassifier { support, probs })
    }

    pub fn point_mass(h: Hypothesis) -> Self {
        RandomizedClassifier {
            support: vec![h],
            probs: vec![1.0],
        }
    }

    /// Uniform mixture over `hs` (which must be non-empty).
    pub fn uniform(hs: Vec<Hypothesis>) -> Result<Self> {
        let m = hs.len();
        if m == 0 {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        let probs = vec![1.0 / m as f64; m];
        RandomizedClassifier::new(hs, probs)
    }

    pub fn support(&self) -> &[Hypothesis] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `u_i(D) = Σ_j p_j u_i(h_j)`.
    pub fn utility(&self, ds: &Dataset) -> Result<Vec<f64>> {
        let mut u = vec![0.0; ds.n()];
        for (h, &p) in self.support.iter().zip(&self.probs) {
            let correct = h.utility_vector(ds)?;
            if p == 0.0 {
                continue;
            }
            for (ui, c) in u.iter_mut().zip(correct) {
                if c {
                    *ui += p;
                }
            }
        }
        Ok(u)
    }

    /// `t_i = E[1[h(x_i) ≠ y_i]]`, clamped to `[0, 1]`.
    pub fn expected_error(&self, ds: &Dataset) -> Result<Vec<f64>> {
        Ok(self
            .utility(ds)?
            .into_iter()
            .map(|u| (1.0 - u).clamp(0.0, 1.0))
            .collect())
    }
}

/// A subset of the points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Group {
    /// Points with `x·θ_g > 0`.
    Linear { theta: Vec<f64> },
    Explicit { mask: Vec<bool> },
}

impl Group {
    pub fn members(&self, ds: &Dataset) -> Result<Vec<bool>> {
        match self {
            Group::Linear { theta } => {
                check_theta(theta, ds, "group theta")?;
                Ok(ds.rows().map(|x| dot(x, theta) > 0.0).collect())
            }
            Group::Explicit { mask } => {
                if mask.len() != ds.n() {
                    return Err(Error::Shape {
                        what: "group mask",
                        expected: ds.n(),
                        got: mask.len(),
                    });
                }
                Ok(mask.clone())
            }
        }
    }

    pub fn everyone(ds: &Dataset) -> Self {
        Group::Explicit {
            mask: vec![true; ds.n()],
        }
    }
}

pub fn group_size(mask: &[bool]) -> usize {
    mask.iter().filter(|&&m| m).count()
}

fn check_lengths(mask: &[bool], u: &[f64]) -> Result<()> {
    if mask.len() != u.len() {
        return Err(Error::Shape {
            what: "utility vector",
            expected: mask.len(),
            got: u.len(),
        });
    }
    Ok(())
}

/// Mean utility over the members of `mask`.
pub fn group_utility(mask: &[bool], u: &[f64]) -> Result<f64> {
    check_lengths(mask, u)?;
    let size = group_size(mask);
    if size == 0 {
        return Err(Error::EmptyGroup);
    }
    let total: f64 = mask.iter().zip(u).filter(|(m, _)| **m).map(|(_, v)| v).sum();
    Ok(total / size as f64)
}

/// Error *count* over the members of `mask`: `Σ_{i∈g} (1 - u_i)`. Zero for an
/// empty group.
pub fn group_error(mask: &[bool], u: &[f64]) -> Result<f64> {
    check_lengths(mask, u)?;
    Ok(mask.iter().zip(u).filter(|(m, _)| **m).map(|(_, v)| 1.0 - v).sum())
}

/// Converts a boolean utility column to reals.
pub fn as_real(correct: &[bool]) -> Vec<f64> {
    correct.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect()
}
