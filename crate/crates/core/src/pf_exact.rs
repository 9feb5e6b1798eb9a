//! Exact proportional fairness over an explicit, finite hypothesis set.
//!
//! Maximizes `f(p) = Σ_i ln(ε + v_i)` with `v = U p` over the probability
//! simplex by entropic mirror descent, and certifies the result with the
//! first-order condition `max_j Σ_i U_ij / (ε + v_i) ≤ n (1 + kkt_tol)`.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Hypothesis, RandomizedClassifier};

/// Boolean utility matrix: `U[i][j] = 1` iff hypothesis `j` classifies point
/// `i` correctly. Stored column-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtilityMatrix {
    n: usize,
    m: usize,
    cols: Vec<bool>,
}

impl UtilityMatrix {
    pub fn from_columns(n: usize, columns: &[Vec<bool>]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDataset("utility matrix has no rows".into()));
        }
        let mut cols = Vec::with_capacity(n * columns.len());
        for c in columns {
            if c.len() != n {
                return Err(Error::Shape {
                    what: "utility column",
                    expected: n,
                    got: c.len(),
                });
            }
            cols.extend_from_slice(c);
        }
        Ok(UtilityMatrix { n, m: columns.len(), cols })
    }

    pub fn from_hypotheses(ds: &Dataset, hs: &[Hypothesis]) -> Result<Self> {
        let columns = hs.iter().map(|h| h.utility_vector(ds)).collect::<Result<Vec<_>>>()?;
        UtilityMatrix::from_columns(ds.n(), &columns)
    }

    /// Reads a 0/1 CSV with one row per point and one column per hypothesis.
    /// A first line that is not all 0/1 is treated as a header.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(BufReader::new(File::open(path)?));
        let mut rows: Vec<Vec<bool>> = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parsed: Option<Vec<bool>> = rec
                .iter()
                .map(|c| match c {
                    "0" => Some(false),
                    "1" => Some(true),
                    _ => None,
                })
                .collect();
            match parsed {
                Some(row) => rows.push(row),
                None if r == 0 => continue,
                None => {
                    let bad = rec.iter().find(|c| *c != "0" && *c != "1").unwrap_or("");
                    return Err(Error::Parse {
                        row: r,
                        column: "utility".into(),
                        value: bad.to_string(),
                    });
                }
            }
        }
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        let m = rows[0].len();
        let mut columns = vec![Vec::with_capacity(n); m];
        for row in &rows {
            if row.len() != m {
                return Err(Error::Shape {
                    what: "utility row",
                    expected: m,
                    got: row.len(),
                });
            }
            for (j, &u) in row.iter().enumerate() {
                columns[j].push(u);
            }
        }
        UtilityMatrix::from_columns(n, &columns)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn col(&self, j: usize) -> &[bool] {
        &self.cols[j * self.n..(j + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cols[j * self.n + i]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[bool]> {
        self.cols.chunks_exact(self.n)
    }

    fn has_column(&self, target: &[bool]) -> bool {
        self.columns().any(|c| c == target)
    }

    /// Appends the complement of every column whose complement is absent.
    /// Returns the closed matrix and how many columns were added.
    pub fn with_complements(&self) -> (UtilityMatrix, usize) {
        let mut out = self.clone();
        for j in 0..self.m {
            let comp: Vec<bool> = self.col(j).iter().map(|c| !c).collect();
            if !out.has_column(&comp) {
                out.cols.extend_from_slice(&comp);
                out.m += 1;
            }
        }
        let added = out.m - self.m;
        (out, added)
    }

    pub fn is_complement_closed(&self) -> bool {
        self.with_complements().1 == 0
    }

    pub fn to_hypotheses(&self) -> Vec<Hypothesis> {
        self.columns().map(|c| Hypothesis::tabular(c.to_vec())).collect()
    }

    /// `v = U p`.
    pub fn mix(&self, p: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.n];
        for (c, &pj) in self.columns().zip(p) {
            if pj == 0.0 {
                continue;
            }
            for (vi, &u) in v.iter_mut().zip(c) {
                if u {
                    *vi += pj;
                }
            }
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    Fixed,
    LineSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PfSolverConfig {
    pub eps_floor: f64,
    pub max_iters: usize,
    pub kkt_tol: f64,
    pub step_rule: StepRule,
    /// Initial step as a multiple of `1/n`.
    pub step_scale: f64,
}

impl Default for PfSolverConfig {
    fn default() -> Self {
        PfSolverConfig {
            eps_floor: 1e-6,
            max_iters: 200_000,
            kkt_tol: 1e-4,
            step_rule: StepRule::LineSearch,
            step_scale: 0.5,
        }
    }
}

impl PfSolverConfig {
    /// The additive slack every guarantee derived from a certified solution
    /// is checked against.
    pub fn tolerance(&self) -> f64 {
        10.0 * self.kkt_tol + self.eps_floor
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_floor > 0.0 && self.eps_floor < 1.0) {
            return Err(Error::Config("eps_floor must lie in (0, 1)".into()));
        }
        if !(self.kkt_tol > 0.0) {
            return Err(Error::Config("kkt_tol must be positive".into()));
        }
        if self.max_iters == 0 || !(self.step_scale > 0.0) {
            return Err(Error::Config("max_iters and step_scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PfSolution {
    pub probs: Vec<f64>,
    pub objective: f64,
    pub certificate: f64,
    pub iterations: usize,
    /// The matrix actually solved (after complement closure).
    pub matrix: UtilityMatrix,
}

impl PfSolution {
    pub fn utilities(&self) -> Vec<f64> {
        self.matrix.mix(&self.probs)
    }

    /// Mixture over the tabular columns, dropping zero-probability atoms.
    pub fn to_classifier(&self) -> Result<RandomizedClassifier> {
        let (hs, ps): (Vec<Hypothesis>, Vec<f64>) = self
            .matrix
            .columns()
            .zip(&self.probs)
            .filter(|(_, &p)| p > 0.0)
            .map(|(c, &p)| (Hypothesis::tabular(c.to_vec()), p))
            .unzip();
        let total: f64 = ps.iter().sum();
        RandomizedClassifier::new(hs, ps.into_iter().map(|p| p / total).collect())
    }
}

pub fn pf_objective(u: &UtilityMatrix, p: &[f64], eps: f64) -> f64 {
    u.mix(p).iter().map(|v| (eps + v).ln()).sum()
}

fn column_scores(u: &UtilityMatrix, v: &[f64], eps: f64) -> Vec<f64> {
    let inv: Vec<f64> = v.iter().map(|vi| 1.0 / (eps + vi)).collect();
    u.columns()
        .map(|c| c.iter().zip(&inv).filter(|(u, _)| **u).map(|(_, r)| r).sum())
        .collect()
}

/// `max_j Σ_i U_ij / (ε + v_i)`; at the optimum this is at most `n`.
pub fn first_order_certificate(u: &UtilityMatrix, p: &[f64], eps: f64) -> f64 {
    column_scores(u, &u.mix(p), eps).into_iter().fold(f64::NEG_INFINITY, f64::max)
}

fn md_step(p: &[f64], g: &[f64], eta: f64) -> Vec<f64> {
    let gmax = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut q: Vec<f64> = p.iter().zip(g).map(|(pj, gj)| pj * (eta * (gj - gmax)).exp()).collect();
    let total: f64 = q.iter().sum();
    q.iter_mut().for_each(|x| *x /= total);
    q
}

pub fn solve_pf(u: &UtilityMatrix, cfg: &PfSolverConfig) -> Result<PfSolution> {
    run(u, cfg, &mut |_| {})
}

/// Like [`solve_pf`], also returning the objective after every accepted step.
pub fn solve_pf_traced(u: &UtilityMatrix, cfg: &PfSolverConfig) -> (Result<PfSolution>, Vec<f64>) {
    let mut trace = Vec::new();
    let res = run(u, cfg, &mut |f| trace.push(f));
    (res, trace)
}

fn run(u: &UtilityMatrix, cfg: &PfSolverConfig, observe: &mut dyn FnMut(f64)) -> Result<PfSolution> {
    cfg.validate()?;
    if u.m() == 0 {
        return Err(Error::InvalidDistribution("no hypotheses to mix".into()));
    }
    let (matrix, added) = u.with_complements();
    if added > 0 {
        log::warn!("hypothesis set is not closed under complement; appended {added} columns");
    }
    let n = matrix.n();
    let uncovered = (0..n).filter(|&i| (0..matrix.m()).all(|j| !matrix.get(i, j))).count();
    if uncovered > 0 {
        log::warn!("{uncovered} points are misclassified by every hypothesis; their utility stays at eps");
    }
    let eps = cfg.eps_floor;
    let nf = n as f64;
    let eta0 = cfg.step_scale / nf;
    let eta_max = eta0 * 1024.0;
    let mut eta = eta0;
    let mut p = vec![1.0 / matrix.m() as f64; matrix.m()];
    let mut v = matrix.mix(&p);
    let mut f: f64 = v.iter().map(|vi| (eps + vi).ln()).sum();
    observe(f);
    let mut g = column_scores(&matrix, &v, eps);
    let mut cert = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut iterations = 0;
    while cert > nf * (1.0 + cfg.kkt_tol) {
        if iterations == cfg.max_iters {
            return Err(Error::NonConvergence {
                iterations,
                gap: cert / nf - 1.0,
            });
        }
        iterations += 1;
        loop {
            let q = md_step(&p, &g, eta);
            let vq = matrix.mix(&q);
            let fq: f64 = vq.iter().map(|vi| (eps + vi).ln()).sum();
            if cfg.step_rule == StepRule::Fixed || fq >= f || eta < 1e-18 {
                p = q;
                v = vq;
                f = fq;
                break;
            }
            eta *= 0.5;
        }
        observe(f);
        if cfg.step_rule == StepRule::LineSearch {
            eta = (eta * 1.25).min(eta_max);
        }
        g = column_scores(&matrix, &v, eps);
        cert = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    }
    Ok(PfSolution {
        probs: p,
        objective: f,
        certificate: cert,
        iterations,
        matrix,
    })
}
