//! Exhaustive checks on small instances: worked-example fixtures, best
//! classifier per subset by enumeration, and bound sweeps over seeded random
//! utility matrices.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{synthetic_instance, SyntheticSpec};
use crate::error::{Error, Result};
use crate::greedy::{greedy_bound, greedy_utilities, run_greedy_matrix, TieBreak};
use crate::model::{Dataset, Group, Hypothesis};
use crate::pf_exact::{pf_objective, solve_pf, PfSolverConfig, UtilityMatrix};
use crate::seed::{derive_indexed, rng_from};

/// Largest `n` for which all `2^n` subsets are enumerated.
pub const MAX_ENUM_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleName {
    Example1,
    Example2,
    Example3(usize),
    Fig1,
    Thm1Pair { size: usize, n: usize },
}

impl FromStr for ExampleName {
    type Err = Error;

    /// `example1`, `example2`, `example3:K`, `fig1`, `thm1_pair:SIZE:N`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| p.parse::<usize>().map_err(|_| Error::UnknownExample(s.to_string()));
        match parts.as_slice() {
            ["example1"] => Ok(ExampleName::Example1),
            ["example2"] => Ok(ExampleName::Example2),
            ["example3", k] => Ok(ExampleName::Example3(num(k)?)),
            ["fig1"] => Ok(ExampleName::Fig1),
            ["thm1_pair", size, n] => Ok(ExampleName::Thm1Pair { size: num(size)?, n: num(n)? }),
            _ => Err(Error::UnknownExample(s.to_string())),
        }
    }
}

impl fmt::Display for ExampleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExampleName::Example1 => write!(f, "example1"),
            ExampleName::Example2 => write!(f, "example2"),
            ExampleName::Example3(k) => write!(f, "example3:{k}"),
            ExampleName::Fig1 => write!(f, "fig1"),
            ExampleName::Thm1Pair { size, n } => write!(f, "thm1_pair:{size}:{n}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Example {
    pub dataset: Dataset,
    pub matrix: UtilityMatrix,
    pub hypotheses: Vec<Hypothesis>,
    pub groups: Vec<(String, Vec<bool>)>,
}

impl Example {
    pub fn group(&self, name: &str) -> Option<&[bool]> {
        self.groups.iter().find(|(g, _)| g == name).map(|(_, m)| m.as_slice())
    }

    pub fn explicit_groups(&self) -> Vec<Group> {
        self.groups.iter().map(|(_, m)| Group::Explicit { mask: m.clone() }).collect()
    }
}

fn bits(s: &str) -> Vec<bool> {
    s.bytes().map(|b| b == b'1').collect()
}

fn negate(v: &[bool]) -> Vec<bool> {
    v.iter().map(|x| !x).collect()
}

fn mask_of(n: usize, members: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &i in members {
        m[i] = true;
    }
    m
}

pub fn build_example(name: ExampleName) -> Result<Example> {
    let (n, cols, groups): (usize, Vec<Vec<bool>>, Vec<(String, Vec<bool>)>) = match name {
        ExampleName::Example1 => {
            // points 1..8 of the table, columns a, b, ā, b̄
            let a = bits("11111001");
            let b = bits("10011111");
            let groups = vec![
                ("P".to_string(), mask_of(8, &[5, 6])),
                ("Q".to_string(), mask_of(8, &[1, 2])),
                ("R".to_string(), mask_of(8, &[0, 3, 4, 7])),
            ];
            (8, vec![a.clone(), b.clone(), negate(&a), negate(&b)], groups)
        }
        ExampleName::Example2 => {
            let h1 = bits("110");
            let h2 = bits("011");
            (3, vec![h1.clone(), negate(&h1), h2.clone(), negate(&h2)], Vec::new())
        }
        ExampleName::Example3(k) => {
            if k < 2 {
                return Err(Error::Config(format!("example3 needs k >= 2, got {k}")));
            }
            // rows r = 1..k hold points (r, 1..=k-r+1), laid out row by row
            let mut index = std::collections::HashMap::new();
            for r in 1..=k {
                for i in 1..=(k - r + 1) {
                    let next = index.len();
                    index.insert((r, i), next);
                }
            }
            let n = index.len();
            let mut cols = Vec::with_capacity(k + 1);
            cols.push(mask_of(n, &(1..=k).map(|i| index[&(1, i)]).collect::<Vec<_>>()));
            for j in 2..=k {
                let mut m: Vec<usize> = (1..=(k - j + 1)).map(|i| index[&(j, i)]).collect();
                m.push(index[&(1, j)]);
                cols.push(mask_of(n, &m));
            }
            cols.push(mask_of(n, &[index[&(1, 1)]]));
            let s = cols[0].clone();
            (n, cols, vec![("S".to_string(), s)])
        }
        ExampleName::Fig1 => {
            // clusters of four: B1, B2 (Blue), Y1, Y2 (Yellow); x=0 is right on
            // B1 and Y1, y=0 on B2 and all of Yellow
            let n = 16;
            let hx = mask_of(n, &[0, 1, 2, 3, 8, 9, 10, 11]);
            let hy = mask_of(n, &[4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15]);
            let groups = vec![
                ("Blue".to_string(), mask_of(n, &(0..8).collect::<Vec<_>>())),
                ("Yellow".to_string(), mask_of(n, &(8..16).collect::<Vec<_>>())),
            ];
            (n, vec![hx.clone(), hy.clone(), negate(&hx), negate(&hy)], groups)
        }
        ExampleName::Thm1Pair { size, n } => {
            if size == 0 || size >= n {
                return Err(Error::Config(format!("thm1_pair needs 0 < size < n, got {size} and {n}")));
            }
            let h = mask_of(n, &(0..size).collect::<Vec<_>>());
            let groups = vec![("g1".to_string(), h.clone()), ("g2".to_string(), negate(&h))];
            (n, vec![h.clone(), negate(&h)], groups)
        }
    };
    let matrix = UtilityMatrix::from_columns(n, &cols)?;
    Ok(Example {
        dataset: Dataset::index_only(n)?,
        hypotheses: matrix.to_hypotheses(),
        matrix,
        groups,
    })
}

/// Best column per subset, indexed by bitmask (bit `i` = point `i`). Entry
/// `s` holds `(best utility, lowest argmax column)`; entry 0 is unused.
pub fn best_per_subset(u: &UtilityMatrix) -> Result<Vec<(f64, usize)>> {
    let n = u.n();
    if n > MAX_ENUM_N {
        return Err(Error::EnumerationGuard { n, max: MAX_ENUM_N });
    }
    if u.m() == 0 {
        return Err(Error::Config("no hypotheses to enumerate".into()));
    }
    let masks: Vec<u32> = u
        .columns()
        .map(|c| c.iter().enumerate().filter(|(_, b)| **b).fold(0u32, |acc, (i, _)| acc | (1 << i)))
        .collect();
    let mut out = vec![(0.0, 0); 1usize << n];
    for s in 1u32..(1u32 << n) {
        let size = s.count_ones() as f64;
        let mut best = (0u32, 0usize);
        for (j, &c) in masks.iter().enumerate() {
            let hit = (s & c).count_ones();
            if j == 0 || hit > best.0 {
                best = (hit, j);
            }
        }
        out[s as usize] = (f64::from(best.0) / size, best.1);
    }
    Ok(out)
}

fn members(s: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|i| s & (1 << i) != 0).collect()
}

fn subset_utility(v: &[f64], s: u32, n: usize) -> f64 {
    let m = members(s, n);
    m.iter().map(|&i| v[i]).sum::<f64>() / m.len() as f64
}

/// Brute-force maximum of the PF objective over the simplex for `m <= 4`: a
/// pass at step 1e-2, then a step 1e-3 pass around the best point.
pub fn grid_search_pf(u: &UtilityMatrix, eps: f64) -> Result<(f64, Vec<f64>)> {
    let m = u.m();
    if m == 0 || m > 4 {
        return Err(Error::Config(format!("grid search supports 1 to 4 hypotheses, got {m}")));
    }
    let mut best = (f64::NEG_INFINITY, vec![0.0; m]);
    let visit = |p: [f64; 4], best: &mut (f64, Vec<f64>)| {
        if p.iter().any(|x| *x < -1e-12) || p[m..].iter().any(|x| x.abs() > 1e-9) {
            return;
        }
        let f = pf_objective(u, &p[..m], eps);
        if f > best.0 {
            *best = (f, p[..m].to_vec());
        }
    };
    let coarse = 100;
    for a in 0..=coarse {
        for b in 0..=(coarse - a) {
            for c in 0..=(coarse - a - b) {
                let d = coarse - a - b - c;
                let p = [a, b, c, d].map(|x| x as f64 / coarse as f64);
                visit(p, &mut best);
            }
        }
    }
    let mut centre = [0.0; 4];
    centre[..m].copy_from_slice(&best.1);
    for da in -20i32..=20 {
        for db in -20i32..=20 {
            for dc in -20i32..=20 {
                let a = centre[0] + f64::from(da) * 1e-3;
                let b = centre[1] + f64::from(db) * 1e-3;
                let c = centre[2] + f64::from(dc) * 1e-3;
                visit([a, b, c, 1.0 - a - b - c], &mut best);
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremId {
    /// Perfectly classifiable subsets get at least their fractional size.
    ThmPf,
    /// Every subset gets at least `α·u*²`.
    CorPf,
    /// Greedy meets `greedy_bound(α)` on perfectly classifiable subsets.
    Greedy,
    /// Loss on a perfect subset of size `(1 − δ)n`: `≤ δ` for PF, `≤ 2δ` for Greedy.
    Robustness,
    /// Two complementary hypotheses: PF gives `u_{g1} = |g1|/n`.
    Thm1Sharpness,
    /// Example 3 under adversarial ties: Greedy gets `1/k` on `S`.
    GreedyTightness,
}

impl TheoremId {
    pub const ALL: [TheoremId; 6] = [
        TheoremId::ThmPf,
        TheoremId::CorPf,
        TheoremId::Greedy,
        TheoremId::Robustness,
        TheoremId::Thm1Sharpness,
        TheoremId::GreedyTightness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TheoremId::ThmPf => "thm_pf",
            TheoremId::CorPf => "cor_pf",
            TheoremId::Greedy => "greedy",
            TheoremId::Robustness => "robustness",
            TheoremId::Thm1Sharpness => "thm1_sharpness",
            TheoremId::GreedyTightness => "greedy_tightness",
        }
    }
}

impl FromStr for TheoremId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TheoremId::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown theorem {s}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub seed: u64,
    pub subset: Vec<usize>,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub theorem_id: String,
    pub instances_checked: usize,
    /// Smallest `value − bound` seen; a witness is recorded when it drops
    /// below `-tolerance`.
    pub worst_slack: f64,
    pub tolerance: f64,
    pub witnesses: Vec<Witness>,
}

impl TheoremReport {
    pub fn passed(&self) -> bool {
        self.witnesses.is_empty()
    }
}

/// Seeded random utility matrices: `n` in `2..=max_n`, `m` base columns in
/// `1..=max_m`, complements appended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceStream {
    pub seeds: std::ops::Range<u64>,
    pub max_n: usize,
    pub max_m: usize,
}

impl Default for InstanceStream {
    fn default() -> Self {
        InstanceStream {
            seeds: 0..200,
            max_n: 12,
            max_m: 6,
        }
    }
}

impl InstanceStream {
    pub fn validate(&self) -> Result<()> {
        if self.max_n > MAX_ENUM_N {
            return Err(Error::EnumerationGuard { n: self.max_n, max: MAX_ENUM_N });
        }
        if self.max_n < 2 || self.max_m == 0 {
            return Err(Error::Config("instance stream needs max_n >= 2 and max_m >= 1".into()));
        }
        Ok(())
    }

    pub fn instance(&self, seed: u64) -> Result<UtilityMatrix> {
        let mut rng = rng_from(derive_indexed(0, "instance", seed));
        let n = rng.random_range(2..=self.max_n);
        let m = rng.random_range(1..=self.max_m);
        let (ds, hs) = synthetic_instance(&SyntheticSpec::RandomTabular { n, m, seed })?;
        UtilityMatrix::from_hypotheses(&ds, &hs)
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyConfig {
    pub solver: PfSolverConfig,
}

struct Tally {
    worst: f64,
    witnesses: Vec<Witness>,
    tol: f64,
}

impl Tally {
    fn new(tol: f64) -> Self {
        Tally {
            worst: f64::INFINITY,
            witnesses: Vec::new(),
            tol,
        }
    }

    fn record(&mut self, seed: u64, subset: Vec<usize>, slack: f64) {
        self.worst = self.worst.min(slack);
        if slack < -self.tol {
            self.witnesses.push(Witness { seed, subset, slack });
        }
    }

    fn merge(&mut self, other: Tally) {
        self.worst = self.worst.min(other.worst);
        self.witnesses.extend(other.witnesses);
    }
}

fn check_instance(id: TheoremId, seed: u64, u: &UtilityMatrix, cfg: &VerifyConfig) -> Result<Tally> {
    if !u.is_complement_closed() {
        return Err(Error::Config(format!("instance {seed} is not complement closed")));
    }
    let n = u.n();
    let best = best_per_subset(u)?;
    let tol = cfg.solver.tolerance();
    let pf = match id {
        TheoremId::ThmPf | TheoremId::CorPf | TheoremId::Robustness => Some(solve_pf(u, &cfg.solver)?.utilities()),
        _ => None,
    };
    let greedy = match id {
        TheoremId::Greedy | TheoremId::Robustness => Some(greedy_utilities(u, &run_greedy_matrix(u, TieBreak::LowestIndex)?)),
        _ => None,
    };
    let mut tally = Tally::new(if id == TheoremId::Greedy { 1e-9 } else { tol });
    for s in 1u32..(1u32 << n) {
        let size = s.count_ones() as usize;
        let alpha = size as f64 / n as f64;
        let ustar = best[s as usize].0;
        let perfect = ustar == 1.0;
        match id {
            TheoremId::ThmPf if perfect => {
                let v = subset_utility(pf.as_ref().unwrap(), s, n);
                tally.record(seed, members(s, n), v - alpha);
            }
            TheoremId::CorPf => {
                let v = subset_utility(pf.as_ref().unwrap(), s, n);
                tally.record(seed, members(s, n), v - alpha * ustar * ustar);
            }
            TheoremId::Greedy if perfect => {
                let v = subset_utility(greedy.as_ref().unwrap(), s, n);
                tally.record(seed, members(s, n), v - greedy_bound(alpha)?);
            }
            TheoremId::Robustness if perfect && 2 * size > n => {
                let delta = 1.0 - alpha;
                let vp = subset_utility(pf.as_ref().unwrap(), s, n);
                let vg = subset_utility(greedy.as_ref().unwrap(), s, n);
                let slack = (delta - (1.0 - vp)).min(2.0 * delta - (1.0 - vg));
                tally.record(seed, members(s, n), slack);
            }
            _ => {}
        }
    }
    Ok(tally)
}

/// Checks one bound. Sweep theorems use `stream`; `Thm1Sharpness` runs the
/// two-hypothesis game at `n = 10` for `|g1| = 1..9` and `GreedyTightness`
/// runs Example 3 for `k = 3, 4, 5`.
pub fn check_theorem(id: TheoremId, stream: &InstanceStream, cfg: &VerifyConfig) -> Result<TheoremReport> {
    cfg.solver.validate()?;
    let (tally, count) = match id {
        TheoremId::Thm1Sharpness => {
            let mut tally = Tally::new(1e-3);
            for size in 1..10 {
                let ex = build_example(ExampleName::Thm1Pair { size, n: 10 })?;
                let v = solve_pf(&ex.matrix, &cfg.solver)?.utilities();
                let g1 = ex.group("g1").unwrap();
                let ug = crate::model::group_utility(g1, &v)?;
                tally.record(size as u64, (0..size).collect(), -(ug - size as f64 / 10.0).abs());
            }
            (tally, 9)
        }
        TheoremId::GreedyTightness => {
            let mut tally = Tally::new(1e-12);
            for k in 3..=5 {
                let ex = build_example(ExampleName::Example3(k))?;
                let v = greedy_utilities(&ex.matrix, &run_greedy_matrix(&ex.matrix, TieBreak::HighestIndex)?);
                let s = ex.group("S").unwrap();
                let us = crate::model::group_utility(s, &v)?;
                let subset = (0..s.len()).filter(|&i| s[i]).collect();
                tally.record(k as u64, subset, -(us - 1.0 / k as f64).abs());
            }
            (tally, 3)
        }
        _ => {
            stream.validate()?;
            let seeds: Vec<u64> = stream.seeds.clone().collect();
            let parts: Vec<Result<Tally>> = seeds
                .par_iter()
                .map(|&seed| check_instance(id, seed, &stream.instance(seed)?, cfg))
                .collect();
            let mut tally = Tally::new(0.0);
            for p in parts {
                let p = p?;
                tally.tol = p.tol;
                tally.merge(p);
            }
            (tally, seeds.len())
        }
    };
    Ok(TheoremReport {
        theorem_id: id.name().to_string(),
        instances_checked: count,
        worst_slack: tally.worst,
        tolerance: tally.tol,
        witnesses: tally.witnesses,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// The worked examples as pass/fail checks.
pub fn check_examples(cfg: &VerifyConfig) -> Result<Vec<ExampleCheck>> {
    let mut out = Vec::new();

    let ex = build_example(ExampleName::Example1)?;
    let v = solve_pf(&ex.matrix, &cfg.solver)?.utilities();
    let [up, uq, ur] = ["P", "Q", "R"].map(|g| crate::model::group_utility(ex.group(g).unwrap(), &v).unwrap_or(f64::NAN));
    out.push(ExampleCheck {
        name: "example1".into(),
        passed: close(up, 0.5, 1e-3) && close(uq, 0.5, 1e-3) && close(ur, 1.0, 1e-3),
        detail: format!("u_P = {up:.4}, u_Q = {uq:.4}, u_R = {ur:.4}"),
    });

    let ex = build_example(ExampleName::Example2)?;
    let v = ex.matrix.mix(&[0.5, 0.0, 0.5, 0.0]);
    let subsets: [&[usize]; 5] = [&[0], &[1], &[2], &[0, 1], &[1, 2]];
    let got: Vec<f64> = subsets.iter().map(|s| s.iter().map(|&i| v[i]).sum::<f64>() / s.len() as f64).collect();
    let want = [0.5, 1.0, 0.5, 0.75, 0.75];
    let sol = solve_pf(&ex.matrix, &cfg.solver)?;
    let (grid, _) = grid_search_pf(&ex.matrix, cfg.solver.eps_floor)?;
    out.push(ExampleCheck {
        name: "example2".into(),
        passed: got == want && close(sol.objective, grid, 1e-3),
        detail: format!("mixture utilities {got:?}; PF objective {:.6} vs grid {grid:.6}", sol.objective),
    });

    for k in 3..=5 {
        let ex = build_example(ExampleName::Example3(k))?;
        let v = greedy_utilities(&ex.matrix, &run_greedy_matrix(&ex.matrix, TieBreak::HighestIndex)?);
        let us = crate::model::group_utility(ex.group("S").unwrap(), &v)?;
        out.push(ExampleCheck {
            name: format!("example3:{k}"),
            passed: close(us, 1.0 / k as f64, 1e-12),
            detail: format!("u_S = {us:.6}"),
        });
    }

    let (passed, detail) = check_fig1()?;
    out.push(ExampleCheck {
        name: "fig1".into(),
        passed,
        detail,
    });
    Ok(out)
}

/// Fig-1 game: BeFair with `γ = 0, δ = 1` must satisfy both group
/// constraints, and the pure `x=0` classifier must violate Yellow's.
pub fn check_fig1() -> Result<(bool, String)> {
    use crate::befair::{feasibility_check, BefairConfig, EnumeratedAdversary, FictitiousPlay};
    use crate::model::RandomizedClassifier;
    use crate::oracle::ExhaustiveOracle;

    let ex = build_example(ExampleName::Fig1)?;
    let ds = &ex.dataset;
    let learner = ExhaustiveOracle::new(ex.hypotheses.clone());
    let adversary = EnumeratedAdversary {
        groups: ex.explicit_groups(),
        hypotheses: ex.hypotheses.clone(),
    };
    let cfg = BefairConfig { gamma: 0.0, delta: 1.0, rounds: 50, ..Default::default() };
    let out = FictitiousPlay::new(ds, cfg, &learner, &adversary)?.run()?;
    let constraints: Vec<(Group, Hypothesis)> = ex
        .explicit_groups()
        .into_iter()
        .flat_map(|g| ex.hypotheses.iter().map(move |h| (g.clone(), h.clone())))
        .collect();
    let worst = feasibility_check(ds, &out.classifier, &constraints, 1.0, 0.0)?;
    let yellow = Group::Explicit { mask: ex.group("Yellow").unwrap().to_vec() };
    let x_only = RandomizedClassifier::point_mass(ex.hypotheses[0].clone());
    let hurt = feasibility_check(ds, &x_only, &[(yellow, ex.hypotheses[1].clone())], 1.0, 0.0)?;
    Ok((
        out.converged && worst <= 0.0 && hurt > 0.0,
        format!("converged = {}, worst constraint {worst}, x=0 on Yellow {hurt}", out.converged),
    ))
}
