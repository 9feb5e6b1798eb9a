//! Fictitious play for best-effort fairness over linearly separable groups.
//!
//! The learner minimizes a reweighted error (`w_i = 1 + Σ λ 1[i ∈ g]`); the
//! adversary searches for a group `g` and a challenger `h'` maximizing
//! `err_g(h̄) − δ·err_g(h') − γ`. The adversary works on a convex exponential
//! surrogate, then polishes with alternating group / challenger updates, but
//! every reported quantity is an exact 0-1 count.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dot, group_error, group_size, Dataset, Group, Hypothesis, RandomizedClassifier};
use crate::oracle::{restricted_best_response, LogisticOracle, Oracle, OracleConfig};
use crate::seed::{derive_indexed, rng_from};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BefairConfig {
    pub gamma: f64,
    pub delta: f64,
    pub rounds: usize,
    /// `C`, the ℓ1 bound on the dual variables.
    pub dual_bound: f64,
    /// `B`, the ℓ2 radius for the adversary's `θ_g` and `θ_h'`.
    pub adv_norm_bound: f64,
    pub adv_restarts: usize,
    pub adv_steps: usize,
    pub adv_step_size: f64,
    pub em_iters: usize,
    /// Sweeps of exact coordinate search on the 0-1 objective after each
    /// EM iteration; 0 disables it.
    pub adv_polish_sweeps: usize,
    pub seed: u64,
    pub oracle: OracleConfig,
}

impl Default for BefairConfig {
    fn default() -> Self {
        BefairConfig {
            gamma: 0.0,
            delta: 1.0,
            rounds: 50,
            dual_bound: 20.0,
            adv_norm_bound: 10.0,
            adv_restarts: 5,
            adv_steps: 500,
            adv_step_size: 0.05,
            em_iters: 3,
            adv_polish_sweeps: 5,
            seed: 0,
            oracle: OracleConfig::default(),
        }
    }
}

impl BefairConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 1.0) {
            return Err(Error::Config(format!("delta must be >= 1, got {}", self.delta)));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::Config(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        if !(self.dual_bound > 0.0) {
            return Err(Error::Config("dual_bound must be positive".into()));
        }
        self.adversary().validate()?;
        self.oracle.validate()
    }

    pub fn adversary(&self) -> AdversaryConfig {
        AdversaryConfig {
            norm_bound: self.adv_norm_bound,
            restarts: self.adv_restarts,
            steps: self.adv_steps,
            step_size: self.adv_step_size,
            em_iters: self.em_iters,
            polish_sweeps: self.adv_polish_sweeps,
            seed: self.seed,
            oracle: self.oracle.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdversaryConfig {
    pub norm_bound: f64,
    pub restarts: usize,
    pub steps: usize,
    pub step_size: f64,
    pub em_iters: usize,
    pub polish_sweeps: usize,
    pub seed: u64,
    pub oracle: OracleConfig,
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        BefairConfig::default().adversary()
    }
}

impl AdversaryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.norm_bound > 0.0) {
            return Err(Error::Config("adversary norm bound must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("adversary needs at least one restart".into()));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::Config("adversary step size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualAtom {
    pub group: Group,
    pub hyp: Hypothesis,
    pub weight: f64,
}

/// A dual vector stored sparsely as weighted (group, challenger) atoms.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub atoms: Vec<DualAtom>,
}

impl DualState {
    pub fn l1_norm(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub round: usize,
    pub group: Group,
    pub challenger: Hypothesis,
    /// `err_g(h̄) − δ·err_g(h') − γ`, in 0-1 counts.
    pub violation: f64,
    pub group_size: usize,
}

/// `w_i = 1 + Σ_atoms weight·1[i ∈ g]`.
pub fn learner_weights(ds: &Dataset, lambda: &DualState) -> Result<Vec<f64>> {
    let mut w = vec![1.0; ds.n()];
    for atom in &lambda.atoms {
        if atom.weight < 0.0 || !atom.weight.is_finite() {
            return Err(Error::Config("dual weights must be finite and non-negative".into()));
        }
        for (wi, m) in w.iter_mut().zip(atom.group.members(ds)?) {
            if m {
                *wi += atom.weight;
            }
        }
    }
    Ok(w)
}

pub fn learner_best_response(ds: &Dataset, lambda: &DualState, oracle: &dyn Oracle) -> Result<Hypothesis> {
    oracle.best_response(ds, &learner_weights(ds, lambda)?)
}

/// `Σ_{i∈g} (δ·1[h'(x_i) ≠ y_i] − t_i)`; the adversary minimizes this.
pub fn true_adversary_objective(ds: &Dataset, mask: &[bool], challenger: &Hypothesis, t: &[f64], delta: f64) -> Result<f64> {
    let correct = challenger.utility_vector(ds)?;
    Ok(mask
        .iter()
        .zip(&correct)
        .zip(t)
        .filter(|((m, _), _)| **m)
        .map(|((_, c), ti)| if *c { -ti } else { delta - ti })
        .sum())
}

/// Max over `constraints` of `err_g(D) − δ·err_g(h') − γ`.
pub fn feasibility_check(
    ds: &Dataset,
    d: &RandomizedClassifier,
    constraints: &[(Group, Hypothesis)],
    delta: f64,
    gamma: f64,
) -> Result<f64> {
    if constraints.is_empty() {
        return Err(Error::Config("feasibility check needs at least one constraint".into()));
    }
    let u = d.utility(ds)?;
    let mut worst = f64::NEG_INFINITY;
    for (g, h) in constraints {
        let mask = g.members(ds)?;
        let uh = crate::model::as_real(&h.utility_vector(ds)?);
        let v = group_error(&mask, &u)? - delta * group_error(&mask, &uh)? - gamma;
        worst = worst.max(v);
    }
    Ok(worst)
}

/// Surrogate value and gradients:
/// `F = (1/n) Σ_i δ·e^{z_g + z_h} + t_i (e^{−z_g} − 1)`,
/// `z_g = x·θ_g`, `z_h = −y x·θ_h`.
pub fn surrogate_value_grad(
    ds: &Dataset,
    t: &[f64],
    delta: f64,
    theta_g: &[f64],
    theta_h: &[f64],
    grad_g: &mut [f64],
    grad_h: &mut [f64],
) -> f64 {
    grad_g.iter_mut().for_each(|v| *v = 0.0);
    grad_h.iter_mut().for_each(|v| *v = 0.0);
    let inv_n = 1.0 / ds.n() as f64;
    let mut f = 0.0;
    for (i, x) in ds.rows().enumerate() {
        let y = ds.label(i);
        let zg = dot(x, theta_g);
        let zh = -y * dot(x, theta_h);
        let a = delta * (zg + zh).exp();
        let b = t[i] * (-zg).exp();
        f += a + b - t[i];
        let cg = (a - b) * inv_n;
        let ch = -a * y * inv_n;
        for k in 0..x.len() {
            grad_g[k] += cg * x[k];
            grad_h[k] += ch * x[k];
        }
    }
    f * inv_n
}

/// The surrogate value alone; see [`surrogate_value_grad`].
pub fn surrogate_value(ds: &Dataset, t: &[f64], delta: f64, theta_g: &[f64], theta_h: &[f64]) -> f64 {
    let mut f = 0.0;
    for (i, x) in ds.rows().enumerate() {
        let zg = dot(x, theta_g);
        let zh = -ds.label(i) * dot(x, theta_h);
        f += delta * (zg + zh).exp() + t[i] * ((-zg).exp() - 1.0);
    }
    f / ds.n() as f64
}

/// Group-only surrogate with `h'` fixed: `(1/n) Σ a_i e^{z_g} + b_i (e^{−z_g} − 1)`.
fn group_surrogate_value_grad(ds: &Dataset, a: &[f64], b: &[f64], theta: &[f64], grad: &mut [f64]) -> f64 {
    grad.iter_mut().for_each(|v| *v = 0.0);
    let inv_n = 1.0 / ds.n() as f64;
    let mut f = 0.0;
    for (i, x) in ds.rows().enumerate() {
        if a[i] == 0.0 && b[i] == 0.0 {
            continue;
        }
        let z = dot(x, theta);
        let ea = a[i] * z.exp();
        let eb = b[i] * (-z).exp();
        f += ea + eb - b[i];
        let c = (ea - eb) * inv_n;
        for k in 0..x.len() {
            grad[k] += c * x[k];
        }
    }
    f * inv_n
}

fn project(theta: &mut [f64], radius: f64) {
    let norm = dot(theta, theta).sqrt();
    if norm > radius {
        theta.iter_mut().for_each(|v| *v *= radius / norm);
    }
}

/// Projected gradient descent with step halving on a non-finite or worse
/// value. Each consecutive `block` of coordinates is projected onto its own
/// ball. Returns `None` if the start itself is non-finite.
fn descend(
    theta: &mut Vec<f64>,
    block: usize,
    steps: usize,
    step0: f64,
    radius: f64,
    value_grad: &mut dyn FnMut(&[f64], &mut [f64]) -> f64,
) -> Option<f64> {
    let d = theta.len();
    let mut grad = vec![0.0; d];
    let mut f = value_grad(theta, &mut grad);
    if !f.is_finite() {
        return None;
    }
    let mut cand = vec![0.0; d];
    let mut cand_grad = vec![0.0; d];
    let mut step = step0;
    for _ in 0..steps {
        let mut moved = false;
        while step > 1e-12 {
            for k in 0..d {
                cand[k] = theta[k] - step * grad[k];
            }
            for chunk in cand.chunks_mut(block) {
                project(chunk, radius);
            }
            let fc = value_grad(&cand, &mut cand_grad);
            if fc.is_finite() && fc <= f {
                moved = cand != *theta;
                std::mem::swap(theta, &mut cand);
                std::mem::swap(&mut grad, &mut cand_grad);
                f = fc;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
        step = (step * 2.0).min(step0);
    }
    Some(f)
}

/// A (group, challenger) pair with its exact adversary objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub group: Group,
    pub mask: Vec<bool>,
    pub challenger: Hypothesis,
    pub objective: f64,
}

impl Candidate {
    pub fn violation(&self, gamma: f64) -> f64 {
        -self.objective - gamma
    }
}

/// Minimizes the surrogate from one random start; returns `(θ_g, θ_h')`.
pub fn adversary_surrogate_restart(ds: &Dataset, t: &[f64], delta: f64, cfg: &AdversaryConfig, restart: u64) -> Option<(Vec<f64>, Vec<f64>)> {
    let d = ds.dim();
    let mut rng = rng_from(derive_indexed(cfg.seed, "adversary", restart));
    let mut draw = || {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = dot(&v, &v).sqrt().max(1e-12);
        v.iter_mut().for_each(|x| *x /= norm);
        v
    };
    let mut joint = draw();
    joint.extend(draw());
    let radius = cfg.norm_bound;
    let mut gg = vec![0.0; d];
    let mut gh = vec![0.0; d];
    let mut vg = |th: &[f64], grad: &mut [f64]| {
        let f = surrogate_value_grad(ds, t, delta, &th[..d], &th[d..], &mut gg, &mut gh);
        grad[..d].copy_from_slice(&gg);
        grad[d..].copy_from_slice(&gh);
        f
    };
    let f = descend(&mut joint, d, cfg.steps, cfg.step_size, radius, &mut vg);
    if f.is_none() {
        log::warn!("adversary restart {restart}: surrogate is not finite at the start; skipped");
        return None;
    }
    let th = joint.split_off(d);
    Some((joint, th))
}

/// Runs the surrogate solver from every restart and returns the pair with the
/// lowest exact objective (ties to the lowest restart index).
pub fn adversary_surrogate_solve(ds: &Dataset, t: &[f64], delta: f64, cfg: &AdversaryConfig) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    check_t(ds, t)?;
    let results: Vec<Option<(f64, Vec<f64>, Vec<f64>)>> = (0..cfg.restarts as u64)
        .into_par_iter()
        .map(|r| {
            let (tg, th) = adversary_surrogate_restart(ds, t, delta, cfg, r)?;
            let mask = Group::Linear { theta: tg.clone() }.members(ds).ok()?;
            let obj = true_adversary_objective(ds, &mask, &Hypothesis::linear(th.clone()), t, delta).ok()?;
            Some((obj, tg, th))
        })
        .collect();
    Ok(pick_best(results.into_iter().map(|r| r.map(|(o, g, h)| (o, (g, h))))))
}

fn pick_best<T>(it: impl Iterator<Item = Option<(f64, T)>>) -> Option<T> {
    let mut best: Option<(f64, T)> = None;
    for (o, v) in it.flatten() {
        if best.as_ref().map_or(true, |(b, _)| o < *b) {
            best = Some((o, v));
        }
    }
    best.map(|(_, v)| v)
}

fn check_t(ds: &Dataset, t: &[f64]) -> Result<()> {
    if t.len() != ds.n() {
        return Err(Error::Shape {
            what: "expected-error vector",
            expected: ds.n(),
            got: t.len(),
        });
    }
    if t.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Config("expected errors must lie in [0, 1]".into()));
    }
    Ok(())
}

/// Shifts the bias of a linear group to the cut along `x·θ` that minimizes
/// `Σ_{i∈g} contrib_i` over non-empty groups `{x·θ > c}`.
fn best_group_cut(ds: &Dataset, theta: &[f64], contrib: &[f64]) -> Vec<f64> {
    let s: Vec<f64> = ds.rows().map(|x| dot(x, theta)).collect();
    let mut order: Vec<usize> = (0..ds.n()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let mut sum = 0.0;
    let mut best: Option<(f64, usize)> = None;
    for (k, &i) in order.iter().enumerate() {
        sum += contrib[i];
        let boundary = k + 1 == order.len() || s[order[k + 1]] < s[i];
        if boundary && best.map_or(true, |(b, _)| sum < b) {
            best = Some((sum, k + 1));
        }
    }
    let Some((_, k)) = best else {
        return theta.to_vec();
    };
    let cut = if k == order.len() {
        s[order[k - 1]] - 1.0
    } else {
        0.5 * (s[order[k - 1]] + s[order[k]])
    };
    let mut out = theta.to_vec();
    *out.last_mut().unwrap() -= cut;
    out
}

/// Exact minimization along one coordinate: moving `Δ` upward past
/// breakpoint `b` adds `cost` (and `count` members). Returns the midpoint of
/// the best interval whose member count is positive.
fn best_shift(mut events: Vec<(f64, f64, i64)>, base: f64, base_count: i64) -> Option<(f64, f64)> {
    events.retain(|e| e.0.is_finite());
    if events.is_empty() {
        return None;
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut value = base;
    let mut count = base_count;
    let mut best = (count > 0).then_some((value, events[0].0 - 1.0));
    let mut k = 0;
    while k < events.len() {
        let b = events[k].0;
        while k < events.len() && events[k].0 == b {
            value += events[k].1;
            count += events[k].2;
            k += 1;
        }
        let at = if k < events.len() { 0.5 * (b + events[k].0) } else { b + 1.0 };
        if count > 0 && best.map_or(true, |(v, _)| value < v) {
            best = Some((value, at));
        }
    }
    best.map(|(v, at)| (at, v))
}

fn rescale(theta: &mut [f64], radius: f64) {
    project(theta, radius);
}

/// One pass of exact coordinate search over the group's coefficients.
fn polish_group(ds: &Dataset, theta: &mut [f64], contrib: &[f64], radius: f64) {
    for k in 0..theta.len() {
        let s: Vec<f64> = ds.rows().map(|x| dot(x, theta)).collect();
        let mut base = 0.0;
        let mut base_count = 0i64;
        let mut events = Vec::new();
        for (i, x) in ds.rows().enumerate() {
            let xk = x[k];
            if xk == 0.0 {
                if s[i] > 0.0 {
                    base += contrib[i];
                    base_count += 1;
                }
            } else if xk > 0.0 {
                events.push((-s[i] / xk, contrib[i], 1));
            } else {
                base += contrib[i];
                base_count += 1;
                events.push((-s[i] / xk, -contrib[i], -1));
            }
        }
        let current: f64 = (0..ds.n()).filter(|&i| s[i] > 0.0).map(|i| contrib[i]).sum();
        if let Some((shift, v)) = best_shift(events, base, base_count) {
            if v < current {
                theta[k] += shift;
                rescale(theta, radius);
            }
        }
    }
}

fn contributions(ds: &Dataset, h: &Hypothesis, t: &[f64], delta: f64) -> Result<Vec<f64>> {
    Ok(h.utility_vector(ds)?.iter().zip(t).map(|(c, ti)| if *c { -ti } else { delta - ti }).collect())
}

/// Alternates a challenger update (the oracle restricted to the group) and a
/// group update (convex surrogate with `h'` fixed, then the best bias and an
/// exact coordinate search on the 0-1 objective), keeping a new pair only if
/// it strictly improves the exact objective. Challengers always come from the
/// oracle, so the comparison is against what the learner itself could fit.
/// The starting group is first cut at its best bias, so an empty start still
/// yields a non-empty group.
pub fn em_refine(
    ds: &Dataset,
    theta_g: Vec<f64>,
    challenger: Hypothesis,
    t: &[f64],
    delta: f64,
    cfg: &AdversaryConfig,
    oracle: &dyn Oracle,
) -> Result<Candidate> {
    check_t(ds, t)?;
    let mut group = Group::Linear { theta: theta_g };
    let mut mask = group.members(ds)?;
    let mut h = challenger;
    // an empty group is not a valid answer, so any non-empty cut beats it
    let mut obj = if group_size(&mask) == 0 {
        f64::INFINITY
    } else {
        true_adversary_objective(ds, &mask, &h, t, delta)?
    };
    let Group::Linear { theta } = &group else { unreachable!() };
    let cut = Group::Linear { theta: best_group_cut(ds, theta, &contributions(ds, &h, t, delta)?) };
    let cut_mask = cut.members(ds)?;
    if group_size(&cut_mask) > 0 {
        let o = true_adversary_objective(ds, &cut_mask, &h, t, delta)?;
        if o < obj {
            group = cut;
            mask = cut_mask;
            obj = o;
        }
    }
    if group_size(&mask) > 0 {
        let h2 = restricted_best_response(oracle, ds, &mask)?;
        let o = true_adversary_objective(ds, &mask, &h2, t, delta)?;
        if o <= obj {
            h = h2;
            obj = o;
        }
    }

    for _ in 0..cfg.em_iters {
        if group_size(&mask) == 0 {
            break;
        }
        let contrib = contributions(ds, &h, t, delta)?;
        let a: Vec<f64> = contrib.iter().zip(t).map(|(c, ti)| c + ti).collect();
        let Group::Linear { theta } = &group else { unreachable!() };
        let mut tg = theta.clone();
        let d = tg.len();
        let mut grad_buf = vec![0.0; d];
        descend(&mut tg, d, cfg.steps, cfg.step_size, cfg.norm_bound, &mut |th, grad| {
            let f = group_surrogate_value_grad(ds, &a, t, th, &mut grad_buf);
            grad.copy_from_slice(&grad_buf);
            f
        });
        let mut tg = best_group_cut(ds, &tg, &contrib);
        for _ in 0..cfg.polish_sweeps {
            let before = tg.clone();
            polish_group(ds, &mut tg, &contrib, cfg.norm_bound);
            if tg == before {
                break;
            }
        }
        let g2 = Group::Linear { theta: tg };
        let m2 = g2.members(ds)?;
        if group_size(&m2) == 0 || m2 == mask {
            break;
        }
        let h2 = restricted_best_response(oracle, ds, &m2)?;
        let o2 = true_adversary_objective(ds, &m2, &h2, t, delta)?;
        if o2 >= obj {
            break;
        }
        group = g2;
        mask = m2;
        h = h2;
        obj = o2;
    }
    Ok(Candidate {
        group,
        mask,
        challenger: h,
        objective: obj,
    })
}

/// Best response of the group player against a fixed learner mixture.
pub trait Adversary: Sync {
    /// Searches for the `(g, h')` minimizing `Σ_{i∈g} (δ·1[h' wrong] − t_i)`.
    fn search(&self, ds: &Dataset, t: &[f64], delta: f64) -> Result<Candidate>;
}

/// Heuristic search over linear groups and linear challengers.
#[derive(Debug, Clone, Default)]
pub struct LinearAdversary {
    pub cfg: AdversaryConfig,
}

impl LinearAdversary {
    pub fn new(cfg: AdversaryConfig) -> Self {
        LinearAdversary { cfg }
    }
}

impl Adversary for LinearAdversary {
    fn search(&self, ds: &Dataset, t: &[f64], delta: f64) -> Result<Candidate> {
        check_t(ds, t)?;
        self.cfg.validate()?;
        let oracle = LogisticOracle::new(self.cfg.oracle.clone());
        let found: Vec<Result<Option<Candidate>>> = (0..self.cfg.restarts as u64)
            .into_par_iter()
            .map(|r| {
                let Some((tg, th)) = adversary_surrogate_restart(ds, t, delta, &self.cfg, r) else {
                    return Ok(None);
                };
                let c = em_refine(ds, tg, Hypothesis::linear(th), t, delta, &self.cfg, &oracle)?;
                Ok((group_size(&c.mask) > 0).then_some(c))
            })
            .collect();
        let mut cands = Vec::new();
        for f in found {
            cands.push(f?.map(|c| (c.objective, c)));
        }
        match pick_best(cands.into_iter()) {
            Some(c) => Ok(c),
            None => {
                // every restart failed: fall back to the whole population
                let mut theta = vec![0.0; ds.dim()];
                *theta.last_mut().unwrap() = 1.0;
                let group = Group::Linear { theta };
                let mask = group.members(ds)?;
                let h = oracle.best_response(ds, &vec![1.0; ds.n()])?;
                let objective = true_adversary_objective(ds, &mask, &h, t, delta)?;
                Ok(Candidate {
                    group,
                    mask,
                    challenger: h,
                    objective,
                })
            }
        }
    }
}

/// Exact search over explicit group and challenger lists.
#[derive(Debug, Clone)]
pub struct EnumeratedAdversary {
    pub groups: Vec<Group>,
    pub hypotheses: Vec<Hypothesis>,
}

impl Adversary for EnumeratedAdversary {
    fn search(&self, ds: &Dataset, t: &[f64], delta: f64) -> Result<Candidate> {
        check_t(ds, t)?;
        let mut best: Option<Candidate> = None;
        for g in &self.groups {
            let mask = g.members(ds)?;
            if group_size(&mask) == 0 {
                continue;
            }
            for h in &self.hypotheses {
                let objective = true_adversary_objective(ds, &mask, h, t, delta)?;
                if best.as_ref().map_or(true, |b| objective < b.objective) {
                    best = Some(Candidate {
                        group: g.clone(),
                        mask: mask.clone(),
                        challenger: h.clone(),
                        objective,
                    });
                }
            }
        }
        best.ok_or_else(|| Error::Config("enumerated adversary needs a non-empty group and a hypothesis".into()))
    }
}

/// Serializable progress of a fictitious-play run; pass it back to
/// [`FictitiousPlay::resume`] to continue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayState {
    /// `h_0, h_1, …`; the audited mixture is uniform over all of them.
    pub learners: Vec<Hypothesis>,
    /// `λ_1, λ_2, …` (`λ_0 = 0` is implicit); `None` is the zero vector.
    pub duals: Vec<Option<DualAtom>>,
    pub history: Vec<ViolationReport>,
    pub converged: bool,
    pub finished: bool,
}

impl PlayState {
    pub fn rounds_done(&self) -> usize {
        self.history.len()
    }

    /// The uniform mixture over the learner history, merging repeats.
    pub fn average_classifier(&self) -> Result<RandomizedClassifier> {
        let mut support: Vec<Hypothesis> = Vec::new();
        let mut counts: Vec<f64> = Vec::new();
        for h in &self.learners {
            match support.iter().position(|s| s == h) {
                Some(k) => counts[k] += 1.0,
                None => {
                    support.push(h.clone());
                    counts.push(1.0);
                }
            }
        }
        let total = self.learners.len() as f64;
        RandomizedClassifier::new(support, counts.into_iter().map(|c| c / total).collect())
    }

    /// `λ̄ = (1/t) Σ_{t'<t} λ_{t'}` with `t = duals + 1`.
    pub fn average_dual(&self) -> DualState {
        let t = (self.duals.len() + 1) as f64;
        DualState {
            atoms: self
                .duals
                .iter()
                .flatten()
                .map(|a| DualAtom {
                    weight: a.weight / t,
                    ..a.clone()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BefairOutcome {
    pub classifier: RandomizedClassifier,
    pub history: Vec<ViolationReport>,
    pub converged: bool,
    pub state: PlayState,
}

pub struct FictitiousPlay<'a> {
    pub ds: &'a Dataset,
    pub cfg: BefairConfig,
    pub learner: &'a dyn Oracle,
    pub adversary: &'a dyn Adversary,
}

impl<'a> FictitiousPlay<'a> {
    pub fn new(ds: &'a Dataset, cfg: BefairConfig, learner: &'a dyn Oracle, adversary: &'a dyn Adversary) -> Result<Self> {
        cfg.validate()?;
        Ok(FictitiousPlay { ds, cfg, learner, adversary })
    }

    /// `h_0` = plain ERM, no duals yet.
    pub fn start(&self) -> Result<PlayState> {
        let h0 = self.learner.best_response(self.ds, &vec![1.0; self.ds.n()])?;
        Ok(PlayState {
            learners: vec![h0],
            duals: Vec::new(),
            history: Vec::new(),
            converged: false,
            finished: false,
        })
    }

    /// Plays round `t = rounds_done + 1`.
    pub fn step(&self, state: &mut PlayState) -> Result<()> {
        if state.finished {
            return Ok(());
        }
        let t = state.rounds_done() + 1;
        let hbar = state.average_classifier()?;
        let err = hbar.expected_error(self.ds)?;
        let cand = self.adversary.search(self.ds, &err, self.cfg.delta)?;
        let violation = cand.violation(self.cfg.gamma);
        log::info!("round {t}: best violation {violation:.3} on a group of {}", group_size(&cand.mask));
        state.history.push(ViolationReport {
            round: t,
            group: cand.group.clone(),
            challenger: cand.challenger.clone(),
            violation,
            group_size: group_size(&cand.mask),
        });
        if violation <= 0.0 {
            state.converged = true;
            state.finished = true;
            return Ok(());
        }
        if t >= self.cfg.rounds {
            state.finished = true;
            return Ok(());
        }
        let lambda_bar = state.average_dual();
        let h_t = if lambda_bar.atoms.is_empty() {
            state.learners[0].clone()
        } else {
            learner_best_response(self.ds, &lambda_bar, self.learner)?
        };
        state.learners.push(h_t);
        state.duals.push(Some(DualAtom {
            group: cand.group,
            hyp: cand.challenger,
            weight: self.cfg.dual_bound,
        }));
        Ok(())
    }

    pub fn resume(&self, mut state: PlayState) -> Result<BefairOutcome> {
        while !state.finished {
            self.step(&mut state)?;
        }
        Ok(BefairOutcome {
            classifier: state.average_classifier()?,
            history: state.history.clone(),
            converged: state.converged,
            state,
        })
    }

    pub fn run(&self) -> Result<BefairOutcome> {
        let state = self.start()?;
        self.resume(state)
    }
}

/// Fictitious play with the logistic learner and the linear adversary.
pub fn fictitious_play(ds: &Dataset, cfg: &BefairConfig) -> Result<BefairOutcome> {
    let learner = LogisticOracle::new(cfg.oracle.clone());
    let adversary = LinearAdversary::new(cfg.adversary());
    FictitiousPlay::new(ds, cfg.clone(), &learner, &adversary)?.run()
}
