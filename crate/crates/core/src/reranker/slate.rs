//! Per-user slate optimization against provider prices.

use crate::domain::{position_weights, ProviderCatalog, Slate, SolverMode};
use crate::error::{Error, Result};
use crate::metrics::{dcg_of, ideal_slate};
use crate::regret::SatisfactionModel;

/// Largest catalog the exhaustive solver accepts.
pub const EXACT_MAX_ITEMS: usize = 12;
/// Largest slate the exhaustive solver accepts.
pub const EXACT_MAX_K: usize = 4;
const MAX_LOCAL_ROUNDS: usize = 64;

/// Settings of one slate optimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlateSettings {
    pub k: usize,
    pub lambda: f64,
    pub model: SatisfactionModel,
    /// Per-decision weight on satisfaction.
    pub w_norm: f64,
    pub mode: SolverMode,
    pub scan_points: usize,
}

/// A served slate with the quantities the dual loop needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SlateDecision {
    pub slate: Slate,
    /// DCG of the slate.
    pub achieved_q: f64,
    /// Ideal DCG of the user.
    pub ideal_q: f64,
    pub z_prime: f64,
    pub objective: f64,
    /// Position-decayed exposure per provider.
    pub exposure_delta: Vec<f64>,
}

/// The inner maximization for one user.
#[derive(Debug, Clone, Copy)]
pub struct SlateProblem<'a> {
    pub scores: &'a [f64],
    pub owners: &'a [usize],
    pub mu: &'a [f64],
    /// `p(1..=K)`.
    pub weights: &'a [f64],
    pub model: SatisfactionModel,
    pub q_star: f64,
    /// `(1 - lambda) * w_norm`.
    pub scale: f64,
}

impl SlateProblem<'_> {
    fn value(&self, q: f64, price: f64) -> f64 {
        self.scale * self.model.value(q, self.q_star) - price
    }

    fn parts(&self, items: &[usize]) -> (f64, f64) {
        let mut q = 0.0;
        let mut price = 0.0;
        for (w, &i) in self.weights.iter().zip(items) {
            q += w * self.scores[i];
            price += w * self.mu[self.owners[i]];
        }
        (q, price)
    }

    /// Objective of an ordered slate.
    pub fn objective(&self, items: &[usize]) -> f64 {
        let (q, price) = self.parts(items);
        self.value(q, price)
    }

    /// Exhaustive search over ordered K-subsets; the lexicographically first
    /// optimum wins.
    pub fn solve_exact(&self) -> Result<Vec<usize>> {
        let n = self.scores.len();
        let k = self.weights.len();
        if n > EXACT_MAX_ITEMS || k > EXACT_MAX_K {
            return Err(Error::Domain(format!(
                "exact solver limited to {EXACT_MAX_ITEMS} items and K <= {EXACT_MAX_K}, got {n} and {k}"
            )));
        }
        check_size(n, k)?;
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut current = Vec::with_capacity(k);
        let mut used = vec![false; n];
        self.enumerate(&mut current, &mut used, &mut best);
        Ok(best.map(|b| b.1).unwrap_or_default())
    }

    fn enumerate(&self, current: &mut Vec<usize>, used: &mut [bool], best: &mut Option<(f64, Vec<usize>)>) {
        if current.len() == self.weights.len() {
            let v = self.objective(current);
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                *best = Some((v, current.clone()));
            }
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                current.push(i);
                self.enumerate(current, used, best);
                current.pop();
                used[i] = false;
            }
        }
    }

    /// Frontier scan over linearization weights followed by a swap/replace
    /// local search. `ideal` is the user's relevance-ordered top-K.
    pub fn solve_parametric(&self, ideal: &[usize], scan_points: usize) -> Result<Vec<usize>> {
        let n = self.scores.len();
        let k = self.weights.len();
        check_size(n, k)?;
        let mut best = ideal.to_vec();
        let mut best_val = self.objective(&best);
        let improves = |v: f64, b: f64| v > b + 1e-12 * b.abs().max(1.0);

        let candidates = provider_heads(self.scores, self.owners, self.mu.len(), k);
        let mut pool: Vec<usize> = ideal.to_vec();
        let mut keyed: Vec<(f64, usize)> = Vec::with_capacity(candidates.len());
        for w in self.scan_weights(scan_points) {
            keyed.clear();
            keyed.extend(candidates.iter().map(|&i| (w * self.scores[i] - self.mu[self.owners[i]], i)));
            let order = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
            if k < keyed.len() {
                keyed.select_nth_unstable_by(k - 1, order);
                keyed.truncate(k);
            }
            keyed.sort_unstable_by(order);
            let slate: Vec<usize> = keyed.iter().map(|&(_, i)| i).collect();
            let v = self.objective(&slate);
            if improves(v, best_val) {
                best_val = v;
                best = slate.clone();
            }
            pool.extend(slate);
        }
        pool.extend(ideal_slate(self.scores, (2 * k).min(n))?);
        pool.sort_unstable();
        pool.dedup();
        self.local_search(&mut best, &pool);
        Ok(best)
    }

    fn scan_weights(&self, points: usize) -> Vec<f64> {
        if self.scale <= 0.0 || self.q_star <= 0.0 {
            return vec![0.0];
        }
        let lo = self.scale * self.model.slope(self.q_star, self.q_star);
        let hi = self.scale * self.model.slope(0.0, self.q_star);
        if !(lo > 0.0) || hi <= lo * (1.0 + 1e-12) || points < 2 {
            return vec![hi.max(lo)];
        }
        let ratio = (hi / lo).ln();
        (0..points)
            .map(|j| lo * (ratio * j as f64 / (points - 1) as f64).exp())
            .collect()
    }

    fn local_search(&self, slate: &mut [usize], pool: &[usize]) {
        let (mut q, mut price) = self.parts(slate);
        let mut val = self.value(q, price);
        let improves = |v: f64, b: f64| v > b + 1e-12 * b.abs().max(1.0);
        let w = self.weights;
        for _ in 0..MAX_LOCAL_ROUNDS {
            let mut moved = false;
            for pos in 0..slate.len() {
                for &j in pool {
                    if slate.contains(&j) {
                        continue;
                    }
                    let i = slate[pos];
                    let nq = q + w[pos] * (self.scores[j] - self.scores[i]);
                    let np = price + w[pos] * (self.mu[self.owners[j]] - self.mu[self.owners[i]]);
                    let nv = self.value(nq, np);
                    if improves(nv, val) {
                        slate[pos] = j;
                        (q, price, val) = (nq, np, nv);
                        moved = true;
                    }
                }
            }
            for a in 0..slate.len() {
                for b in a + 1..slate.len() {
                    let (i, j) = (slate[a], slate[b]);
                    let dw = w[a] - w[b];
                    let nq = q + dw * (self.scores[j] - self.scores[i]);
                    let np = price + dw * (self.mu[self.owners[j]] - self.mu[self.owners[i]]);
                    let nv = self.value(nq, np);
                    if improves(nv, val) {
                        slate.swap(a, b);
                        (q, price, val) = (nq, np, nv);
                        moved = true;
                    }
                }
            }
            if !moved {
                break;
            }
        }
    }
}

fn check_size(n: usize, k: usize) -> Result<()> {
    if k == 0 || n < k {
        return Err(Error::Domain(format!("need {k} items for a slate, only {n} available")));
    }
    Ok(())
}

/// Each provider's `k` best-scoring items; other items can never enter a
/// slate chosen by price-adjusted score.
fn provider_heads(scores: &[f64], owners: &[usize], providers: usize, k: usize) -> Vec<usize> {
    let mut by_provider: Vec<Vec<usize>> = vec![Vec::new(); providers];
    for (i, &p) in owners.iter().enumerate() {
        by_provider[p].push(i);
    }
    let order = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    let mut out = Vec::new();
    for mut items in by_provider {
        if items.len() > k {
            items.select_nth_unstable_by(k - 1, order);
            items.truncate(k);
        }
        out.extend(items);
    }
    out.sort_unstable();
    out
}

/// Solves the inner problem for one user whose dense catalog scores are
/// `scores`.
pub fn solve_user_slate(
    user: usize,
    scores: &[f64],
    catalog: &ProviderCatalog,
    mu: &[f64],
    settings: &SlateSettings,
) -> Result<SlateDecision> {
    let k = settings.k;
    check_size(scores.len(), k)?;
    let weights = position_weights(k);
    let ideal = ideal_slate(scores, k)?;
    let q_star = dcg_of(&ideal, scores);
    let problem = SlateProblem {
        scores,
        owners: catalog.owners(),
        mu,
        weights: &weights,
        model: settings.model,
        q_star,
        scale: (1.0 - settings.lambda) * settings.w_norm,
    };
    let items = match settings.mode {
        SolverMode::Exact => problem.solve_exact()?,
        SolverMode::Parametric => problem.solve_parametric(&ideal, settings.scan_points)?,
    };
    Ok(decision_for(&problem, user, items, catalog))
}

pub(crate) fn decision_for(
    problem: &SlateProblem<'_>,
    user: usize,
    items: Vec<usize>,
    catalog: &ProviderCatalog,
) -> SlateDecision {
    let achieved_q = dcg_of(&items, problem.scores);
    let mut exposure_delta = vec![0.0; catalog.num_providers()];
    for (w, &i) in problem.weights.iter().zip(&items) {
        exposure_delta[catalog.owner(i)] += w;
    }
    let objective = problem.objective(&items);
    let k = items.len();
    SlateDecision {
        slate: Slate::new(user, items, k).expect("solver emits distinct items"),
        achieved_q,
        ideal_q: problem.q_star,
        z_prime: problem.model.value(achieved_q, problem.q_star),
        objective,
        exposure_delta,
    }
}
