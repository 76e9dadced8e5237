//! Target exposure: the fairness side of the dual decomposition.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::regret::{fairness_membership, fairness_membership_slope, FuzzyParams};
use crate::simplex::project_in_place;

const ITERATIONS: usize = 500;
const INITIAL_STEP: f64 = 0.05;
const MIN_STEP: f64 = 1e-12;
const MAX_STEP: f64 = 1e6;
/// Accepted gains below this (relative) end a start; 500 such steps move the
/// objective by at most 5e-8.
const GAIN_TOL: f64 = 1e-10;
const RANDOM_STARTS: usize = 3;
const START_SEED: u64 = 0x5eed_e7a6;

/// Sample variance of `e_p / gamma_p` (0 for a single provider).
pub fn merit_variance(e: &[f64], gamma: &[f64]) -> f64 {
    let n = e.len();
    if n < 2 {
        return 0.0;
    }
    let mean = e.iter().zip(gamma).map(|(x, g)| x / g).sum::<f64>() / n as f64;
    e.iter().zip(gamma).map(|(x, g)| (x / g - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// `lambda * G'(Var(e / gamma)) + mu . e`.
pub fn target_objective(e: &[f64], mu: &[f64], gamma: &[f64], fuzzy: &FuzzyParams) -> f64 {
    let linear: f64 = mu.iter().zip(e).map(|(m, x)| m * x).sum();
    fuzzy.lambda * fairness_membership(merit_variance(e, gamma), fuzzy) + linear
}

/// Writes the gradient into `out`; returns the variance and the magnitude of
/// the fairness part's largest entry.
fn gradient(e: &[f64], mu: &[f64], gamma: &[f64], fuzzy: &FuzzyParams, out: &mut [f64]) -> (f64, f64) {
    let n = e.len();
    if n < 2 || fuzzy.lambda == 0.0 {
        out.copy_from_slice(mu);
        return (0.0, 0.0);
    }
    let mean = e.iter().zip(gamma).map(|(x, g)| x / g).sum::<f64>() / n as f64;
    let var = e.iter().zip(gamma).map(|(x, g)| (x / g - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let outer = fuzzy.lambda * fairness_membership_slope(var, fuzzy) * 2.0 / (n - 1) as f64;
    let mut largest: f64 = 0.0;
    for p in 0..n {
        let fair = outer * (e[p] / gamma[p] - mean) / gamma[p];
        largest = largest.max(fair.abs());
        out[p] = mu[p] + fair;
    }
    (var, largest)
}

fn ascend(
    start: &mut Vec<f64>,
    mu: &[f64],
    gamma: &[f64],
    fuzzy: &FuzzyParams,
    grad: &mut [f64],
    trial: &mut Vec<f64>,
    scratch: &mut Vec<f64>,
) -> f64 {
    let mut value = target_objective(start, mu, gamma, fuzzy);
    let mut step = INITIAL_STEP;
    let price_scale = mu.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for _ in 0..ITERATIONS {
        let (var, fair) = gradient(start, mu, gamma, fuzzy, grad);
        if var > fuzzy.g0 && price_scale > 0.0 && fair <= 1e-12 * price_scale {
            // saturated membership: the ascent only follows mu toward a
            // vertex, and vertices are compared separately
            break;
        }
        trial.clear();
        trial.extend(start.iter().zip(grad.iter()).map(|(x, g)| x + step * g));
        project_in_place(trial, scratch);
        let v = target_objective(trial, mu, gamma, fuzzy);
        if v > value {
            let gain = v - value;
            std::mem::swap(start, trial);
            value = v;
            step = (step * 2.0).min(MAX_STEP);
            if gain <= GAIN_TOL * value.abs().max(1.0) {
                break;
            }
        } else {
            step *= 0.5;
            if step < MIN_STEP {
                break;
            }
        }
    }
    value
}

/// Maximizes [`target_objective`] over the simplex by projected gradient
/// ascent from the uniform point, `gamma` and three fixed-seed Dirichlet
/// draws; vertices are also compared. Ties keep the earlier candidate.
pub fn target_exposure(mu: &[f64], gamma: &[f64], fuzzy: &FuzzyParams) -> Vec<f64> {
    let n = mu.len();
    if n == 0 {
        return Vec::new();
    }
    if fuzzy.lambda == 0.0 {
        let mut best = 0;
        for p in 1..n {
            if mu[p] > mu[best] {
                best = p;
            }
        }
        let mut e = vec![0.0; n];
        e[best] = 1.0;
        return e;
    }
    let total: f64 = gamma.iter().sum();
    let merit: Vec<f64> = gamma.iter().map(|g| g / total).collect();
    let mut starts = vec![vec![1.0 / n as f64; n], merit.clone()];
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let unit = Gamma::new(1.0, 1.0).expect("valid shape");
    for _ in 0..RANDOM_STARTS {
        let draw: Vec<f64> = (0..n).map(|_| unit.sample(&mut rng)).collect();
        let s: f64 = draw.iter().sum();
        starts.push(draw.into_iter().map(|x| x / s).collect());
    }

    let mut grad = vec![0.0; n];
    let mut trial = Vec::with_capacity(n);
    let mut scratch = Vec::with_capacity(n);
    let mut best = merit;
    let mut best_val = target_objective(&best, mu, gamma, fuzzy);
    for mut e in starts {
        let v = ascend(&mut e, mu, gamma, fuzzy, &mut grad, &mut trial, &mut scratch);
        if v > best_val {
            best_val = v;
            best = e;
        }
    }
    for p in 0..n {
        let mut vertex = vec![0.0; n];
        vertex[p] = 1.0;
        let v = target_objective(&vertex, mu, gamma, fuzzy);
        if v > best_val {
            best_val = v;
            best = vertex;
        }
    }
    best
}
