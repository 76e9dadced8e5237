//! Dual prices and their mirror-descent update.

use super::SlateDecision;

/// Provider prices carried across decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub mu: Vec<f64>,
    pub eta: f64,
    /// Decisions served since the state was created.
    pub t: usize,
    /// Mean of the served slates' exposure distributions.
    pub cumulative_exposure: Vec<f64>,
}

impl DualState {
    pub fn new(providers: usize, eta: f64) -> Self {
        DualState {
            mu: vec![0.0; providers],
            eta,
            t: 0,
            cumulative_exposure: vec![0.0; providers],
        }
    }

    /// Zeroes the prices; the decision counter keeps running.
    pub fn reset_prices(&mut self) {
        self.mu.fill(0.0);
    }

    /// Folds one realized exposure distribution into the running mean.
    pub fn observe(&mut self, realized: &[f64]) {
        let n = (self.t + 1) as f64;
        for (c, r) in self.cumulative_exposure.iter_mut().zip(realized) {
            *c += (r - *c) / n;
        }
    }
}

/// The decision's exposure as a distribution over providers.
pub fn realized_distribution(decision: &SlateDecision) -> Vec<f64> {
    let total: f64 = decision.exposure_delta.iter().sum();
    if total > 0.0 {
        decision.exposure_delta.iter().map(|e| e / total).collect()
    } else {
        vec![0.0; decision.exposure_delta.len()]
    }
}

/// `e_target - realized`.
pub fn subgradient(decision: &SlateDecision, e_target: &[f64]) -> Vec<f64> {
    e_target.iter().zip(realized_distribution(decision)).map(|(e, r)| e - r).collect()
}

/// Euclidean proximal step `mu - (eta / 2) g`.
pub fn dual_update(state: &mut DualState, g: &[f64]) {
    for (m, x) in state.mu.iter_mut().zip(g) {
        *m -= 0.5 * state.eta * x;
    }
    state.t += 1;
}
