//! Regret-aware user satisfaction and the fuzzy fairness membership.

pub use crate::domain::RegretAnchor;
use crate::error::{Error, Result};
use crate::numeric::{clamped_exp, EXP_CLAMP};

/// Regret model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretParams {
    /// Regret-avoidance coefficient.
    pub delta: f64,
    /// Risk exponent of the utility; only 1.0 is used by the satisfaction model.
    pub alpha_risk: f64,
}

impl RegretParams {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Domain(format!("delta {delta} must be positive")));
        }
        Ok(RegretParams { delta, alpha_risk: 1.0 })
    }
}

/// Fuzzy trade-off parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuzzyParams {
    pub lambda: f64,
    pub k_steep: f64,
    pub g0: f64,
}

impl FuzzyParams {
    pub fn new(lambda: f64, k_steep: f64, g0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Domain(format!("lambda {lambda} outside [0, 1]")));
        }
        if !(k_steep > 0.0 && k_steep.is_finite() && g0 > 0.0 && g0.is_finite()) {
            return Err(Error::Domain(format!("k_steep {k_steep} and g0 {g0} must be positive")));
        }
        Ok(FuzzyParams { lambda, k_steep, g0 })
    }
}

/// `q^alpha_risk`.
pub fn utility(q: f64, alpha_risk: f64) -> f64 {
    q.powf(alpha_risk)
}

fn check_quality(q: f64, q_star: f64) -> Result<()> {
    if !(q >= 0.0 && q.is_finite() && q_star.is_finite()) {
        return Err(Error::Domain(format!("quality {q} must be a non-negative number")));
    }
    if q > q_star {
        return Err(Error::Domain(format!("quality {q} exceeds the ideal {q_star}")));
    }
    Ok(())
}

/// `1 - exp(-delta (q - q_star))`.
pub fn regret_rejoice(q: f64, q_star: f64, delta: f64) -> Result<f64> {
    check_quality(q, q_star)?;
    Ok(-(clamped_exp(-delta * (q - q_star)) - 1.0))
}

/// Utility plus regret-rejoice, with risk-neutral utility.
pub fn perceived_satisfaction(q: f64, q_star: f64, delta: f64) -> Result<f64> {
    Ok(q + regret_rejoice(q, q_star, delta)?)
}

/// Perceived satisfaction rescaled so the empty slate scores 0 and the
/// ideal slate scores 1. A user with `q_star = 0` scores 1.
pub fn normalized_satisfaction(q: f64, q_star: f64, delta: f64) -> Result<f64> {
    check_quality(q, q_star)?;
    Ok(SatisfactionModel::Regret { delta, anchor: RegretAnchor::Scaled }.value(q, q_star))
}

/// `1 / (1 + exp(k (g - g0 / 2)))`.
pub fn fairness_membership(unfairness: f64, params: &FuzzyParams) -> f64 {
    1.0 / (1.0 + clamped_exp(params.k_steep * (unfairness - params.g0 / 2.0)))
}

/// Derivative of [`fairness_membership`] with respect to the unfairness.
pub fn fairness_membership_slope(unfairness: f64, params: &FuzzyParams) -> f64 {
    let m = fairness_membership(unfairness, params);
    -params.k_steep * m * (1.0 - m)
}

/// How slate quality maps to normalized satisfaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SatisfactionModel {
    /// Regret-aware, concave in quality.
    Regret { delta: f64, anchor: RegretAnchor },
    /// `q / q_star`.
    Linear,
}

impl SatisfactionModel {
    /// Regret model with the `[0, 1]`-normalized scale.
    pub fn regret(delta: f64) -> Self {
        SatisfactionModel::Regret { delta, anchor: RegretAnchor::Scaled }
    }

    /// Rescaled satisfaction; `q` is clamped to `[0, q_star]`. The ideal
    /// slate scores 1; the empty slate scores 0 except under
    /// [`RegretAnchor::Unit`] with `delta != 1`.
    pub fn value(&self, q: f64, q_star: f64) -> f64 {
        if q_star <= 0.0 {
            return 1.0;
        }
        let q = q.clamp(0.0, q_star);
        match *self {
            SatisfactionModel::Linear => q / q_star,
            SatisfactionModel::Regret { delta, anchor: RegretAnchor::Unit } => {
                let head = q_star.min(EXP_CLAMP).exp_m1();
                let regret = (delta * (q_star - q)).min(EXP_CLAMP).exp_m1();
                (q - regret + head) / (q_star + head)
            }
            SatisfactionModel::Regret { delta, anchor: RegretAnchor::Scaled } => {
                // numerator and denominator scaled by exp(-delta q_star)
                let tail = clamped_exp(-delta * q_star);
                let num = -(-delta * q).exp_m1() + q * tail;
                let den = 1.0 + (q_star - 1.0) * tail;
                (num / den).clamp(0.0, 1.0)
            }
        }
    }

    /// Derivative of [`Self::value`] in `q`.
    pub fn slope(&self, q: f64, q_star: f64) -> f64 {
        if q_star <= 0.0 {
            return 0.0;
        }
        let q = q.clamp(0.0, q_star);
        match *self {
            SatisfactionModel::Linear => 1.0 / q_star,
            SatisfactionModel::Regret { delta, anchor: RegretAnchor::Unit } => {
                (1.0 + delta * clamped_exp(delta * (q_star - q))) / (q_star + q_star.min(EXP_CLAMP).exp_m1())
            }
            SatisfactionModel::Regret { delta, anchor: RegretAnchor::Scaled } => {
                let tail = clamped_exp(-delta * q_star);
                (delta * clamped_exp(-delta * q) + tail) / (1.0 + (q_star - 1.0) * tail)
            }
        }
    }
}
