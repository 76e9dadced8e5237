use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Traffic forecaster used when planning upcoming intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForecastMethod {
    Mean,
    Seasonal,
    Last,
}

/// How the per-interval demand is split across providers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemandWeighting {
    /// Every provider claims `alpha * K * r`.
    Uniform,
    /// Claims scaled by merit share.
    Merit,
}

/// Per-user slate solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    /// Scalarized frontier scan plus local improvement.
    Parametric,
    /// Exhaustive enumeration; only for tiny catalogs.
    Exact,
}

/// Worst-case reference used to rescale perceived satisfaction inside the
/// re-ranking objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegretAnchor {
    /// Reference `1 - exp(q_star)`, independent of delta, so the regret term
    /// gains weight as delta grows.
    Unit,
    /// Reference `1 - exp(delta * q_star)`: satisfaction spans exactly
    /// `[0, 1]` for every delta.
    Scaled,
}

macro_rules! keyword_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($name => Ok($ty::$variant),)+
                    other => Err(Error::Validation(format!(
                        concat!("unknown ", stringify!($ty), " `{}`"), other
                    ))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $name,)+ })
            }
        }
    };
}

keyword_enum!(ForecastMethod { Mean => "mean", Seasonal => "seasonal", Last => "last" });
keyword_enum!(DemandWeighting { Uniform => "uniform", Merit => "merit" });
keyword_enum!(SolverMode { Parametric => "parametric", Exact => "exact" });
keyword_enum!(RegretAnchor { Unit => "unit", Scaled => "scaled" });

/// Hyperparameters of one re-ranking session.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Slate length `K`.
    pub k: usize,
    /// Number of update intervals `N`.
    pub intervals: usize,
    /// Satisfaction/fairness trade-off in `[0, 1]`; higher favours fairness.
    pub lambda: f64,
    /// Regret-avoidance coefficient, `> 0`.
    pub delta: f64,
    /// Risk exponent of the utility; only the risk-neutral 1.0 is accepted.
    pub alpha_risk: f64,
    /// Demand coefficient of the allocation module, `> 0`.
    pub alpha_demand: f64,
    /// Minimum-exposure fraction in `[0, 1]`.
    pub beta_min: f64,
    /// Dual step size, `> 0`.
    pub eta: f64,
    /// Steepness of the fairness membership sigmoid, `> 0`.
    pub k_steep: f64,
    /// Unacceptable unfairness level, `> 0`.
    pub g0: f64,
    pub forecast_method: ForecastMethod,
    pub seed: u64,
    pub demand_weighting: DemandWeighting,
    /// Period used by the seasonal forecaster.
    pub seasonal_period: usize,
    /// Forecast used before any traffic is observed; `None` means
    /// total users / N.
    pub traffic_prior: Option<f64>,
    /// Grid points of the parametric slate solver.
    pub scan_points: usize,
    pub solver_mode: SolverMode,
    /// Per-decision weight on satisfaction; `None` means 1 / (users in the
    /// current interval).
    pub satisfaction_scale: Option<f64>,
    pub regret_anchor: RegretAnchor,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: 10,
            intervals: 8,
            lambda: 0.5,
            delta: 1.0,
            alpha_risk: 1.0,
            alpha_demand: 1.0,
            beta_min: 0.9,
            eta: 1e-3,
            k_steep: 50.0,
            g0: 0.1,
            forecast_method: ForecastMethod::Mean,
            seed: 42,
            demand_weighting: DemandWeighting::Merit,
            seasonal_period: 2,
            traffic_prior: None,
            scan_points: 32,
            solver_mode: SolverMode::Parametric,
            satisfaction_scale: None,
            regret_anchor: RegretAnchor::Unit,
        }
    }
}

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Validation(what()))
    }
}

impl RunConfig {
    /// Checks every range constraint.
    pub fn validate(&self) -> Result<()> {
        check(self.k >= 1, || "K must be at least 1".into())?;
        check(self.intervals >= 1, || "N must be at least 1".into())?;
        check((0.0..=1.0).contains(&self.lambda), || {
            format!("lambda {} outside [0, 1]", self.lambda)
        })?;
        check(self.delta > 0.0 && self.delta.is_finite(), || {
            format!("delta {} must be positive", self.delta)
        })?;
        check(self.alpha_risk == 1.0, || {
            format!("alpha_risk {} unsupported; users are modelled as risk-neutral (1.0)", self.alpha_risk)
        })?;
        check(self.alpha_demand > 0.0 && self.alpha_demand.is_finite(), || {
            format!("alpha_demand {} must be positive", self.alpha_demand)
        })?;
        check((0.0..=1.0).contains(&self.beta_min), || {
            format!("beta_min {} outside [0, 1]", self.beta_min)
        })?;
        check(self.eta > 0.0 && self.eta.is_finite(), || {
            format!("eta {} must be positive", self.eta)
        })?;
        check(self.k_steep > 0.0 && self.k_steep.is_finite(), || {
            format!("k_steep {} must be positive", self.k_steep)
        })?;
        check(self.g0 > 0.0 && self.g0.is_finite(), || {
            format!("g0 {} must be positive", self.g0)
        })?;
        check(self.seasonal_period >= 1, || "seasonal_period must be at least 1".into())?;
        check(self.scan_points >= 2, || "scan_points must be at least 2".into())?;
        if let Some(p) = self.traffic_prior {
            check(p >= 0.0 && p.is_finite(), || format!("traffic_prior {p} must be >= 0"))?;
        }
        if let Some(w) = self.satisfaction_scale {
            check(w > 0.0 && w.is_finite(), || {
                format!("satisfaction_scale {w} must be positive")
            })?;
        }
        Ok(())
    }

    /// Returns `self` if it passes [`validate`](Self::validate).
    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    /// Sets one field from its textual key and value. Keys are the field
    /// names; `K` and `N` are accepted for `k` and `intervals`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::Validation(format!("bad value `{v}` for {key}")))
        }
        fn opt(key: &str, v: &str) -> Result<Option<f64>> {
            match v.trim() {
                "" | "auto" | "none" => Ok(None),
                s => num(key, s).map(Some),
            }
        }
        match key.trim() {
            "K" | "k" => self.k = num(key, value)?,
            "N" | "n" | "intervals" => self.intervals = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "delta" => self.delta = num(key, value)?,
            "alpha_risk" => self.alpha_risk = num(key, value)?,
            "alpha_demand" => self.alpha_demand = num(key, value)?,
            "beta_min" => self.beta_min = num(key, value)?,
            "eta" => self.eta = num(key, value)?,
            "k_steep" => self.k_steep = num(key, value)?,
            "g0" => self.g0 = num(key, value)?,
            "forecast_method" => self.forecast_method = value.parse()?,
            "seed" => self.seed = num(key, value)?,
            "demand_weighting" => self.demand_weighting = value.parse()?,
            "seasonal_period" => self.seasonal_period = num(key, value)?,
            "traffic_prior" => self.traffic_prior = opt(key, value)?,
            "scan_points" => self.scan_points = num(key, value)?,
            "solver_mode" => self.solver_mode = value.parse()?,
            "satisfaction_scale" => self.satisfaction_scale = opt(key, value)?,
            "regret_anchor" => self.regret_anchor = value.parse()?,
            other => return Err(Error::Validation(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }
}
