//! Online re-ranking: per-user slate choice against provider prices, with
//! prices driven by dual mirror descent toward a fair exposure target.

mod dual;
mod slate;
mod target;

use std::fmt;
use std::str::FromStr;

pub use dual::{dual_update, realized_distribution, subgradient, DualState};
pub use slate::{solve_user_slate, SlateDecision, SlateProblem, SlateSettings, EXACT_MAX_ITEMS, EXACT_MAX_K};
pub use target::{merit_variance, target_exposure, target_objective};

use crate::allocator::{AllocationPlan, ExposurePlanner, FairnessSpec, PlannerSettings};
use crate::domain::{position_weights, Dataset, RunConfig, SolverMode};
use crate::error::{Error, Result};
use crate::metrics::{dcg_of, ideal_slate, ndcg_from, ExposureLedger, MetricSummary, QualityReport};
use crate::regret::{FuzzyParams, SatisfactionModel};

/// Share of the mean given to providers with no outstanding target, so the
/// merit vector of the exposure target stays strictly positive.
const TARGET_FLOOR: f64 = 1e-3;

/// Re-ranking policy of a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    /// Bankruptcy planning plus regret-aware dual re-ranking.
    BankfairPlus,
    /// As `BankfairPlus` with linear satisfaction `q / q_star`.
    BankfairLinear,
    /// Pure relevance ranking.
    TopK,
    /// Relevance ranking whose last slot goes to the provider furthest below
    /// its interval target.
    GreedyMinExposure,
}

impl Policy {
    pub const ALL: [Policy; 4] = [
        Policy::BankfairPlus,
        Policy::BankfairLinear,
        Policy::TopK,
        Policy::GreedyMinExposure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Policy::BankfairPlus => "bankfair_plus",
            Policy::BankfairLinear => "bankfair_linear",
            Policy::TopK => "topk",
            Policy::GreedyMinExposure => "greedy_min_exposure",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown policy {s:?}")))
    }
}

/// One served user.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    /// 1-based decision counter over the session.
    pub t: usize,
    pub interval: usize,
    /// Store user index.
    pub user: usize,
    /// Catalog item indices in slate order.
    pub items: Vec<usize>,
    pub dcg: f64,
    pub ideal: f64,
    pub ndcg: f64,
    pub z_prime: f64,
    pub objective: f64,
}

/// Everything a session produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub policy: Policy,
    pub k: usize,
    pub decisions: Vec<DecisionRecord>,
    pub ledger: ExposureLedger,
    pub plans: Vec<AllocationPlan>,
    /// `m_p` of the run.
    pub min_exposure: Vec<f64>,
    pub metrics: MetricSummary,
    /// Prices after every decision, when requested.
    pub duals: Option<Vec<Vec<f64>>>,
}

impl SessionLog {
    /// Per-user accuracy of the logged decisions.
    pub fn quality(&self) -> QualityReport {
        QualityReport::from_decisions(self.decisions.iter().map(|d| (d.user, d.dcg, d.ideal)))
    }
}

/// Optional session outputs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SessionOptions {
    pub record_duals: bool,
}

/// Total position-decayed exposure a run of `decisions` slates hands out.
pub fn exposure_budget(decisions: usize, k: usize) -> f64 {
    decisions as f64 * position_weights(k).iter().sum::<f64>()
}

/// Minimum-exposure requirement of a dataset under `config`.
pub fn fairness_spec(dataset: &Dataset, config: &RunConfig) -> FairnessSpec {
    FairnessSpec::from_merit(
        dataset.catalog().merit(),
        config.beta_min,
        exposure_budget(dataset.schedule().len(), config.k),
        dataset.schedule().interval_count(),
    )
}

/// Planner settings derived from `config`; the traffic prior defaults to the
/// mean interval traffic of the dataset.
pub fn planner_settings(dataset: &Dataset, config: &RunConfig) -> PlannerSettings {
    let n = dataset.schedule().interval_count().max(1);
    PlannerSettings {
        k: config.k,
        alpha_demand: config.alpha_demand,
        forecast_method: config.forecast_method,
        seasonal_period: config.seasonal_period,
        traffic_prior: config
            .traffic_prior
            .unwrap_or(dataset.schedule().len() as f64 / n as f64),
        weighting: config.demand_weighting,
    }
}

/// Merit vector of the interval's exposure target: the normalized interval
/// allocation, floored away from zero, or `fallback` when nothing is owed.
pub fn interval_target_merit(current_target: &[f64], fallback: &[f64]) -> Vec<f64> {
    let total: f64 = current_target.iter().sum();
    let source = if total > 0.0 { current_target } else { fallback };
    let total: f64 = source.iter().sum();
    let n = source.len() as f64;
    let floor = TARGET_FLOOR / n;
    let floored: Vec<f64> = source.iter().map(|x| (x / total).max(floor)).collect();
    let s: f64 = floored.iter().sum();
    floored.into_iter().map(|x| x / s).collect()
}

/// Per-interval state shared by the decision loop.
struct IntervalContext<'a> {
    interval: usize,
    plan: &'a AllocationPlan,
    target_merit: Vec<f64>,
    w_norm: f64,
}

/// Outcome of one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalOutcome {
    pub decisions: Vec<DecisionRecord>,
    /// Position-decayed exposure earned in the interval, per provider.
    pub exposure: Vec<f64>,
}

/// Runs policies over a dataset.
pub struct Session<'a> {
    dataset: &'a Dataset,
    config: RunConfig,
    policy: Policy,
    options: SessionOptions,
    weights: Vec<f64>,
    fuzzy: FuzzyParams,
    model: SatisfactionModel,
    ledger: ExposureLedger,
    state: DualState,
    duals: Vec<Vec<f64>>,
    scores: Vec<f64>,
}

impl<'a> Session<'a> {
    pub fn new(dataset: &'a Dataset, config: &RunConfig, policy: Policy, options: SessionOptions) -> Result<Self> {
        config.validate()?;
        let catalog = dataset.catalog();
        if catalog.num_items() < config.k {
            return Err(Error::Validation(format!(
                "catalog has {} items, fewer than K = {}",
                catalog.num_items(),
                config.k
            )));
        }
        if config.solver_mode == SolverMode::Exact
            && (catalog.num_items() > EXACT_MAX_ITEMS || config.k > EXACT_MAX_K)
        {
            return Err(Error::Validation(format!(
                "exact solver needs at most {EXACT_MAX_ITEMS} items and K <= {EXACT_MAX_K}"
            )));
        }
        let model = match policy {
            Policy::BankfairLinear => SatisfactionModel::Linear,
            _ => SatisfactionModel::Regret { delta: config.delta, anchor: config.regret_anchor },
        };
        Ok(Session {
            dataset,
            config: config.clone(),
            policy,
            options,
            weights: position_weights(config.k),
            fuzzy: FuzzyParams::new(config.lambda, config.k_steep, config.g0)?,
            model,
            ledger: ExposureLedger::new(catalog.num_providers(), dataset.schedule().interval_count()),
            state: DualState::new(catalog.num_providers(), config.eta),
            duals: Vec::new(),
            scores: vec![0.0; catalog.num_items()],
        })
    }

    /// Dual state after the last served decision.
    pub fn state(&self) -> &DualState {
        &self.state
    }

    fn uses_prices(&self) -> bool {
        matches!(self.policy, Policy::BankfairPlus | Policy::BankfairLinear) && self.config.lambda > 0.0
    }

    /// Serves the users of one interval in order.
    fn run_interval(&mut self, ctx: &IntervalContext<'_>, users: &[usize], first_t: usize) -> Result<IntervalOutcome> {
        let catalog = self.dataset.catalog();
        let n_providers = catalog.num_providers();
        self.state.reset_prices();
        let mut decisions = Vec::with_capacity(users.len());
        let mut earned = vec![0.0; n_providers];
        let mut max_g: f64 = 0.0;
        for (j, &user) in users.iter().enumerate() {
            self.dataset.fill_scores(user, &mut self.scores);
            let scores = &self.scores;
            let ideal = ideal_slate(scores, self.config.k)?;
            let q_star = dcg_of(&ideal, scores);
            let problem = SlateProblem {
                scores,
                owners: catalog.owners(),
                mu: &self.state.mu,
                weights: &self.weights,
                model: self.model,
                q_star,
                scale: (1.0 - self.config.lambda) * ctx.w_norm,
            };
            let items = match self.policy {
                Policy::TopK => ideal,
                Policy::GreedyMinExposure => greedy_override(ideal, scores, catalog, &ctx.plan.current_target, &earned),
                Policy::BankfairPlus | Policy::BankfairLinear => match self.config.solver_mode {
                    SolverMode::Exact => problem.solve_exact()?,
                    SolverMode::Parametric => problem.solve_parametric(&ideal, self.config.scan_points)?,
                },
            };
            let decision = slate::decision_for(&problem, user, items, catalog);
            for (e, d) in earned.iter_mut().zip(&decision.exposure_delta) {
                *e += d;
            }
            self.ledger.record(&decision.slate, catalog, ctx.interval)?;

            let g = if self.uses_prices() {
                let e_t = target_exposure(&self.state.mu, &ctx.target_merit, &self.fuzzy);
                subgradient(&decision, &e_t)
            } else {
                vec![0.0; n_providers]
            };
            self.state.observe(&realized_distribution(&decision));
            dual_update(&mut self.state, &g);
            max_g = g.iter().fold(max_g, |m, x| m.max(x.abs()));
            let bound = 0.5 * self.state.eta * (j + 1) as f64 * max_g;
            let norm = self.state.mu.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if !norm.is_finite() || norm > bound * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::Invariant(format!(
                    "dual prices left their bound at t = {}: {norm} > {bound}",
                    self.state.t
                )));
            }
            if self.options.record_duals {
                self.duals.push(self.state.mu.clone());
            }
            decisions.push(DecisionRecord {
                t: first_t + j,
                interval: ctx.interval,
                user,
                items: decision.slate.entries().to_vec(),
                dcg: decision.achieved_q,
                ideal: decision.ideal_q,
                ndcg: ndcg_from(decision.achieved_q, decision.ideal_q),
                z_prime: decision.z_prime,
                objective: decision.objective,
            });
        }
        Ok(IntervalOutcome { decisions, exposure: earned })
    }

    /// Runs every interval and evaluates the result.
    pub fn run(mut self) -> Result<SessionLog> {
        let dataset = self.dataset;
        let schedule = dataset.schedule();
        let catalog = dataset.catalog();
        let fairness = fairness_spec(dataset, &self.config);
        let mut planner = ExposurePlanner::new(
            planner_settings(dataset, &self.config),
            catalog.merit().to_vec(),
            &fairness,
        );
        let arrival_users = dataset.arrival_users();
        let mut decisions = Vec::with_capacity(schedule.len());
        let mut plans = Vec::with_capacity(schedule.interval_count());
        let mut offset = 0;
        for n in 1..=schedule.interval_count() {
            let count = schedule.interval(n).len();
            let users = &arrival_users[offset..offset + count];
            let plan = planner.plan()?;
            let ctx = IntervalContext {
                interval: n,
                target_merit: interval_target_merit(&plan.current_target, catalog.merit()),
                w_norm: self.config.satisfaction_scale.unwrap_or(1.0 / count.max(1) as f64),
                plan: &plan,
            };
            let outcome = self.run_interval(&ctx, users, offset + 1)?;
            planner.close_interval(count, &outcome.exposure);
            decisions.extend(outcome.decisions);
            plans.push(plan);
            offset += count;
        }
        let report = QualityReport::from_decisions(decisions.iter().map(|d| (d.user, d.dcg, d.ideal)));
        let metrics = MetricSummary::evaluate(&report, &self.ledger, catalog.merit(), &fairness.min_total)?;
        Ok(SessionLog {
            policy: self.policy,
            k: self.config.k,
            decisions,
            ledger: self.ledger,
            plans,
            min_exposure: fairness.min_total,
            metrics,
            duals: self.options.record_duals.then_some(self.duals),
        })
    }
}

/// Gives the lowest-weight slot to the provider with the largest shortfall
/// against its interval target, unless it already appears in the slate.
fn greedy_override(
    mut slate: Vec<usize>,
    scores: &[f64],
    catalog: &crate::domain::ProviderCatalog,
    targets: &[f64],
    earned: &[f64],
) -> Vec<usize> {
    let present: Vec<usize> = slate.iter().map(|&i| catalog.owner(i)).collect();
    let mut pick: Option<(usize, f64)> = None;
    for (p, (t, e)) in targets.iter().zip(earned).enumerate() {
        let gap = t - e;
        if gap > 0.0 && !present.contains(&p) && pick.is_none_or(|(_, g)| gap > g) {
            pick = Some((p, gap));
        }
    }
    if let Some((p, _)) = pick {
        let best = catalog
            .items_of(p)
            .iter()
            .copied()
            .reduce(|a, b| if scores[b] > scores[a] { b } else { a });
        if let (Some(item), Some(last)) = (best, slate.last_mut()) {
            *last = item;
        }
    }
    slate
}

/// Runs `policy` over `dataset`.
pub fn run_session(dataset: &Dataset, config: &RunConfig, policy: Policy) -> Result<SessionLog> {
    Session::new(dataset, config, policy, SessionOptions::default())?.run()
}

/// [`run_session`] with extra outputs.
pub fn run_session_with(
    dataset: &Dataset,
    config: &RunConfig,
    policy: Policy,
    options: SessionOptions,
) -> Result<SessionLog> {
    Session::new(dataset, config, policy, options)?.run()
}

/// Dual trajectory CSV `t,provider_id,mu`.
pub fn dual_csv(log: &SessionLog, dataset: &Dataset) -> Option<String> {
    let duals = log.duals.as_ref()?;
    let providers = dataset.catalog().providers();
    let mut s = String::from("t,provider_id,mu\n");
    for (t, mu) in duals.iter().enumerate() {
        for (p, m) in providers.iter().zip(mu) {
            s.push_str(&format!("{},{p},{m}\n", t + 1));
        }
    }
    Some(s)
}
