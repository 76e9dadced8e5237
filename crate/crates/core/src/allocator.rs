//! Interval-level minimum-exposure planning as a sequential bankruptcy
//! problem.
//!
//! At the start of interval `n` each provider's outstanding exposure (its
//! estate) is divided over the remaining intervals `n..=N` with the Talmud
//! rule, using forecast traffic as the claims. The column for `n` becomes
//! that interval's exposure target.

use crate::domain::{DemandWeighting, ForecastMethod};
use crate::error::{Error, Result};

/// Bisection cap for the Talmud split parameter.
const MAX_BISECTION_STEPS: usize = 200;
/// Residual tolerance on `sum(shares) - estate`.
const BALANCE_TOL: f64 = 1e-9;

/// Outcome of one claims division.
#[derive(Debug, Clone, PartialEq)]
pub struct Division {
    pub shares: Vec<f64>,
    /// Split parameter of the active branch.
    pub theta: f64,
    /// Estate left over when it exceeded the total claim.
    pub surplus: f64,
}

/// Constrained equal awards on half-claims: the `theta` with
/// `sum(min(claim_i / 2, theta)) = target`, for `0 <= target <= sum / 2`.
fn half_claim_level(claims: &[f64], target: f64) -> f64 {
    let half_max = claims.iter().fold(0.0f64, |m, &c| m.max(c / 2.0));
    let awarded = |theta: f64| claims.iter().map(|&c| (c / 2.0).min(theta)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, half_max);
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let r = awarded(mid) - target;
        if r.abs() <= BALANCE_TOL * 1e-3 {
            lo = mid;
            hi = mid;
            break;
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    // Re-solve theta exactly on the bracketed active set.
    let (capped, open): (Vec<f64>, Vec<f64>) = claims.iter().map(|c| c / 2.0).partition(|h| *h <= theta);
    if open.is_empty() {
        return theta;
    }
    let exact = (target - capped.iter().sum::<f64>()) / open.len() as f64;
    let consistent = capped.iter().all(|h| *h <= exact + 1e-12 * (1.0 + exact.abs()))
        && open.iter().all(|h| *h >= exact - 1e-12 * (1.0 + exact.abs()));
    if consistent && exact >= 0.0 {
        exact
    } else {
        theta
    }
}

/// Divides `estate` among `claims` with the Talmud rule.
///
/// Below the half-sum every claimant receives `min(claim / 2, theta)`; above
/// it, `max(claim / 2, claim - theta)`. An estate larger than the total claim
/// pays every claim in full and reports the rest as surplus.
pub fn talmud_allocate(estate: f64, claims: &[f64]) -> Result<Division> {
    if !(estate.is_finite() && estate >= 0.0) {
        return Err(Error::Domain(format!("estate {estate} must be a non-negative number")));
    }
    if let Some(c) = claims.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
        return Err(Error::Domain(format!("claim {c} must be a non-negative number")));
    }
    let total: f64 = claims.iter().sum();
    if estate >= total {
        let surplus = estate - total;
        if surplus > BALANCE_TOL {
            log::warn!("estate {estate} exceeds total claims {total}; surplus {surplus} discarded");
        }
        let theta = claims.iter().fold(0.0f64, |m, &c| m.max(c / 2.0));
        return Ok(Division {
            shares: claims.to_vec(),
            theta: if estate > total / 2.0 { 0.0 } else { theta },
            surplus,
        });
    }
    if estate <= total / 2.0 {
        let theta = half_claim_level(claims, estate);
        let shares = claims.iter().map(|&c| (c / 2.0).min(theta)).collect();
        Ok(Division { shares, theta, surplus: 0.0 })
    } else {
        // losses follow equal awards on half-claims
        let theta = half_claim_level(claims, total - estate);
        let shares = claims.iter().map(|&c| (c / 2.0).max(c - theta)).collect();
        Ok(Division { shares, theta, surplus: 0.0 })
    }
}

/// `[previous - earned]_+`.
pub fn update_estate(previous: f64, earned: f64) -> f64 {
    (previous - earned).max(0.0)
}

/// Observed traffic of closed intervals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrafficStats {
    history: Vec<f64>,
}

impl TrafficStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_history(history: Vec<f64>) -> Self {
        TrafficStats { history }
    }

    /// Appends the traffic of the interval that just closed.
    pub fn close_interval(&mut self, users: f64) {
        self.history.push(users);
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }
}

/// Traffic forecast for the next `upcoming` intervals.
///
/// An empty history yields `prior` everywhere. `Seasonal` averages history
/// entries with the same phase modulo `period`, falling back to the overall
/// mean for phases not yet observed.
pub fn forecast_traffic(
    stats: &TrafficStats,
    method: ForecastMethod,
    upcoming: usize,
    prior: f64,
    period: usize,
) -> Vec<f64> {
    let h = stats.history();
    if h.is_empty() {
        return vec![prior; upcoming];
    }
    let mean = h.iter().sum::<f64>() / h.len() as f64;
    match method {
        ForecastMethod::Mean => vec![mean; upcoming],
        ForecastMethod::Last => vec![*h.last().expect("non-empty"); upcoming],
        ForecastMethod::Seasonal => {
            let period = period.max(1);
            (0..upcoming)
                .map(|j| {
                    let phase = (h.len() + j) % period;
                    let same: Vec<f64> = h.iter().skip(phase).step_by(period).copied().collect();
                    if same.is_empty() {
                        mean
                    } else {
                        same.iter().sum::<f64>() / same.len() as f64
                    }
                })
                .collect()
        }
    }
}

/// Claims `D[p][j]` for each provider over the forecast intervals.
pub fn build_demand(
    forecast: &[f64],
    k: usize,
    alpha: f64,
    merit: &[f64],
    weighting: DemandWeighting,
) -> Vec<Vec<f64>> {
    let total: f64 = merit.iter().sum();
    merit
        .iter()
        .map(|&g| {
            let share = match weighting {
                DemandWeighting::Uniform => 1.0,
                DemandWeighting::Merit if total > 0.0 => g / total,
                DemandWeighting::Merit => 0.0,
            };
            forecast.iter().map(|&r| alpha * k as f64 * r * share).collect()
        })
        .collect()
}

/// Result of planning interval `interval`.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationPlan {
    /// 1-based interval this plan was made for.
    pub interval: usize,
    /// Outstanding exposure per provider before the interval.
    pub estate: Vec<f64>,
    /// `demand[p][j]` for future interval `interval + j`.
    pub demand: Vec<Vec<f64>>,
    /// Talmud shares, same layout as `demand`.
    pub allocation: Vec<Vec<f64>>,
    /// Target for the present interval (first column of `allocation`).
    pub current_target: Vec<f64>,
    pub theta: Vec<f64>,
    pub surplus: Vec<f64>,
}

/// Divides each provider's estate over its future demands.
pub fn plan_interval(interval: usize, estates: &[f64], demands: &[Vec<f64>]) -> Result<AllocationPlan> {
    if estates.len() != demands.len() {
        return Err(Error::Domain("estates and demands cover different providers".into()));
    }
    let mut allocation = Vec::with_capacity(estates.len());
    let mut theta = Vec::with_capacity(estates.len());
    let mut surplus = Vec::with_capacity(estates.len());
    for (&e, d) in estates.iter().zip(demands) {
        if d.is_empty() {
            return Err(Error::Domain(format!("no future demand for interval {interval}")));
        }
        let div = talmud_allocate(e, d)?;
        allocation.push(div.shares);
        theta.push(div.theta);
        surplus.push(div.surplus);
    }
    let current_target = allocation.iter().map(|a| a[0]).collect();
    Ok(AllocationPlan {
        interval,
        estate: estates.to_vec(),
        demand: demands.to_vec(),
        allocation,
        current_target,
        theta,
        surplus,
    })
}

/// Overall minimum exposure requirement.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessSpec {
    pub min_total: Vec<f64>,
    pub beta_min: f64,
    pub horizon: usize,
}

impl FairnessSpec {
    /// `m_p = beta * gamma_p / sum(gamma) * budget`, where `budget` is the
    /// total position-decayed exposure the run hands out.
    pub fn from_merit(merit: &[f64], beta_min: f64, budget: f64, horizon: usize) -> Self {
        FairnessSpec {
            min_total: crate::metrics::min_exposure(merit, beta_min, budget),
            beta_min,
            horizon,
        }
    }
}

/// Planner settings taken from the run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerSettings {
    pub k: usize,
    pub alpha_demand: f64,
    pub forecast_method: ForecastMethod,
    pub seasonal_period: usize,
    pub traffic_prior: f64,
    pub weighting: DemandWeighting,
}

/// Stateful driver of the sequential bankruptcy problem over one session.
#[derive(Debug, Clone)]
pub struct ExposurePlanner {
    settings: PlannerSettings,
    merit: Vec<f64>,
    horizon: usize,
    estate: Vec<f64>,
    stats: TrafficStats,
    next: usize,
}

impl ExposurePlanner {
    pub fn new(settings: PlannerSettings, merit: Vec<f64>, fairness: &FairnessSpec) -> Self {
        ExposurePlanner {
            settings,
            merit,
            horizon: fairness.horizon,
            estate: fairness.min_total.clone(),
            stats: TrafficStats::new(),
            next: 1,
        }
    }

    /// Outstanding exposure per provider.
    pub fn estate(&self) -> &[f64] {
        &self.estate
    }

    pub fn stats(&self) -> &TrafficStats {
        &self.stats
    }

    /// Plans the next interval.
    pub fn plan(&self) -> Result<AllocationPlan> {
        let n = self.next;
        if n > self.horizon {
            return Err(Error::Domain(format!("interval {n} is past the horizon {}", self.horizon)));
        }
        let s = &self.settings;
        let forecast = forecast_traffic(
            &self.stats,
            s.forecast_method,
            self.horizon - n + 1,
            s.traffic_prior,
            s.seasonal_period,
        );
        let demand = build_demand(&forecast, s.k, s.alpha_demand, &self.merit, s.weighting);
        plan_interval(n, &self.estate, &demand)
    }

    /// Records the closed interval's traffic and earned exposure.
    pub fn close_interval(&mut self, users: usize, earned: &[f64]) {
        for (m, e) in self.estate.iter_mut().zip(earned) {
            *m = update_estate(*m, *e);
        }
        self.stats.close_interval(users as f64);
        self.next += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Talmud shares by the sequential contested-garment construction:
    /// equal awards on sorted half-claims below the half-sum, equal losses on
    /// sorted half-claims above it. Shares no code with the bisection path.
    fn talmud_oracle(estate: f64, claims: &[f64]) -> Vec<f64> {
        fn equal_awards(caps: &[f64], mut amount: f64) -> Vec<f64> {
            let mut order: Vec<usize> = (0..caps.len()).collect();
            order.sort_by(|&a, &b| caps[a].total_cmp(&caps[b]));
            let mut out = vec![0.0; caps.len()];
            let mut left = caps.len();
            for &i in &order {
                let fair = amount / left as f64;
                out[i] = caps[i].min(fair);
                amount -= out[i];
                left -= 1;
            }
            out
        }
        let halves: Vec<f64> = claims.iter().map(|c| c / 2.0).collect();
        let total: f64 = claims.iter().sum();
        if estate <= total / 2.0 {
            equal_awards(&halves, estate)
        } else {
            let losses = equal_awards(&halves, total - estate);
            claims.iter().zip(losses).map(|(c, l)| c - l).collect()
        }
    }

    #[test]
    fn classic_instances() {
        let claims = [100.0, 200.0, 300.0];
        let cases = [
            (100.0, [100.0 / 3.0, 100.0 / 3.0, 100.0 / 3.0]),
            (200.0, [50.0, 75.0, 75.0]),
            (300.0, [50.0, 100.0, 150.0]),
        ];
        for (estate, expect) in cases {
            let oracle = talmud_oracle(estate, &claims);
            let got = talmud_allocate(estate, &claims).unwrap().shares;
            for i in 0..3 {
                assert_abs_diff_eq!(oracle[i], expect[i], epsilon = 1e-12);
                assert_abs_diff_eq!(got[i], expect[i], epsilon = 1e-9);
            }
        }
        assert_eq!(talmud_allocate(0.0, &claims).unwrap().shares, vec![0.0; 3]);
    }

    #[test]
    fn overfunded_estate_pays_claims() {
        let d = talmud_allocate(700.0, &[100.0, 200.0, 300.0]).unwrap();
        assert_eq!(d.shares, vec![100.0, 200.0, 300.0]);
        assert_abs_diff_eq!(d.surplus, 100.0);
    }

    #[test]
    fn negative_inputs_rejected() {
        assert!(talmud_allocate(-1.0, &[1.0]).is_err());
        assert!(talmud_allocate(1.0, &[1.0, -2.0]).is_err());
        assert!(talmud_allocate(f64::NAN, &[1.0]).is_err());
    }

    #[test]
    fn half_sum_boundary_gives_half_claims() {
        let claims = [3.0, 8.0, 1.0, 0.0];
        let d = talmud_allocate(6.0, &claims).unwrap();
        for (s, c) in d.shares.iter().zip(claims) {
            assert_abs_diff_eq!(*s, c / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn estate_update_examples() {
        assert_eq!(update_estate(10.0, 4.0), 6.0);
        assert_eq!(update_estate(10.0, 12.0), 0.0);
        assert_eq!(update_estate(0.0, 3.0), 0.0);
    }

    #[test]
    fn forecast_examples() {
        let s = TrafficStats::from_history(vec![10.0, 10.0, 10.0]);
        assert_eq!(forecast_traffic(&s, ForecastMethod::Mean, 3, 0.0, 1), vec![10.0; 3]);
        let s = TrafficStats::from_history(vec![5.0, 15.0]);
        assert_eq!(forecast_traffic(&s, ForecastMethod::Mean, 2, 0.0, 1), vec![10.0; 2]);
        assert_eq!(forecast_traffic(&s, ForecastMethod::Last, 1, 0.0, 1), vec![15.0]);
        // next intervals are 3 (phase 0) and 4 (phase 1)
        assert_eq!(forecast_traffic(&s, ForecastMethod::Seasonal, 2, 0.0, 2), vec![5.0, 15.0]);
        assert_eq!(forecast_traffic(&s, ForecastMethod::Seasonal, 1, 0.0, 3), vec![10.0]);
        assert_eq!(
            forecast_traffic(&TrafficStats::new(), ForecastMethod::Mean, 2, 8.0, 1),
            vec![8.0; 2]
        );
    }

    #[test]
    fn demand_examples() {
        let d = build_demand(&[20.0], 10, 0.5, &[0.75, 0.25], DemandWeighting::Uniform);
        assert_eq!(d, vec![vec![100.0], vec![100.0]]);
        let d = build_demand(&[20.0], 10, 0.5, &[0.75, 0.25], DemandWeighting::Merit);
        assert_eq!(d, vec![vec![75.0], vec![25.0]]);
        let d = build_demand(&[0.0], 10, 0.5, &[1.0], DemandWeighting::Uniform);
        assert_eq!(d, vec![vec![0.0]]);
    }

    #[test]
    fn plan_examples() {
        // last interval: min(estate, claim)
        let p = plan_interval(4, &[30.0, 5.0], &[vec![20.0], vec![20.0]]).unwrap();
        assert_eq!(p.current_target, vec![20.0, 5.0]);
        let p = plan_interval(1, &[0.0, 1.0], &[vec![4.0, 4.0], vec![4.0, 4.0]]).unwrap();
        assert_eq!(p.current_target[0], 0.0);
        // three equal demands d, estate 3d/2 -> d/2 each
        let d = 12.0;
        let p = plan_interval(2, &[1.5 * d], &[vec![d; 3]]).unwrap();
        for a in &p.allocation[0] {
            assert_abs_diff_eq!(*a, d / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn planner_tracks_estate_and_history() {
        let settings = PlannerSettings {
            k: 2,
            alpha_demand: 2.0,
            forecast_method: ForecastMethod::Mean,
            seasonal_period: 1,
            traffic_prior: 10.0,
            weighting: DemandWeighting::Merit,
        };
        let fairness = FairnessSpec::from_merit(&[0.5, 0.5], 0.9, 100.0, 3);
        assert_eq!(fairness.min_total, vec![45.0, 45.0]);
        let mut planner = ExposurePlanner::new(settings, vec![0.5, 0.5], &fairness);
        let p1 = planner.plan().unwrap();
        assert_eq!(p1.interval, 1);
        // demand per interval 2 * 2 * 10 * 0.5 = 20; estate 45 > 60/2 -> second branch
        let total: f64 = p1.allocation[0].iter().sum();
        assert_abs_diff_eq!(total, 45.0, epsilon = 1e-9);
        planner.close_interval(12, &[20.0, 50.0]);
        assert_eq!(planner.estate(), &[25.0, 0.0]);
        let p2 = planner.plan().unwrap();
        assert_eq!(p2.interval, 2);
        assert_eq!(p2.demand[0], vec![24.0, 24.0]);
        assert_eq!(p2.current_target[1], 0.0);
        planner.close_interval(1, &[0.0, 0.0]);
        planner.close_interval(1, &[0.0, 0.0]);
        assert!(planner.plan().is_err());
    }

    fn instance() -> impl Strategy<Value = (f64, Vec<f64>)> {
        prop::collection::vec(0.0f64..1000.0, 1..8).prop_flat_map(|claims| {
            let total: f64 = claims.iter().sum();
            (0.0..=total, Just(claims))
        })
    }

    proptest! {
        #[test]
        fn exhaustion_and_bounds((estate, claims) in instance()) {
            let d = talmud_allocate(estate, &claims).unwrap();
            let s: f64 = d.shares.iter().sum();
            prop_assert!((s - estate).abs() <= 1e-9);
            for (a, c) in d.shares.iter().zip(&claims) {
                prop_assert!(*a >= 0.0 && *a <= c + 1e-12);
            }
            let oracle = talmud_oracle(estate, &claims);
            for (a, o) in d.shares.iter().zip(&oracle) {
                prop_assert!((a - o).abs() <= 1e-9);
            }
        }

        #[test]
        fn order_preserving_and_self_dual((estate, claims) in instance()) {
            let d = talmud_allocate(estate, &claims).unwrap().shares;
            for i in 0..claims.len() {
                for j in 0..claims.len() {
                    if claims[i] <= claims[j] {
                        prop_assert!(d[i] <= d[j] + 1e-9);
                    }
                }
            }
            let total: f64 = claims.iter().sum();
            let dual = talmud_allocate((total - estate).max(0.0), &claims).unwrap().shares;
            for i in 0..claims.len() {
                prop_assert!((d[i] - (claims[i] - dual[i])).abs() <= 1e-9);
            }
        }

        #[test]
        fn resource_monotone((estate, claims) in instance(), bump in 0.0f64..1.0) {
            let total: f64 = claims.iter().sum();
            let more = estate + bump * (total - estate);
            let a = talmud_allocate(estate, &claims).unwrap().shares;
            let b = talmud_allocate(more, &claims).unwrap().shares;
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(*y >= x - 1e-9);
            }
        }
    }
}
