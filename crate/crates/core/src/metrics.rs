//! Accuracy and fairness metrics over produced slates.
//!
//! Score vectors are dense per user and indexed like the slate entries
//! (catalog item indices in a [`Dataset`](crate::Dataset)).

use crate::domain::{ProviderCatalog, Slate};
use crate::error::{Error, Result};
use crate::numeric::{pairwise_mean, pairwise_sum};

/// Discounted cumulative gain of the first `k` entries of `slate`.
pub fn dcg(slate: &Slate, scores: &[f64], k: usize) -> f64 {
    dcg_of(&slate.entries()[..k.min(slate.len())], scores)
}

/// DCG of a raw item list.
pub fn dcg_of(items: &[usize], scores: &[f64]) -> f64 {
    items
        .iter()
        .enumerate()
        .map(|(pos, &i)| scores[i] / ((pos + 2) as f64).log2())
        .sum()
}

/// The `k` highest-scoring items in descending score order; ties go to the
/// lower index.
pub fn ideal_slate(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    if scores.len() < k {
        return Err(Error::Domain(format!(
            "need {k} items for a slate, only {} available",
            scores.len()
        )));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    let by_score = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    if k < idx.len() && k > 0 {
        idx.select_nth_unstable_by(k - 1, by_score);
    }
    idx.truncate(k);
    idx.sort_unstable_by(by_score);
    Ok(idx)
}

/// Best achievable DCG at depth `k`.
pub fn ideal_dcg(scores: &[f64], k: usize) -> Result<f64> {
    Ok(dcg_of(&ideal_slate(scores, k)?, scores))
}

/// `dcg / ideal_dcg`, or 1 when the ideal is 0.
pub fn ndcg(slate: &Slate, scores: &[f64], k: usize) -> Result<f64> {
    let ideal = ideal_dcg(scores, k)?;
    Ok(ndcg_from(dcg(slate, scores, k), ideal))
}

/// NDCG from precomputed gains.
pub fn ndcg_from(dcg: f64, ideal: f64) -> f64 {
    if ideal > 0.0 {
        (dcg / ideal).min(1.0)
    } else {
        1.0
    }
}

/// Position-decayed provider exposure, cumulative and per interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureLedger {
    raw: Vec<f64>,
    // [provider][interval - 1]
    per_interval: Vec<Vec<f64>>,
}

impl ExposureLedger {
    pub fn new(providers: usize, intervals: usize) -> Self {
        ExposureLedger {
            raw: vec![0.0; providers],
            per_interval: vec![vec![0.0; intervals]; providers],
        }
    }

    /// Credits `p(k)` to the owner of the item at each rank `k` of `slate`
    /// for interval `interval` (1-based).
    pub fn record(&mut self, slate: &Slate, catalog: &ProviderCatalog, interval: usize) -> Result<()> {
        if interval == 0 || self.per_interval.first().is_some_and(|r| interval > r.len()) {
            return Err(Error::Domain(format!("interval {interval} outside ledger range")));
        }
        if let Some(&bad) = slate.entries().iter().find(|&&i| i >= catalog.num_items()) {
            return Err(Error::Domain(format!("item index {bad} not in catalog")));
        }
        for (pos, &item) in slate.entries().iter().enumerate() {
            let w = 1.0 / ((pos + 2) as f64).log2();
            let p = catalog.owner(item);
            self.raw[p] += w;
            self.per_interval[p][interval - 1] += w;
        }
        Ok(())
    }

    /// Cumulative exposure `e_p`.
    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    /// `E_{p,n}` for 1-based `interval`.
    pub fn interval_exposure(&self, provider: usize, interval: usize) -> f64 {
        self.per_interval[provider][interval - 1]
    }

    /// Column of `E_{.,n}` for 1-based `interval`.
    pub fn interval_column(&self, interval: usize) -> Vec<f64> {
        self.per_interval.iter().map(|r| r[interval - 1]).collect()
    }

    pub fn total(&self) -> f64 {
        pairwise_sum(&self.raw)
    }

    /// Exposure shares on the simplex; all zeros when nothing was recorded.
    pub fn normalized(&self) -> Vec<f64> {
        let total = self.total();
        if total > 0.0 {
            self.raw.iter().map(|e| e / total).collect()
        } else {
            vec![0.0; self.raw.len()]
        }
    }

    /// Adds another ledger of the same shape.
    pub fn absorb(&mut self, other: &ExposureLedger) {
        for (a, b) in self.raw.iter_mut().zip(&other.raw) {
            *a += b;
        }
        for (ra, rb) in self.per_interval.iter_mut().zip(&other.per_interval) {
            for (a, b) in ra.iter_mut().zip(rb) {
                *a += b;
            }
        }
    }
}

/// Free-function form of [`ExposureLedger::record`].
pub fn record_exposure(
    ledger: &mut ExposureLedger,
    slate: &Slate,
    catalog: &ProviderCatalog,
    interval: usize,
) -> Result<()> {
    ledger.record(slate, catalog, interval)
}

/// Minimum exposure `m_p = beta * gamma_p / sum(gamma) * budget`.
pub fn min_exposure(merit: &[f64], beta: f64, budget: f64) -> Vec<f64> {
    let total: f64 = merit.iter().sum();
    merit
        .iter()
        .map(|g| if total > 0.0 { beta * g / total * budget } else { 0.0 })
        .collect()
}

/// Share of providers whose exposure reaches their minimum.
pub fn esp(exposure: &[f64], min_exposure: &[f64]) -> f64 {
    if exposure.is_empty() {
        return 0.0;
    }
    let met = exposure
        .iter()
        .zip(min_exposure)
        .filter(|(e, m)| e >= m)
        .count();
    met as f64 / exposure.len() as f64
}

/// Gini index of merit-normalised exposure `e_p / gamma_p` over ordered
/// provider pairs.
pub fn gini(exposure: &[f64], merit: &[f64]) -> Result<f64> {
    if exposure.len() != merit.len() {
        return Err(Error::Domain("exposure and merit lengths differ".into()));
    }
    if merit.iter().any(|&g| g <= 0.0) {
        return Err(Error::Domain("gini needs strictly positive merit".into()));
    }
    let mut y: Vec<f64> = exposure.iter().zip(merit).map(|(e, g)| e / g).collect();
    let total = pairwise_sum(&y);
    if total <= 0.0 {
        return Err(Error::Domain("gini undefined for zero total exposure".into()));
    }
    y.sort_by(f64::total_cmp);
    let n = y.len() as f64;
    // sum_{i<j} (y_j - y_i) over the sorted values
    let weighted: Vec<f64> = y
        .iter()
        .enumerate()
        .map(|(i, v)| (2.0 * i as f64 - n + 1.0) * v)
        .collect();
    Ok(pairwise_sum(&weighted) / (n * total))
}

/// Per-user accuracy summary.
#[derive(Debug, Clone, PartialEq)]
pub struct UserQuality {
    /// Store user index.
    pub user: usize,
    pub ndcg: f64,
    pub dcg: f64,
    pub ideal: f64,
    pub decisions: usize,
}

/// Accuracy of every served user. Users served more than once get the mean
/// of their decisions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QualityReport {
    users: Vec<UserQuality>,
}

impl QualityReport {
    /// Aggregates `(user, dcg, ideal)` triples. Output is ordered by user index.
    pub fn from_decisions(decisions: impl IntoIterator<Item = (usize, f64, f64)>) -> Self {
        let mut acc: std::collections::BTreeMap<usize, (Vec<f64>, Vec<f64>, Vec<f64>)> =
            Default::default();
        for (u, d, i) in decisions {
            let e = acc.entry(u).or_default();
            e.0.push(ndcg_from(d, i));
            e.1.push(d);
            e.2.push(i);
        }
        let users = acc
            .into_iter()
            .map(|(user, (n, d, i))| UserQuality {
                user,
                decisions: n.len(),
                ndcg: pairwise_mean(&n).unwrap_or(1.0),
                dcg: pairwise_mean(&d).unwrap_or(0.0),
                ideal: pairwise_mean(&i).unwrap_or(0.0),
            })
            .collect();
        QualityReport { users }
    }

    pub fn users(&self) -> &[UserQuality] {
        &self.users
    }

    pub fn ndcg_values(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.ndcg).collect()
    }

    pub fn mean_ndcg(&self) -> Result<f64> {
        pairwise_mean(&self.ndcg_values()).ok_or_else(|| Error::Domain("no users".into()))
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }
}

/// Min-max ratio of per-user NDCG.
pub fn mmr(report: &QualityReport) -> Result<f64> {
    let v = report.ndcg_values();
    if v.is_empty() {
        return Err(Error::Domain("mmr of an empty report".into()));
    }
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max <= 0.0 {
        return Err(Error::Domain("mmr undefined when every NDCG is 0".into()));
    }
    Ok(min / max)
}

/// `(1/n^2) * sum_{k<l} (NDCG_k - NDCG_l)^2`, computed as the population
/// variance of per-user NDCG.
pub fn var_accuracy(report: &QualityReport) -> Result<f64> {
    let v = report.ndcg_values();
    if v.len() < 2 {
        return Err(Error::Domain("var needs at least two users".into()));
    }
    let mean = pairwise_mean(&v).expect("non-empty");
    let sq: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    Ok(pairwise_sum(&sq) / v.len() as f64)
}

/// The five headline metrics of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub ndcg_mean: f64,
    pub esp: f64,
    pub gini: f64,
    pub mmr: f64,
    pub var: f64,
}

impl MetricSummary {
    /// Evaluates a run. `min_exposure` is compared against the cumulative
    /// ledger; Var is 0 for a single user.
    pub fn evaluate(
        report: &QualityReport,
        ledger: &ExposureLedger,
        merit: &[f64],
        min_exposure: &[f64],
    ) -> Result<Self> {
        Ok(MetricSummary {
            ndcg_mean: report.mean_ndcg()?,
            esp: esp(ledger.raw(), min_exposure),
            gini: gini(ledger.raw(), merit)?,
            mmr: mmr(report)?,
            var: if report.users().len() < 2 {
                0.0
            } else {
                var_accuracy(report)?
            },
        })
    }

    /// `(name, value)` rows in output order.
    pub fn rows(&self) -> [(&'static str, f64); 5] {
        [
            ("ndcg", self.ndcg_mean),
            ("esp", self.esp),
            ("gini", self.gini),
            ("mmr", self.mmr),
            ("var", self.var),
        ]
    }

    /// Metrics CSV with header `metric,K,value`.
    pub fn to_csv(&self, k: usize) -> String {
        let mut s = String::from("metric,K,value\n");
        for (name, v) in self.rows() {
            s.push_str(&format!("{name},{k},{v}\n"));
        }
        s
    }
}
