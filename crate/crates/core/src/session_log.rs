//! JSONL persistence of session decisions and metric recomputation.
//!
//! Each decision is one object
//! `{"t", "interval", "user_id", "items", "ndcg", "z_prime", "objective"}`;
//! the final line is `{"summary": {...}}`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, RunConfig, Slate};
use crate::error::{Error, Result};
use crate::metrics::{dcg_of, ideal_dcg, ExposureLedger, MetricSummary, QualityReport};
use crate::reranker::{fairness_spec, SessionLog};

/// One decision as stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoggedDecision {
    pub t: usize,
    pub interval: usize,
    pub user_id: String,
    pub items: Vec<String>,
    pub ndcg: f64,
    pub z_prime: f64,
    pub objective: f64,
}

/// Trailing summary line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogSummary {
    pub policy: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub decisions: usize,
    pub ndcg_mean: f64,
    pub esp: f64,
    pub gini: f64,
    pub mmr: f64,
    pub var: f64,
}

impl LogSummary {
    pub fn metrics(&self) -> MetricSummary {
        MetricSummary {
            ndcg_mean: self.ndcg_mean,
            esp: self.esp,
            gini: self.gini,
            mmr: self.mmr,
            var: self.var,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SummaryLine {
    summary: LogSummary,
}

/// A parsed log file.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredLog {
    pub decisions: Vec<LoggedDecision>,
    pub summary: LogSummary,
}

/// Decisions of `log` with ids resolved through `dataset`.
pub fn logged_decisions(log: &SessionLog, dataset: &Dataset) -> Vec<LoggedDecision> {
    let users = dataset.store().users();
    let items = dataset.catalog().items();
    log.decisions
        .iter()
        .map(|d| LoggedDecision {
            t: d.t,
            interval: d.interval,
            user_id: users[d.user].clone(),
            items: d.items.iter().map(|&i| items[i].clone()).collect(),
            ndcg: d.ndcg,
            z_prime: d.z_prime,
            objective: d.objective,
        })
        .collect()
}

fn summary_of(log: &SessionLog) -> LogSummary {
    let m = log.metrics;
    LogSummary {
        policy: log.policy.name().to_owned(),
        k: log.k,
        decisions: log.decisions.len(),
        ndcg_mean: m.ndcg_mean,
        esp: m.esp,
        gini: m.gini,
        mmr: m.mmr,
        var: m.var,
    }
}

/// Writes `log` as JSONL.
pub fn write_log(out: &mut impl Write, log: &SessionLog, dataset: &Dataset) -> std::io::Result<()> {
    for d in logged_decisions(log, dataset) {
        serde_json::to_writer(&mut *out, &d)?;
        out.write_all(b"\n")?;
    }
    serde_json::to_writer(&mut *out, &SummaryLine { summary: summary_of(log) })?;
    out.write_all(b"\n")
}

/// [`write_log`] into a string.
pub fn log_to_string(log: &SessionLog, dataset: &Dataset) -> String {
    let mut buf = Vec::new();
    write_log(&mut buf, log, dataset).expect("writing to memory");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

/// Parses JSONL log text; `origin` names the source in errors.
pub fn parse_log(text: &str, origin: &Path) -> Result<StoredLog> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_owned(),
        line,
        message,
    };
    let mut decisions = Vec::new();
    let mut summary = None;
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        if summary.is_some() {
            return Err(err(line_no, "content after the summary line".into()));
        }
        if line.trim_start().starts_with("{\"summary\"") {
            let s: SummaryLine = serde_json::from_str(line).map_err(|e| err(line_no, e.to_string()))?;
            summary = Some(s.summary);
        } else {
            let d: LoggedDecision = serde_json::from_str(line).map_err(|e| err(line_no, e.to_string()))?;
            decisions.push(d);
        }
    }
    let last = text.lines().count();
    if decisions.is_empty() {
        return Err(err(last.max(1), "log holds no decisions".into()));
    }
    let summary = summary.ok_or_else(|| err(last + 1, "missing summary line (truncated log?)".into()))?;
    if summary.decisions != decisions.len() {
        return Err(err(
            last,
            format!("summary counts {} decisions, log holds {}", summary.decisions, decisions.len()),
        ));
    }
    Ok(StoredLog { decisions, summary })
}

/// Reads a JSONL log file.
pub fn read_log(path: &Path) -> Result<StoredLog> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_log(&text, path)
}

/// Recomputes the headline metrics from the stored slates. With the dataset
/// and config of the run, the result equals the run's own metrics exactly.
pub fn recompute_metrics(log: &StoredLog, dataset: &Dataset, config: &RunConfig) -> Result<MetricSummary> {
    let k = log.summary.k;
    let store = dataset.store();
    let catalog = dataset.catalog();
    let mut ledger = ExposureLedger::new(catalog.num_providers(), dataset.schedule().interval_count());
    let mut triples = Vec::with_capacity(log.decisions.len());
    let mut scores = vec![0.0; catalog.num_items()];
    for d in &log.decisions {
        let user = store
            .user_index(&d.user_id)
            .ok_or_else(|| Error::Validation(format!("decision t={} names unknown user {}", d.t, d.user_id)))?;
        let items = d
            .items
            .iter()
            .map(|i| {
                catalog
                    .item_index(i)
                    .ok_or_else(|| Error::Validation(format!("decision t={} names unknown item {i}", d.t)))
            })
            .collect::<Result<Vec<usize>>>()?;
        let slate = Slate::new(user, items, k)?;
        ledger.record(&slate, catalog, d.interval)?;
        dataset.fill_scores(user, &mut scores);
        triples.push((user, dcg_of(slate.entries(), &scores), ideal_dcg(&scores, k)?));
    }
    let report = QualityReport::from_decisions(triples);
    let config = RunConfig { k, ..config.clone() };
    let fairness = fairness_spec(dataset, &config);
    MetricSummary::evaluate(&report, &ledger, catalog.merit(), &fairness.min_total)
}
