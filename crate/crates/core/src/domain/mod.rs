//! Dataset-facing domain types: preference scores, the item/provider catalog,
//! user arrival schedules, slates and run configuration.

mod catalog;
mod config;
mod dataset;
pub mod io;
mod schedule;
mod store;

pub use catalog::ProviderCatalog;
pub use config::{DemandWeighting, ForecastMethod, RegretAnchor, RunConfig, SolverMode};
pub use dataset::{validate_dataset, Dataset, ValidationReport};
pub use schedule::{Arrival, ArrivalSchedule};
pub use store::{PreferenceStore, PreferenceStoreBuilder};

use std::collections::HashSet;

use crate::error::{Error, Result};

/// Examination probability of rank `k` (1-based): `1 / log2(k + 1)`.
pub fn position_weight(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("rank positions start at 1".into()));
    }
    Ok(1.0 / ((k + 1) as f64).log2())
}

/// Weights for ranks `1..=len`.
pub fn position_weights(len: usize) -> Vec<f64> {
    (1..=len).map(|k| 1.0 / ((k + 1) as f64).log2()).collect()
}

/// An ordered top-K list shown to one user. Entries are internal item indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slate {
    user: usize,
    entries: Vec<usize>,
}

impl Slate {
    /// Builds a slate, checking that it holds exactly `k` distinct items.
    pub fn new(user: usize, entries: Vec<usize>, k: usize) -> Result<Self> {
        if entries.len() != k {
            return Err(Error::Domain(format!(
                "slate has {} entries, expected {k}",
                entries.len()
            )));
        }
        let mut seen = HashSet::with_capacity(entries.len());
        if let Some(dup) = entries.iter().find(|i| !seen.insert(**i)) {
            return Err(Error::Domain(format!("item {dup} appears twice in slate")));
        }
        Ok(Slate { user, entries })
    }

    pub fn user(&self) -> usize {
        self.user
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// 1-based rank of `item`, if present.
    pub fn position_of(&self, item: usize) -> Option<usize> {
        self.entries.iter().position(|&i| i == item).map(|p| p + 1)
    }
}
