use crate::error::{Error, Result};

use super::{ArrivalSchedule, PreferenceStore, ProviderCatalog};

/// Findings of [`validate_dataset`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    /// Arriving users with no entry in the score store, in first-arrival order.
    pub unknown_users: Vec<String>,
    /// Scored items missing from the catalog, in store order.
    pub unowned_items: Vec<String>,
    /// `r_n` for each interval.
    pub traffic: Vec<usize>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.unknown_users.is_empty() && self.unowned_items.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.passed() {
            return write!(f, "ok, traffic {:?}", self.traffic);
        }
        if !self.unknown_users.is_empty() {
            write!(f, "arrivals for unknown users: {}", self.unknown_users.join(", "))?;
        }
        if !self.unowned_items.is_empty() {
            if !self.unknown_users.is_empty() {
                write!(f, "; ")?;
            }
            write!(f, "items without provider: {}", self.unowned_items.join(", "))?;
        }
        Ok(())
    }
}

/// Cross-checks scores, catalog and arrivals.
pub fn validate_dataset(
    store: &PreferenceStore,
    catalog: &ProviderCatalog,
    schedule: &ArrivalSchedule,
) -> ValidationReport {
    let mut unknown_users: Vec<String> = Vec::new();
    for a in schedule.arrivals() {
        if store.user_index(&a.user).is_none() && !unknown_users.contains(&a.user) {
            unknown_users.push(a.user.clone());
        }
    }
    let unowned_items = store
        .items()
        .iter()
        .filter(|i| catalog.item_index(i).is_none())
        .cloned()
        .collect();
    ValidationReport {
        unknown_users,
        unowned_items,
        traffic: schedule.traffic(),
    }
}

/// A validated (scores, catalog, arrivals) triple with ids resolved to the
/// catalog's item indexing.
#[derive(Debug, Clone)]
pub struct Dataset {
    store: PreferenceStore,
    catalog: ProviderCatalog,
    schedule: ArrivalSchedule,
    // store item index -> catalog item index
    item_map: Vec<usize>,
    // per arrival, store user index
    arrival_users: Vec<usize>,
}

impl Dataset {
    pub fn new(
        store: PreferenceStore,
        catalog: ProviderCatalog,
        schedule: ArrivalSchedule,
    ) -> Result<Self> {
        let report = validate_dataset(&store, &catalog, &schedule);
        if !report.passed() {
            return Err(Error::Validation(report.to_string()));
        }
        let item_map = store
            .items()
            .iter()
            .map(|i| catalog.item_index(i).expect("validated"))
            .collect();
        let arrival_users = schedule
            .arrivals()
            .iter()
            .map(|a| store.user_index(&a.user).expect("validated"))
            .collect();
        Ok(Dataset {
            store,
            catalog,
            schedule,
            item_map,
            arrival_users,
        })
    }

    pub fn store(&self) -> &PreferenceStore {
        &self.store
    }

    pub fn catalog(&self) -> &ProviderCatalog {
        &self.catalog
    }

    pub fn schedule(&self) -> &ArrivalSchedule {
        &self.schedule
    }

    /// Store user index for each arrival, in schedule order.
    pub fn arrival_users(&self) -> &[usize] {
        &self.arrival_users
    }

    /// Writes user `user`'s scores over catalog items into `out`
    /// (length = number of catalog items). Unobserved items read 0.
    pub fn fill_scores(&self, user: usize, out: &mut [f64]) {
        out.fill(0.0);
        for &(i, s) in self.store.row(user) {
            out[self.item_map[i]] = s;
        }
    }

    /// Dense score vector of one user over catalog items.
    pub fn scores(&self, user: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.catalog.num_items()];
        self.fill_scores(user, &mut v);
        v
    }

    /// Replaces the catalog merit, keeping everything else.
    pub fn with_catalog(mut self, catalog: ProviderCatalog) -> Result<Self> {
        if catalog.items() != self.catalog.items() || catalog.owners() != self.catalog.owners() {
            return Err(Error::Validation("replacement catalog changes item ownership".into()));
        }
        self.catalog = catalog;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Arrival;

    fn trio() -> (PreferenceStore, ProviderCatalog, ArrivalSchedule) {
        let mut b = PreferenceStore::builder();
        b.insert("u1", "i2", 0.5).unwrap();
        b.insert("u2", "i1", 0.9).unwrap();
        let catalog = ProviderCatalog::from_pairs([("i1", "p1"), ("i2", "p2"), ("i3", "p2")]).unwrap();
        let schedule = ArrivalSchedule::new(
            vec![
                Arrival { interval: 1, user: "u1".into() },
                Arrival { interval: 2, user: "u2".into() },
                Arrival { interval: 2, user: "u1".into() },
            ],
            2,
        )
        .unwrap();
        (b.build(), catalog, schedule)
    }

    #[test]
    fn consistent_trio_passes() {
        let (s, c, a) = trio();
        let r = validate_dataset(&s, &c, &a);
        assert!(r.passed());
        assert_eq!(r.traffic, vec![1, 2]);
        let d = Dataset::new(s, c, a).unwrap();
        // catalog order: i1, i2, i3
        assert_eq!(d.scores(0), vec![0.0, 0.5, 0.0]);
        assert_eq!(d.arrival_users(), &[0, 1, 0]);
    }

    #[test]
    fn unknown_user_reported() {
        let (s, c, _) = trio();
        let a = ArrivalSchedule::new(vec![Arrival { interval: 1, user: "ghost".into() }], 1).unwrap();
        let r = validate_dataset(&s, &c, &a);
        assert!(!r.passed());
        assert_eq!(r.unknown_users, vec!["ghost".to_string()]);
        assert!(Dataset::new(s, c, a).is_err());
    }

    #[test]
    fn missing_catalog_item_reported() {
        let (s, _, a) = trio();
        let c = ProviderCatalog::from_pairs([("i1", "p1")]).unwrap();
        let r = validate_dataset(&s, &c, &a);
        assert_eq!(r.unowned_items, vec!["i2".to_string()]);
        assert!(r.to_string().contains("i2"));
    }
}
