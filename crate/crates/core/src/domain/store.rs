use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};

/// Sparse per-(user, item) relevance scores in `[0, 1]`.
///
/// Ids are opaque strings mapped to dense indices in first-seen order.
/// Absent pairs read as score 0.
#[derive(Debug, Clone, Default)]
pub struct PreferenceStore {
    users: Vec<String>,
    user_index: HashMap<String, usize>,
    items: Vec<String>,
    item_index: HashMap<String, usize>,
    // per user, sorted by item index
    rows: Vec<Vec<(usize, f64)>>,
    duplicates: usize,
}

/// Incremental constructor for [`PreferenceStore`].
#[derive(Debug, Default)]
pub struct PreferenceStoreBuilder {
    users: Vec<String>,
    user_index: HashMap<String, usize>,
    items: Vec<String>,
    item_index: HashMap<String, usize>,
    rows: Vec<BTreeMap<usize, f64>>,
    duplicates: usize,
}

impl PreferenceStoreBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts one score. A repeated pair overwrites the earlier value and
    /// bumps the duplicate counter.
    pub fn insert(&mut self, user: &str, item: &str, score: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::Validation(format!(
                "score {score} for ({user}, {item}) is outside [0, 1]"
            )));
        }
        let u = intern(&mut self.users, &mut self.user_index, user);
        if u == self.rows.len() {
            self.rows.push(BTreeMap::new());
        }
        let i = intern(&mut self.items, &mut self.item_index, item);
        if self.rows[u].insert(i, score).is_some() {
            self.duplicates += 1;
        }
        Ok(())
    }

    pub fn build(self) -> PreferenceStore {
        PreferenceStore {
            users: self.users,
            user_index: self.user_index,
            items: self.items,
            item_index: self.item_index,
            rows: self
                .rows
                .into_iter()
                .map(|r| r.into_iter().collect())
                .collect(),
            duplicates: self.duplicates,
        }
    }
}

fn intern(names: &mut Vec<String>, index: &mut HashMap<String, usize>, name: &str) -> usize {
    if let Some(&i) = index.get(name) {
        return i;
    }
    let i = names.len();
    names.push(name.to_owned());
    index.insert(name.to_owned(), i);
    i
}

impl PreferenceStore {
    pub fn builder() -> PreferenceStoreBuilder {
        PreferenceStoreBuilder::new()
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn user_index(&self, user: &str) -> Option<usize> {
        self.user_index.get(user).copied()
    }

    pub fn item_index(&self, item: &str) -> Option<usize> {
        self.item_index.get(item).copied()
    }

    /// Number of stored (user, item) entries.
    pub fn len(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rows that overwrote an earlier score for the same pair during ingestion.
    pub fn duplicate_count(&self) -> usize {
        self.duplicates
    }

    /// Score lookup by id; unknown ids or unobserved pairs give 0.
    pub fn score(&self, user: &str, item: &str) -> f64 {
        match (self.user_index(user), self.item_index(item)) {
            (Some(u), Some(i)) => self.score_at(u, i),
            _ => 0.0,
        }
    }

    /// Score lookup by internal indices.
    pub fn score_at(&self, user: usize, item: usize) -> f64 {
        let Some(row) = self.rows.get(user) else {
            return 0.0;
        };
        match row.binary_search_by_key(&item, |&(i, _)| i) {
            Ok(pos) => row[pos].1,
            Err(_) => 0.0,
        }
    }

    /// Observed `(item index, score)` pairs of one user, sorted by item index.
    pub fn row(&self, user: usize) -> &[(usize, f64)] {
        self.rows.get(user).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All entries as `(user id, item id, score)` in user-then-item index order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, f64)> + '_ {
        self.rows.iter().enumerate().flat_map(move |(u, row)| {
            row.iter()
                .map(move |&(i, s)| (self.users[u].as_str(), self.items[i].as_str(), s))
        })
    }
}

/// Two stores are equal when they hold the same id-keyed scores, regardless
/// of the order ids were first seen in.
impl PartialEq for PreferenceStore {
    fn eq(&self, other: &Self) -> bool {
        let canon = |s: &PreferenceStore| {
            let mut v: Vec<(String, String, u64)> = s
                .entries()
                .map(|(u, i, x)| (u.to_owned(), i.to_owned(), x.to_bits()))
                .collect();
            v.sort();
            let mut users = s.users.clone();
            users.sort();
            let mut items = s.items.clone();
            items.sort();
            (v, users, items)
        };
        canon(self) == canon(other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_and_sparse_default() {
        let mut b = PreferenceStore::builder();
        b.insert("u1", "i1", 0.9).unwrap();
        b.insert("u1", "i2", 0.4).unwrap();
        let s = b.build();
        assert_eq!(s.len(), 2);
        assert_eq!(s.score("u1", "i1"), 0.9);
        assert_eq!(s.score("u1", "i3"), 0.0);
        assert_eq!(s.score("nobody", "i1"), 0.0);
    }

    #[test]
    fn empty_store_reads_zero() {
        let s = PreferenceStore::builder().build();
        assert!(s.is_empty());
        assert_eq!(s.score("u", "i"), 0.0);
        assert_eq!(s.score_at(3, 4), 0.0);
    }

    #[test]
    fn out_of_range_rejected() {
        let mut b = PreferenceStore::builder();
        assert!(matches!(
            b.insert("u1", "i1", 1.5),
            Err(Error::Validation(_))
        ));
        assert!(b.insert("u1", "i1", -0.1).is_err());
        assert!(b.insert("u1", "i1", f64::NAN).is_err());
    }

    #[test]
    fn last_write_wins() {
        let mut b = PreferenceStore::builder();
        b.insert("u1", "i1", 0.2).unwrap();
        b.insert("u1", "i1", 0.7).unwrap();
        let s = b.build();
        assert_eq!(s.len(), 1);
        assert_eq!(s.duplicate_count(), 1);
        assert_eq!(s.score("u1", "i1"), 0.7);
    }
}
