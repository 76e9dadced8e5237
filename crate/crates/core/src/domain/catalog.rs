use std::collections::HashMap;

use crate::error::{Error, Result};

use super::PreferenceStore;

/// Item ownership and provider merit.
///
/// Every item has exactly one provider and every provider owns at least one
/// item. Merit defaults to catalog share `|I_p| / |I|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProviderCatalog {
    items: Vec<String>,
    item_index: HashMap<String, usize>,
    providers: Vec<String>,
    provider_index: HashMap<String, usize>,
    owner: Vec<usize>,
    provider_items: Vec<Vec<usize>>,
    merit: Vec<f64>,
}

impl ProviderCatalog {
    /// Builds a catalog from `(item, provider)` pairs. Repeating a pair is
    /// harmless; listing an item under two providers is an error.
    pub fn from_pairs<I, S, T>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let mut items = Vec::new();
        let mut item_index = HashMap::new();
        let mut providers = Vec::new();
        let mut provider_index: HashMap<String, usize> = HashMap::new();
        let mut owner = Vec::new();
        for (item, provider) in pairs {
            let (item, provider) = (item.as_ref(), provider.as_ref());
            let p = match provider_index.get(provider) {
                Some(&p) => p,
                None => {
                    providers.push(provider.to_owned());
                    provider_index.insert(provider.to_owned(), providers.len() - 1);
                    providers.len() - 1
                }
            };
            match item_index.get(item) {
                Some(&i) if owner[i] != p => {
                    return Err(Error::Validation(format!(
                        "item {item} listed under providers {} and {provider}",
                        providers[owner[i]]
                    )));
                }
                Some(_) => {}
                None => {
                    items.push(item.to_owned());
                    item_index.insert(item.to_owned(), items.len() - 1);
                    owner.push(p);
                }
            }
        }
        let mut provider_items = vec![Vec::new(); providers.len()];
        for (i, &p) in owner.iter().enumerate() {
            provider_items[p].push(i);
        }
        let n = items.len() as f64;
        let merit = provider_items.iter().map(|v| v.len() as f64 / n).collect();
        Ok(ProviderCatalog {
            items,
            item_index,
            providers,
            provider_index,
            owner,
            provider_items,
            merit,
        })
    }

    /// Replaces merit with explicit per-provider values (indexed like
    /// [`providers`](Self::providers)).
    pub fn with_merit(mut self, merit: Vec<f64>) -> Result<Self> {
        if merit.len() != self.providers.len() {
            return Err(Error::Validation(format!(
                "merit vector has {} entries for {} providers",
                merit.len(),
                self.providers.len()
            )));
        }
        if let Some(bad) = merit.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
            return Err(Error::Validation(format!("merit {bad} is not a non-negative number")));
        }
        self.merit = merit;
        Ok(self)
    }

    /// Sets merit to each provider's share of total relevance mass in `store`.
    pub fn with_relevance_merit(self, store: &PreferenceStore) -> Result<Self> {
        let mut mass = vec![0.0; self.providers.len()];
        for (_, item, s) in store.entries() {
            if let Some(i) = self.item_index(item) {
                mass[self.owner[i]] += s;
            }
        }
        let total: f64 = mass.iter().sum();
        if total <= 0.0 {
            return Err(Error::Validation("no relevance mass to derive merit from".into()));
        }
        let merit = mass.into_iter().map(|m| m / total).collect();
        self.with_merit(merit)
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn providers(&self) -> &[String] {
        &self.providers
    }

    pub fn item_index(&self, item: &str) -> Option<usize> {
        self.item_index.get(item).copied()
    }

    pub fn provider_index(&self, provider: &str) -> Option<usize> {
        self.provider_index.get(provider).copied()
    }

    /// Provider index owning item index `item`.
    pub fn owner(&self, item: usize) -> usize {
        self.owner[item]
    }

    /// The item→provider map as a slice.
    pub fn owners(&self) -> &[usize] {
        &self.owner
    }

    pub fn items_of(&self, provider: usize) -> &[usize] {
        &self.provider_items[provider]
    }

    pub fn merit(&self) -> &[f64] {
        &self.merit
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn num_providers(&self) -> usize {
        self.providers.len()
    }
}
