//! Named query-id folds for cross-validated tuning.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// A partition of query ids into named folds. Folds are pairwise disjoint;
/// whether they cover a topic set is checked by the consumer against the
/// topics actually being tuned.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FoldSet {
    folds: BTreeMap<String, BTreeSet<String>>,
}

impl FoldSet {
    /// Build from (name, query ids) pairs, rejecting overlap.
    pub fn new(folds: impl IntoIterator<Item = (String, Vec<String>)>) -> Result<Self> {
        let mut set = FoldSet::default();
        let mut owner: BTreeMap<String, String> = BTreeMap::new();
        for (name, queries) in folds {
            let entry = set.folds.entry(name.clone()).or_default();
            for q in queries {
                if let Some(other) = owner.get(&q) {
                    if other != &name {
                        return Err(Error::Invalid(format!(
                            "query {q} in multiple folds ({other} and {name})"
                        )));
                    }
                }
                owner.insert(q.clone(), name.clone());
                entry.insert(q);
            }
        }
        Ok(set)
    }

    pub fn fold_names(&self) -> impl Iterator<Item = &str> {
        self.folds.keys().map(String::as_str)
    }

    pub fn num_folds(&self) -> usize {
        self.folds.len()
    }

    pub fn queries(&self, fold: &str) -> Option<&BTreeSet<String>> {
        self.folds.get(fold)
    }

    pub fn fold_of(&self, query_id: &str) -> Option<&str> {
        self.folds
            .iter()
            .find(|(_, queries)| queries.contains(query_id))
            .map(|(name, _)| name.as_str())
    }

    pub fn contains(&self, query_id: &str) -> bool {
        self.fold_of(query_id).is_some()
    }
}

/// Read a folds file: a JSON object mapping fold name to a list of query ids.
pub fn read_folds(path: impl AsRef<Path>) -> Result<FoldSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: BTreeMap<String, Vec<String>> =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, 1, e.to_string()))?;
    FoldSet::new(raw)
}

pub fn write_folds(folds: &FoldSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let raw: BTreeMap<&String, Vec<&String>> = folds
        .folds
        .iter()
        .map(|(name, queries)| (name, queries.iter().collect()))
        .collect();
    let text = serde_json::to_string_pretty(&raw).expect("folds serialize");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
