//! Ranked runs: the exchange format between retrieval, fusion and
//! evaluation, serialized as TREC 6-column files.
//!
//! A run holds, per query, a list of scored items in non-increasing score
//! order. When a run is built from raw scores, ties are broken by ascending
//! item id before ranks are assigned, so written files are stable across
//! platforms. Scores are serialized with six decimal places.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Default run depth.
pub const DEFAULT_DEPTH: usize = 1000;

/// One retrieved item with its score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredItem {
    pub item_id: String,
    pub score: f64,
}

impl ScoredItem {
    pub fn new(item_id: impl Into<String>, score: f64) -> Self {
        ScoredItem {
            item_id: item_id.into(),
            score,
        }
    }
}

/// Sort scored items canonically: score descending, ties by ascending id.
pub fn sort_canonical(items: &mut [ScoredItem]) {
    items.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.item_id.cmp(&b.item_id))
    });
}

/// A per-query ranking, keyed by query id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedRun {
    pub run_tag: String,
    queries: BTreeMap<String, Vec<ScoredItem>>,
}

impl RankedRun {
    pub fn new(run_tag: impl Into<String>) -> Self {
        RankedRun {
            run_tag: run_tag.into(),
            queries: BTreeMap::new(),
        }
    }

    /// Build a run from raw scores, canonicalizing order and truncating each
    /// query to `depth`. Rejects non-finite scores and duplicate items.
    pub fn from_scores(
        run_tag: impl Into<String>,
        scores: impl IntoIterator<Item = (String, Vec<ScoredItem>)>,
        depth: usize,
    ) -> Result<Self> {
        let mut run = RankedRun::new(run_tag);
        for (query_id, items) in scores {
            run.insert_query(query_id, items, depth)?;
        }
        Ok(run)
    }

    /// Insert one query's results, canonicalizing and truncating.
    pub fn insert_query(
        &mut self,
        query_id: impl Into<String>,
        mut items: Vec<ScoredItem>,
        depth: usize,
    ) -> Result<()> {
        let query_id = query_id.into();
        let mut seen = HashSet::new();
        for item in &items {
            if !item.score.is_finite() {
                return Err(Error::Invalid(format!(
                    "non-finite score for {} in query {query_id}",
                    item.item_id
                )));
            }
            if !seen.insert(item.item_id.clone()) {
                return Err(Error::Invalid(format!(
                    "duplicate item {} in query {query_id}",
                    item.item_id
                )));
            }
        }
        sort_canonical(&mut items);
        items.truncate(depth);
        self.queries.insert(query_id, items);
        Ok(())
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.queries.keys().map(String::as_str)
    }

    pub fn num_queries(&self) -> usize {
        self.queries.len()
    }

    pub fn get(&self, query_id: &str) -> Option<&[ScoredItem]> {
        self.queries.get(query_id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[ScoredItem])> {
        self.queries.iter().map(|(q, v)| (q.as_str(), v.as_slice()))
    }

    /// Keep only the listed queries; errors on queries absent from the run.
    pub fn restrict(&self, query_ids: &[String]) -> Result<RankedRun> {
        let mut out = RankedRun::new(self.run_tag.clone());
        for q in query_ids {
            let items = self.queries.get(q).ok_or_else(|| Error::QueryCoverage {
                query_id: q.clone(),
                run_tag: self.run_tag.clone(),
            })?;
            out.queries.insert(q.clone(), items.clone());
        }
        Ok(out)
    }

    /// Merge the queries of `other` into `self`; duplicate query ids error.
    pub fn absorb(&mut self, other: RankedRun) -> Result<()> {
        for (q, items) in other.queries {
            if self.queries.contains_key(&q) {
                return Err(Error::Invalid(format!("query {q} present in both runs")));
            }
            self.queries.insert(q, items);
        }
        Ok(())
    }

    pub fn with_tag(mut self, run_tag: impl Into<String>) -> Self {
        self.run_tag = run_tag.into();
        self
    }

    pub fn truncate(&mut self, depth: usize) {
        for items in self.queries.values_mut() {
            items.truncate(depth);
        }
    }

    pub fn max_depth(&self) -> usize {
        self.queries.values().map(Vec::len).max().unwrap_or(0)
    }
}

/// Read a TREC 6-column run file: `query_id Q0 item_id rank score run_tag`.
///
/// Ranks must be contiguous from 1 within each query, items must be unique
/// per query, and scores must be non-increasing in rank order. Tie order is
/// preserved as stored, so `read` then `write` reproduces a canonical file
/// byte for byte.
pub fn read_run(path: impl AsRef<Path>) -> Result<RankedRun> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut run_tag: Option<String> = None;
    let mut queries: BTreeMap<String, Vec<ScoredItem>> = BTreeMap::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();

    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 6 {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected 6 columns, got {}", cols.len()),
            ));
        }
        let query_id = cols[0].to_string();
        let item_id = cols[2].to_string();
        let rank: usize = cols[3]
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("bad rank {}", cols[3])))?;
        let score: f64 = cols[4]
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("bad score {}", cols[4])))?;
        if rank == 0 {
            return Err(Error::parse(path, i + 1, "ranks must start at 1"));
        }
        if !seen.insert((query_id.clone(), item_id.clone())) {
            return Err(Error::parse(
                path,
                i + 1,
                format!("duplicate item {item_id} for query {query_id}"),
            ));
        }
        let items = queries.entry(query_id.clone()).or_default();
        if rank != items.len() + 1 {
            return Err(Error::parse(
                path,
                i + 1,
                format!(
                    "rank {rank} for query {query_id} is not contiguous (expected {})",
                    items.len() + 1
                ),
            ));
        }
        if let Some(prev) = items.last() {
            if score > prev.score {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("score increases at rank {rank} for query {query_id}"),
                ));
            }
        }
        items.push(ScoredItem { item_id, score });
        run_tag.get_or_insert_with(|| cols[5].to_string());
    }

    Ok(RankedRun {
        run_tag: run_tag.unwrap_or_else(|| "empty".to_string()),
        queries,
    })
}

/// Write a run in TREC 6-column format with contiguous 1-based ranks and
/// scores at six decimal places. Queries are written in ascending id order.
pub fn write_run(run: &RankedRun, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for (query_id, items) in run.iter() {
        for (i, item) in items.iter().enumerate() {
            out.push_str(&format!(
                "{} Q0 {} {} {:.6} {}\n",
                query_id,
                item.item_id,
                i + 1,
                item.score,
                run.run_tag
            ));
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
