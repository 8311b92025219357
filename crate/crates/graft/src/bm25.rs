//! BM25 scoring over the inverted index, including weighted-term queries
//! produced by feedback expansion.
//!
//! The score of document `d` for query weights `q` is
//!
//! ```text
//! score(d) = sum_t q(t) * idf(t) * tf(t,d) * (k1 + 1)
//!                    / (tf(t,d) + k1 * (1 - b + b * len(d) / avgdl))
//! idf(t)   = ln(1 + (N - df(t) + 0.5) / (df(t) + 0.5))
//! ```
//!
//! The idf is never negative, so expansion weights scale per-term
//! contributions monotonically. Scores are linear in the query weights.

use std::collections::{BTreeMap, HashMap};

use crate::analysis::TokenPipeline;
use crate::error::{Error, Result};
use crate::index::InvertedIndex;
use crate::run::{sort_canonical, ScoredItem};

/// BM25 free parameters. Tuning grids typically cover k1 in [0.1, 5.0] and
/// b in [0.1, 1.0].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 0.9, b: 0.4 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1.is_finite() && self.k1 > 0.0) {
            return Err(Error::InvalidParam(format!(
                "k1 must be positive, got {}",
                self.k1
            )));
        }
        if !(self.b.is_finite() && self.b > 0.0 && self.b <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "b must be in (0, 1], got {}",
                self.b
            )));
        }
        Ok(())
    }
}

/// A query as a map from term to non-negative weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedQuery {
    pub query_id: String,
    pub weights: BTreeMap<String, f64>,
}

impl WeightedQuery {
    pub fn new(query_id: impl Into<String>, weights: BTreeMap<String, f64>) -> Self {
        WeightedQuery {
            query_id: query_id.into(),
            weights,
        }
    }

    /// Analyze query text into a maximum-likelihood term distribution
    /// (weights sum to one). Text that analyzes to nothing yields an empty
    /// query, which retrieves nothing.
    pub fn from_text(query_id: impl Into<String>, text: &str, analyzer: &TokenPipeline) -> Self {
        let mut weights: BTreeMap<String, f64> = BTreeMap::new();
        let terms = analyzer.tokenize(text);
        let total = terms.len() as f64;
        for term in terms {
            *weights.entry(term).or_insert(0.0) += 1.0;
        }
        for w in weights.values_mut() {
            *w /= total;
        }
        WeightedQuery::new(query_id, weights)
    }

    pub fn is_empty(&self) -> bool {
        self.weights.values().all(|&w| w == 0.0)
    }
}

/// Lucene-style idf; non-negative for every df in [0, n].
pub fn idf(n: usize, df: usize) -> f64 {
    ((n as f64 - df as f64 + 0.5) / (df as f64 + 0.5)).ln_1p()
}

/// Rank the top `depth` documents for a weighted query. Query terms missing
/// from the index contribute nothing; a query with no indexed terms yields
/// an empty list. Ties are broken by ascending doc id.
pub fn bm25_search(
    index: &InvertedIndex,
    query: &WeightedQuery,
    params: Bm25Params,
    depth: usize,
) -> Vec<ScoredItem> {
    let n = index.num_docs();
    let avgdl = index.avgdl();
    let mut scores: HashMap<u32, f64> = HashMap::new();

    for (term, &weight) in &query.weights {
        if weight == 0.0 {
            continue;
        }
        let Some(postings) = index.postings(term) else {
            continue;
        };
        let idf = idf(n, postings.len());
        for p in postings {
            let tf = f64::from(p.tf);
            let len_norm = 1.0 - params.b + params.b * f64::from(index.doc_len(p.doc)) / avgdl;
            let contribution = weight * idf * tf * (params.k1 + 1.0) / (tf + params.k1 * len_norm);
            *scores.entry(p.doc).or_insert(0.0) += contribution;
        }
    }

    let mut items: Vec<ScoredItem> = scores
        .into_iter()
        .map(|(ord, score)| ScoredItem::new(index.doc_id(ord), score))
        .collect();
    sort_canonical(&mut items);
    items.truncate(depth);
    items
}
