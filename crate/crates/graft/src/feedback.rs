//! Query expansion for the sparse paradigm: RM3 pseudo-relevance feedback
//! and generative feedback from pre-generated text.
//!
//! Both methods build a feedback term distribution, keep its most probable
//! terms, and interpolate with the original query:
//!
//! ```text
//! out(w) = owq * p_query(w) + (1 - owq) * p_feedback(w)
//! ```
//!
//! The feedback model is truncated to `fb_terms` (ties broken by ascending
//! term) and renormalized before interpolation. RM3 estimates the model from
//! top-ranked documents weighted by their normalized first-pass scores; the
//! generative variant estimates it from the concatenation of all generated
//! texts for the query and never touches first-pass results.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::analysis::TokenPipeline;
use crate::bm25::WeightedQuery;
use crate::corpus::GeneratedDocument;
use crate::error::{Error, Result};
use crate::index::InvertedIndex;
use crate::run::ScoredItem;

/// A probability distribution over terms: non-negative, sums to one.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TermDistribution {
    probs: BTreeMap<String, f64>,
}

impl TermDistribution {
    /// Build from raw counts or weights, normalizing to sum one.
    pub fn from_weights(weights: BTreeMap<String, f64>) -> Result<Self> {
        let total: f64 = weights.values().sum();
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::EmptyFeedbackSet);
        }
        if weights.values().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::Invalid("negative or non-finite term weight".into()));
        }
        Ok(TermDistribution {
            probs: weights.into_iter().map(|(t, w)| (t, w / total)).collect(),
        })
    }

    pub fn prob(&self, term: &str) -> f64 {
        self.probs.get(term).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.probs.iter().map(|(t, &p)| (t.as_str(), p))
    }

    pub fn sum(&self) -> f64 {
        self.probs.values().sum()
    }

    /// Keep the `n` most probable terms (ties by ascending term) and
    /// renormalize. Keeping at least the whole vocabulary is a no-op, so
    /// probabilities are not perturbed when no truncation happens.
    pub fn top_terms(&self, n: usize) -> TermDistribution {
        if n >= self.probs.len() {
            return self.clone();
        }
        let mut entries: Vec<(&String, &f64)> = self.probs.iter().collect();
        entries.sort_by(|a, b| b.1.total_cmp(a.1).then_with(|| a.0.cmp(b.0)));
        entries.truncate(n);
        let total: f64 = entries.iter().map(|(_, &p)| p).sum();
        TermDistribution {
            probs: entries
                .into_iter()
                .map(|(t, &p)| (t.clone(), p / total))
                .collect(),
        }
    }
}

/// RM3 hyperparameters. The conventional grids step fb_docs and fb_terms
/// from 10 to 100 by 10 and the query weight from 0.1 to 0.9 by 0.1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rm3Params {
    pub fb_docs: usize,
    pub fb_terms: usize,
    pub original_query_weight: f64,
}

impl Default for Rm3Params {
    fn default() -> Self {
        Rm3Params {
            fb_docs: 10,
            fb_terms: 10,
            original_query_weight: 0.5,
        }
    }
}

/// Generative expansion hyperparameters for the sparse paradigm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrfSparseParams {
    pub fb_terms: usize,
    pub original_query_weight: f64,
}

impl Default for GrfSparseParams {
    fn default() -> Self {
        GrfSparseParams {
            fb_terms: 10,
            original_query_weight: 0.5,
        }
    }
}

fn validate_weight(owq: f64) -> Result<()> {
    if !(owq.is_finite() && owq > 0.0 && owq <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "original query weight must be in (0, 1], got {owq}"
        )));
    }
    Ok(())
}

/// Estimate a relevance model from the top `fb_docs` first-pass documents:
///
/// ```text
/// p(w) ~ sum_d s(d) * tf(w, d) / len(d)
/// ```
///
/// where `s(d)` are first-pass scores normalized to sum one over the
/// feedback set. Documents that analyze to nothing contribute nothing; if
/// every feedback document is empty the feedback set is empty and that is
/// an error.
pub fn relevance_model(
    index: &InvertedIndex,
    first_pass: &[ScoredItem],
    fb_docs: usize,
) -> Result<TermDistribution> {
    let feedback = &first_pass[..fb_docs.min(first_pass.len())];
    if feedback.is_empty() {
        return Err(Error::EmptyFeedbackSet);
    }
    let total_score: f64 = feedback.iter().map(|i| i.score).sum();
    let uniform = 1.0 / feedback.len() as f64;

    let mut weights: BTreeMap<String, f64> = BTreeMap::new();
    for item in feedback {
        let ord = index.doc_ord(&item.item_id).ok_or_else(|| {
            Error::Invalid(format!("feedback document {} not in index", item.item_id))
        })?;
        let len = f64::from(index.doc_len(ord));
        if len == 0.0 {
            continue;
        }
        let s = if total_score > 0.0 {
            item.score / total_score
        } else {
            uniform
        };
        for (term, tf) in index.doc_terms(ord) {
            *weights.entry(term.to_string()).or_insert(0.0) += s * f64::from(tf) / len;
        }
    }
    TermDistribution::from_weights(weights)
}

fn interpolate(
    query: &WeightedQuery,
    feedback: &TermDistribution,
    owq: f64,
) -> Result<WeightedQuery> {
    validate_weight(owq)?;
    let q_total: f64 = query.weights.values().sum();
    if !q_total.is_finite() || q_total <= 0.0 {
        return Err(Error::Invalid(format!(
            "query {} has no weighted terms to expand",
            query.query_id
        )));
    }
    let mut out: BTreeMap<String, f64> = BTreeMap::new();
    for (term, &w) in &query.weights {
        let p = owq * (w / q_total) + (1.0 - owq) * feedback.prob(term);
        if p > 0.0 {
            out.insert(term.clone(), p);
        }
    }
    for (term, p_fb) in feedback.iter() {
        if !query.weights.contains_key(term) {
            let p = (1.0 - owq) * p_fb;
            if p > 0.0 {
                out.insert(term.to_string(), p);
            }
        }
    }
    Ok(WeightedQuery::new(query.query_id.clone(), out))
}

/// RM3: truncate the relevance model to its top `fb_terms`, renormalize,
/// and interpolate with the maximum-likelihood query model. With weight 1.0
/// the output equals the normalized original query exactly.
pub fn rm3_expand(
    query: &WeightedQuery,
    rel_model: &TermDistribution,
    fb_terms: usize,
    original_query_weight: f64,
) -> Result<WeightedQuery> {
    interpolate(query, &rel_model.top_terms(fb_terms), original_query_weight)
}

/// Generative expansion: build a maximum-likelihood term distribution over
/// the concatenation of all generated texts for the query, truncate to
/// `fb_terms`, and interpolate exactly as RM3. Independent of any first-pass
/// retrieval.
pub fn grf_sparse_expand(
    query: &WeightedQuery,
    generated: &[GeneratedDocument],
    analyzer: &TokenPipeline,
    params: GrfSparseParams,
) -> Result<WeightedQuery> {
    if generated.is_empty() {
        return Err(Error::MissingGenerated(query.query_id.clone()));
    }
    let mut counts: BTreeMap<String, f64> = BTreeMap::new();
    for doc in generated {
        for term in analyzer.tokenize(&doc.text) {
            *counts.entry(term).or_insert(0.0) += 1.0;
        }
    }
    let model = TermDistribution::from_weights(counts)?;
    interpolate(
        query,
        &model.top_terms(params.fb_terms),
        params.original_query_weight,
    )
}

/// Write expanded queries to a debug file, one line per query:
/// `query_id<TAB>term:weight,...` sorted by descending weight (ties by
/// ascending term).
pub fn write_expanded_queries(path: impl AsRef<Path>, queries: &[WeightedQuery]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for q in queries {
        let mut entries: Vec<(&String, &f64)> = q.weights.iter().collect();
        entries.sort_by(|a, b| b.1.total_cmp(a.1).then_with(|| a.0.cmp(b.0)));
        let formatted: Vec<String> = entries.iter().map(|(t, w)| format!("{t}:{w:.6}")).collect();
        out.push_str(&format!("{}\t{}\n", q.query_id, formatted.join(",")));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
