//! Reciprocal rank fusion and its weighted variant for combining
//! pseudo-relevance and generative feedback runs.
//!
//! With 1-based ranks `r(d)` and a shift constant `k` (default 60, which
//! damps the gap between adjacent ranks so deep results still contribute),
//! the weighted fusion of a PRF run and a GRF run scores each document in
//! the union of the two candidate sets as
//!
//! ```text
//! score(d) = lambda / (k + r_prf(d)) + (1 - lambda) / (k + r_grf(d))
//! ```
//!
//! where each term is present only if the document appears in that run; a
//! document absent from a run contributes nothing for it. At lambda = 0.5
//! the ordering is exactly unweighted fusion of the two runs (scores halve).

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::run::{sort_canonical, RankedRun, ScoredItem};

/// Weighted fusion parameters. `lambda` weights the PRF run; `1 - lambda`
/// the GRF run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrrfParams {
    pub lambda: f64,
    pub k: u32,
}

pub const DEFAULT_RRF_K: u32 = 60;

impl Default for WrrfParams {
    fn default() -> Self {
        WrrfParams {
            lambda: 0.5,
            k: DEFAULT_RRF_K,
        }
    }
}

impl WrrfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && (0.0..=1.0).contains(&self.lambda)) {
            return Err(Error::InvalidParam(format!(
                "lambda must be in [0, 1], got {}",
                self.lambda
            )));
        }
        if self.k < 1 {
            return Err(Error::InvalidParam("k must be >= 1".to_string()));
        }
        Ok(())
    }

    /// Run tag recording the parameters, e.g. `wrrf_l0.4_k60`.
    pub fn run_tag(&self) -> String {
        format!("wrrf_l{}_k{}", self.lambda, self.k)
    }
}

fn check_same_queries(a: &RankedRun, b: &RankedRun) -> Result<()> {
    for q in a.query_ids() {
        if b.get(q).is_none() {
            return Err(Error::QueryCoverage {
                query_id: q.to_string(),
                run_tag: a.run_tag.clone(),
            });
        }
    }
    for q in b.query_ids() {
        if a.get(q).is_none() {
            return Err(Error::QueryCoverage {
                query_id: q.to_string(),
                run_tag: b.run_tag.clone(),
            });
        }
    }
    Ok(())
}

/// Weighted reciprocal rank fusion of a PRF run and a GRF run. Both runs
/// must cover the same query set; output is truncated to `depth` per query
/// with ties broken by ascending doc id.
pub fn wrrf(
    prf_run: &RankedRun,
    grf_run: &RankedRun,
    params: WrrfParams,
    depth: usize,
) -> Result<RankedRun> {
    params.validate()?;
    check_same_queries(prf_run, grf_run)?;
    let mut out = RankedRun::new(params.run_tag());
    for (query_id, prf_items) in prf_run.iter() {
        let grf_items = grf_run.get(query_id).expect("coverage checked");
        let mut scores: BTreeMap<&str, f64> = BTreeMap::new();
        for (rank0, item) in prf_items.iter().enumerate() {
            *scores.entry(item.item_id.as_str()).or_insert(0.0) +=
                params.lambda / (f64::from(params.k) + (rank0 + 1) as f64);
        }
        for (rank0, item) in grf_items.iter().enumerate() {
            *scores.entry(item.item_id.as_str()).or_insert(0.0) +=
                (1.0 - params.lambda) / (f64::from(params.k) + (rank0 + 1) as f64);
        }
        let mut items: Vec<ScoredItem> = scores
            .into_iter()
            .map(|(id, score)| ScoredItem::new(id, score))
            .collect();
        sort_canonical(&mut items);
        items.truncate(depth);
        out.insert_query(query_id, items, depth)?;
    }
    Ok(out)
}

/// Unweighted reciprocal rank fusion of any number of runs sharing a query
/// set: `score(d) = sum over runs containing d of 1 / (k + rank(d))`.
pub fn rrf(runs: &[&RankedRun], k: u32, depth: usize) -> Result<RankedRun> {
    let Some(first) = runs.first() else {
        return Err(Error::Invalid("rrf needs at least one run".to_string()));
    };
    if k < 1 {
        return Err(Error::InvalidParam("k must be >= 1".to_string()));
    }
    for other in &runs[1..] {
        check_same_queries(first, other)?;
    }
    let mut out = RankedRun::new(format!("rrf_k{k}"));
    for (query_id, _) in first.iter() {
        let mut scores: BTreeMap<&str, f64> = BTreeMap::new();
        for run in runs {
            let items = run.get(query_id).expect("coverage checked");
            for (rank0, item) in items.iter().enumerate() {
                *scores.entry(item.item_id.as_str()).or_insert(0.0) +=
                    1.0 / (f64::from(k) + (rank0 + 1) as f64);
            }
        }
        let mut items: Vec<ScoredItem> = scores
            .into_iter()
            .map(|(id, score)| ScoredItem::new(id, score))
            .collect();
        sort_canonical(&mut items);
        items.truncate(depth);
        out.insert_query(query_id, items, depth)?;
    }
    Ok(out)
}
