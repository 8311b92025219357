//! Impact-style retrieval over pre-computed learned sparse term weights,
//! with generative feedback and a pseudo-relevance analogue.
//!
//! Scoring is the sparse dot product `score(p) = sum_w q(w) * p(w)`. The
//! feedback combination re-weights the (L1-normalized) query representation
//! and admits new terms only from the `theta` most probable terms of the
//! aggregated feedback representation:
//!
//! ```text
//! out(w) = beta * q(w) + (1 - beta) * feedback(w)   if w among top theta
//!        = beta * q(w)                              otherwise
//! ```
//!
//! Feedback representations are each L1-normalized, summed, and normalized
//! again before combination.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::error::{Error, Result};
use crate::run::{sort_canonical, ScoredItem};
use crate::vectors::{
    read_passage_map, read_sparse_vectors, write_passage_map, write_sparse_vectors, StoreManifest,
};

/// A learned sparse representation: term to non-negative weight.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRep {
    pub id: String,
    pub weights: BTreeMap<String, f64>,
}

impl SparseRep {
    pub fn new(id: impl Into<String>, weights: BTreeMap<String, f64>) -> Result<Self> {
        let id = id.into();
        if weights.values().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::Invalid(format!(
                "negative or non-finite weight in sparse representation {id}"
            )));
        }
        Ok(SparseRep { id, weights })
    }

    pub fn mass(&self) -> f64 {
        self.weights.values().sum()
    }

    pub fn num_terms(&self) -> usize {
        self.weights.len()
    }
}

/// Generative combination parameters: `beta` is the original query weight,
/// `theta` caps the number of feedback expansion terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsGrfParams {
    pub beta: f64,
    pub theta: usize,
}

impl Default for LsGrfParams {
    fn default() -> Self {
        LsGrfParams {
            beta: 0.5,
            theta: 60,
        }
    }
}

/// Pseudo-relevance parameters for the learned sparse paradigm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsPrfParams {
    pub fb_docs: usize,
    pub fb_terms: usize,
    pub original_query_weight: f64,
}

impl Default for LsPrfParams {
    fn default() -> Self {
        LsPrfParams {
            fb_docs: 10,
            fb_terms: 60,
            original_query_weight: 0.5,
        }
    }
}

/// Immutable store of passage representations with an inverted impact index
/// and a passage-to-document map.
#[derive(Debug)]
pub struct SparseStore {
    reps: Vec<SparseRep>,
    by_id: HashMap<String, usize>,
    postings: HashMap<String, Vec<(usize, f64)>>,
    passage_to_doc: BTreeMap<String, String>,
}

impl SparseStore {
    pub fn new(reps: Vec<SparseRep>, passage_to_doc: BTreeMap<String, String>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(reps.len());
        let mut postings: HashMap<String, Vec<(usize, f64)>> = HashMap::new();
        for (i, rep) in reps.iter().enumerate() {
            if by_id.insert(rep.id.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate rep id {}", rep.id)));
            }
            if !passage_to_doc.contains_key(&rep.id) {
                return Err(Error::UnmappedPassage(rep.id.clone()));
            }
            for (term, &w) in &rep.weights {
                postings.entry(term.clone()).or_default().push((i, w));
            }
        }
        Ok(SparseStore {
            reps,
            by_id,
            postings,
            passage_to_doc,
        })
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest = StoreManifest::load(dir)?;
        if manifest.kind != "sparse" {
            return Err(Error::Invalid(format!(
                "expected a sparse store, found kind {}",
                manifest.kind
            )));
        }
        let reps = read_sparse_vectors(dir.join(&manifest.vectors_file))?;
        let map = read_passage_map(dir.join(&manifest.passage_map_file))?;
        SparseStore::new(reps, map)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_sparse_vectors(dir.join("vectors.jsonl"), &self.reps)?;
        write_passage_map(dir.join("passages.tsv"), &self.passage_to_doc)?;
        StoreManifest {
            kind: "sparse".into(),
            dimension: None,
            vectors_file: "vectors.jsonl".into(),
            passage_map_file: "passages.tsv".into(),
        }
        .save(dir)
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn rep(&self, id: &str) -> Option<&SparseRep> {
        self.by_id.get(id).map(|&i| &self.reps[i])
    }

    pub fn doc_of(&self, passage_id: &str) -> Option<&str> {
        self.passage_to_doc.get(passage_id).map(String::as_str)
    }
}

/// Exact top-`depth` passages by sparse dot product, ties by ascending id.
/// Disjoint query/passage term sets simply score zero.
pub fn impact_search(store: &SparseStore, query: &SparseRep, depth: usize) -> Vec<ScoredItem> {
    let mut scores: HashMap<usize, f64> = HashMap::new();
    for (term, &qw) in &query.weights {
        if qw == 0.0 {
            continue;
        }
        let Some(postings) = store.postings.get(term) else {
            continue;
        };
        for &(rep_idx, pw) in postings {
            *scores.entry(rep_idx).or_insert(0.0) += qw * pw;
        }
    }
    let mut items: Vec<ScoredItem> = scores
        .into_iter()
        .map(|(i, score)| ScoredItem::new(store.reps[i].id.clone(), score))
        .collect();
    sort_canonical(&mut items);
    items.truncate(depth);
    items
}

/// Divide weights by their sum so they total one. Zero total mass errors.
pub fn l1_normalize(rep: &SparseRep) -> Result<SparseRep> {
    let mass = rep.mass();
    if mass <= 0.0 {
        return Err(Error::ZeroMass(rep.id.clone()));
    }
    Ok(SparseRep {
        id: rep.id.clone(),
        weights: rep
            .weights
            .iter()
            .map(|(t, &w)| (t.clone(), w / mass))
            .collect(),
    })
}

/// Aggregate generated-content representations: normalize each, sum
/// termwise, normalize again. Inputs are summed in ascending-id order so
/// the result does not depend on input order.
pub fn aggregate_generated(reps: &[SparseRep]) -> Result<SparseRep> {
    if reps.is_empty() {
        return Err(Error::EmptyFeedbackSet);
    }
    let mut ordered: Vec<&SparseRep> = reps.iter().collect();
    ordered.sort_by(|a, b| a.id.cmp(&b.id));

    let mut sum: BTreeMap<String, f64> = BTreeMap::new();
    for rep in ordered {
        let normalized = l1_normalize(rep)?;
        for (term, w) in normalized.weights {
            *sum.entry(term).or_insert(0.0) += w;
        }
    }
    l1_normalize(&SparseRep {
        id: "feedback".to_string(),
        weights: sum,
    })
}

/// Combine an L1-normalized query representation with an aggregated
/// feedback representation. Terms outside both the query and the top
/// `theta` feedback terms get weight zero and are dropped.
pub fn ls_grf_combine(query: &SparseRep, feedback: &SparseRep, params: &LsGrfParams) -> SparseRep {
    let mut top: Vec<(&String, &f64)> = feedback.weights.iter().collect();
    top.sort_by(|a, b| b.1.total_cmp(a.1).then_with(|| a.0.cmp(b.0)));
    top.truncate(params.theta);
    let window: BTreeMap<&str, f64> = top.into_iter().map(|(t, &w)| (t.as_str(), w)).collect();

    let beta = params.beta;
    let mut out: BTreeMap<String, f64> = BTreeMap::new();
    for (term, &qw) in &query.weights {
        let fb = window.get(term.as_str()).copied().unwrap_or(0.0);
        let w = beta * qw + (1.0 - beta) * fb;
        if w > 0.0 {
            out.insert(term.clone(), w);
        }
    }
    for (term, fb) in &window {
        if !query.weights.contains_key(*term) {
            let w = (1.0 - beta) * fb;
            if w > 0.0 {
                out.insert((*term).to_string(), w);
            }
        }
    }
    SparseRep {
        id: query.id.clone(),
        weights: out,
    }
}

/// Pseudo-relevance analogue: aggregate the representations of the top
/// `fb_docs` first-pass passages and combine exactly as the generative
/// variant with `theta = fb_terms` and `beta = original_query_weight`.
pub fn ls_prf_combine(
    query: &SparseRep,
    first_pass_reps: &[SparseRep],
    params: &LsPrfParams,
) -> Result<SparseRep> {
    let feedback_reps = &first_pass_reps[..params.fb_docs.min(first_pass_reps.len())];
    let feedback = aggregate_generated(feedback_reps)?;
    Ok(ls_grf_combine(
        query,
        &feedback,
        &LsGrfParams {
            beta: params.original_query_weight,
            theta: params.fb_terms,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rep(id: &str, weights: &[(&str, f64)]) -> SparseRep {
        SparseRep::new(
            id,
            weights.iter().map(|(t, w)| (t.to_string(), *w)).collect(),
        )
        .unwrap()
    }

    fn store(reps: Vec<SparseRep>) -> SparseStore {
        let map = reps
            .iter()
            .map(|r| (r.id.clone(), format!("doc-{}", r.id)))
            .collect();
        SparseStore::new(reps, map).unwrap()
    }

    #[test]
    fn disjoint_terms_score_zero() {
        let s = store(vec![rep("p1", &[("x", 2.0)])]);
        let q = rep("q", &[("y", 3.0)]);
        let out = impact_search(&s, &q, 10);
        assert!(out.is_empty() || out[0].score == 0.0);
    }

    #[test]
    fn single_term_product() {
        let s = store(vec![rep("p1", &[("a", 3.0), ("b", 1.0)])]);
        let q = rep("q", &[("a", 2.0)]);
        let out = impact_search(&s, &q, 10);
        assert_eq!(out[0].score, 6.0);
    }

    #[test]
    fn three_passage_hand_ranking() {
        let s = store(vec![
            rep("p1", &[("a", 1.0), ("b", 2.0)]),
            rep("p2", &[("a", 3.0)]),
            rep("p3", &[("b", 1.0), ("c", 9.0)]),
        ]);
        let q = rep("q", &[("a", 1.0), ("b", 0.5)]);
        // p1 = 1 + 1 = 2, p2 = 3, p3 = 0.5
        let out = impact_search(&s, &q, 10);
        let got: Vec<(&str, f64)> = out.iter().map(|i| (i.item_id.as_str(), i.score)).collect();
        assert_eq!(got, [("p2", 3.0), ("p1", 2.0), ("p3", 0.5)]);
    }

    #[test]
    fn l1_normalize_examples() {
        let half = l1_normalize(&rep("r", &[("a", 2.0), ("b", 2.0)])).unwrap();
        assert_eq!(half.weights["a"], 0.5);
        assert_eq!(half.weights["b"], 0.5);

        let normalized = l1_normalize(&rep("r", &[("a", 0.25), ("b", 0.75)])).unwrap();
        assert_eq!(normalized.weights["a"], 0.25);
        assert_eq!(normalized.weights["b"], 0.75);

        let single = l1_normalize(&rep("r", &[("a", 3.0)])).unwrap();
        assert_eq!(single.weights["a"], 1.0);

        assert!(matches!(
            l1_normalize(&rep("r", &[("a", 0.0)])),
            Err(Error::ZeroMass(_))
        ));
    }

    #[test]
    fn aggregate_single_rep_is_its_normalization() {
        let r = rep("r", &[("a", 1.0), ("b", 3.0)]);
        let agg = aggregate_generated(std::slice::from_ref(&r)).unwrap();
        let norm = l1_normalize(&r).unwrap();
        for (term, w) in &norm.weights {
            assert!((agg.weights[term] - w).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregate_identical_reps_collapse() {
        let r = rep("r", &[("a", 1.0), ("b", 3.0)]);
        let one = aggregate_generated(std::slice::from_ref(&r)).unwrap();
        let two = aggregate_generated(&[r.clone(), r.clone()]).unwrap();
        assert_eq!(one.weights, two.weights);
    }

    #[test]
    fn aggregate_hand_sum() {
        // {a:1} and {b:1} -> {a:0.5, b:0.5}
        let agg =
            aggregate_generated(&[rep("r1", &[("a", 1.0)]), rep("r2", &[("b", 1.0)])]).unwrap();
        assert_eq!(agg.weights["a"], 0.5);
        assert_eq!(agg.weights["b"], 0.5);
    }

    #[test]
    fn aggregate_permutation_invariant() {
        let a = rep("r1", &[("a", 1.0), ("b", 2.0)]);
        let b = rep("r2", &[("b", 5.0), ("c", 1.0)]);
        let c = rep("r3", &[("a", 0.5)]);
        let fwd = aggregate_generated(&[a.clone(), b.clone(), c.clone()]).unwrap();
        let rev = aggregate_generated(&[c, b, a]).unwrap();
        assert_eq!(fwd.weights, rev.weights);
    }

    #[test]
    fn aggregate_empty_is_an_error() {
        assert!(matches!(
            aggregate_generated(&[]),
            Err(Error::EmptyFeedbackSet)
        ));
    }

    #[test]
    fn combine_with_beta_one_is_the_query() {
        let q = rep("q", &[("a", 0.25), ("b", 0.75)]);
        let fb = rep("f", &[("c", 1.0)]);
        let out = ls_grf_combine(
            &q,
            &fb,
            &LsGrfParams {
                beta: 1.0,
                theta: 5,
            },
        );
        assert_eq!(out.weights, q.weights);
    }

    #[test]
    fn combine_hand_interpolation() {
        // theta >= |feedback|, beta 0.5, q {a:1}, feedback {a:0.5, b:0.5}
        // -> {a:0.75, b:0.25}
        let q = rep("q", &[("a", 1.0)]);
        let fb = rep("f", &[("a", 0.5), ("b", 0.5)]);
        let out = ls_grf_combine(
            &q,
            &fb,
            &LsGrfParams {
                beta: 0.5,
                theta: 2,
            },
        );
        assert_eq!(out.weights["a"], 0.75);
        assert_eq!(out.weights["b"], 0.25);
    }

    #[test]
    fn theta_one_limits_support_to_query_plus_top_term() {
        let q = rep("q", &[("a", 1.0)]);
        let fb = rep("f", &[("b", 0.6), ("c", 0.4)]);
        let out = ls_grf_combine(
            &q,
            &fb,
            &LsGrfParams {
                beta: 0.5,
                theta: 1,
            },
        );
        let support: Vec<&str> = out.weights.keys().map(String::as_str).collect();
        assert_eq!(support, ["a", "b"]);
    }

    #[test]
    fn window_ties_break_lexicographically() {
        let q = rep("q", &[("z", 1.0)]);
        let fb = rep("f", &[("b", 0.5), ("a", 0.5)]);
        let out = ls_grf_combine(
            &q,
            &fb,
            &LsGrfParams {
                beta: 0.5,
                theta: 1,
            },
        );
        assert!(out.weights.contains_key("a"));
        assert!(!out.weights.contains_key("b"));
    }

    #[test]
    fn boundary_terms_outside_window_and_query_are_zero() {
        let q = rep("q", &[("a", 1.0)]);
        let fb = rep("f", &[("b", 0.6), ("c", 0.3), ("d", 0.1)]);
        let out = ls_grf_combine(
            &q,
            &fb,
            &LsGrfParams {
                beta: 0.5,
                theta: 2,
            },
        );
        assert!(!out.weights.contains_key("d"));
        assert!(out.weights.len() <= q.num_terms() + 2);
    }

    #[test]
    fn prf_combine_full_query_weight_keeps_ranking() {
        let s = store(vec![
            rep("p1", &[("a", 1.0), ("b", 0.5)]),
            rep("p2", &[("a", 0.5)]),
            rep("p3", &[("c", 2.0)]),
        ]);
        let q = l1_normalize(&rep("q", &[("a", 1.0)])).unwrap();
        let first: Vec<SparseRep> = impact_search(&s, &q, 10)
            .iter()
            .filter(|i| i.score > 0.0)
            .map(|i| s.rep(&i.item_id).unwrap().clone())
            .collect();
        let combined = ls_prf_combine(
            &q,
            &first,
            &LsPrfParams {
                fb_docs: 2,
                fb_terms: 10,
                original_query_weight: 1.0,
            },
        )
        .unwrap();
        assert_eq!(combined.weights, q.weights);
    }

    #[test]
    fn prf_combine_single_doc_feedback_is_that_doc() {
        let q = l1_normalize(&rep("q", &[("a", 1.0)])).unwrap();
        let p = rep("p1", &[("a", 2.0), ("b", 6.0)]);
        let out = ls_prf_combine(
            &q,
            std::slice::from_ref(&p),
            &LsPrfParams {
                fb_docs: 1,
                fb_terms: 10,
                original_query_weight: 0.5,
            },
        )
        .unwrap();
        // feedback = normalize(p) = {a:0.25, b:0.75}
        assert_eq!(out.weights["a"], 0.5 * 1.0 + 0.5 * 0.25);
        assert_eq!(out.weights["b"], 0.5 * 0.75);
    }

    #[test]
    fn prf_two_doc_hand_trace() {
        let s = store(vec![
            rep("p1", &[("a", 3.0), ("b", 1.0)]),
            rep("p2", &[("a", 1.0), ("c", 1.0)]),
            rep("p3", &[("d", 1.0)]),
        ]);
        let q = l1_normalize(&rep("q", &[("a", 1.0)])).unwrap();
        // first pass: p1 = 3, p2 = 1, p3 absent
        let first: Vec<SparseRep> = impact_search(&s, &q, 10)
            .iter()
            .filter(|i| i.score > 0.0)
            .map(|i| s.rep(&i.item_id).unwrap().clone())
            .collect();
        let out = ls_prf_combine(
            &q,
            &first,
            &LsPrfParams {
                fb_docs: 2,
                fb_terms: 10,
                original_query_weight: 0.5,
            },
        )
        .unwrap();
        // normalize(p1) = {a:0.75, b:0.25}; normalize(p2) = {a:0.5, c:0.5}
        // sum = {a:1.25, b:0.25, c:0.5}; total 2 -> feedback {a:0.625, b:0.125, c:0.25}
        assert_eq!(out.weights["a"], 0.5 * 1.0 + 0.5 * 0.625);
        assert_eq!(out.weights["b"], 0.5 * 0.125);
        assert_eq!(out.weights["c"], 0.5 * 0.25);
        // second pass with the combined query
        let second = impact_search(&s, &out, 10);
        let got: Vec<&str> = second.iter().map(|i| i.item_id.as_str()).collect();
        assert_eq!(got, ["p1", "p2"]);
    }

    #[test]
    fn scaling_query_preserves_ranking() {
        let s = store(vec![
            rep("p1", &[("a", 1.0), ("b", 2.0)]),
            rep("p2", &[("a", 2.0), ("c", 1.0)]),
            rep("p3", &[("b", 4.0)]),
        ]);
        let q = rep("q", &[("a", 0.5), ("b", 0.25)]);
        let scaled = SparseRep::new(
            "q",
            q.weights
                .iter()
                .map(|(t, w)| (t.clone(), 4.0 * w))
                .collect(),
        )
        .unwrap();
        let base = impact_search(&s, &q, 10);
        let scl = impact_search(&s, &scaled, 10);
        let base_ids: Vec<&str> = base.iter().map(|i| i.item_id.as_str()).collect();
        let scl_ids: Vec<&str> = scl.iter().map(|i| i.item_id.as_str()).collect();
        assert_eq!(base_ids, scl_ids);
        for (a, b) in base.iter().zip(&scl) {
            assert_eq!(4.0 * a.score, b.score);
        }
    }

    #[test]
    fn store_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let s = store(vec![rep("p1", &[("a", 1.5)]), rep("p2", &[("b", 0.25)])]);
        s.save(dir.path()).unwrap();
        let loaded = SparseStore::load(dir.path()).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded.rep("p1").unwrap().weights["a"], 1.5);
        assert_eq!(loaded.doc_of("p2"), Some("doc-p2"));
    }
}
