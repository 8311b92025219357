//! Exact dense retrieval over pre-computed passage embeddings, Rocchio
//! feedback, and max-passage document aggregation.
//!
//! Similarity is the raw inner product; search is exhaustive, so results
//! match a brute-force scorer by construction and approximate indexes are
//! out of scope. Feedback combines the query vector with the mean of the
//! feedback vectors:
//!
//! ```text
//! combined = alpha * Q + beta * mean(feedback)
//! ```
//!
//! Pseudo-relevance feedback takes the top passages of a first pass as
//! feedback; generative feedback takes pre-computed embeddings of generated
//! text and runs no first pass at all.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::run::{sort_canonical, ScoredItem};
use crate::vectors::{
    read_dense_vectors, read_passage_map, write_dense_vectors, write_passage_map, StoreManifest,
};

/// A fixed-dimension embedding with an identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub id: String,
    pub components: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(id: impl Into<String>, components: Vec<f64>) -> Self {
        EmbeddingVector {
            id: id.into(),
            components,
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }
}

/// Rocchio weights, plus the feedback depth used by pseudo-relevance
/// feedback (number of top passages fed back).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocchioParams {
    pub alpha: f64,
    pub beta: f64,
    pub depth: usize,
}

impl Default for RocchioParams {
    fn default() -> Self {
        RocchioParams {
            alpha: 0.5,
            beta: 0.5,
            depth: 5,
        }
    }
}

/// Immutable store of passage embeddings with a passage-to-document map.
/// Searches are counted so tests can assert how many passes touched the
/// store.
#[derive(Debug)]
pub struct VectorStore {
    dim: usize,
    vectors: Vec<EmbeddingVector>,
    by_id: HashMap<String, usize>,
    passage_to_doc: BTreeMap<String, String>,
    searches: AtomicU64,
}

impl VectorStore {
    pub fn new(
        vectors: Vec<EmbeddingVector>,
        passage_to_doc: BTreeMap<String, String>,
    ) -> Result<Self> {
        let dim = vectors.first().map(EmbeddingVector::dim).unwrap_or(0);
        let mut by_id = HashMap::with_capacity(vectors.len());
        for (i, v) in vectors.iter().enumerate() {
            if v.dim() != dim {
                return Err(Error::DimensionMismatch {
                    id: v.id.clone(),
                    expected: dim,
                    got: v.dim(),
                });
            }
            if by_id.insert(v.id.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate vector id {}", v.id)));
            }
            if !passage_to_doc.contains_key(&v.id) {
                return Err(Error::UnmappedPassage(v.id.clone()));
            }
        }
        Ok(VectorStore {
            dim,
            vectors,
            by_id,
            passage_to_doc,
            searches: AtomicU64::new(0),
        })
    }

    /// Load from a store directory written by [`VectorStore::save`].
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest = StoreManifest::load(dir)?;
        if manifest.kind != "dense" {
            return Err(Error::Invalid(format!(
                "expected a dense store, found kind {}",
                manifest.kind
            )));
        }
        let vectors = read_dense_vectors(dir.join(&manifest.vectors_file))?;
        let map = read_passage_map(dir.join(&manifest.passage_map_file))?;
        let store = VectorStore::new(vectors, map)?;
        if let Some(dim) = manifest.dimension {
            if dim != store.dim {
                return Err(Error::Invalid(format!(
                    "manifest dimension {dim} does not match vectors ({})",
                    store.dim
                )));
            }
        }
        Ok(store)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_dense_vectors(dir.join("vectors.jsonl"), &self.vectors)?;
        write_passage_map(dir.join("passages.tsv"), &self.passage_to_doc)?;
        StoreManifest {
            kind: "dense".into(),
            dimension: Some(self.dim),
            vectors_file: "vectors.jsonl".into(),
            passage_map_file: "passages.tsv".into(),
        }
        .save(dir)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self, id: &str) -> Option<&EmbeddingVector> {
        self.by_id.get(id).map(|&i| &self.vectors[i])
    }

    pub fn doc_of(&self, passage_id: &str) -> Option<&str> {
        self.passage_to_doc.get(passage_id).map(String::as_str)
    }

    pub fn passage_map(&self) -> &BTreeMap<String, String> {
        &self.passage_to_doc
    }

    /// Number of searches that have touched this store.
    pub fn search_count(&self) -> u64 {
        self.searches.load(Ordering::Relaxed)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut sum = 0.0;
    for i in 0..a.len() {
        sum += a[i] * b[i];
    }
    sum
}

/// Exhaustive inner-product search over all passages. Ties are broken by
/// ascending passage id.
pub fn dense_search(
    store: &VectorStore,
    query: &EmbeddingVector,
    depth: usize,
) -> Result<Vec<ScoredItem>> {
    if !store.is_empty() && query.dim() != store.dim() {
        return Err(Error::DimensionMismatch {
            id: query.id.clone(),
            expected: store.dim(),
            got: query.dim(),
        });
    }
    store.searches.fetch_add(1, Ordering::Relaxed);
    let mut items: Vec<ScoredItem> = store
        .vectors
        .iter()
        .map(|v| ScoredItem::new(v.id.clone(), dot(&query.components, &v.components)))
        .collect();
    sort_canonical(&mut items);
    items.truncate(depth);
    Ok(items)
}

/// Collapse a passage-level ranking to document level: each document scores
/// the maximum of its passages, ties broken by ascending doc id. `doc_of`
/// maps passage id to document id and must cover every passage in the run.
pub fn max_passage(
    passage_items: &[ScoredItem],
    doc_of: impl Fn(&str) -> Option<String>,
) -> Result<Vec<ScoredItem>> {
    let mut best: BTreeMap<String, f64> = BTreeMap::new();
    for item in passage_items {
        let doc =
            doc_of(&item.item_id).ok_or_else(|| Error::UnmappedPassage(item.item_id.clone()))?;
        best.entry(doc)
            .and_modify(|s| *s = s.max(item.score))
            .or_insert(item.score);
    }
    let mut items: Vec<ScoredItem> = best
        .into_iter()
        .map(|(doc, score)| ScoredItem::new(doc, score))
        .collect();
    sort_canonical(&mut items);
    Ok(items)
}

/// Combine a query vector with the mean of the feedback vectors:
/// `alpha * query + beta * mean(feedback)`. Feedback is summed in
/// ascending-id order, so the result is identical under permutation of the
/// input.
pub fn rocchio_combine(
    query: &EmbeddingVector,
    feedback: &[&EmbeddingVector],
    alpha: f64,
    beta: f64,
) -> Result<EmbeddingVector> {
    if feedback.is_empty() {
        return Err(Error::EmptyFeedbackSet);
    }
    let mut ordered: Vec<&EmbeddingVector> = feedback.to_vec();
    ordered.sort_by(|a, b| a.id.cmp(&b.id));

    let dim = query.dim();
    let mut mean = vec![0.0f64; dim];
    for v in &ordered {
        if v.dim() != dim {
            return Err(Error::DimensionMismatch {
                id: v.id.clone(),
                expected: dim,
                got: v.dim(),
            });
        }
        for (m, c) in mean.iter_mut().zip(&v.components) {
            *m += c;
        }
    }
    let k = ordered.len() as f64;
    let components: Vec<f64> = query
        .components
        .iter()
        .zip(&mean)
        .map(|(&q, &sum)| alpha * q + beta * (sum / k))
        .collect();
    Ok(EmbeddingVector::new(query.id.clone(), components))
}

/// Dense pseudo-relevance feedback: first pass, Rocchio over the vectors of
/// the top `params.depth` passages, second pass, then max-passage. Returns
/// a document-level ranking truncated to `out_depth`.
pub fn dense_prf(
    store: &VectorStore,
    query: &EmbeddingVector,
    params: &RocchioParams,
    out_depth: usize,
) -> Result<Vec<ScoredItem>> {
    let first = dense_search(store, query, params.depth)?;
    let feedback: Vec<&EmbeddingVector> = first
        .iter()
        .filter_map(|item| store.vector(&item.item_id))
        .collect();
    let combined = rocchio_combine(query, &feedback, params.alpha, params.beta)?;
    let second = dense_search(store, &combined, store.len())?;
    let mut docs = max_passage(&second, |p| store.doc_of(p).map(String::from))?;
    docs.truncate(out_depth);
    Ok(docs)
}

/// Dense generative feedback: Rocchio over pre-computed generated-content
/// vectors, one search, then max-passage. No first pass touches the store.
pub fn dense_grf(
    store: &VectorStore,
    query: &EmbeddingVector,
    gen_vectors: &[EmbeddingVector],
    alpha: f64,
    beta: f64,
    out_depth: usize,
) -> Result<Vec<ScoredItem>> {
    if gen_vectors.is_empty() {
        return Err(Error::MissingGenerated(query.id.clone()));
    }
    let refs: Vec<&EmbeddingVector> = gen_vectors.iter().collect();
    let combined = rocchio_combine(query, &refs, alpha, beta)?;
    let passages = dense_search(store, &combined, store.len())?;
    let mut docs = max_passage(&passages, |p| store.doc_of(p).map(String::from))?;
    docs.truncate(out_depth);
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_from(vectors: Vec<(&str, &str, Vec<f64>)>) -> VectorStore {
        let map: BTreeMap<String, String> = vectors
            .iter()
            .map(|(pid, did, _)| (pid.to_string(), did.to_string()))
            .collect();
        let vecs = vectors
            .into_iter()
            .map(|(pid, _, v)| EmbeddingVector::new(pid, v))
            .collect();
        VectorStore::new(vecs, map).unwrap()
    }

    #[test]
    fn zero_query_scores_zero_and_orders_by_id() {
        let store = store_from(vec![
            ("p2", "d2", vec![1.0, 0.0]),
            ("p1", "d1", vec![0.0, 1.0]),
            ("p3", "d3", vec![0.5, 0.5]),
        ]);
        let out = dense_search(&store, &EmbeddingVector::new("q", vec![0.0, 0.0]), 10).unwrap();
        let ids: Vec<&str> = out.iter().map(|i| i.item_id.as_str()).collect();
        assert_eq!(ids, ["p1", "p2", "p3"]);
        assert!(out.iter().all(|i| i.score == 0.0));
    }

    #[test]
    fn hand_computed_dot_products() {
        let store = store_from(vec![
            ("p1", "d1", vec![1.0, 0.0]),
            ("p2", "d2", vec![3.0, 1.0]),
            ("p3", "d3", vec![2.0, 5.0]),
        ]);
        let out = dense_search(&store, &EmbeddingVector::new("q", vec![1.0, 0.0]), 10).unwrap();
        let got: Vec<(&str, f64)> = out.iter().map(|i| (i.item_id.as_str(), i.score)).collect();
        assert_eq!(got, [("p2", 3.0), ("p3", 2.0), ("p1", 1.0)]);
    }

    #[test]
    fn duplicated_vector_under_new_id_ties_adjacently() {
        let store = store_from(vec![
            ("pa", "d1", vec![2.0, 0.0]),
            ("pb", "d2", vec![2.0, 0.0]),
            ("pc", "d3", vec![1.0, 0.0]),
        ]);
        let out = dense_search(&store, &EmbeddingVector::new("q", vec![1.0, 0.0]), 10).unwrap();
        assert_eq!(out[0].item_id, "pa");
        assert_eq!(out[1].item_id, "pb");
        assert_eq!(out[0].score, out[1].score);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let store = store_from(vec![("p1", "d1", vec![1.0, 0.0])]);
        assert!(dense_search(&store, &EmbeddingVector::new("q", vec![1.0]), 10).is_err());
    }

    #[test]
    fn max_passage_takes_the_best_passage() {
        let items = vec![
            ScoredItem::new("d1#p0", 5.0),
            ScoredItem::new("d2#p0", 4.0),
            ScoredItem::new("d1#p1", 3.0),
            ScoredItem::new("d2#p1", 4.5),
        ];
        let out = max_passage(&items, |p| p.split('#').next().map(String::from)).unwrap();
        let got: Vec<(&str, f64)> = out.iter().map(|i| (i.item_id.as_str(), i.score)).collect();
        assert_eq!(got, [("d1", 5.0), ("d2", 4.5)]);
    }

    #[test]
    fn max_passage_is_identity_on_document_runs() {
        let items = vec![
            ScoredItem::new("d1", 5.0),
            ScoredItem::new("d2", 4.0),
            ScoredItem::new("d3", 3.0),
        ];
        let out = max_passage(&items, |p| Some(p.to_string())).unwrap();
        assert_eq!(out, items);
    }

    #[test]
    fn max_passage_unmapped_is_an_error() {
        let items = vec![ScoredItem::new("p1", 1.0)];
        assert!(max_passage(&items, |_| None).is_err());
    }

    #[test]
    fn rocchio_identity_when_beta_zero() {
        let q = EmbeddingVector::new("q", vec![0.3, -0.7, 2.0]);
        let f = EmbeddingVector::new("f", vec![9.0, 9.0, 9.0]);
        let out = rocchio_combine(&q, &[&f], 1.0, 0.0).unwrap();
        assert_eq!(out.components, q.components);
    }

    #[test]
    fn rocchio_hand_arithmetic() {
        // Q=(1,0), feedback {(0,1),(0,3)}, alpha=beta=0.5 -> (0.5, 1.0)
        let q = EmbeddingVector::new("q", vec![1.0, 0.0]);
        let f1 = EmbeddingVector::new("f1", vec![0.0, 1.0]);
        let f2 = EmbeddingVector::new("f2", vec![0.0, 3.0]);
        let out = rocchio_combine(&q, &[&f1, &f2], 0.5, 0.5).unwrap();
        assert_eq!(out.components, vec![0.5, 1.0]);
    }

    #[test]
    fn rocchio_mean_invariant_under_repetition() {
        let q = EmbeddingVector::new("q", vec![0.2, 0.4]);
        let f = EmbeddingVector::new("f", vec![0.1, 0.9]);
        let single = rocchio_combine(&q, &[&f], 0.4, 0.6).unwrap();
        for m in [2usize, 3, 5, 8] {
            let reps: Vec<&EmbeddingVector> = (0..m).map(|_| &f).collect();
            let out = rocchio_combine(&q, &reps, 0.4, 0.6).unwrap();
            for (a, b) in out.components.iter().zip(&single.components) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rocchio_empty_feedback_is_an_error() {
        let q = EmbeddingVector::new("q", vec![1.0]);
        assert!(matches!(
            rocchio_combine(&q, &[], 0.5, 0.5),
            Err(Error::EmptyFeedbackSet)
        ));
    }

    fn five_passage_store() -> VectorStore {
        store_from(vec![
            ("d1#p0", "d1", vec![1.0, 0.0]),
            ("d1#p1", "d1", vec![0.8, 0.1]),
            ("d2#p0", "d2", vec![0.0, 1.0]),
            ("d3#p0", "d3", vec![0.5, 0.5]),
            ("d4#p0", "d4", vec![-1.0, 0.2]),
        ])
    }

    #[test]
    fn prf_with_zero_beta_reproduces_first_pass_ranking() {
        let store = five_passage_store();
        let q = EmbeddingVector::new("q", vec![1.0, 0.2]);
        let baseline = {
            let passages = dense_search(&store, &q, store.len()).unwrap();
            max_passage(&passages, |p| store.doc_of(p).map(String::from)).unwrap()
        };
        let params = RocchioParams {
            alpha: 1.0,
            beta: 0.0,
            depth: 2,
        };
        let prf = dense_prf(&store, &q, &params, 100).unwrap();
        let base_ids: Vec<&str> = baseline.iter().map(|i| i.item_id.as_str()).collect();
        let prf_ids: Vec<&str> = prf.iter().map(|i| i.item_id.as_str()).collect();
        assert_eq!(base_ids, prf_ids);
    }

    #[test]
    fn prf_hand_trace_depth_two() {
        let store = five_passage_store();
        let q = EmbeddingVector::new("q", vec![1.0, 0.0]);
        // first pass: d1#p0 (1.0), d1#p1 (0.8) are the top 2 passages
        // mean feedback = (0.9, 0.05); combined = 0.5*q + 0.5*mean = (0.95, 0.025)
        // second pass scores:
        //   d1#p0 = 0.95, d1#p1 = 0.7625, d2#p0 = 0.025,
        //   d3#p0 = 0.4875, d4#p0 = -0.945
        // max-passage: d1=0.95, d3=0.4875, d2=0.025, d4=-0.945
        let params = RocchioParams {
            alpha: 0.5,
            beta: 0.5,
            depth: 2,
        };
        let out = dense_prf(&store, &q, &params, 100).unwrap();
        let want = [("d1", 0.95), ("d3", 0.4875), ("d2", 0.025), ("d4", -0.945)];
        assert_eq!(out.len(), want.len());
        for (got, (id, score)) in out.iter().zip(want) {
            assert_eq!(got.item_id, id);
            assert!((got.score - score).abs() < 1e-12, "{id}: {}", got.score);
        }
    }

    #[test]
    fn prf_depth_beyond_store_uses_all_passages() {
        let store = five_passage_store();
        let q = EmbeddingVector::new("q", vec![0.3, 0.3]);
        let a = dense_prf(
            &store,
            &q,
            &RocchioParams {
                alpha: 0.6,
                beta: 0.4,
                depth: 5,
            },
            100,
        )
        .unwrap();
        let b = dense_prf(
            &store,
            &q,
            &RocchioParams {
                alpha: 0.6,
                beta: 0.4,
                depth: 500,
            },
            100,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grf_with_query_vector_feedback_is_a_fixpoint() {
        let store = five_passage_store();
        let q = EmbeddingVector::new("q", vec![1.0, 0.2]);
        let gen = vec![EmbeddingVector::new("q#cot", q.components.clone())];
        let grf = dense_grf(&store, &q, &gen, 0.5, 0.5, 100).unwrap();
        let baseline = {
            let passages = dense_search(&store, &q, store.len()).unwrap();
            max_passage(&passages, |p| store.doc_of(p).map(String::from)).unwrap()
        };
        assert_eq!(grf, baseline);
    }

    #[test]
    fn grf_permutation_of_generated_vectors_is_bit_identical() {
        let store = five_passage_store();
        let q = EmbeddingVector::new("q", vec![0.7, 0.1]);
        let gen = vec![
            EmbeddingVector::new("q#cot", vec![0.3, 0.9]),
            EmbeddingVector::new("q#facts", vec![0.1, 0.2]),
            EmbeddingVector::new("q#news", vec![-0.5, 0.4]),
        ];
        let mut permuted = gen.clone();
        permuted.reverse();
        let a = dense_grf(&store, &q, &gen, 0.4, 0.6, 100).unwrap();
        let b = dense_grf(&store, &q, &permuted, 0.4, 0.6, 100).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grf_runs_exactly_one_search() {
        let store = five_passage_store();
        let q = EmbeddingVector::new("q", vec![1.0, 0.0]);
        let gen = vec![EmbeddingVector::new("q#cot", vec![0.2, 0.2])];
        assert_eq!(store.search_count(), 0);
        dense_grf(&store, &q, &gen, 0.5, 0.5, 100).unwrap();
        assert_eq!(store.search_count(), 1);
        dense_prf(
            &store,
            &q,
            &RocchioParams {
                alpha: 0.5,
                beta: 0.5,
                depth: 2,
            },
            100,
        )
        .unwrap();
        assert_eq!(store.search_count(), 3);
    }

    #[test]
    fn grf_without_generated_vectors_names_the_query() {
        let store = five_passage_store();
        let q = EmbeddingVector::new("q42", vec![1.0, 0.0]);
        let err = dense_grf(&store, &q, &[], 0.5, 0.5, 100).unwrap_err();
        assert!(err.to_string().contains("q42"), "{err}");
    }

    #[test]
    fn store_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let store = five_passage_store();
        store.save(dir.path()).unwrap();
        let loaded = VectorStore::load(dir.path()).unwrap();
        assert_eq!(loaded.len(), store.len());
        assert_eq!(loaded.dim(), 2);
        assert_eq!(loaded.doc_of("d1#p1"), Some("d1"));
    }
}
