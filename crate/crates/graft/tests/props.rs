//! Property tests for the retrieval invariants.

use std::collections::BTreeMap;

use proptest::prelude::*;

use graft::analysis::TokenPipeline;
use graft::bm25::{bm25_search, idf, Bm25Params, WeightedQuery};
use graft::corpus::Document;
use graft::index::{build_index, InvertedIndex};
use graft::run::{read_run, write_run, RankedRun, ScoredItem};

fn term() -> impl Strategy<Value = String> {
    // a tiny vocabulary of stem-stable terms keeps corpora overlapping
    prop::sample::select(vec![
        "alpha", "beta", "gamma", "delta", "kappa", "sigma", "omega", "zeta",
    ])
    .prop_map(String::from)
}

fn document(id: usize) -> impl Strategy<Value = Document> {
    prop::collection::vec(term(), 1..12).prop_map(move |terms| Document {
        doc_id: format!("d{id:03}"),
        title: String::new(),
        contents: terms.join(" "),
    })
}

fn corpus() -> impl Strategy<Value = Vec<Document>> {
    (1usize..12).prop_flat_map(|n| {
        (0..n)
            .map(document)
            .collect::<Vec<_>>()
            .prop_map(|docs| docs)
    })
}

fn weighted_query() -> impl Strategy<Value = WeightedQuery> {
    prop::collection::btree_map(term(), 0.01f64..4.0, 1..5)
        .prop_map(|weights| WeightedQuery::new("q", weights))
}

fn index_of(docs: &[Document]) -> InvertedIndex {
    build_index(docs.iter().cloned().map(Ok), TokenPipeline::new([])).unwrap()
}

/// Exhaustive reference scorer working from re-tokenized documents, fully
/// independent of the postings machinery.
fn oracle_scores(docs: &[Document], query: &WeightedQuery, params: Bm25Params) -> Vec<ScoredItem> {
    let analyzer = TokenPipeline::new([]);
    let tokenized: Vec<(String, Vec<String>)> = docs
        .iter()
        .map(|d| (d.doc_id.clone(), analyzer.tokenize(&d.contents)))
        .collect();
    let n = docs.len();
    let avgdl = tokenized.iter().map(|(_, t)| t.len() as f64).sum::<f64>() / n as f64;
    let mut out = Vec::new();
    for (doc_id, terms) in &tokenized {
        let mut score = 0.0;
        for (term, &weight) in &query.weights {
            if weight == 0.0 {
                continue;
            }
            let tf = terms.iter().filter(|t| *t == term).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let df = tokenized
                .iter()
                .filter(|(_, t)| t.iter().any(|x| x == term))
                .count();
            let idf = idf(n, df);
            let norm = 1.0 - params.b + params.b * terms.len() as f64 / avgdl;
            score += weight * idf * tf * (params.k1 + 1.0) / (tf + params.k1 * norm);
        }
        if score > 0.0 {
            out.push(ScoredItem::new(doc_id.clone(), score));
        }
    }
    out.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.item_id.cmp(&b.item_id))
    });
    out
}

proptest! {
    #[test]
    fn bm25_matches_exhaustive_oracle(docs in corpus(), query in weighted_query()) {
        let index = index_of(&docs);
        let params = Bm25Params::default();
        let got = bm25_search(&index, &query, params, docs.len());
        let want = oracle_scores(&docs, &query, params);
        prop_assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            prop_assert_eq!(&g.item_id, &w.item_id);
            prop_assert!((g.score - w.score).abs() < 1e-9);
        }
    }

    #[test]
    fn bm25_power_of_two_scaling_is_exact(docs in corpus(), query in weighted_query(), exp in -2i32..3) {
        let c = 2f64.powi(exp);
        let index = index_of(&docs);
        let params = Bm25Params::default();
        let scaled = WeightedQuery::new(
            "q",
            query.weights.iter().map(|(t, w)| (t.clone(), c * w)).collect::<BTreeMap<_, _>>(),
        );
        let base = bm25_search(&index, &query, params, docs.len());
        let got = bm25_search(&index, &scaled, params, docs.len());
        prop_assert_eq!(base.len(), got.len());
        for (a, b) in base.iter().zip(&got) {
            prop_assert_eq!(&a.item_id, &b.item_id);
            prop_assert_eq!(c * a.score, b.score);
        }
    }

    #[test]
    fn run_files_roundtrip_through_disk(
        scores in prop::collection::btree_map(
            "q[0-9]{2}",
            prop::collection::btree_map("d[0-9]{3}", 0u32..2_000_000, 1..20),
            1..6,
        )
    ) {
        // six-decimal scores so serialization is lossless
        let run = RankedRun::from_scores(
            "prop",
            scores.into_iter().map(|(q, docs)| {
                (
                    q,
                    docs.into_iter()
                        .map(|(d, s)| ScoredItem::new(d, f64::from(s) / 1e6))
                        .collect::<Vec<_>>(),
                )
            }),
            1000,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.txt");
        write_run(&run, &path).unwrap();
        let back = read_run(&path).unwrap();
        prop_assert_eq!(&back, &run);
        // and a second write is byte-identical
        let path2 = dir.path().join("run2.txt");
        write_run(&back, &path2).unwrap();
        prop_assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn stemmer_is_stable_on_fixture_vocabulary(i in 1usize..90) {
        // idempotence on the synthetic vocabulary used across the tests
        for prefix in ["alpha", "beta", "bridge", "nova", "junka", "junkf"] {
            let term = format!("{prefix}{i:02}");
            let once = graft::porter::stem(&term);
            prop_assert_eq!(&graft::porter::stem(&once), &once);
        }
    }
}
