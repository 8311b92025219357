//! Deterministic synthetic benchmark for tests and demos.
//!
//! The corpus is constructed so the two feedback families retrieve
//! disjoint relevant documents, at toy scale:
//!
//! * `dNNa` contains the query terms (grade 2) and is found by a plain
//!   first pass;
//! * `dNNs` also matches the query and bridges to extra vocabulary, but is
//!   judged non-relevant — it exists to seed pseudo-relevance feedback;
//! * `dNNb` (grade 1) shares terms only with the bridge document, so only
//!   pseudo-relevance expansion reaches it;
//! * `dNNc` (grade 1) shares terms only with the generated text, so only
//!   generative expansion reaches it.
//!
//! Everything is derived structurally from the query number; no randomness
//! is involved, so repeated builds are byte-identical.

use std::collections::BTreeMap;
use std::path::Path;

use crate::analysis::{shard_passages, TokenPipeline, DEFAULT_STRIDE, DEFAULT_WINDOW};
use crate::corpus::{
    write_corpus, write_generated, write_topics, Document, GeneratedDocument, Topic,
};
use crate::dense::{EmbeddingVector, VectorStore};
use crate::error::{Error, Result};
use crate::folds::{write_folds, FoldSet};
use crate::learned::{SparseRep, SparseStore};
use crate::qrels::{write_qrels, Qrels};
use crate::vectors::{write_dense_vectors, write_gen_sparse, write_gen_vectors};

/// A complete in-memory fixture.
pub struct SynthFixture {
    pub documents: Vec<Document>,
    pub topics: Vec<Topic>,
    pub qrels: Qrels,
    pub generated: Vec<GeneratedDocument>,
    pub folds: FoldSet,
}

/// Build a fixture with `num_queries` topics (4 documents each) plus
/// `num_filler` unjudged filler documents.
pub fn build(num_queries: usize, num_filler: usize) -> SynthFixture {
    let mut documents = Vec::new();
    let mut topics = Vec::new();
    let mut qrels = Qrels::new();
    let mut generated = Vec::new();

    for i in 1..=num_queries {
        let qid = format!("q{i:02}");
        let alpha = format!("alpha{i:02}");
        let beta = format!("beta{i:02}");
        let bridge = format!("bridge{i:02}");
        let nova = format!("nova{i:02}");

        topics.push(Topic {
            query_id: qid.clone(),
            text: format!("{alpha} {beta}"),
        });

        // direct hit: twelve sentences so passage sharding yields windows
        let a_sentences: Vec<String> = (1..=12)
            .map(|s| format!("{alpha} {beta} junka{i:02} s{s}."))
            .collect();
        documents.push(Document {
            doc_id: format!("d{i:02}a"),
            title: String::new(),
            contents: a_sentences.join(" "),
        });

        // feedback seed: matches the query and introduces the bridge term
        documents.push(Document {
            doc_id: format!("d{i:02}s"),
            title: String::new(),
            contents: format!("{alpha} {beta} {bridge}. {bridge} junks{i:02}."),
        });

        // reachable only through the bridge term
        documents.push(Document {
            doc_id: format!("d{i:02}b"),
            title: String::new(),
            contents: format!("{bridge} {bridge} junkb{i:02}. {bridge} junkb{i:02}x."),
        });

        // reachable only through the generated vocabulary
        documents.push(Document {
            doc_id: format!("d{i:02}c"),
            title: String::new(),
            contents: format!("{nova} {nova} junkc{i:02}. {nova} junkc{i:02}x."),
        });

        qrels.add(&qid, format!("d{i:02}a"), 2);
        qrels.add(&qid, format!("d{i:02}s"), 0);
        qrels.add(&qid, format!("d{i:02}b"), 1);
        qrels.add(&qid, format!("d{i:02}c"), 1);

        generated.push(GeneratedDocument {
            query_id: qid.clone(),
            gen_type: "cot".to_string(),
            text: format!("{alpha} {beta} {nova}."),
        });
        generated.push(GeneratedDocument {
            query_id: qid.clone(),
            gen_type: "facts".to_string(),
            text: format!("{nova} {nova} {beta}."),
        });
    }

    for n in 1..=num_filler {
        documents.push(Document {
            doc_id: format!("d{n:02}f"),
            title: String::new(),
            contents: format!("junkf{n:02} junkf{n:02}x. junkf{n:02}y."),
        });
    }

    let half = num_queries.div_ceil(2);
    let folds = FoldSet::new([
        (
            "f1".to_string(),
            topics
                .iter()
                .take(half)
                .map(|t| t.query_id.clone())
                .collect(),
        ),
        (
            "f2".to_string(),
            topics
                .iter()
                .skip(half)
                .map(|t| t.query_id.clone())
                .collect(),
        ),
    ])
    .expect("halves are disjoint");

    SynthFixture {
        documents,
        topics,
        qrels,
        generated,
        folds,
    }
}

/// Hash-bucket embedding of analyzed text: each term adds one to a
/// dimension chosen by its hash. Deterministic across runs and platforms.
pub fn embed(text: &str, dim: usize, analyzer: &TokenPipeline) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for term in analyzer.tokenize(text) {
        v[(fnv(&term) % dim as u64) as usize] += 1.0;
    }
    v
}

/// Term-frequency sparse representation of analyzed text.
pub fn sparse_rep_of(text: &str, analyzer: &TokenPipeline) -> BTreeMap<String, f64> {
    let mut weights: BTreeMap<String, f64> = BTreeMap::new();
    for term in analyzer.tokenize(text) {
        *weights.entry(term).or_insert(0.0) += 1.0;
    }
    weights
}

fn fnv(s: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

impl SynthFixture {
    /// Write the text-side files: corpus.jsonl, topics.tsv, qrels.txt,
    /// gen_docs.jsonl and folds.json.
    pub fn write_sparse_fixture(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_corpus(dir.join("corpus.jsonl"), &self.documents)?;
        write_topics(dir.join("topics.tsv"), &self.topics)?;
        write_qrels(&self.qrels, dir.join("qrels.txt"))?;
        write_generated(dir.join("gen_docs.jsonl"), &self.generated)?;
        write_folds(&self.folds, dir.join("folds.json"))
    }

    /// Shard documents into passages and write a dense store plus query and
    /// generated vectors under `dir` (`store/`, `query_vectors.jsonl`,
    /// `gen_vectors.jsonl`).
    pub fn write_dense_fixture(&self, dir: impl AsRef<Path>, dim: usize) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let analyzer = TokenPipeline::default();

        let mut vectors = Vec::new();
        let mut map = BTreeMap::new();
        for doc in &self.documents {
            for passage in shard_passages(doc, DEFAULT_WINDOW, DEFAULT_STRIDE) {
                vectors.push(EmbeddingVector::new(
                    passage.passage_id.clone(),
                    embed(&passage.text, dim, &analyzer),
                ));
                map.insert(passage.passage_id, passage.doc_id);
            }
        }
        let store = VectorStore::new(vectors, map)?;
        store.save(dir.join("store"))?;

        let query_vectors: Vec<EmbeddingVector> = self
            .topics
            .iter()
            .map(|t| EmbeddingVector::new(t.query_id.clone(), embed(&t.text, dim, &analyzer)))
            .collect();
        write_dense_vectors(dir.join("query_vectors.jsonl"), &query_vectors)?;

        let gen: Vec<(String, String, Vec<f64>)> = self
            .generated
            .iter()
            .map(|g| {
                (
                    g.query_id.clone(),
                    g.gen_type.clone(),
                    embed(&g.text, dim, &analyzer),
                )
            })
            .collect();
        write_gen_vectors(dir.join("gen_vectors.jsonl"), &gen)
    }

    /// Shard documents into passages and write a learned sparse store plus
    /// query and generated representations under `dir`.
    pub fn write_learned_fixture(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let analyzer = TokenPipeline::default();

        let mut reps = Vec::new();
        let mut map = BTreeMap::new();
        for doc in &self.documents {
            for passage in shard_passages(doc, DEFAULT_WINDOW, DEFAULT_STRIDE) {
                reps.push(SparseRep::new(
                    passage.passage_id.clone(),
                    sparse_rep_of(&passage.text, &analyzer),
                )?);
                map.insert(passage.passage_id, passage.doc_id);
            }
        }
        let store = SparseStore::new(reps, map)?;
        store.save(dir.join("store"))?;

        let query_reps: Vec<SparseRep> = self
            .topics
            .iter()
            .map(|t| SparseRep::new(t.query_id.clone(), sparse_rep_of(&t.text, &analyzer)))
            .collect::<Result<_>>()?;
        crate::vectors::write_sparse_vectors(dir.join("query_vectors.jsonl"), &query_reps)?;

        let gen: Vec<(String, String, BTreeMap<String, f64>)> = self
            .generated
            .iter()
            .map(|g| {
                (
                    g.query_id.clone(),
                    g.gen_type.clone(),
                    sparse_rep_of(&g.text, &analyzer),
                )
            })
            .collect();
        write_gen_sparse(dir.join("gen_vectors.jsonl"), &gen)
    }
}
