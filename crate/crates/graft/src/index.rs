//! Inverted index construction and on-disk persistence.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::TokenPipeline;
use crate::corpus::Document;
use crate::error::{Error, Result};

/// One posting: document ordinal and term frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Immutable inverted index over a corpus, with forward document vectors
/// for feedback models. Postings are sorted by document ordinal; corpus
/// statistics are fixed at build time.
#[derive(Debug, Serialize, Deserialize)]
pub struct InvertedIndex {
    analyzer: TokenPipeline,
    doc_ids: Vec<String>,
    doc_lens: Vec<u32>,
    postings: BTreeMap<String, Vec<Posting>>,
    total_len: u64,
    #[serde(skip)]
    doc_ord: HashMap<String, u32>,
    #[serde(skip)]
    forward: Vec<Vec<(u32, u32)>>,
    #[serde(skip)]
    terms: Vec<String>,
}

/// Summary written next to the index so tools can check compatibility
/// without loading postings.
#[derive(Debug, Serialize, Deserialize)]
pub struct IndexManifest {
    pub num_docs: usize,
    pub num_terms: usize,
    pub avgdl: f64,
    pub analyzer: TokenPipeline,
}

const INDEX_FILE: &str = "index.json";
const MANIFEST_FILE: &str = "manifest.json";

/// Build an index from a document stream. Fails on an empty corpus and on
/// duplicate document ids; deterministic given corpus order.
pub fn build_index(
    docs: impl IntoIterator<Item = Result<Document>>,
    analyzer: TokenPipeline,
) -> Result<InvertedIndex> {
    let mut index = InvertedIndex {
        analyzer,
        doc_ids: Vec::new(),
        doc_lens: Vec::new(),
        postings: BTreeMap::new(),
        total_len: 0,
        doc_ord: HashMap::new(),
        forward: Vec::new(),
        terms: Vec::new(),
    };
    for doc in docs {
        let doc = doc?;
        let ord = index.doc_ids.len() as u32;
        if index.doc_ord.insert(doc.doc_id.clone(), ord).is_some() {
            return Err(Error::Invalid(format!("duplicate doc_id {}", doc.doc_id)));
        }
        let mut text = String::with_capacity(doc.title.len() + doc.contents.len() + 1);
        text.push_str(&doc.title);
        text.push(' ');
        text.push_str(&doc.contents);
        let terms = index.analyzer.tokenize(&text);
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for t in terms {
            *counts.entry(t).or_insert(0) += 1;
        }
        let len: u32 = counts.values().sum();
        index.doc_ids.push(doc.doc_id);
        index.doc_lens.push(len);
        index.total_len += u64::from(len);
        for (term, tf) in counts {
            index
                .postings
                .entry(term)
                .or_default()
                .push(Posting { doc: ord, tf });
        }
    }
    if index.doc_ids.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    index.rebuild_derived();
    Ok(index)
}

impl InvertedIndex {
    fn rebuild_derived(&mut self) {
        self.doc_ord = self
            .doc_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
        self.terms = self.postings.keys().cloned().collect();
        self.forward = vec![Vec::new(); self.doc_ids.len()];
        for (term_idx, postings) in self.postings.values().enumerate() {
            for p in postings {
                self.forward[p.doc as usize].push((term_idx as u32, p.tf));
            }
        }
    }

    pub fn analyzer(&self) -> &TokenPipeline {
        &self.analyzer
    }

    /// Error unless `other` matches the analyzer this index was built with.
    pub fn verify_analyzer(&self, other: &TokenPipeline) -> Result<()> {
        if &self.analyzer == other {
            Ok(())
        } else {
            Err(Error::AnalyzerMismatch(
                "index was built with a different stopword list".to_string(),
            ))
        }
    }

    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.total_len as f64 / self.doc_ids.len() as f64
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map(Vec::len).unwrap_or(0)
    }

    pub fn postings(&self, term: &str) -> Option<&[Posting]> {
        self.postings.get(term).map(Vec::as_slice)
    }

    pub fn doc_id(&self, ord: u32) -> &str {
        &self.doc_ids[ord as usize]
    }

    pub fn doc_ord(&self, doc_id: &str) -> Option<u32> {
        self.doc_ord.get(doc_id).copied()
    }

    pub fn doc_len(&self, ord: u32) -> u32 {
        self.doc_lens[ord as usize]
    }

    pub fn num_terms(&self) -> usize {
        self.postings.len()
    }

    /// Terms of one document as (term, tf) pairs in ascending term order.
    pub fn doc_terms(&self, ord: u32) -> impl Iterator<Item = (&str, u32)> {
        self.forward[ord as usize]
            .iter()
            .map(|&(term_idx, tf)| (self.terms[term_idx as usize].as_str(), tf))
    }

    pub fn manifest(&self) -> IndexManifest {
        IndexManifest {
            num_docs: self.num_docs(),
            num_terms: self.num_terms(),
            avgdl: self.avgdl(),
            analyzer: self.analyzer.clone(),
        }
    }

    /// Persist to a directory as `index.json` plus `manifest.json`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let index_path = dir.join(INDEX_FILE);
        let data = serde_json::to_string(self).expect("index serializes");
        fs::write(&index_path, data).map_err(|e| Error::io(&index_path, e))?;
        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest = serde_json::to_string_pretty(&self.manifest()).expect("manifest serializes");
        fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<InvertedIndex> {
        let path = dir.as_ref().join(INDEX_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut index: InvertedIndex =
            serde_json::from_str(&text).map_err(|e| Error::parse(&path, 1, e.to_string()))?;
        index.rebuild_derived();
        Ok(index)
    }
}

/// Read only the manifest of an index directory.
pub fn read_index_manifest(dir: impl AsRef<Path>) -> Result<IndexManifest> {
    let path = dir.as_ref().join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(&path, 1, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, contents: &str) -> Result<Document> {
        Ok(Document {
            doc_id: id.to_string(),
            title: String::new(),
            contents: contents.to_string(),
        })
    }

    #[test]
    fn single_doc_statistics() {
        // "a b a": df(a)=1, tf(a)=2, n=1, avgdl=3
        let index = build_index([doc("d1", "a b a")], TokenPipeline::new([])).unwrap();
        assert_eq!(index.num_docs(), 1);
        assert_eq!(index.avgdl(), 3.0);
        assert_eq!(index.doc_freq("a"), 1);
        assert_eq!(index.postings("a").unwrap()[0].tf, 2);
        assert_eq!(index.postings("b").unwrap()[0].tf, 1);
        assert_eq!(index.doc_len(0), 3);
    }

    #[test]
    fn term_in_every_doc_saturates_df() {
        let index = build_index(
            [doc("d1", "x y"), doc("d2", "x z"), doc("d3", "x")],
            TokenPipeline::new([]),
        )
        .unwrap();
        assert_eq!(index.doc_freq("x"), index.num_docs());
    }

    #[test]
    fn duplicate_doc_id_rejected() {
        let err =
            build_index([doc("d1", "a"), doc("d1", "b")], TokenPipeline::new([])).unwrap_err();
        assert!(err.to_string().contains("duplicate doc_id d1"), "{err}");
    }

    #[test]
    fn empty_corpus_rejected() {
        let docs: Vec<Result<Document>> = Vec::new();
        assert!(matches!(
            build_index(docs, TokenPipeline::new([])),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn statistics_invariants_hold() {
        let index = build_index(
            [doc("d1", "a b c a"), doc("d2", "b d"), doc("d3", "e")],
            TokenPipeline::new([]),
        )
        .unwrap();
        // df equals postings length, avgdl equals mean length
        for term in ["a", "b", "c", "d", "e"] {
            assert_eq!(index.doc_freq(term), index.postings(term).unwrap().len());
        }
        let total: u32 = (0..3).map(|i| index.doc_len(i)).sum();
        assert_eq!(index.avgdl(), f64::from(total) / 3.0);
        // postings sorted by ordinal
        let postings = index.postings("b").unwrap();
        assert!(postings.windows(2).all(|w| w[0].doc < w[1].doc));
        // forward index consistent with postings
        let forward: Vec<(&str, u32)> = index.doc_terms(0).collect();
        assert_eq!(forward, [("a", 2), ("b", 1), ("c", 1)]);
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let index = build_index(
            [doc("d1", "alpha beta"), doc("d2", "beta gamma")],
            TokenPipeline::default(),
        )
        .unwrap();
        index.save(dir.path()).unwrap();
        let loaded = InvertedIndex::load(dir.path()).unwrap();
        assert_eq!(loaded.num_docs(), 2);
        assert_eq!(loaded.avgdl(), index.avgdl());
        assert_eq!(loaded.doc_freq("beta"), 2);
        assert_eq!(loaded.doc_ord("d2"), Some(1));
        let manifest = read_index_manifest(dir.path()).unwrap();
        assert_eq!(manifest.num_docs, 2);
        assert!(loaded.verify_analyzer(&TokenPipeline::default()).is_ok());
        assert!(loaded.verify_analyzer(&TokenPipeline::new([])).is_err());
    }
}
