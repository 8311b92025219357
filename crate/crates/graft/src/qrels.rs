//! Relevance judgments in TREC 4-column format.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Graded judgments: per query, a map from document id to a grade >= 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, query_id: impl Into<String>, doc_id: impl Into<String>, grade: u32) {
        self.judgments
            .entry(query_id.into())
            .or_default()
            .insert(doc_id.into(), grade);
    }

    pub fn grades(&self, query_id: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgments.get(query_id)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn num_queries(&self) -> usize {
        self.judgments.len()
    }

    /// Number of documents with grade >= 1 for a query.
    pub fn num_relevant(&self, query_id: &str) -> usize {
        self.judgments
            .get(query_id)
            .map(|g| g.values().filter(|&&grade| grade >= 1).count())
            .unwrap_or(0)
    }
}

/// Read TREC qrels: `query_id iteration doc_id grade` per line.
pub fn read_qrels(path: impl AsRef<Path>) -> Result<Qrels> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut qrels = Qrels::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected 4 columns, got {}", cols.len()),
            ));
        }
        let grade: i64 = cols[3]
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("bad grade {}", cols[3])))?;
        if grade < 0 {
            return Err(Error::parse(
                path,
                i + 1,
                format!("negative grade {grade} for {} {}", cols[0], cols[2]),
            ));
        }
        let per_query = qrels.judgments.entry(cols[0].to_string()).or_default();
        if per_query
            .insert(cols[2].to_string(), grade as u32)
            .is_some()
        {
            return Err(Error::parse(
                path,
                i + 1,
                format!("duplicate judgment for {} {}", cols[0], cols[2]),
            ));
        }
    }
    Ok(qrels)
}

/// Write qrels in TREC 4-column format, sorted by query then doc id.
pub fn write_qrels(qrels: &Qrels, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for (query_id, grades) in &qrels.judgments {
        for (doc_id, grade) in grades {
            out.push_str(&format!("{query_id} 0 {doc_id} {grade}\n"));
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
