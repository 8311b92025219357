//! Corpus, topic and generated-document records and their file formats.
//!
//! Every format is line-delimited: corpora and generated documents are one
//! JSON object per line, topics are tab-separated. Parsed values are
//! immutable and safe to share across threads.

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Lines, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A corpus document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    pub contents: String,
}

/// A query topic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub query_id: String,
    pub text: String,
}

/// One piece of pre-generated text for a query, labelled by the kind of
/// content it holds (e.g. "cot", "facts", "news").
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedDocument {
    pub query_id: String,
    pub gen_type: String,
    pub text: String,
}

/// Streaming reader over a JSONL corpus. Yields documents in file order and
/// rejects duplicate `doc_id`s as they are encountered.
pub struct CorpusReader {
    path: PathBuf,
    lines: Lines<BufReader<File>>,
    line_no: usize,
    seen: HashSet<String>,
}

impl Iterator for CorpusReader {
    type Item = Result<Document>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let doc: Document = match serde_json::from_str(&line) {
                Ok(d) => d,
                Err(e) => return Some(Err(Error::parse(&self.path, self.line_no, e.to_string()))),
            };
            if doc.doc_id.is_empty() {
                return Some(Err(Error::parse(&self.path, self.line_no, "empty doc_id")));
            }
            if !self.seen.insert(doc.doc_id.clone()) {
                return Some(Err(Error::parse(
                    &self.path,
                    self.line_no,
                    format!("duplicate doc_id {} at line {}", doc.doc_id, self.line_no),
                )));
            }
            return Some(Ok(doc));
        }
    }
}

/// Open a corpus file for streaming. An empty file yields an empty stream.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<CorpusReader> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(CorpusReader {
        path: path.to_path_buf(),
        lines: BufReader::new(file).lines(),
        line_no: 0,
        seen: HashSet::new(),
    })
}

pub fn write_corpus<'a>(
    path: impl AsRef<Path>,
    docs: impl IntoIterator<Item = &'a Document>,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for doc in docs {
        out.push_str(&serde_json::to_string(doc).expect("document serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read topics from a `query_id<TAB>text` file.
pub fn read_topics(path: impl AsRef<Path>) -> Result<Vec<Topic>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut topics = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (query_id, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, i + 1, "expected query_id<TAB>text"))?;
        if query_id.is_empty() {
            return Err(Error::parse(path, i + 1, "empty query_id"));
        }
        if !seen.insert(query_id.to_string()) {
            return Err(Error::parse(
                path,
                i + 1,
                format!("duplicate query_id {query_id}"),
            ));
        }
        topics.push(Topic {
            query_id: query_id.to_string(),
            text: text.trim().to_string(),
        });
    }
    Ok(topics)
}

pub fn write_topics(path: impl AsRef<Path>, topics: &[Topic]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for t in topics {
        out.push_str(&format!("{}\t{}\n", t.query_id, t.text));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read generated documents from a JSONL file. A query may have any number
/// of records across several `gen_type`s.
pub fn read_generated(path: impl AsRef<Path>) -> Result<Vec<GeneratedDocument>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: GeneratedDocument =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        if doc.query_id.is_empty() {
            return Err(Error::parse(path, i + 1, "empty query_id"));
        }
        if doc.text.is_empty() {
            return Err(Error::parse(
                path,
                i + 1,
                format!("empty text for query {}", doc.query_id),
            ));
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_generated(path: impl AsRef<Path>, docs: &[GeneratedDocument]) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    for doc in docs {
        writeln!(
            file,
            "{}",
            serde_json::to_string(doc).expect("generated document serializes")
        )
        .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Group generated documents by query, optionally keeping one `gen_type`.
pub fn generated_by_query(
    docs: &[GeneratedDocument],
    gen_type: Option<&str>,
) -> BTreeMap<String, Vec<GeneratedDocument>> {
    let mut map: BTreeMap<String, Vec<GeneratedDocument>> = BTreeMap::new();
    for doc in docs {
        if gen_type.is_none_or(|t| t == doc.gen_type) {
            map.entry(doc.query_id.clone())
                .or_default()
                .push(doc.clone());
        }
    }
    map
}

/// Topics with no generated content, in topic order. Used to fail fast
/// before any retrieval starts.
pub fn missing_generated(
    topics: &[Topic],
    by_query: &BTreeMap<String, Vec<GeneratedDocument>>,
) -> Vec<String> {
    topics
        .iter()
        .filter(|t| !by_query.contains_key(&t.query_id))
        .map(|t| t.query_id.clone())
        .collect()
}
