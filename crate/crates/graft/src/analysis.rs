//! Text analysis: tokenization for sparse indexing and sentence-window
//! passage sharding for vector ingestion.
//!
//! The token pipeline lowercases, splits on maximal runs of letters and
//! digits, removes stopwords, then Porter-stems. Stopword filtering happens
//! before stemming so that surface forms are matched against the list.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::porter;

/// The classic 33-word English stopword list.
pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "if", "in", "into", "is", "it",
    "no", "not", "of", "on", "or", "such", "that", "the", "their", "then", "there", "these",
    "they", "this", "to", "was", "will", "with",
];

/// Default passage window, in sentences.
pub const DEFAULT_WINDOW: usize = 10;
/// Default passage stride, in sentences.
pub const DEFAULT_STRIDE: usize = 5;

/// Analyzer configuration shared by indexing and query processing.
///
/// Two pipelines are interchangeable iff their stopword sets are equal; the
/// token pattern and stemmer are fixed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenPipeline {
    stopwords: BTreeSet<String>,
}

impl Default for TokenPipeline {
    fn default() -> Self {
        Self::new(DEFAULT_STOPWORDS.iter().map(|w| w.to_string()))
    }
}

impl TokenPipeline {
    pub fn new(stopwords: impl IntoIterator<Item = String>) -> Self {
        TokenPipeline {
            stopwords: stopwords.into_iter().map(|w| w.to_lowercase()).collect(),
        }
    }

    /// Load a stopword list from a file with one word per line. Blank lines
    /// are ignored.
    pub fn from_stopword_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from),
        ))
    }

    pub fn stopwords(&self) -> &BTreeSet<String> {
        &self.stopwords
    }

    /// Analyze text into index/query terms. Deterministic and order
    /// preserving; empty input yields an empty sequence.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let mut terms = Vec::new();
        let mut current = String::new();
        for ch in text.chars() {
            if ch.is_alphanumeric() {
                for lc in ch.to_lowercase() {
                    current.push(lc);
                }
            } else if !current.is_empty() {
                self.emit(&mut terms, &current);
                current.clear();
            }
        }
        if !current.is_empty() {
            self.emit(&mut terms, &current);
        }
        terms
    }

    fn emit(&self, terms: &mut Vec<String>, token: &str) {
        if !self.stopwords.contains(token) {
            let stemmed = porter::stem(token);
            if !stemmed.is_empty() {
                terms.push(stemmed);
            }
        }
    }
}

/// A sentence-window slice of a document, carrying the document title.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub passage_id: String,
    pub doc_id: String,
    pub text: String,
}

/// Split text into sentences at `.`, `!` or `?` followed by whitespace.
/// The end of the text always closes the last sentence. This is a simple
/// punctuation rule and is documented as approximate.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(ch) = chars.next() {
        current.push(ch);
        if matches!(ch, '.' | '!' | '?') && chars.peek().is_none_or(|c| c.is_whitespace()) {
            push_sentence(&mut sentences, &mut current);
        }
    }
    push_sentence(&mut sentences, &mut current);
    sentences
}

fn push_sentence(sentences: &mut Vec<String>, current: &mut String) {
    let trimmed = current.trim();
    if !trimmed.is_empty() {
        sentences.push(trimmed.to_string());
    }
    current.clear();
}

/// Shard a document into overlapping sentence windows.
///
/// Windows start at every multiple of `stride` below the sentence count, so
/// consecutive passages overlap by `window - stride` sentences and the final
/// window may be partial. The document title is prepended to every passage
/// and `passage_id` is `{doc_id}#p{window_index}`.
pub fn shard_passages(doc: &Document, window: usize, stride: usize) -> Vec<Passage> {
    assert!(window >= 1 && stride >= 1, "window and stride must be >= 1");
    let sentences = split_sentences(&doc.contents);
    let title = doc.title.trim();
    let mut passages = Vec::new();
    let mut offset = 0;
    while offset < sentences.len() {
        let end = (offset + window).min(sentences.len());
        let body = sentences[offset..end].join(" ");
        let text = if title.is_empty() {
            body
        } else {
            format!("{title} {body}")
        };
        passages.push(Passage {
            passage_id: format!("{}#p{}", doc.doc_id, offset / stride),
            doc_id: doc.doc_id.clone(),
            text,
        });
        offset += stride;
    }
    passages
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, title: &str, n_sentences: usize) -> Document {
        let contents = (1..=n_sentences)
            .map(|i| format!("Sentence number {i}."))
            .collect::<Vec<_>>()
            .join(" ");
        Document {
            doc_id: id.to_string(),
            title: title.to_string(),
            contents,
        }
    }

    #[test]
    fn empty_text_yields_no_terms() {
        assert!(TokenPipeline::default().tokenize("").is_empty());
    }

    #[test]
    fn stopwords_removed_case_insensitively() {
        let p = TokenPipeline::default();
        assert!(p.tokenize("the The THE").is_empty());
    }

    #[test]
    fn stemming_applied_after_stopword_removal() {
        let p = TokenPipeline::default();
        assert_eq!(p.tokenize("running runner runs"), ["run", "runner", "run"]);
    }

    #[test]
    fn numeric_tokens_kept() {
        let p = TokenPipeline::default();
        assert_eq!(p.tokenize("events of 2011"), ["event", "2011"]);
    }

    #[test]
    fn token_pattern_splits_on_punctuation() {
        let p = TokenPipeline::default();
        assert_eq!(p.tokenize("state-of-the-art IR!"), ["state", "art", "ir"]);
    }

    #[test]
    fn custom_stopword_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stop.txt");
        std::fs::write(&path, "alpha\n\nBETA\n").unwrap();
        let p = TokenPipeline::from_stopword_file(&path).unwrap();
        assert_eq!(p.stopwords().len(), 2);
        assert_eq!(p.tokenize("alpha beta gamma"), ["gamma"]);
    }

    #[test]
    fn sentence_split_requires_following_whitespace() {
        let s = split_sentences("Version 1.5 shipped. It works! Done?");
        assert_eq!(s, ["Version 1.5 shipped.", "It works!", "Done?"]);
    }

    #[test]
    fn trailing_text_is_a_sentence() {
        assert_eq!(split_sentences("no terminator"), ["no terminator"]);
    }

    #[test]
    fn ten_sentences_make_two_windows() {
        let d = doc("d1", "", 10);
        let p = shard_passages(&d, 10, 5);
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].passage_id, "d1#p0");
        assert_eq!(p[1].passage_id, "d1#p1");
        // trailing window holds sentences 6..=10
        assert!(p[1].text.starts_with("Sentence number 6."));
        assert!(p[1].text.ends_with("Sentence number 10."));
    }

    #[test]
    fn three_sentences_make_one_window() {
        let d = doc("d1", "", 3);
        let p = shard_passages(&d, 10, 5);
        assert_eq!(p.len(), 1);
        assert!(p[0].text.contains("Sentence number 3."));
    }

    #[test]
    fn fifteen_sentences_make_windows_at_stride_offsets() {
        let d = doc("d1", "", 15);
        let p = shard_passages(&d, 10, 5);
        assert_eq!(p.len(), 3);
        assert!(p[0].text.starts_with("Sentence number 1."));
        assert!(p[1].text.starts_with("Sentence number 6."));
        assert!(p[2].text.starts_with("Sentence number 11."));
    }

    #[test]
    fn title_prepended_to_every_passage() {
        let d = doc("d1", "A Title", 12);
        for p in shard_passages(&d, 10, 5) {
            assert!(p.text.starts_with("A Title "), "{}", p.text);
        }
    }

    #[test]
    fn empty_document_yields_no_passages() {
        let d = Document {
            doc_id: "d1".into(),
            title: "t".into(),
            contents: "   ".into(),
        };
        assert!(shard_passages(&d, 10, 5).is_empty());
    }

    #[test]
    fn every_sentence_covered_and_offsets_are_stride_multiples() {
        for n in 1..40 {
            let d = doc("d", "", n);
            let shards = shard_passages(&d, 10, 5);
            assert_eq!(shards.len(), n.div_ceil(5));
            for i in 1..=n {
                let probe = format!("Sentence number {i}.");
                assert!(
                    shards.iter().any(|p| p.text.contains(&probe)),
                    "sentence {i} of {n} not covered"
                );
            }
            // full windows hold exactly `window` sentences
            for (w, p) in shards.iter().enumerate() {
                let offset = w * 5;
                if offset + 10 <= n {
                    assert_eq!(p.text.matches('.').count(), 10);
                }
            }
        }
    }
}
