//! Vector file formats for dense and learned sparse retrieval.
//!
//! Embeddings are produced by external encoders and ingested as files:
//!
//! * dense vectors: one `{"id", "vector": [..]}` object per line;
//! * sparse representations: one `{"id", "weights": {term: w}}` per line;
//! * generated-content vectors carry `query_id` and `gen_type` fields
//!   instead of an opaque id;
//! * a passage map (`passage_id<TAB>doc_id`) ties passage vectors back to
//!   documents for max-passage aggregation.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dense::EmbeddingVector;
use crate::error::{Error, Result};
use crate::learned::SparseRep;

#[derive(Serialize, Deserialize)]
struct DenseRecord {
    id: String,
    vector: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SparseRecord {
    id: String,
    weights: BTreeMap<String, f64>,
}

#[derive(Serialize, Deserialize)]
struct GenDenseRecord {
    query_id: String,
    gen_type: String,
    vector: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GenSparseRecord {
    query_id: String,
    gen_type: String,
    weights: BTreeMap<String, f64>,
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        records.push(record);
    }
    Ok(records)
}

fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    for r in records {
        writeln!(
            file,
            "{}",
            serde_json::to_string(r).expect("record serializes")
        )
        .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Read dense vectors, checking finite components and a consistent
/// dimension across the file.
pub fn read_dense_vectors(path: impl AsRef<Path>) -> Result<Vec<EmbeddingVector>> {
    let path = path.as_ref();
    let records: Vec<DenseRecord> = read_jsonl(path)?;
    let mut vectors = Vec::with_capacity(records.len());
    let mut dim: Option<usize> = None;
    for r in records {
        if r.vector.iter().any(|c| !c.is_finite()) {
            return Err(Error::Invalid(format!("non-finite component in {}", r.id)));
        }
        match dim {
            None => dim = Some(r.vector.len()),
            Some(d) if d != r.vector.len() => {
                return Err(Error::DimensionMismatch {
                    id: r.id,
                    expected: d,
                    got: r.vector.len(),
                })
            }
            _ => {}
        }
        vectors.push(EmbeddingVector::new(r.id, r.vector));
    }
    Ok(vectors)
}

pub fn write_dense_vectors(path: impl AsRef<Path>, vectors: &[EmbeddingVector]) -> Result<()> {
    let records: Vec<DenseRecord> = vectors
        .iter()
        .map(|v| DenseRecord {
            id: v.id.clone(),
            vector: v.components.clone(),
        })
        .collect();
    write_jsonl(path.as_ref(), &records)
}

/// Read generated-content dense vectors grouped by query, optionally
/// keeping one `gen_type`. Each vector's id becomes
/// `{query_id}#{gen_type}`.
pub fn read_gen_vectors(
    path: impl AsRef<Path>,
    gen_type: Option<&str>,
) -> Result<BTreeMap<String, Vec<EmbeddingVector>>> {
    let path = path.as_ref();
    let records: Vec<GenDenseRecord> = read_jsonl(path)?;
    let mut map: BTreeMap<String, Vec<EmbeddingVector>> = BTreeMap::new();
    for r in records {
        if gen_type.is_some_and(|t| t != r.gen_type) {
            continue;
        }
        if r.vector.iter().any(|c| !c.is_finite()) {
            return Err(Error::Invalid(format!(
                "non-finite component in generated vector for {}",
                r.query_id
            )));
        }
        let id = format!("{}#{}", r.query_id, r.gen_type);
        map.entry(r.query_id)
            .or_default()
            .push(EmbeddingVector::new(id, r.vector));
    }
    Ok(map)
}

pub fn write_gen_vectors(
    path: impl AsRef<Path>,
    vectors: &[(String, String, Vec<f64>)],
) -> Result<()> {
    let records: Vec<GenDenseRecord> = vectors
        .iter()
        .map(|(query_id, gen_type, vector)| GenDenseRecord {
            query_id: query_id.clone(),
            gen_type: gen_type.clone(),
            vector: vector.clone(),
        })
        .collect();
    write_jsonl(path.as_ref(), &records)
}

/// Read learned sparse representations.
pub fn read_sparse_vectors(path: impl AsRef<Path>) -> Result<Vec<SparseRep>> {
    let path = path.as_ref();
    let records: Vec<SparseRecord> = read_jsonl(path)?;
    records
        .into_iter()
        .map(|r| SparseRep::new(r.id, r.weights))
        .collect()
}

pub fn write_sparse_vectors(path: impl AsRef<Path>, reps: &[SparseRep]) -> Result<()> {
    let records: Vec<SparseRecord> = reps
        .iter()
        .map(|r| SparseRecord {
            id: r.id.clone(),
            weights: r.weights.clone(),
        })
        .collect();
    write_jsonl(path.as_ref(), &records)
}

/// Read generated-content sparse representations grouped by query,
/// optionally keeping one `gen_type`.
pub fn read_gen_sparse(
    path: impl AsRef<Path>,
    gen_type: Option<&str>,
) -> Result<BTreeMap<String, Vec<SparseRep>>> {
    let path = path.as_ref();
    let records: Vec<GenSparseRecord> = read_jsonl(path)?;
    let mut map: BTreeMap<String, Vec<SparseRep>> = BTreeMap::new();
    for r in records {
        if gen_type.is_some_and(|t| t != r.gen_type) {
            continue;
        }
        let id = format!("{}#{}", r.query_id, r.gen_type);
        map.entry(r.query_id)
            .or_default()
            .push(SparseRep::new(id, r.weights)?);
    }
    Ok(map)
}

pub fn write_gen_sparse(
    path: impl AsRef<Path>,
    reps: &[(String, String, BTreeMap<String, f64>)],
) -> Result<()> {
    let records: Vec<GenSparseRecord> = reps
        .iter()
        .map(|(query_id, gen_type, weights)| GenSparseRecord {
            query_id: query_id.clone(),
            gen_type: gen_type.clone(),
            weights: weights.clone(),
        })
        .collect();
    write_jsonl(path.as_ref(), &records)
}

/// Read a passage map: `passage_id<TAB>doc_id` per line.
pub fn read_passage_map(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (passage_id, doc_id) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, i + 1, "expected passage_id<TAB>doc_id"))?;
        if map
            .insert(passage_id.to_string(), doc_id.to_string())
            .is_some()
        {
            return Err(Error::parse(
                path,
                i + 1,
                format!("duplicate passage_id {passage_id}"),
            ));
        }
    }
    Ok(map)
}

pub fn write_passage_map(path: impl AsRef<Path>, map: &BTreeMap<String, String>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for (passage_id, doc_id) in map {
        out.push_str(&format!("{passage_id}\t{doc_id}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Manifest describing an on-disk vector store directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoreManifest {
    /// "dense" or "sparse".
    pub kind: String,
    /// Embedding dimension; absent for sparse stores.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    pub vectors_file: String,
    pub passage_map_file: String,
}

impl StoreManifest {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(&path, 1, e.to_string()))
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let path = dir.as_ref().join("manifest.json");
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}
