//! TOML configuration for the tune and experiment commands, plus loading
//! of paradigm inputs into memory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use graft::analysis::TokenPipeline;
use graft::corpus::{generated_by_query, read_generated, read_topics, GeneratedDocument, Topic};
use graft::dense::{EmbeddingVector, VectorStore};
use graft::eval::MetricSpec;
use graft::folds::{read_folds, FoldSet};
use graft::index::InvertedIndex;
use graft::learned::{SparseRep, SparseStore};
use graft::pipelines::{
    DenseFeedback, DensePipeline, FusionPipeline, LearnedFeedback, LearnedSparsePipeline,
    SparseFeedback, SparsePipeline,
};
use graft::qrels::{read_qrels, Qrels};
use graft::run::{read_run, RankedRun};
use graft::tune::{ParamAssignment, ParamGrid, ParamValue, Pipeline};
use graft::vectors::{read_dense_vectors, read_gen_sparse, read_gen_vectors, read_sparse_vectors};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Paradigm {
    Sparse,
    Dense,
    LearnedSparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FeedbackKind {
    None,
    Prf,
    Grf,
}

/// Input paths shared by config-driven commands. Relative paths are
/// resolved against the config file's directory.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub topics: Option<PathBuf>,
    pub qrels: Option<PathBuf>,
    pub folds: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub store: Option<PathBuf>,
    pub query_vectors: Option<PathBuf>,
    pub gen_docs: Option<PathBuf>,
    pub gen_vectors: Option<PathBuf>,
    pub gen_type: Option<String>,
    pub prf_run: Option<PathBuf>,
    pub grf_run: Option<PathBuf>,
}

impl DataSection {
    fn resolve(&mut self, base: &Path) {
        for path in [
            &mut self.topics,
            &mut self.qrels,
            &mut self.folds,
            &mut self.corpus,
            &mut self.index,
            &mut self.stopwords,
            &mut self.store,
            &mut self.query_vectors,
            &mut self.gen_docs,
            &mut self.gen_vectors,
            &mut self.prf_run,
            &mut self.grf_run,
        ]
        .into_iter()
        .flatten()
        {
            if path.is_relative() {
                *path = base.join(&path);
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSection {
    pub paradigm: String,
    pub feedback: Option<String>,
}

/// Configuration for `graft tune`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneConfig {
    pub objective: Option<String>,
    pub depth: Option<usize>,
    pub data: DataSection,
    pub pipeline: PipelineSection,
    pub grid: BTreeMap<String, Vec<ParamValue>>,
}

impl TuneConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut config: TuneConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.data.resolve(base);
        Ok(config)
    }

    pub fn objective(&self) -> Result<MetricSpec> {
        self.objective
            .as_deref()
            .unwrap_or("recall@1000")
            .parse()
            .map_err(Into::into)
    }

    pub fn grid(&self) -> Result<ParamGrid> {
        ParamGrid::new(
            self.grid
                .iter()
                .map(|(n, v)| (n.clone(), v.clone()))
                .collect(),
        )
        .map_err(Into::into)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Fixed(f64),
    Named(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionSection {
    pub lambda: Option<LambdaSpec>,
    pub rrf_k: Option<u32>,
}

/// Configuration for `graft experiment`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: Option<String>,
    pub out_dir: PathBuf,
    pub paradigm: String,
    pub depth: Option<usize>,
    pub metrics: Option<Vec<String>>,
    pub ttest_metric: Option<String>,
    pub data: DataSection,
    pub baseline: Option<BTreeMap<String, ParamValue>>,
    pub prf: Option<BTreeMap<String, ParamValue>>,
    pub grf: Option<BTreeMap<String, ParamValue>>,
    pub fusion: Option<FusionSection>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut config: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.data.resolve(base);
        if config.out_dir.is_relative() {
            config.out_dir = base.join(&config.out_dir);
        }
        Ok(config)
    }

    pub fn metrics(&self) -> Result<Vec<MetricSpec>> {
        let names = self.metrics.clone().unwrap_or_else(|| {
            ["map", "ndcg@10", "recall@1000"]
                .iter()
                .map(|s| s.to_string())
                .collect()
        });
        names
            .iter()
            .map(|n| n.parse().map_err(anyhow::Error::from))
            .collect()
    }

    pub fn ttest_metric(&self) -> Result<MetricSpec> {
        self.ttest_metric
            .as_deref()
            .unwrap_or("recall@1000")
            .parse()
            .map_err(Into::into)
    }
}

pub fn parse_paradigm(s: &str) -> Result<Paradigm> {
    match s {
        "sparse" => Ok(Paradigm::Sparse),
        "dense" => Ok(Paradigm::Dense),
        "learned-sparse" => Ok(Paradigm::LearnedSparse),
        other => bail!("unknown paradigm {other} (expected sparse, dense or learned-sparse)"),
    }
}

pub fn parse_feedback(s: &str) -> Result<FeedbackKind> {
    match s {
        "none" => Ok(FeedbackKind::None),
        "prf" => Ok(FeedbackKind::Prf),
        "grf" => Ok(FeedbackKind::Grf),
        other => bail!("unknown feedback {other} (expected none, prf or grf)"),
    }
}

/// All inputs a retrieval pipeline may borrow, loaded up front.
#[derive(Default)]
pub struct LoadedData {
    pub index: Option<InvertedIndex>,
    pub gen_docs: Option<BTreeMap<String, Vec<GeneratedDocument>>>,
    pub dense_store: Option<VectorStore>,
    pub query_vectors: Option<BTreeMap<String, EmbeddingVector>>,
    pub gen_vectors: Option<BTreeMap<String, Vec<EmbeddingVector>>>,
    pub sparse_store: Option<SparseStore>,
    pub query_reps: Option<BTreeMap<String, SparseRep>>,
    pub gen_reps: Option<BTreeMap<String, Vec<SparseRep>>>,
    pub prf_run: Option<RankedRun>,
    pub grf_run: Option<RankedRun>,
}

fn require<'a, T>(value: &'a Option<T>, what: &str) -> Result<&'a T> {
    value
        .as_ref()
        .with_context(|| format!("configuration is missing {what}"))
}

impl LoadedData {
    /// Load whatever the paradigm and feedback kind require from the data
    /// section.
    pub fn load(data: &DataSection, paradigm: Paradigm, feedback: FeedbackKind) -> Result<Self> {
        let mut loaded = LoadedData::default();
        match paradigm {
            Paradigm::Sparse => {
                let dir = require(&data.index, "an index directory (--index / data.index)")?;
                let index = InvertedIndex::load(dir)?;
                if let Some(stopwords) = &data.stopwords {
                    let pipeline = TokenPipeline::from_stopword_file(stopwords)?;
                    index.verify_analyzer(&pipeline)?;
                }
                loaded.index = Some(index);
                if feedback == FeedbackKind::Grf {
                    let path = require(
                        &data.gen_docs,
                        "generated documents (--gen-docs / data.gen_docs)",
                    )?;
                    let docs = read_generated(path)?;
                    loaded.gen_docs = Some(generated_by_query(&docs, data.gen_type.as_deref()));
                }
            }
            Paradigm::Dense => {
                let dir = require(
                    &data.store,
                    "a dense store directory (--doc-vectors / data.store)",
                )?;
                loaded.dense_store = Some(VectorStore::load(dir)?);
                let qv = require(
                    &data.query_vectors,
                    "query vectors (--query-vectors / data.query_vectors)",
                )?;
                loaded.query_vectors = Some(
                    read_dense_vectors(qv)?
                        .into_iter()
                        .map(|v| (v.id.clone(), v))
                        .collect(),
                );
                if feedback == FeedbackKind::Grf {
                    let path = require(
                        &data.gen_vectors,
                        "generated vectors (--gen-vectors / data.gen_vectors)",
                    )?;
                    loaded.gen_vectors = Some(read_gen_vectors(path, data.gen_type.as_deref())?);
                }
            }
            Paradigm::LearnedSparse => {
                let dir = require(
                    &data.store,
                    "a sparse store directory (--doc-vectors / data.store)",
                )?;
                loaded.sparse_store = Some(SparseStore::load(dir)?);
                let qv = require(
                    &data.query_vectors,
                    "query vectors (--query-vectors / data.query_vectors)",
                )?;
                loaded.query_reps = Some(
                    read_sparse_vectors(qv)?
                        .into_iter()
                        .map(|r| (r.id.clone(), r))
                        .collect(),
                );
                if feedback == FeedbackKind::Grf {
                    let path = require(
                        &data.gen_vectors,
                        "generated vectors (--gen-vectors / data.gen_vectors)",
                    )?;
                    loaded.gen_reps = Some(read_gen_sparse(path, data.gen_type.as_deref())?);
                }
            }
        }
        Ok(loaded)
    }

    pub fn load_fusion(data: &DataSection) -> Result<Self> {
        Ok(LoadedData {
            prf_run: Some(read_run(require(&data.prf_run, "data.prf_run")?)?),
            grf_run: Some(read_run(require(&data.grf_run, "data.grf_run")?)?),
            ..LoadedData::default()
        })
    }

    /// Build the pipeline borrowing from this data.
    pub fn pipeline(
        &self,
        paradigm: Paradigm,
        feedback: FeedbackKind,
        depth: usize,
    ) -> Result<Box<dyn Pipeline + '_>> {
        match paradigm {
            Paradigm::Sparse => {
                let index = require(&self.index, "index")?;
                let feedback = match feedback {
                    FeedbackKind::None => SparseFeedback::None,
                    FeedbackKind::Prf => SparseFeedback::Rm3,
                    FeedbackKind::Grf => SparseFeedback::Grf {
                        gen_docs: require(&self.gen_docs, "generated documents")?,
                    },
                };
                Ok(Box::new(SparsePipeline {
                    index,
                    feedback,
                    depth,
                }))
            }
            Paradigm::Dense => {
                let store = require(&self.dense_store, "dense store")?;
                let query_vectors = require(&self.query_vectors, "query vectors")?;
                let feedback = match feedback {
                    FeedbackKind::None => DenseFeedback::None,
                    FeedbackKind::Prf => DenseFeedback::Prf,
                    FeedbackKind::Grf => DenseFeedback::Grf {
                        gen_vectors: require(&self.gen_vectors, "generated vectors")?,
                    },
                };
                Ok(Box::new(DensePipeline {
                    store,
                    query_vectors,
                    feedback,
                    depth,
                }))
            }
            Paradigm::LearnedSparse => {
                let store = require(&self.sparse_store, "sparse store")?;
                let query_reps = require(&self.query_reps, "query representations")?;
                let feedback = match feedback {
                    FeedbackKind::None => LearnedFeedback::None,
                    FeedbackKind::Prf => LearnedFeedback::Prf,
                    FeedbackKind::Grf => LearnedFeedback::Grf {
                        gen_reps: require(&self.gen_reps, "generated representations")?,
                    },
                };
                Ok(Box::new(LearnedSparsePipeline {
                    store,
                    query_reps,
                    feedback,
                    depth,
                }))
            }
        }
    }

    pub fn fusion_pipeline(&self, k: u32, depth: usize) -> Result<Box<dyn Pipeline + '_>> {
        Ok(Box::new(FusionPipeline {
            prf_run: require(&self.prf_run, "prf run")?,
            grf_run: require(&self.grf_run, "grf run")?,
            k,
            depth,
        }))
    }
}

/// Default parameter values per paradigm and feedback kind, sourced from
/// the library's parameter types; config and flag values are merged on
/// top.
pub fn default_params(paradigm: Paradigm, feedback: FeedbackKind) -> Vec<(String, ParamValue)> {
    use graft::bm25::Bm25Params;
    use graft::dense::RocchioParams;
    use graft::feedback::{GrfSparseParams, Rm3Params};
    use graft::learned::{LsGrfParams, LsPrfParams};

    let mut out: Vec<(&str, ParamValue)> = Vec::new();
    match paradigm {
        Paradigm::Sparse => {
            let bm25 = Bm25Params::default();
            out.push(("k1", ParamValue::Float(bm25.k1)));
            out.push(("b", ParamValue::Float(bm25.b)));
            match feedback {
                FeedbackKind::None => {}
                FeedbackKind::Prf => {
                    let rm3 = Rm3Params::default();
                    out.push(("fb_docs", ParamValue::Int(rm3.fb_docs as i64)));
                    out.push(("fb_terms", ParamValue::Int(rm3.fb_terms as i64)));
                    out.push(("orig_weight", ParamValue::Float(rm3.original_query_weight)));
                }
                FeedbackKind::Grf => {
                    let grf = GrfSparseParams::default();
                    out.push(("fb_terms", ParamValue::Int(grf.fb_terms as i64)));
                    out.push(("orig_weight", ParamValue::Float(grf.original_query_weight)));
                }
            }
        }
        Paradigm::Dense => {
            let rocchio = RocchioParams::default();
            match feedback {
                FeedbackKind::None => {}
                FeedbackKind::Prf => {
                    out.push(("alpha", ParamValue::Float(rocchio.alpha)));
                    out.push(("beta", ParamValue::Float(rocchio.beta)));
                    out.push(("fb_docs", ParamValue::Int(rocchio.depth as i64)));
                }
                FeedbackKind::Grf => {
                    out.push(("alpha", ParamValue::Float(rocchio.alpha)));
                    out.push(("beta", ParamValue::Float(rocchio.beta)));
                }
            }
        }
        Paradigm::LearnedSparse => match feedback {
            FeedbackKind::None => {}
            FeedbackKind::Prf => {
                let prf = LsPrfParams::default();
                out.push(("fb_docs", ParamValue::Int(prf.fb_docs as i64)));
                out.push(("fb_terms", ParamValue::Int(prf.fb_terms as i64)));
                out.push(("orig_weight", ParamValue::Float(prf.original_query_weight)));
            }
            FeedbackKind::Grf => {
                let grf = LsGrfParams::default();
                out.push(("beta", ParamValue::Float(grf.beta)));
                out.push(("theta", ParamValue::Int(grf.theta as i64)));
            }
        },
    }
    out.into_iter().map(|(n, v)| (n.to_string(), v)).collect()
}

/// Merge defaults with overrides into a full assignment.
pub fn assignment_with(
    defaults: Vec<(String, ParamValue)>,
    overrides: impl IntoIterator<Item = (String, ParamValue)>,
) -> ParamAssignment {
    let mut values: BTreeMap<String, ParamValue> = defaults.into_iter().collect();
    for (name, value) in overrides {
        values.insert(name, value);
    }
    ParamAssignment { values }
}

/// Read the topics required by every retrieval command.
pub fn load_topics(data: &DataSection) -> Result<Vec<Topic>> {
    let path = require(&data.topics, "data.topics")?;
    Ok(read_topics(path)?)
}

pub fn load_qrels(data: &DataSection) -> Result<Qrels> {
    let path = require(&data.qrels, "data.qrels")?;
    Ok(read_qrels(path)?)
}

pub fn load_folds(data: &DataSection) -> Result<FoldSet> {
    let path = require(&data.folds, "data.folds")?;
    Ok(read_folds(path)?)
}
