//! Parameterized retrieval pipelines: the glue between the retrieval
//! modules and the tuning loop (and the command line).
//!
//! Each pipeline reads its hyperparameters from a [`ParamAssignment`], so
//! the same object serves a fixed-parameter run and a grid-search sweep.
//! Run tags encode paradigm, feedback kind and parameter values.

use std::collections::BTreeMap;

use crate::analysis::TokenPipeline;
use crate::bm25::{bm25_search, Bm25Params, WeightedQuery};
use crate::corpus::{GeneratedDocument, Topic};
use crate::dense::{
    dense_grf, dense_prf, dense_search, max_passage, EmbeddingVector, RocchioParams, VectorStore,
};
use crate::error::{Error, Result};
use crate::feedback::{grf_sparse_expand, relevance_model, rm3_expand, GrfSparseParams};
use crate::fusion::{wrrf, WrrfParams};
use crate::index::InvertedIndex;
use crate::learned::{
    impact_search, l1_normalize, ls_grf_combine, ls_prf_combine, LsGrfParams, LsPrfParams,
    SparseRep, SparseStore,
};
use crate::run::{RankedRun, ScoredItem};
use crate::tune::{ParamAssignment, Pipeline};

/// Feedback flavour for the sparse paradigm.
pub enum SparseFeedback<'a> {
    None,
    Rm3,
    Grf {
        gen_docs: &'a BTreeMap<String, Vec<GeneratedDocument>>,
    },
}

/// BM25 retrieval with optional RM3 or generative expansion.
///
/// Parameters read from the assignment: `k1`, `b`; RM3 adds `fb_docs`,
/// `fb_terms`, `orig_weight`; generative feedback adds `fb_terms`,
/// `orig_weight`.
pub struct SparsePipeline<'a> {
    pub index: &'a InvertedIndex,
    pub feedback: SparseFeedback<'a>,
    pub depth: usize,
}

impl SparsePipeline<'_> {
    fn analyzer(&self) -> &TokenPipeline {
        self.index.analyzer()
    }

    fn bm25_params(&self, assignment: &ParamAssignment) -> Result<Bm25Params> {
        let params = Bm25Params {
            k1: assignment.f64_of("k1")?,
            b: assignment.f64_of("b")?,
        };
        params.validate()?;
        Ok(params)
    }

    /// Expand one topic and rank it. Returns the query actually executed.
    fn run_topic(
        &self,
        assignment: &ParamAssignment,
        params: Bm25Params,
        topic: &Topic,
    ) -> Result<(WeightedQuery, Vec<ScoredItem>)> {
        let query = WeightedQuery::from_text(&topic.query_id, &topic.text, self.analyzer());
        if query.is_empty() {
            return Ok((query, Vec::new()));
        }
        match &self.feedback {
            SparseFeedback::None => {
                let items = bm25_search(self.index, &query, params, self.depth);
                Ok((query, items))
            }
            SparseFeedback::Rm3 => {
                let fb_docs = assignment.usize_of("fb_docs")?;
                let fb_terms = assignment.usize_of("fb_terms")?;
                let owq = assignment.f64_of("orig_weight")?;
                let first = bm25_search(self.index, &query, params, fb_docs);
                if first.is_empty() {
                    return Ok((query, Vec::new()));
                }
                let model = relevance_model(self.index, &first, fb_docs)?;
                let expanded = rm3_expand(&query, &model, fb_terms, owq)?;
                let items = bm25_search(self.index, &expanded, params, self.depth);
                Ok((expanded, items))
            }
            SparseFeedback::Grf { gen_docs } => {
                let grf_params = GrfSparseParams {
                    fb_terms: assignment.usize_of("fb_terms")?,
                    original_query_weight: assignment.f64_of("orig_weight")?,
                };
                let gens = gen_docs
                    .get(&topic.query_id)
                    .ok_or_else(|| Error::MissingGenerated(topic.query_id.clone()))?;
                let expanded = grf_sparse_expand(&query, gens, self.analyzer(), grf_params)?;
                let items = bm25_search(self.index, &expanded, params, self.depth);
                Ok((expanded, items))
            }
        }
    }

    /// Like [`Pipeline::retrieve`] but also returns the expanded queries,
    /// for debug dumps.
    pub fn retrieve_with_queries(
        &self,
        assignment: &ParamAssignment,
        topics: &[Topic],
    ) -> Result<(RankedRun, Vec<WeightedQuery>)> {
        self.check_generated_coverage(topics)?;
        let params = self.bm25_params(assignment)?;
        let mut run = RankedRun::new(self.run_tag(assignment));
        let mut queries = Vec::with_capacity(topics.len());
        for topic in topics {
            let (query, items) = self.run_topic(assignment, params, topic)?;
            run.insert_query(topic.query_id.clone(), items, self.depth)?;
            queries.push(query);
        }
        Ok((run, queries))
    }

    fn check_generated_coverage(&self, topics: &[Topic]) -> Result<()> {
        if let SparseFeedback::Grf { gen_docs } = &self.feedback {
            let missing = crate::corpus::missing_generated(topics, gen_docs);
            if !missing.is_empty() {
                return Err(Error::MissingGeneratedBatch(missing));
            }
        }
        Ok(())
    }

    fn run_tag(&self, assignment: &ParamAssignment) -> String {
        let base = match &self.feedback {
            SparseFeedback::None => "bm25",
            SparseFeedback::Rm3 => "bm25-rm3",
            SparseFeedback::Grf { .. } => "bm25-grf",
        };
        format!("{base}_{}", tag_suffix(assignment))
    }
}

impl Pipeline for SparsePipeline<'_> {
    fn tag_stem(&self) -> String {
        match &self.feedback {
            SparseFeedback::None => "bm25".to_string(),
            SparseFeedback::Rm3 => "bm25-rm3".to_string(),
            SparseFeedback::Grf { .. } => "bm25-grf".to_string(),
        }
    }

    fn id(&self) -> String {
        let kind = match &self.feedback {
            SparseFeedback::None => "bm25".to_string(),
            SparseFeedback::Rm3 => "bm25-rm3".to_string(),
            SparseFeedback::Grf { gen_docs } => format!("bm25-grf[g{}]", gen_docs.len()),
        };
        format!(
            "{kind}[{}d,{}t,depth{}]",
            self.index.num_docs(),
            self.index.num_terms(),
            self.depth
        )
    }

    fn retrieve(&self, assignment: &ParamAssignment, topics: &[Topic]) -> Result<RankedRun> {
        Ok(self.retrieve_with_queries(assignment, topics)?.0)
    }
}

fn tag_suffix(assignment: &ParamAssignment) -> String {
    if assignment.values.is_empty() {
        "default".to_string()
    } else {
        assignment
            .values
            .iter()
            .map(|(n, v)| format!("{n}-{v}"))
            .collect::<Vec<_>>()
            .join("_")
    }
}

/// Feedback flavour for the dense paradigm.
pub enum DenseFeedback<'a> {
    None,
    Prf,
    Grf {
        gen_vectors: &'a BTreeMap<String, Vec<EmbeddingVector>>,
    },
}

/// Exact dense retrieval with optional Rocchio feedback. Pseudo-relevance
/// feedback reads `alpha`, `beta` and `fb_docs` (feedback passage count);
/// generative feedback reads `alpha` and `beta`.
pub struct DensePipeline<'a> {
    pub store: &'a VectorStore,
    pub query_vectors: &'a BTreeMap<String, EmbeddingVector>,
    pub feedback: DenseFeedback<'a>,
    pub depth: usize,
}

impl DensePipeline<'_> {
    fn baseline(&self, query: &EmbeddingVector) -> Result<Vec<ScoredItem>> {
        let passages = dense_search(self.store, query, self.store.len())?;
        let mut docs = max_passage(&passages, |p| self.store.doc_of(p).map(String::from))?;
        docs.truncate(self.depth);
        Ok(docs)
    }

    fn check_coverage(&self, topics: &[Topic]) -> Result<()> {
        let missing: Vec<String> = topics
            .iter()
            .filter(|t| !self.query_vectors.contains_key(&t.query_id))
            .map(|t| t.query_id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Invalid(format!(
                "missing query vectors for: {}",
                missing.join(", ")
            )));
        }
        if let DenseFeedback::Grf { gen_vectors } = &self.feedback {
            let missing: Vec<String> = topics
                .iter()
                .filter(|t| !gen_vectors.contains_key(&t.query_id))
                .map(|t| t.query_id.clone())
                .collect();
            if !missing.is_empty() {
                return Err(Error::MissingGeneratedBatch(missing));
            }
        }
        Ok(())
    }
}

impl Pipeline for DensePipeline<'_> {
    fn tag_stem(&self) -> String {
        match &self.feedback {
            DenseFeedback::None => "dense".to_string(),
            DenseFeedback::Prf => "dense-prf".to_string(),
            DenseFeedback::Grf { .. } => "dense-grf".to_string(),
        }
    }

    fn id(&self) -> String {
        let kind = match &self.feedback {
            DenseFeedback::None => "dense".to_string(),
            DenseFeedback::Prf => "dense-prf".to_string(),
            DenseFeedback::Grf { gen_vectors } => format!("dense-grf[g{}]", gen_vectors.len()),
        };
        format!(
            "{kind}[{}p,dim{},depth{}]",
            self.store.len(),
            self.store.dim(),
            self.depth
        )
    }

    fn retrieve(&self, assignment: &ParamAssignment, topics: &[Topic]) -> Result<RankedRun> {
        self.check_coverage(topics)?;
        let base = match &self.feedback {
            DenseFeedback::None => "dense",
            DenseFeedback::Prf => "dense-prf",
            DenseFeedback::Grf { .. } => "dense-grf",
        };
        let mut run = RankedRun::new(format!("{base}_{}", tag_suffix(assignment)));
        for topic in topics {
            let query = &self.query_vectors[&topic.query_id];
            let items = match &self.feedback {
                DenseFeedback::None => self.baseline(query)?,
                DenseFeedback::Prf => {
                    let params = RocchioParams {
                        alpha: assignment.f64_of("alpha")?,
                        beta: assignment.f64_of("beta")?,
                        depth: assignment.usize_of("fb_docs")?,
                    };
                    dense_prf(self.store, query, &params, self.depth)?
                }
                DenseFeedback::Grf { gen_vectors } => dense_grf(
                    self.store,
                    query,
                    &gen_vectors[&topic.query_id],
                    assignment.f64_of("alpha")?,
                    assignment.f64_of("beta")?,
                    self.depth,
                )?,
            };
            run.insert_query(topic.query_id.clone(), items, self.depth)?;
        }
        Ok(run)
    }
}

/// Feedback flavour for the learned sparse paradigm.
pub enum LearnedFeedback<'a> {
    None,
    Prf,
    Grf {
        gen_reps: &'a BTreeMap<String, Vec<SparseRep>>,
    },
}

/// Impact search over learned sparse representations with optional
/// feedback. Generative feedback reads `beta` and `theta`; pseudo-relevance
/// feedback reads `fb_docs`, `fb_terms` and `orig_weight`.
pub struct LearnedSparsePipeline<'a> {
    pub store: &'a SparseStore,
    pub query_reps: &'a BTreeMap<String, SparseRep>,
    pub feedback: LearnedFeedback<'a>,
    pub depth: usize,
}

impl LearnedSparsePipeline<'_> {
    fn to_docs(&self, passages: &[ScoredItem]) -> Result<Vec<ScoredItem>> {
        let mut docs = max_passage(passages, |p| self.store.doc_of(p).map(String::from))?;
        docs.truncate(self.depth);
        Ok(docs)
    }

    fn check_coverage(&self, topics: &[Topic]) -> Result<()> {
        let missing: Vec<String> = topics
            .iter()
            .filter(|t| !self.query_reps.contains_key(&t.query_id))
            .map(|t| t.query_id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Invalid(format!(
                "missing query representations for: {}",
                missing.join(", ")
            )));
        }
        if let LearnedFeedback::Grf { gen_reps } = &self.feedback {
            let missing: Vec<String> = topics
                .iter()
                .filter(|t| !gen_reps.contains_key(&t.query_id))
                .map(|t| t.query_id.clone())
                .collect();
            if !missing.is_empty() {
                return Err(Error::MissingGeneratedBatch(missing));
            }
        }
        Ok(())
    }
}

impl Pipeline for LearnedSparsePipeline<'_> {
    fn tag_stem(&self) -> String {
        match &self.feedback {
            LearnedFeedback::None => "ls".to_string(),
            LearnedFeedback::Prf => "ls-prf".to_string(),
            LearnedFeedback::Grf { .. } => "ls-grf".to_string(),
        }
    }

    fn id(&self) -> String {
        let kind = match &self.feedback {
            LearnedFeedback::None => "ls".to_string(),
            LearnedFeedback::Prf => "ls-prf".to_string(),
            LearnedFeedback::Grf { gen_reps } => format!("ls-grf[g{}]", gen_reps.len()),
        };
        format!("{kind}[{}p,depth{}]", self.store.len(), self.depth)
    }

    fn retrieve(&self, assignment: &ParamAssignment, topics: &[Topic]) -> Result<RankedRun> {
        self.check_coverage(topics)?;
        let base = match &self.feedback {
            LearnedFeedback::None => "ls",
            LearnedFeedback::Prf => "ls-prf",
            LearnedFeedback::Grf { .. } => "ls-grf",
        };
        let mut run = RankedRun::new(format!("{base}_{}", tag_suffix(assignment)));
        for topic in topics {
            let raw = &self.query_reps[&topic.query_id];
            if raw.mass() == 0.0 {
                run.insert_query(topic.query_id.clone(), Vec::new(), self.depth)?;
                continue;
            }
            let query = l1_normalize(raw)?;
            let items = match &self.feedback {
                LearnedFeedback::None => {
                    let passages = impact_search(self.store, &query, self.store.len());
                    self.to_docs(&passages)?
                }
                LearnedFeedback::Prf => {
                    let params = LsPrfParams {
                        fb_docs: assignment.usize_of("fb_docs")?,
                        fb_terms: assignment.usize_of("fb_terms")?,
                        original_query_weight: assignment.f64_of("orig_weight")?,
                    };
                    let first = impact_search(self.store, &query, params.fb_docs);
                    if first.is_empty() {
                        Vec::new()
                    } else {
                        let reps: Vec<SparseRep> = first
                            .iter()
                            .filter_map(|i| self.store.rep(&i.item_id).cloned())
                            .collect();
                        let combined = ls_prf_combine(&query, &reps, &params)?;
                        let passages = impact_search(self.store, &combined, self.store.len());
                        self.to_docs(&passages)?
                    }
                }
                LearnedFeedback::Grf { gen_reps } => {
                    let params = LsGrfParams {
                        beta: assignment.f64_of("beta")?,
                        theta: assignment.usize_of("theta")?,
                    };
                    let aggregated =
                        crate::learned::aggregate_generated(&gen_reps[&topic.query_id])?;
                    let combined = ls_grf_combine(&query, &aggregated, &params);
                    let passages = impact_search(self.store, &combined, self.store.len());
                    self.to_docs(&passages)?
                }
            };
            run.insert_query(topic.query_id.clone(), items, self.depth)?;
        }
        Ok(run)
    }
}

/// Weighted fusion of a fixed PRF run and GRF run; the assignment supplies
/// `lambda`. Used to tune the fusion weight by cross-validation.
pub struct FusionPipeline<'a> {
    pub prf_run: &'a RankedRun,
    pub grf_run: &'a RankedRun,
    pub k: u32,
    pub depth: usize,
}

impl Pipeline for FusionPipeline<'_> {
    fn tag_stem(&self) -> String {
        format!("wrrf_k{}", self.k)
    }

    fn id(&self) -> String {
        format!(
            "wrrf[{}+{},k{},depth{}]",
            self.prf_run.run_tag, self.grf_run.run_tag, self.k, self.depth
        )
    }

    fn retrieve(&self, assignment: &ParamAssignment, topics: &[Topic]) -> Result<RankedRun> {
        let queries: Vec<String> = topics.iter().map(|t| t.query_id.clone()).collect();
        let prf = self.prf_run.restrict(&queries)?;
        let grf = self.grf_run.restrict(&queries)?;
        let params = WrrfParams {
            lambda: assignment.f64_of("lambda")?,
            k: self.k,
        };
        wrrf(&prf, &grf, params, self.depth)
    }
}
