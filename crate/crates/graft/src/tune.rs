//! Cross-validated grid search and zero-shot parameter transfer.
//!
//! For every fold, each grid point is evaluated on the training topics
//! only; the point with the best mean objective (ties broken by grid
//! enumeration order) is then applied to the held-out topics. Aggregate
//! metrics concatenate held-out results, so each query's reported value
//! comes from parameters chosen without access to its judgments. Qrels are
//! consumed through [`QrelsSource`], and the [`TrackingQrels`] wrapper
//! records which queries were touched in which phase so no-leakage is
//! checkable after the fact.
//!
//! Grid-point evaluations are cached on disk per (pipeline configuration,
//! query), so interrupted sweeps resume where they stopped.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::Topic;
use crate::error::{Error, Result};
use crate::eval::{evaluate, MetricSpec};
use crate::folds::FoldSet;
use crate::qrels::Qrels;
use crate::run::RankedRun;

/// A hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Str(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(i) => Some(*i as f64),
            ParamValue::Float(f) => Some(*f),
            ParamValue::Str(_) => None,
        }
    }

    pub fn as_usize(&self) -> Option<usize> {
        match self {
            ParamValue::Int(i) if *i >= 0 => Some(*i as usize),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Str(s) => write!(f, "{s}"),
        }
    }
}

/// An ordered hyperparameter grid. Enumeration is full factorial with the
/// last parameter varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    params: Vec<(String, Vec<ParamValue>)>,
}

impl ParamGrid {
    pub fn new(params: Vec<(String, Vec<ParamValue>)>) -> Result<Self> {
        for (name, values) in &params {
            if values.is_empty() {
                return Err(Error::InvalidParam(format!("empty grid for {name}")));
            }
            for v in values {
                if let Some(f) = v.as_f64() {
                    if !f.is_finite() {
                        return Err(Error::InvalidParam(format!("non-finite value for {name}")));
                    }
                }
            }
        }
        Ok(ParamGrid { params })
    }

    /// A grid with a single point.
    pub fn singleton(values: Vec<(String, ParamValue)>) -> Self {
        ParamGrid {
            params: values.into_iter().map(|(n, v)| (n, vec![v])).collect(),
        }
    }

    pub fn num_points(&self) -> usize {
        self.params.iter().map(|(_, v)| v.len()).product()
    }

    pub fn param_names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|(n, _)| n.as_str())
    }

    pub fn values_of(&self, name: &str) -> Option<&[ParamValue]> {
        self.params
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// All grid points in enumeration order.
    pub fn points(&self) -> Vec<ParamAssignment> {
        let mut out = vec![ParamAssignment::default()];
        for (name, values) in &self.params {
            let mut next = Vec::with_capacity(out.len() * values.len());
            for partial in &out {
                for value in values {
                    let mut a = partial.clone();
                    a.values.insert(name.clone(), value.clone());
                    next.push(a);
                }
            }
            out = next;
        }
        out
    }
}

/// One grid point: a full parameter assignment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamAssignment {
    pub values: BTreeMap<String, ParamValue>,
}

impl ParamAssignment {
    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.values.get(name)
    }

    pub fn f64_of(&self, name: &str) -> Result<f64> {
        self.get(name)
            .and_then(ParamValue::as_f64)
            .ok_or_else(|| Error::InvalidParam(format!("missing numeric parameter {name}")))
    }

    pub fn usize_of(&self, name: &str) -> Result<usize> {
        self.get(name)
            .and_then(ParamValue::as_usize)
            .ok_or_else(|| Error::InvalidParam(format!("missing integer parameter {name}")))
    }

    /// Stable textual form, e.g. `b=0.4,k1=0.9`.
    pub fn canonical(&self) -> String {
        self.values
            .iter()
            .map(|(n, v)| format!("{n}={v}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl fmt::Display for ParamAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.canonical())
    }
}

/// Any parameterized retrieval configuration that can produce a run for a
/// set of topics.
pub trait Pipeline {
    /// Stable identifier used for cache keys.
    fn id(&self) -> String;

    /// Short token used in aggregate run tags; defaults to the id.
    fn tag_stem(&self) -> String {
        self.id()
    }

    fn retrieve(&self, assignment: &ParamAssignment, topics: &[Topic]) -> Result<RankedRun>;
}

/// Tuning phase, reported to [`QrelsSource`] implementations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CvPhase {
    Idle,
    /// Grid points are being scored on training topics.
    Selection {
        fold: String,
    },
    /// The fold winner is being applied to held-out topics.
    Application {
        fold: String,
    },
}

/// Source of relevance judgments for tuning. `view` hands out judgments for
/// the requested queries; implementations may record the access.
pub trait QrelsSource {
    fn view(&self, query_ids: &[String]) -> Qrels;

    fn begin_phase(&self, _phase: CvPhase) {}
}

impl QrelsSource for Qrels {
    fn view(&self, query_ids: &[String]) -> Qrels {
        let mut out = Qrels::new();
        for q in query_ids {
            if let Some(grades) = self.grades(q) {
                for (doc, &grade) in grades {
                    out.add(q.clone(), doc.clone(), grade);
                }
            }
        }
        out
    }
}

/// Access-recording wrapper used to assert that parameter selection never
/// touches held-out judgments.
pub struct TrackingQrels<'a> {
    inner: &'a Qrels,
    state: RefCell<TrackState>,
}

struct TrackState {
    phase: CvPhase,
    accesses: Vec<(CvPhase, String)>,
}

impl<'a> TrackingQrels<'a> {
    pub fn new(inner: &'a Qrels) -> Self {
        TrackingQrels {
            inner,
            state: RefCell::new(TrackState {
                phase: CvPhase::Idle,
                accesses: Vec::new(),
            }),
        }
    }

    /// Every (phase, query) access recorded so far.
    pub fn accesses(&self) -> Vec<(CvPhase, String)> {
        self.state.borrow().accesses.clone()
    }

    /// Queries accessed during the selection phase of the given fold.
    pub fn selection_accesses(&self, fold: &str) -> Vec<String> {
        self.state
            .borrow()
            .accesses
            .iter()
            .filter_map(|(phase, q)| match phase {
                CvPhase::Selection { fold: f } if f == fold => Some(q.clone()),
                _ => None,
            })
            .collect()
    }
}

impl QrelsSource for TrackingQrels<'_> {
    fn view(&self, query_ids: &[String]) -> Qrels {
        {
            let mut state = self.state.borrow_mut();
            let phase = state.phase.clone();
            for q in query_ids {
                state.accesses.push((phase.clone(), q.clone()));
            }
        }
        self.inner.view(query_ids)
    }

    fn begin_phase(&self, phase: CvPhase) {
        self.state.borrow_mut().phase = phase;
    }
}

/// Disk cache of per-query objective values, keyed by pipeline
/// configuration. Writes are atomic (write-then-rename).
pub struct EvalCache {
    dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    key: String,
    values: BTreeMap<String, Option<f64>>,
}

fn fnv64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

impl EvalCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(EvalCache { dir })
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir
            .join(format!("{:016x}.json", fnv64(key.as_bytes())))
    }

    fn load(&self, key: &str) -> BTreeMap<String, Option<f64>> {
        let path = self.path_for(key);
        let Ok(text) = fs::read_to_string(&path) else {
            return BTreeMap::new();
        };
        match serde_json::from_str::<CacheFile>(&text) {
            Ok(file) if file.key == key => file.values,
            _ => BTreeMap::new(),
        }
    }

    fn store(&self, key: &str, values: &BTreeMap<String, Option<f64>>) -> Result<()> {
        let path = self.path_for(key);
        let tmp = path.with_extension("tmp");
        let file = CacheFile {
            key: key.to_string(),
            values: values.clone(),
        };
        let text = serde_json::to_string(&file).expect("cache serializes");
        fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }
}

/// Outcome for one fold: the selected parameters, the training-side grid
/// table they won, and the held-out metrics they earned.
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub fold: String,
    pub winner: ParamAssignment,
    /// (grid point, training mean objective), in enumeration order.
    pub training_table: Vec<(ParamAssignment, f64)>,
    /// Held-out per-query objective values.
    pub held_out: BTreeMap<String, f64>,
    pub held_out_run: RankedRun,
}

/// Result of a cross-validated sweep.
#[derive(Debug, Clone)]
pub struct TuningResult {
    pub objective: MetricSpec,
    pub grid: ParamGrid,
    pub folds: Vec<FoldOutcome>,
    /// Held-out values concatenated over folds.
    pub aggregate_per_query: BTreeMap<String, f64>,
    pub aggregate_mean: f64,
    /// Held-out runs concatenated over folds.
    pub aggregate_run: RankedRun,
    /// Stability diagnostic: max spread of each numeric parameter across
    /// fold winners.
    pub param_spread: BTreeMap<String, f64>,
}

fn evaluate_point(
    pipeline: &dyn Pipeline,
    assignment: &ParamAssignment,
    topics: &[Topic],
    qrels: &dyn QrelsSource,
    objective: MetricSpec,
    depth: usize,
    cache: Option<&EvalCache>,
) -> Result<BTreeMap<String, f64>> {
    let key = format!(
        "{}|{}|{}|{}",
        pipeline.id(),
        assignment.canonical(),
        objective,
        depth
    );
    let mut known = cache.map(|c| c.load(&key)).unwrap_or_default();
    let missing: Vec<Topic> = topics
        .iter()
        .filter(|t| !known.contains_key(&t.query_id))
        .cloned()
        .collect();
    if !missing.is_empty() {
        let run = pipeline.retrieve(assignment, &missing)?;
        let qids: Vec<String> = missing.iter().map(|t| t.query_id.clone()).collect();
        let view = qrels.view(&qids);
        let report = evaluate(&run, &view, &[objective], depth);
        let metric_key = objective.to_string();
        for qid in &qids {
            let value = report.per_query.get(qid).map(|v| v[&metric_key]);
            known.insert(qid.clone(), value);
        }
        if let Some(cache) = cache {
            cache.store(&key, &known)?;
        }
    }
    Ok(topics
        .iter()
        .filter_map(|t| {
            known
                .get(&t.query_id)
                .and_then(|v| *v)
                .map(|v| (t.query_id.clone(), v))
        })
        .collect())
}

/// Full-factorial cross-validated grid search maximizing the mean objective
/// (default Recall@1000 at the call sites). Folds must cover every topic;
/// each fold needs a non-empty training side. Ties between grid points go
/// to the earlier enumeration.
#[allow(clippy::too_many_arguments)]
pub fn grid_search_cv(
    pipeline: &dyn Pipeline,
    grid: &ParamGrid,
    folds: &FoldSet,
    topics: &[Topic],
    qrels: &dyn QrelsSource,
    objective: MetricSpec,
    depth: usize,
    cache: Option<&EvalCache>,
) -> Result<TuningResult> {
    for topic in topics {
        if !folds.contains(&topic.query_id) {
            return Err(Error::UnassignedTopic(topic.query_id.clone()));
        }
    }
    let points = grid.points();
    let mut outcomes = Vec::new();

    for fold in folds.fold_names() {
        let fold_queries = folds.queries(fold).expect("listed fold");
        let train: Vec<Topic> = topics
            .iter()
            .filter(|t| !fold_queries.contains(&t.query_id))
            .cloned()
            .collect();
        let held: Vec<Topic> = topics
            .iter()
            .filter(|t| fold_queries.contains(&t.query_id))
            .cloned()
            .collect();
        if held.is_empty() {
            continue;
        }
        if train.is_empty() {
            return Err(Error::EmptyTrainingFold(fold.to_string()));
        }

        qrels.begin_phase(CvPhase::Selection {
            fold: fold.to_string(),
        });
        let mut table: Vec<(ParamAssignment, f64)> = Vec::with_capacity(points.len());
        for assignment in &points {
            let values =
                evaluate_point(pipeline, assignment, &train, qrels, objective, depth, cache)?;
            let mean = if values.is_empty() {
                0.0
            } else {
                values.values().sum::<f64>() / values.len() as f64
            };
            table.push((assignment.clone(), mean));
        }
        let winner = table
            .iter()
            .enumerate()
            .max_by(|(ia, (_, a)), (ib, (_, b))| a.total_cmp(b).then(ib.cmp(ia)))
            .map(|(_, (assignment, _))| assignment.clone())
            .expect("grid has at least one point");

        qrels.begin_phase(CvPhase::Application {
            fold: fold.to_string(),
        });
        let run = pipeline.retrieve(&winner, &held)?;
        let held_ids: Vec<String> = held.iter().map(|t| t.query_id.clone()).collect();
        let view = qrels.view(&held_ids);
        let report = evaluate(&run, &view, &[objective], depth);
        let metric_key = objective.to_string();
        let held_out: BTreeMap<String, f64> = report
            .per_query
            .iter()
            .map(|(q, v)| (q.clone(), v[&metric_key]))
            .collect();

        outcomes.push(FoldOutcome {
            fold: fold.to_string(),
            winner,
            training_table: table,
            held_out,
            held_out_run: run,
        });
    }
    qrels.begin_phase(CvPhase::Idle);

    if outcomes.is_empty() {
        return Err(Error::Invalid("no fold contained any topic".to_string()));
    }

    let mut aggregate_per_query = BTreeMap::new();
    let mut aggregate_run = RankedRun::new(format!("{}-cv", pipeline.tag_stem()));
    for outcome in &outcomes {
        aggregate_per_query.extend(outcome.held_out.clone());
        aggregate_run.absorb(outcome.held_out_run.clone())?;
    }
    let aggregate_mean = if aggregate_per_query.is_empty() {
        0.0
    } else {
        aggregate_per_query.values().sum::<f64>() / aggregate_per_query.len() as f64
    };

    let mut param_spread = BTreeMap::new();
    for name in grid.param_names() {
        let winners: Vec<f64> = outcomes
            .iter()
            .filter_map(|o| o.winner.get(name).and_then(ParamValue::as_f64))
            .collect();
        if winners.len() == outcomes.len() && !winners.is_empty() {
            let max = winners.iter().cloned().fold(f64::MIN, f64::max);
            let min = winners.iter().cloned().fold(f64::MAX, f64::min);
            param_spread.insert(name.to_string(), max - min);
        }
    }

    Ok(TuningResult {
        objective,
        grid: grid.clone(),
        folds: outcomes,
        aggregate_per_query,
        aggregate_mean,
        aggregate_run,
        param_spread,
    })
}

/// Average the fold-winning parameters of the source sweeps and snap each
/// numeric parameter to the nearest grid value (ties toward the smaller
/// value). Non-numeric parameters must agree across folds.
pub fn zero_shot_transfer(sources: &[&TuningResult]) -> Result<ParamAssignment> {
    let Some(first) = sources.first() else {
        return Err(Error::Invalid("no source tuning results".to_string()));
    };
    for other in &sources[1..] {
        if other.grid != first.grid {
            return Err(Error::Invalid(
                "source tuning results use different grid schemas".to_string(),
            ));
        }
    }
    let winners: Vec<&ParamAssignment> = sources
        .iter()
        .flat_map(|s| s.folds.iter().map(|f| &f.winner))
        .collect();
    if winners.is_empty() {
        return Err(Error::Invalid(
            "source tuning results have no folds".to_string(),
        ));
    }

    let mut out = ParamAssignment::default();
    for name in first.grid.param_names() {
        let grid_values = first.grid.values_of(name).expect("listed param");
        let numeric = grid_values.iter().all(|v| v.as_f64().is_some());
        if numeric {
            let mean = winners
                .iter()
                .map(|w| {
                    w.get(name)
                        .and_then(ParamValue::as_f64)
                        .ok_or_else(|| Error::InvalidParam(format!("winner missing {name}")))
                })
                .sum::<Result<f64>>()?
                / winners.len() as f64;
            let snapped = grid_values
                .iter()
                .min_by(|a, b| {
                    let da = (a.as_f64().unwrap() - mean).abs();
                    let db = (b.as_f64().unwrap() - mean).abs();
                    da.total_cmp(&db)
                        .then_with(|| a.as_f64().unwrap().total_cmp(&b.as_f64().unwrap()))
                })
                .expect("non-empty grid");
            out.values.insert(name.to_string(), snapped.clone());
        } else {
            let first_value = winners[0]
                .get(name)
                .ok_or_else(|| Error::InvalidParam(format!("winner missing {name}")))?;
            if winners.iter().any(|w| w.get(name) != Some(first_value)) {
                return Err(Error::InvalidParam(format!(
                    "non-numeric parameter {name} differs across folds; override it explicitly"
                )));
            }
            out.values.insert(name.to_string(), first_value.clone());
        }
    }
    Ok(out)
}

/// Serializable summary of a tuning result (runs are written separately as
/// TREC files).
#[derive(Debug, Serialize)]
pub struct TuningReport {
    pub objective: String,
    pub folds: Vec<TuningFoldReport>,
    pub aggregate_mean: f64,
    pub aggregate_per_query: BTreeMap<String, f64>,
    pub param_spread: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
pub struct TuningFoldReport {
    pub fold: String,
    pub winner: BTreeMap<String, ParamValue>,
    pub training_table: Vec<(BTreeMap<String, ParamValue>, f64)>,
    pub held_out: BTreeMap<String, f64>,
}

impl TuningResult {
    pub fn report(&self) -> TuningReport {
        TuningReport {
            objective: self.objective.to_string(),
            folds: self
                .folds
                .iter()
                .map(|f| TuningFoldReport {
                    fold: f.fold.clone(),
                    winner: f.winner.values.clone(),
                    training_table: f
                        .training_table
                        .iter()
                        .map(|(a, v)| (a.values.clone(), *v))
                        .collect(),
                    held_out: f.held_out.clone(),
                })
                .collect(),
            aggregate_mean: self.aggregate_mean,
            aggregate_per_query: self.aggregate_per_query.clone(),
            param_spread: self.param_spread.clone(),
        }
    }
}

/// Write the JSON tuning report.
pub fn write_tuning_report(result: &TuningResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(&result.report()).expect("report serializes");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::run::ScoredItem;
    use std::cell::Cell;

    /// Ranks documents d1..dN; the parameter `boost` moves its matching
    /// document to the front, so different grid points rank differently.
    struct ToyPipeline {
        calls: Cell<usize>,
    }

    impl ToyPipeline {
        fn new() -> Self {
            ToyPipeline {
                calls: Cell::new(0),
            }
        }
    }

    impl Pipeline for ToyPipeline {
        fn id(&self) -> String {
            "toy".to_string()
        }

        fn retrieve(&self, assignment: &ParamAssignment, topics: &[Topic]) -> Result<RankedRun> {
            self.calls.set(self.calls.get() + 1);
            let boost = assignment.usize_of("boost")?;
            let mut run = RankedRun::new(format!("toy-b{boost}"));
            for topic in topics {
                let items: Vec<ScoredItem> = (1..=3)
                    .map(|d| {
                        let score = if d == boost { 10.0 } else { 1.0 / d as f64 };
                        ScoredItem::new(format!("d{d}"), score)
                    })
                    .collect();
                run.insert_query(topic.query_id.clone(), items, 10)?;
            }
            Ok(run)
        }
    }

    fn topic(id: &str) -> Topic {
        Topic {
            query_id: id.to_string(),
            text: id.to_string(),
        }
    }

    fn two_fold_setup() -> (Vec<Topic>, FoldSet, Qrels) {
        let topics: Vec<Topic> = ["q1", "q2", "q3", "q4"].iter().map(|q| topic(q)).collect();
        let folds = FoldSet::new([
            ("f1".to_string(), vec!["q1".to_string(), "q2".to_string()]),
            ("f2".to_string(), vec!["q3".to_string(), "q4".to_string()]),
        ])
        .unwrap();
        // d2 is the only relevant document everywhere, so boost=2 dominates
        let mut qrels = Qrels::new();
        for q in ["q1", "q2", "q3", "q4"] {
            qrels.add(q, "d2", 1);
        }
        (topics, folds, qrels)
    }

    fn boost_grid() -> ParamGrid {
        ParamGrid::new(vec![(
            "boost".to_string(),
            vec![ParamValue::Int(1), ParamValue::Int(2), ParamValue::Int(3)],
        )])
        .unwrap()
    }

    #[test]
    fn grid_enumeration_order_is_factorial_last_fastest() {
        let grid = ParamGrid::new(vec![
            (
                "a".to_string(),
                vec![ParamValue::Int(1), ParamValue::Int(2)],
            ),
            (
                "b".to_string(),
                vec![ParamValue::Int(10), ParamValue::Int(20)],
            ),
        ])
        .unwrap();
        let points = grid.points();
        assert_eq!(points.len(), 4);
        let canon: Vec<String> = points.iter().map(|p| p.canonical()).collect();
        assert_eq!(canon, ["a=1,b=10", "a=1,b=20", "a=2,b=10", "a=2,b=20"]);
    }

    #[test]
    fn dominant_point_wins_every_fold() {
        let (topics, folds, qrels) = two_fold_setup();
        let pipeline = ToyPipeline::new();
        let result = grid_search_cv(
            &pipeline,
            &boost_grid(),
            &folds,
            &topics,
            &qrels,
            MetricSpec::Ndcg { k: 3 },
            10,
            None,
        )
        .unwrap();
        assert_eq!(result.folds.len(), 2);
        for fold in &result.folds {
            assert_eq!(fold.winner.get("boost"), Some(&ParamValue::Int(2)));
            // winner attains the max of its training table
            let best = fold
                .training_table
                .iter()
                .map(|(_, v)| *v)
                .fold(f64::MIN, f64::max);
            let winner_score = fold
                .training_table
                .iter()
                .find(|(a, _)| a == &fold.winner)
                .unwrap()
                .1;
            assert_eq!(best, winner_score);
        }
        assert_eq!(result.aggregate_per_query.len(), 4);
        assert!((result.aggregate_mean - 1.0).abs() < 1e-12);
        assert_eq!(result.param_spread["boost"], 0.0);
    }

    #[test]
    fn singleton_grid_equals_plain_evaluation() {
        let (topics, folds, qrels) = two_fold_setup();
        let pipeline = ToyPipeline::new();
        let grid = ParamGrid::singleton(vec![("boost".to_string(), ParamValue::Int(3))]);
        let result = grid_search_cv(
            &pipeline,
            &grid,
            &folds,
            &topics,
            &qrels,
            MetricSpec::Recall { k: 2 },
            10,
            None,
        )
        .unwrap();
        let assignment = grid.points().pop().unwrap();
        let run = pipeline.retrieve(&assignment, &topics).unwrap();
        let report = evaluate(&run, &qrels, &[MetricSpec::Recall { k: 2 }], 10);
        for (q, v) in &report.per_query {
            assert_eq!(result.aggregate_per_query[q], v["recall@2"]);
        }
        assert_eq!(result.aggregate_mean, report.means["recall@2"]);
    }

    #[test]
    fn per_fold_winners_can_differ() {
        // q1/q2 prefer d1, q3/q4 prefer d3: training on the complement picks
        // the other fold's favourite.
        let topics: Vec<Topic> = ["q1", "q2", "q3", "q4"].iter().map(|q| topic(q)).collect();
        let folds = FoldSet::new([
            ("f1".to_string(), vec!["q1".to_string(), "q2".to_string()]),
            ("f2".to_string(), vec!["q3".to_string(), "q4".to_string()]),
        ])
        .unwrap();
        let mut qrels = Qrels::new();
        qrels.add("q1", "d1", 1);
        qrels.add("q2", "d1", 1);
        qrels.add("q3", "d3", 1);
        qrels.add("q4", "d3", 1);
        let pipeline = ToyPipeline::new();
        let result = grid_search_cv(
            &pipeline,
            &boost_grid(),
            &folds,
            &topics,
            &qrels,
            MetricSpec::Ndcg { k: 3 },
            10,
            None,
        )
        .unwrap();
        // training for f1 is q3/q4 -> winner boost=3; for f2 -> boost=1
        assert_eq!(
            result.folds[0].winner.get("boost"),
            Some(&ParamValue::Int(3))
        );
        assert_eq!(
            result.folds[1].winner.get("boost"),
            Some(&ParamValue::Int(1))
        );
        assert_eq!(result.param_spread["boost"], 2.0);
    }

    #[test]
    fn selection_never_touches_held_out_queries() {
        let (topics, folds, qrels) = two_fold_setup();
        let tracker = TrackingQrels::new(&qrels);
        let pipeline = ToyPipeline::new();
        grid_search_cv(
            &pipeline,
            &boost_grid(),
            &folds,
            &topics,
            &qrels.view(&["q1".into(), "q2".into(), "q3".into(), "q4".into()]),
            MetricSpec::Ndcg { k: 3 },
            10,
            None,
        )
        .unwrap();
        // run again through the tracker
        grid_search_cv(
            &pipeline,
            &boost_grid(),
            &folds,
            &topics,
            &tracker,
            MetricSpec::Ndcg { k: 3 },
            10,
            None,
        )
        .unwrap();
        for fold in ["f1", "f2"] {
            let held = folds.queries(fold).unwrap();
            for q in tracker.selection_accesses(fold) {
                assert!(!held.contains(&q), "selection for {fold} touched {q}");
            }
        }
        assert!(!tracker.accesses().is_empty());
    }

    #[test]
    fn unassigned_topic_is_an_error() {
        let (mut topics, folds, qrels) = two_fold_setup();
        topics.push(topic("q9"));
        let pipeline = ToyPipeline::new();
        let err = grid_search_cv(
            &pipeline,
            &boost_grid(),
            &folds,
            &topics,
            &qrels,
            MetricSpec::Map,
            10,
            None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("q9"), "{err}");
    }

    #[test]
    fn single_fold_covering_everything_has_no_training_side() {
        let (topics, _, qrels) = two_fold_setup();
        let folds = FoldSet::new([(
            "all".to_string(),
            topics.iter().map(|t| t.query_id.clone()).collect(),
        )])
        .unwrap();
        let pipeline = ToyPipeline::new();
        let err = grid_search_cv(
            &pipeline,
            &boost_grid(),
            &folds,
            &topics,
            &qrels,
            MetricSpec::Map,
            10,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::EmptyTrainingFold(_)));
    }

    #[test]
    fn cache_resumes_without_recomputing_selection() {
        let (topics, folds, qrels) = two_fold_setup();
        let dir = tempfile::tempdir().unwrap();
        let cache = EvalCache::new(dir.path()).unwrap();

        let first = ToyPipeline::new();
        let a = grid_search_cv(
            &first,
            &boost_grid(),
            &folds,
            &topics,
            &qrels,
            MetricSpec::Ndcg { k: 3 },
            10,
            Some(&cache),
        )
        .unwrap();
        let first_calls = first.calls.get();

        let second = ToyPipeline::new();
        let b = grid_search_cv(
            &second,
            &boost_grid(),
            &folds,
            &topics,
            &qrels,
            MetricSpec::Ndcg { k: 3 },
            10,
            Some(&cache),
        )
        .unwrap();
        // only the two apply-phase retrievals remain
        assert_eq!(second.calls.get(), 2);
        assert!(first_calls > second.calls.get());
        assert_eq!(a.aggregate_per_query, b.aggregate_per_query);
        assert_eq!(a.folds[0].training_table, b.folds[0].training_table);
    }

    #[test]
    fn zero_shot_single_source_round_trips_winner() {
        let (topics, folds, qrels) = two_fold_setup();
        let pipeline = ToyPipeline::new();
        let result = grid_search_cv(
            &pipeline,
            &boost_grid(),
            &folds,
            &topics,
            &qrels,
            MetricSpec::Ndcg { k: 3 },
            10,
            None,
        )
        .unwrap();
        let transferred = zero_shot_transfer(&[&result]).unwrap();
        assert_eq!(transferred.get("boost"), Some(&ParamValue::Int(2)));
    }

    #[test]
    fn zero_shot_averages_and_snaps_to_grid() {
        let grid = ParamGrid::new(vec![(
            "beta".to_string(),
            (1..=9)
                .map(|i| ParamValue::Float(f64::from(i) / 10.0))
                .collect(),
        )])
        .unwrap();
        let make = |winners: &[f64]| TuningResult {
            objective: MetricSpec::Recall { k: 1000 },
            grid: grid.clone(),
            folds: winners
                .iter()
                .enumerate()
                .map(|(i, &b)| FoldOutcome {
                    fold: format!("f{i}"),
                    winner: ParamAssignment {
                        values: BTreeMap::from([("beta".to_string(), ParamValue::Float(b))]),
                    },
                    training_table: Vec::new(),
                    held_out: BTreeMap::new(),
                    held_out_run: RankedRun::new("t"),
                })
                .collect(),
            aggregate_per_query: BTreeMap::new(),
            aggregate_mean: 0.0,
            aggregate_run: RankedRun::new("t"),
            param_spread: BTreeMap::new(),
        };
        // winners 0.3 and 0.5 average to 0.4
        let r = make(&[0.3, 0.5]);
        let out = zero_shot_transfer(&[&r]).unwrap();
        assert_eq!(out.get("beta"), Some(&ParamValue::Float(0.4)));
        // equidistant mean snaps toward the smaller grid value
        let r2 = make(&[0.2, 0.5]); // mean 0.35, between 0.3 and 0.4
        let out2 = zero_shot_transfer(&[&r2]).unwrap();
        assert_eq!(out2.get("beta"), Some(&ParamValue::Float(0.3)));
        // constant winners transfer verbatim
        let r3 = make(&[0.7, 0.7, 0.7]);
        let out3 = zero_shot_transfer(&[&r3]).unwrap();
        assert_eq!(out3.get("beta"), Some(&ParamValue::Float(0.7)));
    }

    #[test]
    fn zero_shot_rejects_disagreeing_string_params() {
        let grid = ParamGrid::new(vec![(
            "gen".to_string(),
            vec![
                ParamValue::Str("cot".to_string()),
                ParamValue::Str("news".to_string()),
            ],
        )])
        .unwrap();
        let make = |value: &str, fold: &str| FoldOutcome {
            fold: fold.to_string(),
            winner: ParamAssignment {
                values: BTreeMap::from([("gen".to_string(), ParamValue::Str(value.to_string()))]),
            },
            training_table: Vec::new(),
            held_out: BTreeMap::new(),
            held_out_run: RankedRun::new("t"),
        };
        let result = TuningResult {
            objective: MetricSpec::Recall { k: 1000 },
            grid: grid.clone(),
            folds: vec![make("cot", "f1"), make("news", "f2")],
            aggregate_per_query: BTreeMap::new(),
            aggregate_mean: 0.0,
            aggregate_run: RankedRun::new("t"),
            param_spread: BTreeMap::new(),
        };
        let err = zero_shot_transfer(&[&result]).unwrap_err();
        assert!(err.to_string().contains("gen"), "{err}");
    }

    #[test]
    fn report_serializes() {
        let (topics, folds, qrels) = two_fold_setup();
        let pipeline = ToyPipeline::new();
        let result = grid_search_cv(
            &pipeline,
            &boost_grid(),
            &folds,
            &topics,
            &qrels,
            MetricSpec::Ndcg { k: 3 },
            10,
            None,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        write_tuning_report(&result, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"objective\": \"ndcg@3\""));
        assert!(text.contains("\"boost\": 2"));
    }
}
