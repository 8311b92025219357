//! Effectiveness metrics (MAP, nDCG@k, Recall@k) and the paired t-test.
//!
//! Evaluation is driven by the judged queries: every qrels query with at
//! least one relevant document is scored, using an empty ranking when the
//! run has nothing for it. Queries with no relevant documents are skipped
//! and reported as such, as are run queries without judgments. MAP and
//! Recall binarize at grade >= 1; nDCG uses gain `2^grade - 1` with
//! discount `1 / log2(rank + 1)`, normalized by the ideal ranking.
//!
//! Rankings are canonicalized (score descending, ties by ascending doc id)
//! before metrics are computed, so permuting tied documents cannot change
//! any value.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::qrels::Qrels;
use crate::run::{sort_canonical, RankedRun, ScoredItem};
use crate::stats::student_t_two_sided_p;

/// A metric with an optional rank cutoff, e.g. `map`, `ndcg@10`,
/// `recall@1000`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MetricSpec {
    Map,
    Ndcg { k: usize },
    Recall { k: usize },
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricSpec::Map => write!(f, "map"),
            MetricSpec::Ndcg { k } => write!(f, "ndcg@{k}"),
            MetricSpec::Recall { k } => write!(f, "recall@{k}"),
        }
    }
}

impl FromStr for MetricSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_lowercase();
        let (name, cutoff) = match lower.split_once('@') {
            Some((name, k)) => {
                let k: usize = k
                    .parse()
                    .map_err(|_| Error::InvalidParam(format!("bad metric cutoff in {s}")))?;
                if k == 0 {
                    return Err(Error::InvalidParam(format!("cutoff must be >= 1 in {s}")));
                }
                (name.to_string(), Some(k))
            }
            None => (lower, None),
        };
        match (name.as_str(), cutoff) {
            ("map", None) => Ok(MetricSpec::Map),
            ("ndcg", Some(k)) => Ok(MetricSpec::Ndcg { k }),
            ("recall", Some(k)) => Ok(MetricSpec::Recall { k }),
            ("ndcg", None) | ("recall", None) => Err(Error::InvalidParam(format!(
                "{s} needs a cutoff, e.g. {s}@10"
            ))),
            _ => Err(Error::InvalidParam(format!("unknown metric {s}"))),
        }
    }
}

/// Parse a comma-separated metric list, e.g. `map,ndcg@10,recall@1000`.
pub fn parse_metrics(s: &str) -> Result<Vec<MetricSpec>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(MetricSpec::from_str)
        .collect()
}

/// Per-query and mean metric values for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub run_tag: String,
    pub metrics: Vec<MetricSpec>,
    /// query id -> metric name -> value
    pub per_query: BTreeMap<String, BTreeMap<String, f64>>,
    /// metric name -> mean over evaluated queries
    pub means: BTreeMap<String, f64>,
    /// (query id, reason) for queries excluded from the means
    pub skipped: Vec<(String, String)>,
}

impl EvalReport {
    pub fn mean(&self, metric: &MetricSpec) -> Option<f64> {
        self.means.get(&metric.to_string()).copied()
    }

    pub fn num_evaluated(&self) -> usize {
        self.per_query.len()
    }
}

fn average_precision(ranking: &[ScoredItem], grades: &BTreeMap<String, u32>) -> f64 {
    let num_relevant = grades.values().filter(|&&g| g >= 1).count();
    if num_relevant == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, item) in ranking.iter().enumerate() {
        if grades.get(&item.item_id).copied().unwrap_or(0) >= 1 {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / num_relevant as f64
}

fn recall_at(ranking: &[ScoredItem], grades: &BTreeMap<String, u32>, k: usize) -> f64 {
    let num_relevant = grades.values().filter(|&&g| g >= 1).count();
    if num_relevant == 0 {
        return 0.0;
    }
    let hits = ranking
        .iter()
        .take(k)
        .filter(|item| grades.get(&item.item_id).copied().unwrap_or(0) >= 1)
        .count();
    hits as f64 / num_relevant as f64
}

fn dcg(gains: impl Iterator<Item = f64>) -> f64 {
    gains
        .enumerate()
        .map(|(i, g)| g / ((i + 2) as f64).log2())
        .sum()
}

fn ndcg_at(ranking: &[ScoredItem], grades: &BTreeMap<String, u32>, k: usize) -> f64 {
    let gain = |g: u32| (2f64.powi(g as i32)) - 1.0;
    let actual = dcg(ranking
        .iter()
        .take(k)
        .map(|item| gain(grades.get(&item.item_id).copied().unwrap_or(0))));
    let mut ideal_gains: Vec<f64> = grades.values().map(|&g| gain(g)).collect();
    ideal_gains.sort_by(|a, b| b.total_cmp(a));
    let ideal = dcg(ideal_gains.into_iter().take(k));
    if ideal == 0.0 {
        0.0
    } else {
        actual / ideal
    }
}

fn metric_value(spec: &MetricSpec, ranking: &[ScoredItem], grades: &BTreeMap<String, u32>) -> f64 {
    match spec {
        MetricSpec::Map => average_precision(ranking, grades),
        MetricSpec::Ndcg { k } => ndcg_at(ranking, grades, *k),
        MetricSpec::Recall { k } => recall_at(ranking, grades, *k),
    }
}

/// Evaluate a run against qrels at the given depth (rankings are truncated
/// to `depth` first). Means are computed in ascending query-id order.
pub fn evaluate(run: &RankedRun, qrels: &Qrels, specs: &[MetricSpec], depth: usize) -> EvalReport {
    let mut report = EvalReport {
        run_tag: run.run_tag.clone(),
        metrics: specs.to_vec(),
        per_query: BTreeMap::new(),
        means: BTreeMap::new(),
        skipped: Vec::new(),
    };

    for query_id in qrels.query_ids() {
        let grades = qrels.grades(query_id).expect("listed query");
        if !grades.values().any(|&g| g >= 1) {
            report
                .skipped
                .push((query_id.to_string(), "no relevant documents".to_string()));
            continue;
        }
        let mut ranking: Vec<ScoredItem> = run.get(query_id).unwrap_or(&[]).to_vec();
        sort_canonical(&mut ranking);
        ranking.truncate(depth);
        let values: BTreeMap<String, f64> = specs
            .iter()
            .map(|spec| (spec.to_string(), metric_value(spec, &ranking, grades)))
            .collect();
        report.per_query.insert(query_id.to_string(), values);
    }
    for query_id in run.query_ids() {
        if qrels.grades(query_id).is_none() {
            report
                .skipped
                .push((query_id.to_string(), "no relevance judgments".to_string()));
        }
    }
    report.skipped.sort();

    let n = report.per_query.len();
    if n > 0 {
        for spec in specs {
            let key = spec.to_string();
            let sum: f64 = report.per_query.values().map(|v| v[&key]).sum();
            report.means.insert(key, sum / n as f64);
        }
    }
    report
}

/// Outcome of a two-sided paired t-test between two evaluation reports.
#[derive(Debug, Clone, PartialEq)]
pub struct TTestOutcome {
    pub t: f64,
    pub p: f64,
    pub significant: bool,
    /// Zero variance with a non-zero mean difference: p collapses to 0.
    pub degenerate: bool,
    pub n: usize,
    pub mean_diff: f64,
    /// Queries present in only one of the two reports.
    pub mismatched: usize,
}

/// Paired t-test over the per-query values of `metric` shared by both
/// reports. Needs at least two shared queries; significance is two-sided at
/// p < 0.05.
pub fn paired_ttest(a: &EvalReport, b: &EvalReport, metric: &MetricSpec) -> Result<TTestOutcome> {
    let key = metric.to_string();
    let mut diffs = Vec::new();
    let mut mismatched = 0usize;
    for (query_id, values) in &a.per_query {
        match b.per_query.get(query_id) {
            Some(other) => diffs.push(values[&key] - other[&key]),
            None => mismatched += 1,
        }
    }
    mismatched += b
        .per_query
        .keys()
        .filter(|q| !a.per_query.contains_key(*q))
        .count();

    let n = diffs.len();
    if n < 2 {
        return Err(Error::NotEnoughQueries);
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n as f64 - 1.0);
    let sd = var.sqrt();

    if sd == 0.0 {
        if mean == 0.0 {
            return Ok(TTestOutcome {
                t: 0.0,
                p: 1.0,
                significant: false,
                degenerate: false,
                n,
                mean_diff: mean,
                mismatched,
            });
        }
        return Ok(TTestOutcome {
            t: if mean > 0.0 {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            },
            p: 0.0,
            significant: true,
            degenerate: true,
            n,
            mean_diff: mean,
            mismatched,
        });
    }

    let t = mean / (sd / (n as f64).sqrt());
    let p = student_t_two_sided_p(t, (n - 1) as f64);
    Ok(TTestOutcome {
        t,
        p,
        significant: p < 0.05,
        degenerate: false,
        n,
        mean_diff: mean,
        mismatched,
    })
}

/// Write a report as TSV: one `query_id<TAB>metric<TAB>value` line per
/// query, a summary block keyed `all`, and a trailing comment per skipped
/// query.
pub fn write_eval_report(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for (query_id, values) in &report.per_query {
        for (metric, value) in values {
            out.push_str(&format!("{query_id}\t{metric}\t{value:.4}\n"));
        }
    }
    for (metric, mean) in &report.means {
        out.push_str(&format!("all\t{metric}\t{mean:.4}\n"));
    }
    for (query_id, reason) in &report.skipped {
        out.push_str(&format!("# skipped {query_id}: {reason}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
