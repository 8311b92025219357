//! graft: retrieval experiments with pseudo- and generative-relevance
//! feedback from the command line.

mod config;
mod experiment;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use graft::corpus::read_topics;
use graft::eval::{evaluate, paired_ttest, parse_metrics, write_eval_report, MetricSpec};
use graft::feedback::write_expanded_queries;
use graft::fusion::{wrrf, WrrfParams, DEFAULT_RRF_K};
use graft::pipelines::{SparseFeedback, SparsePipeline};
use graft::qrels::read_qrels;
use graft::run::{read_run, write_run, DEFAULT_DEPTH};
use graft::tune::{grid_search_cv, write_tuning_report, EvalCache, ParamValue};

use config::{
    assignment_with, default_params, load_folds, load_qrels, load_topics, parse_feedback,
    parse_paradigm, FeedbackKind, LoadedData, Paradigm, TuneConfig,
};

#[derive(Parser)]
#[command(
    name = "graft",
    version,
    about = "Sparse, dense and learned sparse retrieval with pseudo- and generative-relevance feedback"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Build an inverted index from a JSONL corpus.
    Index(IndexArgs),
    /// Produce a TREC run for one paradigm and feedback configuration.
    Retrieve(RetrieveArgs),
    /// Fuse a PRF run and a GRF run with weighted reciprocal rank fusion.
    Fuse(FuseArgs),
    /// Evaluate a run against qrels.
    Eval(EvalArgs),
    /// Paired t-test between two runs on one metric.
    Ttest(TtestArgs),
    /// Cross-validated grid search over a parameter grid.
    Tune(TuneArgs),
    /// Full recipe: baseline, PRF, GRF, fusion, evaluation, t-tests.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct IndexArgs {
    /// Corpus file, one JSON document per line.
    #[arg(long)]
    corpus: PathBuf,
    /// Output index directory.
    #[arg(long)]
    out: PathBuf,
    /// Stopword file (one word per line); defaults to the built-in list.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Overwrite an existing output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct RetrieveArgs {
    /// Retrieval paradigm.
    #[arg(long, value_enum)]
    paradigm: Paradigm,
    /// Feedback configuration.
    #[arg(long, value_enum, default_value = "none")]
    feedback: FeedbackKind,
    /// Topics file (`query_id<TAB>text`).
    #[arg(long)]
    topics: PathBuf,
    /// Output run file.
    #[arg(long)]
    out: PathBuf,
    /// Index directory (sparse paradigm).
    #[arg(long)]
    index: Option<PathBuf>,
    /// Vector store directory (dense and learned-sparse paradigms).
    #[arg(long)]
    doc_vectors: Option<PathBuf>,
    /// Query vectors / representations file.
    #[arg(long)]
    query_vectors: Option<PathBuf>,
    /// Generated documents file (sparse GRF).
    #[arg(long)]
    gen_docs: Option<PathBuf>,
    /// Generated vectors / representations file (dense and learned-sparse GRF).
    #[arg(long)]
    gen_vectors: Option<PathBuf>,
    /// Keep only generated records of this type.
    #[arg(long)]
    gen_type: Option<String>,
    /// Stopword file; must match the index analyzer.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Run depth.
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    depth: usize,
    /// Override the self-describing run tag.
    #[arg(long)]
    run_tag: Option<String>,
    /// Write expanded queries to this debug file (sparse feedback only).
    #[arg(long)]
    dump_expanded: Option<PathBuf>,
    #[command(flatten)]
    params: ParamFlags,
    /// Overwrite an existing output file.
    #[arg(long)]
    force: bool,
}

/// Hyperparameter flags shared by retrieve; which ones apply depends on
/// the paradigm and feedback kind.
#[derive(Args)]
struct ParamFlags {
    #[arg(long)]
    k1: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    fb_docs: Option<i64>,
    #[arg(long)]
    fb_terms: Option<i64>,
    #[arg(long)]
    orig_weight: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    theta: Option<i64>,
}

impl ParamFlags {
    fn overrides(&self) -> Vec<(String, ParamValue)> {
        let mut out = Vec::new();
        for (name, v) in [
            ("k1", self.k1),
            ("b", self.b),
            ("orig_weight", self.orig_weight),
            ("alpha", self.alpha),
            ("beta", self.beta),
        ] {
            if let Some(v) = v {
                out.push((name.to_string(), ParamValue::Float(v)));
            }
        }
        for (name, v) in [
            ("fb_docs", self.fb_docs),
            ("fb_terms", self.fb_terms),
            ("theta", self.theta),
        ] {
            if let Some(v) = v {
                out.push((name.to_string(), ParamValue::Int(v)));
            }
        }
        out
    }
}

#[derive(Args)]
struct FuseArgs {
    /// PRF run file.
    #[arg(long)]
    prf_run: PathBuf,
    /// GRF run file.
    #[arg(long)]
    grf_run: PathBuf,
    /// Output run file.
    #[arg(long)]
    out: PathBuf,
    /// Weight of the PRF run; the GRF run gets 1 - lambda.
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Rank-shift constant.
    #[arg(long, default_value_t = DEFAULT_RRF_K)]
    rrf_k: u32,
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    depth: usize,
    #[arg(long)]
    run_tag: Option<String>,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Run file to evaluate.
    #[arg(long)]
    run: PathBuf,
    /// TREC qrels file.
    #[arg(long)]
    qrels: PathBuf,
    /// Comma-separated metrics.
    #[arg(long, default_value = "map,ndcg@10,recall@1000")]
    metrics: String,
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    depth: usize,
    /// Write the per-query TSV report here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct TtestArgs {
    #[arg(long)]
    run_a: PathBuf,
    #[arg(long)]
    run_b: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    /// Metric to compare, e.g. recall@1000.
    #[arg(long, default_value = "recall@1000")]
    metric: String,
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    depth: usize,
}

#[derive(Args)]
struct TuneArgs {
    /// Tuning configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the report and per-fold runs.
    #[arg(long)]
    out: PathBuf,
    /// Override the folds file from the config.
    #[arg(long)]
    folds: Option<PathBuf>,
    /// Override the qrels file from the config.
    #[arg(long)]
    qrels: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overwrite existing experiment output.
    #[arg(long)]
    force: bool,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Index(args) => cmd_index(args),
        Command::Retrieve(args) => cmd_retrieve(args),
        Command::Fuse(args) => cmd_fuse(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Ttest(args) => cmd_ttest(args),
        Command::Tune(args) => cmd_tune(args),
        Command::Experiment(args) => experiment::run_experiment(&args.config, args.force),
    }
}

/// Refuse to write into an existing non-empty directory unless forced.
pub(crate) fn prepare_out_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let occupied = dir
            .read_dir()
            .map(|mut d| d.next().is_some())
            .unwrap_or(false);
        if occupied && !force {
            bail!(
                "output directory {} already exists; pass --force to overwrite",
                dir.display()
            );
        }
    }
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

/// Refuse to replace an existing file unless forced.
fn prepare_out_file(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        bail!(
            "output file {} already exists; pass --force to overwrite",
            path.display()
        );
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    Ok(())
}

/// Evaluation cache directory: the GRAFT_CACHE_DIR environment variable
/// wins, otherwise a `cache` directory under the output.
pub(crate) fn cache_dir_for(out_dir: &Path) -> PathBuf {
    std::env::var_os("GRAFT_CACHE_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| out_dir.join("cache"))
}

fn cmd_index(args: IndexArgs) -> Result<()> {
    prepare_out_dir(&args.out, args.force)?;
    experiment::build_sparse_index(&args.corpus, args.stopwords.as_deref(), &args.out)?;
    Ok(())
}

fn cmd_retrieve(args: RetrieveArgs) -> Result<()> {
    prepare_out_file(&args.out, args.force)?;
    let data = config::DataSection {
        topics: Some(args.topics.clone()),
        index: args.index.clone(),
        store: args.doc_vectors.clone(),
        query_vectors: args.query_vectors.clone(),
        gen_docs: args.gen_docs.clone(),
        gen_vectors: args.gen_vectors.clone(),
        gen_type: args.gen_type.clone(),
        stopwords: args.stopwords.clone(),
        ..Default::default()
    };
    let topics = read_topics(&args.topics)?;
    let loaded = LoadedData::load(&data, args.paradigm, args.feedback)?;
    let assignment = assignment_with(
        default_params(args.paradigm, args.feedback),
        args.params.overrides(),
    );

    let mut run = if let (Paradigm::Sparse, Some(dump)) = (args.paradigm, &args.dump_expanded) {
        let index = loaded.index.as_ref().expect("sparse data loaded");
        let feedback = match args.feedback {
            FeedbackKind::None => SparseFeedback::None,
            FeedbackKind::Prf => SparseFeedback::Rm3,
            FeedbackKind::Grf => SparseFeedback::Grf {
                gen_docs: loaded.gen_docs.as_ref().expect("gen docs loaded"),
            },
        };
        let pipeline = SparsePipeline {
            index,
            feedback,
            depth: args.depth,
        };
        let (run, queries) = pipeline.retrieve_with_queries(&assignment, &topics)?;
        prepare_out_file(dump, args.force)?;
        write_expanded_queries(dump, &queries)?;
        run
    } else {
        if args.dump_expanded.is_some() {
            bail!("--dump-expanded applies to the sparse paradigm only");
        }
        let pipeline = loaded.pipeline(args.paradigm, args.feedback, args.depth)?;
        pipeline.retrieve(&assignment, &topics)?
    };

    if let Some(tag) = args.run_tag {
        run = run.with_tag(tag);
    }
    write_run(&run, &args.out)?;
    println!(
        "wrote {} ({} queries, depth {})",
        args.out.display(),
        run.num_queries(),
        run.max_depth()
    );
    Ok(())
}

fn cmd_fuse(args: FuseArgs) -> Result<()> {
    prepare_out_file(&args.out, args.force)?;
    let prf = read_run(&args.prf_run)?;
    let grf = read_run(&args.grf_run)?;
    let params = WrrfParams {
        lambda: args.lambda,
        k: args.rrf_k,
    };
    let mut fused = wrrf(&prf, &grf, params, args.depth)?;
    if let Some(tag) = args.run_tag {
        fused = fused.with_tag(tag);
    }
    write_run(&fused, &args.out)?;
    println!("wrote {} ({})", args.out.display(), fused.run_tag);
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let run = read_run(&args.run)?;
    let qrels = read_qrels(&args.qrels)?;
    let metrics = parse_metrics(&args.metrics)?;
    let report = evaluate(&run, &qrels, &metrics, args.depth);
    for metric in &metrics {
        println!("{metric}\t{:.4}", report.mean(metric).unwrap_or(0.0));
    }
    if !report.skipped.is_empty() {
        println!("# {} queries skipped", report.skipped.len());
    }
    if let Some(out) = args.out {
        prepare_out_file(&out, args.force)?;
        write_eval_report(&report, &out)?;
        println!("report written to {}", out.display());
    }
    Ok(())
}

fn cmd_ttest(args: TtestArgs) -> Result<()> {
    let run_a = read_run(&args.run_a)?;
    let run_b = read_run(&args.run_b)?;
    let qrels = read_qrels(&args.qrels)?;
    let metric: MetricSpec = args.metric.parse()?;
    let report_a = evaluate(&run_a, &qrels, &[metric], args.depth);
    let report_b = evaluate(&run_b, &qrels, &[metric], args.depth);
    let outcome = paired_ttest(&report_a, &report_b, &metric)?;
    println!(
        "{} vs {} on {metric}: mean diff {:+.4} over {} queries",
        run_a.run_tag, run_b.run_tag, outcome.mean_diff, outcome.n
    );
    println!(
        "t={:.4} p={:.6} significant={}{}",
        outcome.t,
        outcome.p,
        outcome.significant,
        if outcome.degenerate {
            " (degenerate variance)"
        } else {
            ""
        }
    );
    if outcome.mismatched > 0 {
        println!(
            "# warning: {} queries present in only one run",
            outcome.mismatched
        );
    }
    Ok(())
}

fn cmd_tune(args: TuneArgs) -> Result<()> {
    let mut config = TuneConfig::load(&args.config)?;
    if let Some(folds) = args.folds {
        config.data.folds = Some(folds);
    }
    if let Some(qrels) = args.qrels {
        config.data.qrels = Some(qrels);
    }
    prepare_out_dir(&args.out, args.force)?;

    let objective = config.objective()?;
    let depth = config.depth.unwrap_or(DEFAULT_DEPTH);
    let grid = config.grid()?;
    let topics = load_topics(&config.data)?;
    let qrels = load_qrels(&config.data)?;
    let folds = load_folds(&config.data)?;
    let cache = EvalCache::new(cache_dir_for(&args.out))?;

    let fusion_mode = config.pipeline.paradigm == "fusion";
    let loaded = if fusion_mode {
        LoadedData::load_fusion(&config.data)?
    } else {
        let paradigm = parse_paradigm(&config.pipeline.paradigm)?;
        let feedback = parse_feedback(config.pipeline.feedback.as_deref().unwrap_or("none"))?;
        LoadedData::load(&config.data, paradigm, feedback)?
    };
    let pipeline = if fusion_mode {
        loaded.fusion_pipeline(DEFAULT_RRF_K, depth)?
    } else {
        let paradigm = parse_paradigm(&config.pipeline.paradigm)?;
        let feedback = parse_feedback(config.pipeline.feedback.as_deref().unwrap_or("none"))?;
        loaded.pipeline(paradigm, feedback, depth)?
    };

    let result = grid_search_cv(
        pipeline.as_ref(),
        &grid,
        &folds,
        &topics,
        &qrels,
        objective,
        depth,
        Some(&cache),
    )?;

    write_tuning_report(&result, args.out.join("tuning.json"))?;
    for fold in &result.folds {
        write_run(
            &fold.held_out_run,
            args.out.join(format!("fold_{}.run", fold.fold)),
        )?;
    }
    write_run(&result.aggregate_run, args.out.join("aggregate.run"))?;

    for fold in &result.folds {
        println!("fold {}: winner {}", fold.fold, fold.winner);
    }
    for (param, spread) in &result.param_spread {
        println!("spread {param}: {spread}");
    }
    println!("aggregate {objective}: {:.4}", result.aggregate_mean);
    println!("tuning output written to {}", args.out.display());
    Ok(())
}
