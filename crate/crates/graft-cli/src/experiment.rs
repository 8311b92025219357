//! The `experiment` meta-command: baseline, PRF and GRF runs, weighted
//! fusion of the two feedback runs, evaluation, and significance tests,
//! all driven by one config file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use graft::analysis::TokenPipeline;
use graft::corpus::read_corpus;
use graft::eval::{evaluate, paired_ttest, write_eval_report, EvalReport, MetricSpec};
use graft::fusion::{wrrf, WrrfParams, DEFAULT_RRF_K};
use graft::index::{build_index, InvertedIndex};
use graft::pipelines::FusionPipeline;
use graft::qrels::Qrels;
use graft::run::{write_run, RankedRun, DEFAULT_DEPTH};
use graft::tune::{
    grid_search_cv, write_tuning_report, EvalCache, ParamGrid, ParamValue, TuningResult,
};

use crate::config::{
    assignment_with, default_params, load_folds, load_qrels, load_topics, parse_paradigm,
    ExperimentConfig, FeedbackKind, LambdaSpec, LoadedData, Paradigm,
};
use crate::{cache_dir_for, prepare_out_dir};

struct Stage {
    label: &'static str,
    run: RankedRun,
    report: EvalReport,
}

pub fn run_experiment(config_path: &Path, force: bool) -> Result<()> {
    let config = ExperimentConfig::load(config_path)?;
    if let Some(name) = &config.name {
        println!("experiment: {name}");
    }
    let paradigm = parse_paradigm(&config.paradigm)?;
    let depth = config.depth.unwrap_or(DEFAULT_DEPTH);
    let metrics = config.metrics()?;
    let ttest_metric = config.ttest_metric()?;
    if !metrics.contains(&ttest_metric) {
        bail!("ttest_metric {ttest_metric} must be listed in metrics");
    }

    prepare_out_dir(&config.out_dir, force)?;
    let runs_dir = config.out_dir.join("runs");
    let reports_dir = config.out_dir.join("reports");
    fs::create_dir_all(&runs_dir)?;
    fs::create_dir_all(&reports_dir)?;

    let mut data_section = config.data;
    // a sparse experiment may start from a raw corpus
    if paradigm == Paradigm::Sparse && data_section.index.is_none() {
        let corpus = data_section
            .corpus
            .as_ref()
            .context("configuration needs data.index or data.corpus")?;
        let index_dir = config.out_dir.join("index");
        build_sparse_index(corpus, data_section.stopwords.as_deref(), &index_dir)?;
        data_section.index = Some(index_dir);
    }

    let topics = load_topics(&data_section)?;
    let qrels = load_qrels(&data_section)?;
    let loaded = LoadedData::load(&data_section, paradigm, FeedbackKind::Grf)?;

    let mut stages: Vec<Stage> = Vec::new();
    for (label, feedback, overrides) in [
        ("baseline", FeedbackKind::None, config.baseline.clone()),
        (
            "prf",
            FeedbackKind::Prf,
            merged(&config.baseline, &config.prf),
        ),
        (
            "grf",
            FeedbackKind::Grf,
            merged(&config.baseline, &config.grf),
        ),
    ] {
        let pipeline = loaded.pipeline(paradigm, feedback, depth)?;
        let assignment = assignment_with(
            default_params(paradigm, feedback),
            overrides.unwrap_or_default(),
        );
        let run = pipeline.retrieve(&assignment, &topics)?;
        println!(
            "{label}: produced run {} ({} queries)",
            run.run_tag,
            run.num_queries()
        );
        let report = evaluate(&run, &qrels, &metrics, depth);
        stages.push(Stage { label, run, report });
    }

    // fuse the two feedback runs
    let fusion_cfg = config.fusion.as_ref();
    let rrf_k = fusion_cfg.and_then(|f| f.rrf_k).unwrap_or(DEFAULT_RRF_K);
    let lambda_spec = fusion_cfg
        .and_then(|f| f.lambda.clone())
        .unwrap_or(LambdaSpec::Named("cv".to_string()));
    let prf_run = &stages.iter().find(|s| s.label == "prf").unwrap().run;
    let grf_run = &stages.iter().find(|s| s.label == "grf").unwrap().run;

    let fused = match lambda_spec {
        LambdaSpec::Fixed(lambda) => {
            let params = WrrfParams { lambda, k: rrf_k };
            println!("fusion: fixed lambda {lambda}");
            wrrf(prf_run, grf_run, params, depth)?
        }
        LambdaSpec::Named(name) if name == "cv" => {
            let folds = load_folds(&data_section)?;
            let result = tune_lambda(
                prf_run,
                grf_run,
                rrf_k,
                depth,
                &folds,
                &topics,
                &qrels,
                &config.out_dir,
            )?;
            write_tuning_report(&result, config.out_dir.join("fusion_tuning.json"))?;
            let winners: Vec<String> = result
                .folds
                .iter()
                .map(|f| format!("{}:{}", f.fold, f.winner))
                .collect();
            println!(
                "fusion: cross-validated lambda per fold [{}], spread {}",
                winners.join(", "),
                result
                    .param_spread
                    .get("lambda")
                    .map(|s| format!("{s:.1}"))
                    .unwrap_or_else(|| "n/a".to_string())
            );
            result.aggregate_run
        }
        LambdaSpec::Named(other) => bail!("fusion.lambda must be a number or \"cv\", got {other}"),
    };
    let fused_report = evaluate(&fused, &qrels, &metrics, depth);
    stages.push(Stage {
        label: "prf+grf",
        run: fused,
        report: fused_report,
    });

    // persist runs and per-run reports
    for stage in &stages {
        write_run(&stage.run, runs_dir.join(format!("{}.run", stage.label)))?;
        write_eval_report(
            &stage.report,
            reports_dir.join(format!("{}.tsv", stage.label)),
        )?;
    }

    // significance against the PRF run, as in the fusion protocol
    let prf_report = &stages.iter().find(|s| s.label == "prf").unwrap().report;
    let mut ttest_lines = String::new();
    ttest_lines.push_str("comparison\tmetric\tt\tp\tsignificant\tdegenerate\n");
    for label in ["grf", "prf+grf"] {
        let report = &stages.iter().find(|s| s.label == label).unwrap().report;
        let outcome = paired_ttest(report, prf_report, &ttest_metric)?;
        println!(
            "t-test {label} vs prf on {ttest_metric}: t={:.4} p={:.6} significant={}{}",
            outcome.t,
            outcome.p,
            outcome.significant,
            if outcome.degenerate {
                " (degenerate variance)"
            } else {
                ""
            }
        );
        ttest_lines.push_str(&format!(
            "{label}-vs-prf\t{ttest_metric}\t{:.6}\t{:.6}\t{}\t{}\n",
            outcome.t, outcome.p, outcome.significant, outcome.degenerate
        ));
    }
    fs::write(config.out_dir.join("ttests.tsv"), ttest_lines)?;

    // summary table
    let mut summary = String::new();
    summary.push_str("system\tmetric\tmean\n");
    for stage in &stages {
        for metric in &metrics {
            summary.push_str(&format!(
                "{}\t{}\t{:.4}\n",
                stage.label,
                metric,
                stage.report.mean(metric).unwrap_or(0.0)
            ));
        }
    }
    fs::write(config.out_dir.join("summary.tsv"), &summary)?;
    print!("{summary}");
    println!("experiment output written to {}", config.out_dir.display());
    Ok(())
}

fn merged(
    base: &Option<BTreeMap<String, ParamValue>>,
    specific: &Option<BTreeMap<String, ParamValue>>,
) -> Option<BTreeMap<String, ParamValue>> {
    let mut out = base.clone().unwrap_or_default();
    if let Some(specific) = specific {
        out.extend(specific.clone());
    }
    Some(out)
}

pub fn build_sparse_index(
    corpus: &Path,
    stopwords: Option<&Path>,
    out_dir: &Path,
) -> Result<InvertedIndex> {
    let analyzer = match stopwords {
        Some(path) => TokenPipeline::from_stopword_file(path)?,
        None => TokenPipeline::default(),
    };
    let index = build_index(read_corpus(corpus)?, analyzer)?;
    index.save(out_dir)?;
    println!(
        "indexed {} documents ({} terms) into {}",
        index.num_docs(),
        index.num_terms(),
        out_dir.display()
    );
    Ok(index)
}

#[allow(clippy::too_many_arguments)]
fn tune_lambda(
    prf_run: &RankedRun,
    grf_run: &RankedRun,
    k: u32,
    depth: usize,
    folds: &graft::folds::FoldSet,
    topics: &[graft::corpus::Topic],
    qrels: &Qrels,
    out_dir: &Path,
) -> Result<TuningResult> {
    let pipeline = FusionPipeline {
        prf_run,
        grf_run,
        k,
        depth,
    };
    let grid = ParamGrid::new(vec![(
        "lambda".to_string(),
        (0..=10)
            .map(|i| ParamValue::Float(f64::from(i) / 10.0))
            .collect(),
    )])?;
    let cache = EvalCache::new(cache_dir_for(out_dir))?;
    let result = grid_search_cv(
        &pipeline,
        &grid,
        folds,
        topics,
        qrels,
        MetricSpec::Recall { k: 1000 },
        depth,
        Some(&cache),
    )?;
    Ok(result)
}
