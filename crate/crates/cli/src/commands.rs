//! One function per subcommand. Each returns the paths it wrote.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use outbreak_text::corpus::{load_corpus, write_corpus, Format, Lang, Task};
use outbreak_text::emolex::{label_dataset_emotion, load_overrides};
use outbreak_text::eval::{
    comparison_csv, comparison_markdown, compare_strategies, confusion, multiclass_recall_direction, summary_markdown,
    ClassificationReport, ComparisonRow,
};
use outbreak_text::fixture::generate_fixture;
use outbreak_text::linear_models::Strategy;
use outbreak_text::sentilex::{label_dataset_sentiment, ScoreHistogram};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::pipeline::{classes_of, load_split_model, select, train_eval, write_report, Resources, RunOutcome};

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))?;
    Ok(path.to_path_buf())
}

/// Sidecar recording the resolved configuration next to artifacts that
/// cannot carry it inline.
fn write_manifest(dir: &Path, name: &str, cfg: &RunConfig, artifacts: &[PathBuf], extra: serde_json::Value) -> Result<PathBuf, CliError> {
    let names: Vec<String> = artifacts
        .iter()
        .map(|p| p.file_name().map_or_else(String::new, |f| f.to_string_lossy().into_owned()))
        .collect();
    let body = json!({"command": name, "artifacts": names, "config": cfg.to_json(), "summary": extra});
    write(&dir.join(format!("{name}.manifest.json")), serde_json::to_string_pretty(&body).expect("json"))
}

/// Writes `fixture.jsonl` with unlabeled samples.
pub fn cmd_generate_fixture(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let (ds, intended) = generate_fixture(&cfg.fixture)?;
    std::fs::create_dir_all(&cfg.output).map_err(|e| CliError::io(&cfg.output, e))?;
    let path = cfg.output.join("fixture.jsonl");
    write_corpus(&ds, &path, Format::Jsonl)?;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for i in &intended {
        *counts.entry(i.sentiment.to_string()).or_default() += 1;
    }
    let manifest = write_manifest(&cfg.output, "generate-fixture", cfg, std::slice::from_ref(&path), json!({"intended_sentiment": counts}))?;
    Ok(vec![path, manifest])
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelOutcome {
    pub paths: Vec<PathBuf>,
    pub unresolved: usize,
    pub manual: usize,
}

/// Sentiment then emotion labeling; writes `labeled.jsonl` and the
/// distribution files.
pub fn cmd_label(cfg: &RunConfig) -> Result<LabelOutcome, CliError> {
    let corpus = cfg.require_corpus()?;
    let res = Resources::load(cfg)?;
    let ds = load_corpus(corpus, Format::from_path(corpus))?;
    if ds.dropped_empty > 0 {
        log::warn!("dropped {} samples with empty text", ds.dropped_empty);
    }
    let overrides = match &cfg.overrides {
        Some(p) => load_overrides(p)?,
        None => BTreeMap::new(),
    };
    let (ds, sent) = label_dataset_sentiment(&ds, &res.lexicons, &cfg.sentiment)?;
    let (ds, emo) = label_dataset_emotion(&ds, &res.emotion, &overrides)?;
    for s in ds.iter() {
        s.validate().map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let out = &cfg.output;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let labeled = out.join("labeled.jsonl");
    write_corpus(&ds, &labeled, Format::Jsonl)?;
    let mut paths = vec![
        labeled,
        write(&out.join("sentiment_histogram.csv"), sent.histogram.to_csv())?,
        write(&out.join("sentiment_histogram.gp"), ScoreHistogram::gnuplot_script("sentiment_histogram.csv"))?,
        write(&out.join("sentiment_counts.csv"), sent.counts_csv())?,
        write(&out.join("emotion_counts.csv"), emo.counts_csv())?,
        write(&out.join("emotion_worklist.txt"), emo.worklist.iter().map(|id| format!("{id}\n")).collect::<String>())?,
    ];
    let summary = json!({
        "samples": ds.len(),
        "sentiment_counts": sent.counts,
        "emotion_counts": emo.counts,
        "unresolved": emo.unresolved,
        "manual": emo.manual,
        "overrides_applied": overrides.len(),
        "overlap_words": emo.overlap_words,
    });
    paths.push(write_manifest(out, "label", cfg, &paths, summary)?);
    log::info!("labeled {} samples; {} unresolved emotions", ds.len(), emo.unresolved);
    Ok(LabelOutcome {
        paths,
        unresolved: emo.unresolved,
        manual: emo.manual,
    })
}

/// Five-split train/evaluate for every selected language.
pub fn cmd_train(cfg: &RunConfig) -> Result<Vec<RunOutcome>, CliError> {
    let corpus = cfg.require_corpus()?;
    let res = Resources::load(cfg)?;
    let ds = load_corpus(corpus, Format::from_path(corpus))?;
    cfg.language
        .langs()
        .into_iter()
        .map(|lang| {
            let run = train_eval(&ds, lang, cfg, &res, Some(&cfg.output))?;
            log::info!("{}: accuracy {:.4} over {} splits", run.name, run.report.accuracy, run.splits.len());
            Ok(run)
        })
        .collect()
}

/// Scores a persisted split model on the configured corpus and writes
/// `evaluation.json` / `.md` to the output directory.
pub fn cmd_evaluate(cfg: &RunConfig, model_dir: &Path) -> Result<ClassificationReport, CliError> {
    let corpus = cfg.require_corpus()?;
    let (model, model_cfg) = load_split_model(model_dir)?;
    let res = Resources::load(cfg)?;
    let ds = load_corpus(corpus, Format::from_path(corpus))?;
    let trained = ClassificationReport::load(&model_dir.join("report.json"))?;
    let lang: Lang = trained.meta.language.parse().map_err(CliError::Data)?;
    let (data, _) = select(&ds, lang, model_cfg.task)?;
    if data.is_empty() {
        return Err(CliError::Data(format!("corpus has no {lang} samples for the {} task", model_cfg.task)));
    }
    let tokens: Vec<Vec<String>> = data.iter().map(|s| res.tokens(s)).collect();
    let pred = model.predict(&tokens, &model_cfg)?;
    let truth: Vec<String> = data.iter().map(|s| s.label(model_cfg.task).expect("selected").to_string()).collect();
    let mut classes = classes_of(&data, model_cfg.task);
    for c in &trained.classes {
        if !classes.contains(c) {
            classes.push(c.clone());
        }
    }
    classes.sort();
    let cm = confusion(&truth, &pred, &classes)?;
    let mut meta = trained.meta.clone();
    meta.hyperparameters.insert("evaluated_corpus".into(), json!(corpus.display().to_string()));
    meta.hyperparameters.insert("evaluation_config".into(), cfg.to_json());
    let report = ClassificationReport::from_confusion(&cm, meta)?;
    write_report(&report, &cfg.output, "evaluation")?;
    Ok(report)
}

fn run_report(out: &Path, task: Task, lang: Lang, model: &str, strategy: Strategy) -> Result<ClassificationReport, CliError> {
    let path = out.join(format!("{task}-{lang}-{model}-{}", strategy.as_str())).join("report.json");
    if !path.exists() {
        return Err(CliError::Data(format!(
            "missing input: no {} run for {task}/{lang}/{model} at {}",
            strategy.as_str(),
            path.display()
        )));
    }
    Ok(ClassificationReport::load(&path)?)
}

/// One-vs-rest against multiclass, both tasks, per language. Reads the
/// reports written by `train`.
pub fn cmd_compare(cfg: &RunConfig) -> Result<BTreeMap<Lang, Vec<ComparisonRow>>, CliError> {
    if cfg.model.linear_base().is_none() {
        return Err(CliError::Usage(format!("compare needs mnb or svm, not {}", cfg.model)));
    }
    let mut all = BTreeMap::new();
    for lang in cfg.language.langs() {
        let mut rows = Vec::new();
        for task in [Task::Sentiment, Task::Emotion] {
            let ovr = run_report(&cfg.output, task, lang, cfg.model.as_str(), Strategy::Ovr)?;
            let multi = run_report(&cfg.output, task, lang, cfg.model.as_str(), Strategy::Multiclass)?;
            rows.extend(compare_strategies(&ovr, &multi)?);
        }
        for ((task, l), dir) in multiclass_recall_direction(&rows) {
            match dir {
                Some(true) => log::info!("{task}/{l}: multiclass weighted recall >= one-vs-rest"),
                Some(false) => log::info!("{task}/{l}: one-vs-rest weighted recall > multiclass"),
                None => log::info!("{task}/{l}: incomplete pair"),
            }
        }
        let stem = format!("comparison-{}-{lang}", cfg.model);
        let csv = write(&cfg.output.join(format!("{stem}.csv")), comparison_csv(&rows))?;
        let md = write(
            &cfg.output.join(format!("{stem}.md")),
            format!("{}\n<!-- config: {} -->\n", comparison_markdown(&rows), cfg.to_json()),
        )?;
        let direction: BTreeMap<String, Option<bool>> = multiclass_recall_direction(&rows)
            .into_iter()
            .map(|((t, l), d)| (format!("{t}/{l}"), d))
            .collect();
        write_manifest(&cfg.output, &stem, cfg, &[csv, md], json!({"multiclass_recall_at_least_ovr": direction}))?;
        all.insert(lang, rows);
    }
    Ok(all)
}

/// Collects every `*/report.json` under the output directory into
/// `summary.md`.
pub fn cmd_report(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let out = &cfg.output;
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(out)
        .map_err(|e| CliError::io(out, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("report.json").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(CliError::Data(format!("missing input: no run reports under {}", out.display())));
    }
    let reports: Vec<ClassificationReport> = dirs
        .iter()
        .map(|d| ClassificationReport::load(&d.join("report.json")))
        .collect::<Result<_, _>>()?;
    let runs: Vec<String> = dirs.iter().filter_map(|d| d.file_name().map(|f| f.to_string_lossy().into_owned())).collect();
    let body = format!(
        "{}\n<!-- runs: {} -->\n<!-- config: {} -->\n",
        summary_markdown(&reports),
        runs.join(", "),
        cfg.to_json()
    );
    write(&out.join("summary.md"), body)
}
