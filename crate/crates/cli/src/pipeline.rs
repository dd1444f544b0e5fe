//! Split, fit, train and evaluate one model on one language.
//!
//! Everything fitted (vocabulary, idf, word index, embedding matrix, model
//! parameters) is built from the training split alone.

use std::collections::BTreeMap;
use std::path::Path;

use outbreak_text::corpus::{multi_split, select_language, Dataset, Lang, LabeledSample, Sentiment, Task};
use outbreak_text::emolex::{EmotionResourceSet, EmotionResources};
use outbreak_text::eval::{average_reports, confusion, Averaging, ClassificationReport, RunMeta};
use outbreak_text::features::{FittedFeatures, IdfWeights, Vocabulary};
use outbreak_text::linear_models::{self, LinearModel};
use outbreak_text::neural::{
    build_embedding_matrix, build_word_index, load_pretrained_vectors, to_sequence, NeuralModel, PretrainedVectors,
    WordIndex,
};
use outbreak_text::preprocess::{StopList, StopLists};
use outbreak_text::scalar::{Precision, Scalar};
use outbreak_text::sentilex::{load_lexicon, Lexicons, SentimentLexicon};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;

/// Lexicons, stop lists, emotion resources and optional word vectors.
///
/// A resources directory may hold any of `lexicon_english.tsv`,
/// `lexicon_urdu.tsv`, `stopwords_english.txt`, `stopwords_urdu.txt`,
/// `emotion/english/` and `emotion/urdu/`; missing entries fall back to the
/// bundled English resources (Urdu samples then go through their
/// translation).
#[derive(Debug, Clone)]
pub struct Resources {
    pub lexicons: Lexicons,
    pub emotion: EmotionResourceSet,
    pub stop: StopLists,
    pub vectors: PretrainedVectors,
}

impl Resources {
    pub fn load(cfg: &RunConfig) -> Result<Self, CliError> {
        let mut r = Resources {
            lexicons: Lexicons::bundled(),
            emotion: EmotionResourceSet::bundled(),
            stop: StopLists::default(),
            vectors: PretrainedVectors::default(),
        };
        if let Some(dir) = &cfg.resources {
            let opt = |name: &str| Some(dir.join(name)).filter(|p| p.exists());
            if let Some(p) = opt("lexicon_english.tsv") {
                r.lexicons.english = Some(load_lexicon(&p)?);
            }
            if let Some(p) = opt("lexicon_urdu.tsv") {
                r.lexicons.urdu = Some(load_lexicon(&p)?);
            }
            if let Some(p) = opt("stopwords_english.txt") {
                r.stop.english = StopList::load(&p, Lang::English)?;
            }
            if let Some(p) = opt("stopwords_urdu.txt") {
                r.stop.urdu = StopList::load(&p, Lang::Urdu)?;
            }
            if let Some(p) = opt("emotion/english") {
                r.emotion.english = Some(EmotionResources::load_dir(&p)?);
            }
            if let Some(p) = opt("emotion/urdu") {
                r.emotion.urdu = Some(EmotionResources::load_dir(&p)?);
            }
        }
        if let Some(p) = &cfg.vectors {
            r.vectors = load_pretrained_vectors(p, Some(cfg.neural.embedding_dim))?;
            if r.vectors.malformed > 0 {
                log::warn!("{}: skipped {} malformed vector lines", p.display(), r.vectors.malformed);
            }
        }
        Ok(r)
    }

    pub fn english_lexicon(&self) -> Option<&SentimentLexicon> {
        self.lexicons.english.as_ref()
    }

    pub fn tokens(&self, s: &LabeledSample) -> Vec<String> {
        self.stop.prepare(&s.sample.text, s.lang())
    }
}

/// Samples removed before training, by reason.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Exclusions {
    pub neutral: usize,
    pub unresolved: usize,
}

/// Restricts `ds` to one language and to samples usable for `task`.
pub fn select(ds: &Dataset, lang: Lang, task: Task) -> Result<(Dataset, Exclusions), CliError> {
    let ds = select_language(ds, lang);
    if let Some(s) = ds.iter().find(|s| s.sentiment.is_none()) {
        return Err(CliError::Data(format!(
            "sample `{}` has no sentiment label; run `label` first",
            s.id()
        )));
    }
    let mut ex = Exclusions::default();
    let mut kept = Vec::with_capacity(ds.len());
    for s in ds.samples {
        match task {
            Task::Sentiment => kept.push(s),
            Task::Emotion if s.sentiment == Some(Sentiment::Neutral) => ex.neutral += 1,
            Task::Emotion if s.emotion.is_none() => ex.unresolved += 1,
            Task::Emotion => kept.push(s),
        }
    }
    Ok((Dataset::new(kept, ds.provenance), ex))
}

/// Sorted class names present in `ds` for `task`.
pub fn classes_of(ds: &Dataset, task: Task) -> Vec<String> {
    let mut c: Vec<String> = ds.iter().filter_map(|s| s.label(task)).map(str::to_string).collect();
    c.sort();
    c.dedup();
    c
}

fn labels(ds: &Dataset, task: Task) -> Vec<&'static str> {
    ds.iter().map(|s| s.label(task).expect("selected samples are labeled")).collect()
}

/// What one split produced.
#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub seed: u64,
    pub y_true: Vec<String>,
    pub y_pred: Vec<String>,
    pub report: ClassificationReport,
    pub details: BTreeMap<String, Value>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub name: String,
    pub lang: Lang,
    pub report: ClassificationReport,
    pub splits: Vec<SplitOutcome>,
    pub exclusions: Exclusions,
}

fn base_meta(cfg: &RunConfig, lang: Lang, seeds: Vec<u64>) -> RunMeta {
    RunMeta {
        model: cfg.model.as_str().to_string(),
        task: cfg.task.as_str().to_string(),
        language: lang.as_str().to_string(),
        strategy: cfg.strategy.as_str().to_string(),
        feature_mode: match cfg.model.arch() {
            Some(_) => "sequence".to_string(),
            None => cfg.representation().as_str().to_string(),
        },
        split_seeds: seeds,
        hyperparameters: BTreeMap::new(),
        config: cfg.to_json(),
    }
}

/// Trains and evaluates on every seeded split of one language. With
/// `out` set, per-split artifacts and the averaged report are written
/// under `out/<run name>/`.
pub fn train_eval(ds: &Dataset, lang: Lang, cfg: &RunConfig, res: &Resources, out: Option<&Path>) -> Result<RunOutcome, CliError> {
    let (data, exclusions) = select(ds, lang, cfg.task)?;
    if exclusions.neutral > 0 {
        log::info!("{lang}: excluded {} neutral samples from the emotion task", exclusions.neutral);
    }
    if exclusions.unresolved > 0 {
        log::info!("{lang}: excluded {} samples without an emotion label", exclusions.unresolved);
    }
    let classes = classes_of(&data, cfg.task);
    if classes.len() < 2 {
        return Err(CliError::Data(format!(
            "{lang} {} data has {} class(es); need at least two",
            cfg.task,
            classes.len()
        )));
    }
    let splits = multi_split(&data, &cfg.split, cfg.task)?;
    let name = cfg.run_name(lang);
    let run_dir = out.map(|o| o.join(&name));

    let jobs = cfg.jobs().min(splits.len()).max(1);
    let work: Vec<(usize, &(Dataset, Dataset))> = splits.iter().enumerate().collect();
    let mut results: Vec<Option<Result<SplitOutcome, CliError>>> = (0..splits.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = work
            .chunks(work.len().div_ceil(jobs))
            .map(|chunk| {
                let (classes, run_dir) = (&classes, &run_dir);
                scope.spawn(move || {
                    chunk
                        .iter()
                        .map(|(i, (train, test))| {
                            let seed = cfg.split.seeds[*i];
                            let dir = run_dir.as_ref().map(|d| d.join("splits").join(seed.to_string()));
                            (*i, run_split(train, test, seed, classes, lang, cfg, res, dir.as_deref()))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("split worker panicked") {
                results[i] = Some(r);
            }
        }
    });
    let splits: Vec<SplitOutcome> = results.into_iter().map(|r| r.expect("every split ran")).collect::<Result<_, _>>()?;

    let mut report = average_reports(&splits.iter().map(|s| s.report.clone()).collect::<Vec<_>>())?;
    report.averaging = Averaging::PerSplitMean;
    let hp = &mut report.meta.hyperparameters;
    hp.insert("excluded_neutral".into(), json!(exclusions.neutral));
    hp.insert("excluded_unresolved".into(), json!(exclusions.unresolved));
    hp.insert("n_samples".into(), json!(data.len()));
    hp.insert(
        "splits".into(),
        Value::Array(splits.iter().map(|s| json!({"seed": s.seed, "details": s.details})).collect()),
    );
    if let Some(dir) = &run_dir {
        write_report(&report, dir, "report")?;
    }
    Ok(RunOutcome {
        name,
        lang,
        report,
        splits,
        exclusions,
    })
}

pub fn write_report(report: &ClassificationReport, dir: &Path, stem: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    report.save(&dir.join(format!("{stem}.json")))?;
    let md = format!("{}\n<!-- config: {} -->\n", report.to_markdown(), report.meta.config);
    let path = dir.join(format!("{stem}.md"));
    std::fs::write(&path, md).map_err(|e| CliError::io(&path, e))
}

#[allow(clippy::too_many_arguments)]
fn run_split(
    train: &Dataset,
    test: &Dataset,
    seed: u64,
    classes: &[String],
    lang: Lang,
    cfg: &RunConfig,
    res: &Resources,
    dir: Option<&Path>,
) -> Result<SplitOutcome, CliError> {
    if let Some(d) = dir {
        std::fs::create_dir_all(d).map_err(|e| CliError::io(d, e))?;
    }
    let train_tokens: Vec<Vec<String>> = train.iter().map(|s| res.tokens(s)).collect();
    let test_tokens: Vec<Vec<String>> = test.iter().map(|s| res.tokens(s)).collect();
    let y_train = labels(train, cfg.task);
    let y_true: Vec<String> = labels(test, cfg.task).into_iter().map(str::to_string).collect();
    let (y_pred, details) = match cfg.precision {
        Precision::F32 => fit_predict::<f32>(&train_tokens, &y_train, &test_tokens, seed, cfg, res, dir)?,
        Precision::F64 => fit_predict::<f64>(&train_tokens, &y_train, &test_tokens, seed, cfg, res, dir)?,
    };
    let cm = confusion(&y_true, &y_pred, classes)?;
    let mut meta = base_meta(cfg, lang, vec![seed]);
    meta.hyperparameters = details.clone();
    let report = ClassificationReport::from_confusion(&cm, meta)?;
    if let Some(d) = dir {
        write_report(&report, d, "report")?;
    }
    Ok(SplitOutcome {
        seed,
        y_true,
        y_pred,
        report,
        details,
    })
}

/// Seed for everything stochastic inside one split.
fn split_seed(base: u64, split: u64) -> u64 {
    base ^ split.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn fit_predict<T: Scalar>(
    train_tokens: &[Vec<String>],
    y_train: &[&str],
    test_tokens: &[Vec<String>],
    seed: u64,
    cfg: &RunConfig,
    res: &Resources,
    dir: Option<&Path>,
) -> Result<(Vec<String>, BTreeMap<String, Value>), CliError> {
    let mut details = BTreeMap::new();
    details.insert("n_train".into(), json!(train_tokens.len()));
    details.insert("n_test".into(), json!(test_tokens.len()));
    if let Some(base) = cfg.model.linear_base() {
        let repr = cfg.representation();
        let feats = FittedFeatures::fit(train_tokens, cfg.features.min_df, cfg.features.l2)?;
        let x: Vec<_> = train_tokens.iter().map(|t| feats.transform::<T, _>(t, repr)).collect();
        let lcfg = linear_models::TrainConfig {
            seed: split_seed(cfg.linear.seed, seed),
            ..cfg.linear.clone()
        };
        let (model, summary) = linear_models::train(&x, y_train, base, cfg.strategy, &lcfg)?;
        let xt: Vec<_> = test_tokens.iter().map(|t| feats.transform::<T, _>(t, repr)).collect();
        let pred = model.predict_labels(&xt)?;
        details.insert("vocabulary_size".into(), json!(feats.vocab.size()));
        details.insert("model_strategy".into(), json!(model.strategy_name()));
        if let Some(l) = summary.lambda {
            details.insert("lambda".into(), json!(l));
            details.insert("cv_table".into(), serde_json::to_value(&summary.cv_table).expect("serializes"));
        }
        if let Some(d) = dir {
            feats.vocab.save(&d.join("vocab.json"))?;
            feats.idf.save(&d.join("idf.json"))?;
            model.save(&d.join("model.json"), "vocab.json")?;
        }
        Ok((pred, details))
    } else {
        let ncfg = outbreak_text::neural::NeuralConfig {
            seed: split_seed(cfg.neural.seed, seed),
            ..cfg.neural.clone()
        };
        let wi = build_word_index(train_tokens)?;
        let emb = build_embedding_matrix::<T>(&wi, &res.vectors, ncfg.embedding_dim, ncfg.seed)?;
        let seqs: Vec<_> = train_tokens.iter().map(|t| to_sequence(t, &wi, ncfg.max_len)).collect();
        let oov = emb.oov_count;
        let model = outbreak_text::neural::train(&ncfg, emb, &seqs, y_train)?;
        let test_seqs: Vec<_> = test_tokens.iter().map(|t| to_sequence(t, &wi, ncfg.max_len)).collect();
        let pred = model.predict_labels(&test_seqs)?;
        details.insert("vocabulary_size".into(), json!(wi.len()));
        details.insert("oov_rows".into(), json!(oov));
        details.insert("loss_curve".into(), json!(model.loss_curve));
        if let Some(d) = dir {
            wi.save(&d.join("word_index.json"))?;
            model.save(&d.join("model.bin"), "word_index.json")?;
        }
        Ok((pred, details))
    }
}

/// A persisted split model, ready to score new text.
pub enum LoadedModel {
    Linear32(LinearModel<f32>, FittedFeatures),
    Linear64(LinearModel<f64>, FittedFeatures),
    Neural32(NeuralModel<f32>, WordIndex),
    Neural64(NeuralModel<f64>, WordIndex),
}

/// Loads the model written by [`train_eval`] into `dir` along with the run
/// configuration recorded in its report.
pub fn load_split_model(dir: &Path) -> Result<(LoadedModel, RunConfig), CliError> {
    let report = ClassificationReport::load(&dir.join("report.json"))?;
    let cfg: RunConfig = serde_json::from_value(report.meta.config.clone())
        .map_err(|e| CliError::Data(format!("{}: bad embedded config: {e}", dir.display())))?;
    let model = if cfg.model.linear_base().is_some() {
        let idf_path = dir.join("idf.json");
        let feats = |vocab: Vocabulary| -> Result<FittedFeatures, CliError> {
            Ok(FittedFeatures {
                vocab,
                idf: IdfWeights::load(&idf_path)?,
                l2: cfg.features.l2,
            })
        };
        match cfg.precision {
            Precision::F32 => {
                let (m, file) = LinearModel::<f32>::load(&dir.join("model.json"))?;
                let vocab = Vocabulary::load(&dir.join(&file.vocab_ref))?;
                LoadedModel::Linear32(m, feats(vocab)?)
            }
            Precision::F64 => {
                let (m, file) = LinearModel::<f64>::load(&dir.join("model.json"))?;
                let vocab = Vocabulary::load(&dir.join(&file.vocab_ref))?;
                LoadedModel::Linear64(m, feats(vocab)?)
            }
        }
    } else {
        match cfg.precision {
            Precision::F32 => {
                let (m, wref) = NeuralModel::<f32>::load(&dir.join("model.bin"))?;
                LoadedModel::Neural32(m, WordIndex::load(&dir.join(wref))?)
            }
            Precision::F64 => {
                let (m, wref) = NeuralModel::<f64>::load(&dir.join("model.bin"))?;
                LoadedModel::Neural64(m, WordIndex::load(&dir.join(wref))?)
            }
        }
    };
    Ok((model, cfg))
}

impl LoadedModel {
    pub fn predict(&self, tokens: &[Vec<String>], cfg: &RunConfig) -> Result<Vec<String>, CliError> {
        let repr = cfg.representation();
        Ok(match self {
            LoadedModel::Linear32(m, f) => m.predict_labels(&tokens.iter().map(|t| f.transform(t, repr)).collect::<Vec<_>>())?,
            LoadedModel::Linear64(m, f) => m.predict_labels(&tokens.iter().map(|t| f.transform(t, repr)).collect::<Vec<_>>())?,
            LoadedModel::Neural32(m, wi) => {
                m.predict_labels(&tokens.iter().map(|t| to_sequence(t, wi, m.config.max_len)).collect::<Vec<_>>())?
            }
            LoadedModel::Neural64(m, wi) => {
                m.predict_labels(&tokens.iter().map(|t| to_sequence(t, wi, m.config.max_len)).collect::<Vec<_>>())?
            }
        })
    }
}
