//! Sample data model, corpus I/O, language partitioning and seeded
//! train/test splitting.
//!
//! Corpora are JSON Lines or header-driven CSV files. Each record carries an
//! `id`, the raw `text` and its `lang`; the remaining fields (`source`,
//! `timestamp`, `translation`, `sentiment`, `emotion`, `emotion_status`) are
//! optional. Records whose text is empty once cleaned are dropped and counted.
//!
//! # Split permutation
//!
//! Splits are driven by a ChaCha8 stream seeded with `seed_from_u64(seed)`.
//! The permutation is a Fisher–Yates shuffle running `i` from `n-1` down to
//! `1`, drawing `j` uniformly from `0..=i` by rejection sampling on
//! `next_u64()` (values below `2^64 mod (i+1)` are redrawn, the rest are
//! reduced modulo `i+1`). The first `round_half_up(fraction * n)` permuted
//! indices form the training set. Both halves are returned in the original
//! dataset order. Stratified splits shuffle each class (in lexicographic class
//! order) from the same stream and allocate per-class training quotas by the
//! largest-remainder method so the total still equals
//! `round_half_up(fraction * n)`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: missing required field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: unknown {field} value `{value}`")]
    UnknownValue {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: duplicate sample id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("sample `{id}`: {message}")]
    Invariant { id: String, message: String },
    #[error("split needs at least {needed} samples, dataset has {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("cannot stratify: class `{class}` has only {count} sample(s)")]
    StratificationImpossible { class: String, count: usize },
    #[error("sample `{id}` has no {task} label")]
    MissingLabel { id: String, task: Task },
    #[error("train fraction {0} must lie strictly between 0 and 1 and leave both sides nonempty")]
    InvalidFraction(f64),
    #[error("split spec needs at least one seed")]
    NoSeeds,
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident, $field:literal { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            /// Name used when reporting a bad value for this field.
            pub const FIELD: &'static str = $field;
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!("unknown {} `{}`", $field, other)),
                }
            }
        }
    };
}

string_enum!(Lang, "lang" { English => "english", Urdu => "urdu" });
string_enum!(Source, "source" { Twitter => "twitter", News => "news", Synthetic => "synthetic" });
string_enum!(Sentiment, "sentiment" {
    Positive => "positive",
    Negative => "negative",
    Neutral => "neutral",
});
string_enum!(
    /// The six Ekman categories.
    Emotion, "emotion" {
        Happiness => "happiness",
        Sadness => "sadness",
        Surprise => "surprise",
        Anger => "anger",
        Fear => "fear",
        Disgust => "disgust",
    }
);
string_enum!(EmotionStatus, "emotion_status" {
    Auto => "auto",
    Manual => "manual",
    Unresolved => "unresolved",
});
string_enum!(
    /// Classification task; also names the label a split stratifies on.
    Task, "task" { Sentiment => "sentiment", Emotion => "emotion" }
);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub text: String,
    pub lang: Lang,
    pub source: Option<Source>,
    pub timestamp: Option<String>,
    /// Pre-translated English text for Urdu samples.
    pub translation: Option<String>,
}

impl Sample {
    pub fn new(id: impl Into<String>, text: impl Into<String>, lang: Lang) -> Self {
        Sample {
            id: id.into(),
            text: text.into(),
            lang,
            source: None,
            timestamp: None,
            translation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub sample: Sample,
    pub sentiment: Option<Sentiment>,
    pub emotion: Option<Emotion>,
    pub emotion_status: Option<EmotionStatus>,
}

impl LabeledSample {
    pub fn unlabeled(sample: Sample) -> Self {
        LabeledSample {
            sample,
            sentiment: None,
            emotion: None,
            emotion_status: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.sample.id
    }

    pub fn lang(&self) -> Lang {
        self.sample.lang
    }

    /// Class name for `task`, if the sample carries that label.
    pub fn label(&self, task: Task) -> Option<&'static str> {
        match task {
            Task::Sentiment => self.sentiment.map(Sentiment::as_str),
            Task::Emotion => self.emotion.map(Emotion::as_str),
        }
    }

    /// Checks the label invariants: an emotion requires a non-neutral
    /// sentiment, and an emotion requires a status.
    pub fn validate(&self) -> Result<()> {
        let bad = |message: &str| {
            Err(CorpusError::Invariant {
                id: self.sample.id.clone(),
                message: message.to_string(),
            })
        };
        if self.sample.id.is_empty() {
            return bad("empty id");
        }
        if self.emotion.is_some() {
            match self.sentiment {
                None => return bad("emotion label without a sentiment label"),
                Some(Sentiment::Neutral) => return bad("neutral sample carries an emotion label"),
                Some(_) => {}
            }
            if self.emotion_status.is_none() {
                return bad("emotion label without emotion_status");
            }
        }
        if self.emotion_status == Some(EmotionStatus::Unresolved) && self.emotion.is_some() {
            return bad("unresolved status with an emotion label");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    pub provenance: String,
    /// Records dropped at load time because their text was empty after cleaning.
    pub dropped_empty: usize,
}

impl Dataset {
    pub fn new(samples: Vec<LabeledSample>, provenance: impl Into<String>) -> Self {
        Dataset {
            samples,
            provenance: provenance.into(),
            dropped_empty: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledSample> {
        self.samples.iter()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.samples.iter().map(LabeledSample::id).collect()
    }

    fn subset(&self, indices: &[usize], tag: &str) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            provenance: format!("{} [{tag}]", self.provenance),
            dropped_empty: 0,
        }
    }

    /// Samples for which `task` has a label, in order.
    pub fn with_label(&self, task: Task) -> Dataset {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| self.samples[i].label(task).is_some())
            .collect();
        self.subset(&idx, &format!("labeled:{task}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Csv,
}

impl Format {
    /// Guesses the format from a file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Jsonl,
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown corpus format `{other}`")),
        }
    }
}

/// On-disk record; field order here is the serialized order.
#[derive(Debug, Default, Serialize, Deserialize)]
struct Record {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    lang: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timestamp: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    translation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sentiment: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    emotion: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    emotion_status: Option<String>,
}

const CSV_COLUMNS: [&str; 9] = [
    "id",
    "text",
    "lang",
    "source",
    "timestamp",
    "translation",
    "sentiment",
    "emotion",
    "emotion_status",
];

fn parse_opt<E: FromStr>(line: usize, field: &'static str, v: Option<String>) -> Result<Option<E>> {
    match v {
        None => Ok(None),
        Some(s) if s.is_empty() => Ok(None),
        Some(s) => s
            .parse()
            .map(Some)
            .map_err(|_| CorpusError::UnknownValue { line, field, value: s }),
    }
}

impl Record {
    fn into_sample(self, line: usize) -> Result<LabeledSample> {
        let id = self
            .id
            .filter(|s| !s.is_empty())
            .ok_or(CorpusError::MissingField { line, field: "id" })?;
        let text = self.text.ok_or(CorpusError::MissingField { line, field: "text" })?;
        let lang_raw = self.lang.ok_or(CorpusError::MissingField { line, field: "lang" })?;
        let lang: Lang = lang_raw.parse().map_err(|_| CorpusError::UnknownValue {
            line,
            field: "lang",
            value: lang_raw.clone(),
        })?;
        let labeled = LabeledSample {
            sample: Sample {
                id,
                text,
                lang,
                source: parse_opt(line, "source", self.source)?,
                timestamp: self.timestamp.filter(|s| !s.is_empty()),
                translation: self.translation.filter(|s| !s.is_empty()),
            },
            sentiment: parse_opt(line, "sentiment", self.sentiment)?,
            emotion: parse_opt(line, "emotion", self.emotion)?,
            emotion_status: parse_opt(line, "emotion_status", self.emotion_status)?,
        };
        labeled.validate()?;
        Ok(labeled)
    }

    fn from_sample(s: &LabeledSample) -> Record {
        Record {
            id: Some(s.sample.id.clone()),
            text: Some(s.sample.text.clone()),
            lang: Some(s.sample.lang.as_str().to_string()),
            source: s.sample.source.map(|v| v.as_str().to_string()),
            timestamp: s.sample.timestamp.clone(),
            translation: s.sample.translation.clone(),
            sentiment: s.sentiment.map(|v| v.as_str().to_string()),
            emotion: s.emotion.map(|v| v.as_str().to_string()),
            emotion_status: s.emotion_status.map(|v| v.as_str().to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a corpus, preserving record order. Duplicate ids are rejected;
/// records whose text cleans to nothing are dropped and counted in
/// [`Dataset::dropped_empty`].
pub fn load_corpus(path: &Path, format: Format) -> Result<Dataset> {
    let file = File::open(path).map_err(io_err(path))?;
    let records = match format {
        Format::Jsonl => read_jsonl(BufReader::new(file))?,
        Format::Csv => read_csv(BufReader::new(file))?,
    };
    let mut seen = HashSet::new();
    let mut ds = Dataset::new(Vec::with_capacity(records.len()), format!("{}", path.display()));
    for (line, rec) in records {
        let sample = rec.into_sample(line)?;
        if !seen.insert(sample.sample.id.clone()) {
            return Err(CorpusError::DuplicateId {
                line,
                id: sample.sample.id,
            });
        }
        if preprocess::clean(&sample.sample.text).is_empty() {
            ds.dropped_empty += 1;
            continue;
        }
        ds.samples.push(sample);
    }
    if ds.dropped_empty > 0 {
        log::warn!(
            "{}: dropped {} record(s) with empty text after cleaning",
            path.display(),
            ds.dropped_empty
        );
    }
    Ok(ds)
}

fn read_jsonl(reader: impl BufRead) -> Result<Vec<(usize, Record)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| CorpusError::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        out.push((lineno, rec));
    }
    Ok(out)
}

fn read_csv(reader: impl std::io::Read) -> Result<Vec<(usize, Record)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CorpusError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);
    let cols: Vec<Option<usize>> = CSV_COLUMNS.iter().map(|c| column(c)).collect();
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| CorpusError::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let get = |k: usize| cols[k].and_then(|c| row.get(c)).map(str::to_string);
        out.push((
            line,
            Record {
                id: get(0),
                text: get(1),
                lang: get(2),
                source: get(3),
                timestamp: get(4),
                translation: get(5),
                sentiment: get(6),
                emotion: get(7),
                emotion_status: get(8),
            },
        ));
    }
    Ok(out)
}

/// Writes a corpus in the given format, one record per sample, in order.
pub fn write_corpus(ds: &Dataset, path: &Path, format: Format) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    match format {
        Format::Jsonl => {
            for s in &ds.samples {
                let line = serde_json::to_string(&Record::from_sample(s))
                    .expect("record serializes");
                writeln!(w, "{line}").map_err(io_err(path))?;
            }
        }
        Format::Csv => {
            let mut cw = csv::Writer::from_writer(&mut w);
            let fail = |e: csv::Error| CorpusError::Io {
                path: path.to_path_buf(),
                source: std::io::Error::other(e),
            };
            cw.write_record(CSV_COLUMNS).map_err(fail)?;
            for s in &ds.samples {
                let r = Record::from_sample(s);
                let cells = [
                    r.id, r.text, r.lang, r.source, r.timestamp, r.translation, r.sentiment,
                    r.emotion, r.emotion_status,
                ];
                cw.write_record(cells.iter().map(|c| c.as_deref().unwrap_or("")))
                    .map_err(fail)?;
            }
            cw.flush().map_err(io_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}

/// Splits into (english, urdu), preserving relative order.
pub fn partition_by_language(ds: &Dataset) -> (Dataset, Dataset) {
    let (en, ur): (Vec<_>, Vec<_>) = ds
        .samples
        .iter()
        .cloned()
        .partition(|s| s.lang() == Lang::English);
    let tag = |l: Lang| format!("{} [{l}]", ds.provenance);
    (
        Dataset::new(en, tag(Lang::English)),
        Dataset::new(ur, tag(Lang::Urdu)),
    )
}

/// Samples of one language, in order.
pub fn select_language(ds: &Dataset, lang: Lang) -> Dataset {
    let (en, ur) = partition_by_language(ds);
    match lang {
        Lang::English => en,
        Lang::Urdu => ur,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seeds: Vec<u64>,
    pub stratify: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.7,
            seeds: vec![1, 2, 3, 4, 5],
            stratify: false,
        }
    }
}

/// `round(x)` with halves rounded up. A 1e-9 guard absorbs representation
/// error so that e.g. `0.7 * 5 = 3.4999999999999996` rounds to 4.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor().max(0.0) as usize
}

/// Uniform draw from `0..range` without modulo bias.
fn bounded(rng: &mut ChaCha8Rng, range: u64) -> u64 {
    debug_assert!(range > 0);
    let reject_below = range.wrapping_neg() % range;
    loop {
        let x = rng.next_u64();
        if x >= reject_below {
            return x % range;
        }
    }
}

fn shuffle_in_place<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = bounded(rng, i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

/// Seeded permutation of `0..n` (see the module docs for the algorithm).
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    shuffle_in_place(&mut idx, &mut rng);
    idx
}

/// Seeded train/test split. With `stratify = Some(task)` every class of
/// that task keeps its proportion up to one sample.
pub fn split(
    ds: &Dataset,
    fraction: f64,
    seed: u64,
    stratify: Option<Task>,
) -> Result<(Dataset, Dataset)> {
    let n = ds.len();
    if n < 2 {
        return Err(CorpusError::TooFewSamples { needed: 2, got: n });
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(fraction));
    }
    let n_train = round_half_up(fraction * n as f64);
    if n_train == 0 || n_train >= n {
        return Err(CorpusError::InvalidFraction(fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = match stratify {
        None => {
            let mut idx: Vec<usize> = (0..n).collect();
            shuffle_in_place(&mut idx, &mut rng);
            idx.truncate(n_train);
            idx
        }
        Some(task) => stratified_train_indices(ds, task, fraction, n_train, &mut rng)?,
    };
    train_idx.sort_unstable();
    let mut in_train = vec![false; n];
    for &i in &train_idx {
        in_train[i] = true;
    }
    let test_idx: Vec<usize> = (0..n).filter(|&i| !in_train[i]).collect();
    Ok((ds.subset(&train_idx, "train"), ds.subset(&test_idx, "test")))
}

fn stratified_train_indices(
    ds: &Dataset,
    task: Task,
    fraction: f64,
    n_train: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>> {
    let mut classes: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in ds.samples.iter().enumerate() {
        let label = s.label(task).ok_or_else(|| CorpusError::MissingLabel {
            id: s.id().to_string(),
            task,
        })?;
        classes.entry(label).or_default().push(i);
    }
    if let Some((class, members)) = classes.iter().find(|(_, m)| m.len() < 2) {
        return Err(CorpusError::StratificationImpossible {
            class: class.to_string(),
            count: members.len(),
        });
    }
    // Largest remainder: floor quotas first, then hand out the leftover seats
    // by descending fractional part (ties go to the earlier class name).
    let exact: Vec<f64> = classes.values().map(|m| fraction * m.len() as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|q| (q + 1e-9).floor() as usize).collect();
    let assigned: usize = quota.iter().sum();
    let mut order: Vec<usize> = (0..quota.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - quota[a] as f64;
        let rb = exact[b] - quota[b] as f64;
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &k in order.iter().take(n_train.saturating_sub(assigned)) {
        quota[k] += 1;
    }
    let mut train = Vec::with_capacity(n_train);
    for (k, members) in classes.values().enumerate() {
        let mut members = members.clone();
        shuffle_in_place(&mut members, rng);
        train.extend_from_slice(&members[..quota[k].min(members.len())]);
    }
    Ok(train)
}

/// One (train, test) pair per seed in `spec`.
pub fn multi_split(ds: &Dataset, spec: &SplitSpec, task: Task) -> Result<Vec<(Dataset, Dataset)>> {
    if spec.seeds.is_empty() {
        return Err(CorpusError::NoSeeds);
    }
    let stratify = spec.stratify.then_some(task);
    spec.seeds
        .iter()
        .map(|&seed| split(ds, spec.train_fraction, seed, stratify))
        .collect()
}
