//! Run configuration: defaults, then a TOML file, then command-line
//! overrides, later sources winning.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use outbreak_text::corpus::{Lang, SplitSpec, Task};
use outbreak_text::features::Representation;
use outbreak_text::fixture::FixtureConfig;
use outbreak_text::linear_models::{Base, Strategy, TrainConfig};
use outbreak_text::neural::{Arch, NeuralConfig};
use outbreak_text::scalar::Precision;
use outbreak_text::sentilex::SentimentConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Mnb,
    Svm,
    Cnn1d,
    Lstm,
    Bilstm,
    BilstmAttention,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Mnb,
        ModelKind::Svm,
        ModelKind::Cnn1d,
        ModelKind::Lstm,
        ModelKind::Bilstm,
        ModelKind::BilstmAttention,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Mnb => "mnb",
            ModelKind::Svm => "svm",
            ModelKind::Cnn1d => "cnn1d",
            ModelKind::Lstm => "lstm",
            ModelKind::Bilstm => "bilstm",
            ModelKind::BilstmAttention => "bilstm_attention",
        }
    }

    pub fn linear_base(self) -> Option<Base> {
        match self {
            ModelKind::Mnb => Some(Base::Mnb),
            ModelKind::Svm => Some(Base::Svm),
            _ => None,
        }
    }

    pub fn arch(self) -> Option<Arch> {
        match self {
            ModelKind::Cnn1d => Some(Arch::Cnn1d),
            ModelKind::Lstm => Some(Arch::Lstm),
            ModelKind::Bilstm => Some(Arch::Bilstm),
            ModelKind::BilstmAttention => Some(Arch::BilstmAttention),
            _ => None,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown model `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LanguageSel {
    English,
    Urdu,
    /// Each language separately.
    #[default]
    Both,
}

impl LanguageSel {
    pub fn langs(self) -> Vec<Lang> {
        match self {
            LanguageSel::English => vec![Lang::English],
            LanguageSel::Urdu => vec![Lang::Urdu],
            LanguageSel::Both => vec![Lang::English, Lang::Urdu],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// Defaults to counts for mnb and tfidf for svm.
    pub representation: Option<Representation>,
    pub min_df: usize,
    pub l2: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            representation: None,
            min_df: 1,
            l2: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub language: LanguageSel,
    pub model: ModelKind,
    pub strategy: Strategy,
    pub corpus: Option<PathBuf>,
    pub resources: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    pub overrides: Option<PathBuf>,
    pub output: PathBuf,
    /// Worker threads for the per-seed runs; 0 uses every available core.
    pub jobs: usize,
    pub precision: Precision,
    pub split: SplitSpec,
    pub features: FeatureConfig,
    pub sentiment: SentimentConfig,
    pub linear: TrainConfig,
    pub neural: NeuralConfig,
    pub fixture: FixtureConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: Task::Sentiment,
            language: LanguageSel::Both,
            model: ModelKind::Mnb,
            strategy: Strategy::Multiclass,
            corpus: None,
            resources: None,
            vectors: None,
            overrides: None,
            output: PathBuf::from("out"),
            jobs: 1,
            precision: Precision::F32,
            split: SplitSpec::default(),
            features: FeatureConfig::default(),
            sentiment: SentimentConfig::default(),
            linear: TrainConfig::default(),
            neural: NeuralConfig::default(),
            fixture: FixtureConfig::default(),
        }
    }
}

impl RunConfig {
    /// Merges `file` (if any) and then `overrides` (dotted key, value) over
    /// the defaults.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, toml::Value)]) -> Result<RunConfig, CliError> {
        let mut table = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            }
            None => toml::Table::new(),
        };
        for (key, value) in overrides {
            insert_dotted(&mut table, key, value.clone())?;
        }
        let mut cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Usage(e.message().to_string()))?;
        cfg.neural.precision = cfg.precision;
        if let Some(arch) = cfg.model.arch() {
            cfg.neural.arch = arch;
        }
        Ok(cfg)
    }

    pub fn representation(&self) -> Representation {
        self.features.representation.unwrap_or(match self.model {
            ModelKind::Svm => Representation::Tfidf,
            _ => Representation::Counts,
        })
    }

    /// Name of the run directory for one language.
    pub fn run_name(&self, lang: Lang) -> String {
        format!("{}-{}-{}-{}", self.task, lang, self.model, self.strategy.as_str())
    }

    pub fn jobs(&self) -> usize {
        match self.jobs {
            0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
            n => n,
        }
    }

    /// Checks referenced paths and option combinations.
    pub fn validate(&self) -> Result<(), CliError> {
        for (name, path) in [
            ("corpus", &self.corpus),
            ("resources", &self.resources),
            ("vectors", &self.vectors),
            ("overrides", &self.overrides),
        ] {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(CliError::Usage(format!("{name} path {} does not exist", p.display())));
                }
            }
        }
        if self.model.arch().is_some() && self.strategy == Strategy::Ovr {
            return Err(CliError::Usage(format!(
                "{} is trained as a single softmax classifier; one-vs-rest applies to mnb and svm",
                self.model
            )));
        }
        if self.split.seeds.is_empty() {
            return Err(CliError::Usage("split.seeds is empty".into()));
        }
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return Err(CliError::Usage(format!("train_fraction {} must lie in (0, 1)", self.split.train_fraction)));
        }
        self.sentiment.validate()?;
        self.linear.validate()?;
        self.neural.validate()?;
        Ok(())
    }

    pub fn require_corpus(&self) -> Result<&Path, CliError> {
        self.corpus
            .as_deref()
            .ok_or_else(|| CliError::Usage("no corpus given (use --corpus or `corpus = ...`)".into()))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

fn insert_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| CliError::Usage(format!("bad key `{key}`")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Usage(format!("`{p}` in `{key}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Parses `key=value`; the value is read as TOML and falls back to a plain
/// string.
pub fn parse_assignment(s: &str) -> Result<(String, toml::Value), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let v = v.trim();
    let value = format!("v = {v}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}
