//! Lexicon-based compound sentiment scoring and threshold polarity labels.
//!
//! The compound score sums the valences of matched tokens and squashes the
//! sum `s` into (-1, 1) with `s / sqrt(s² + alpha)`. No booster, negation
//! or capitalization heuristics are applied.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dataset, Lang, LabeledSample, Sentiment};
use crate::preprocess;

#[derive(Debug, Error)]
pub enum SentilexError {
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("lexicon {name} line {line}: {message}")]
    Parse {
        name: String,
        line: usize,
        message: String,
    },
    #[error("no sentiment lexicon available for {0} samples")]
    MissingLexicon(Lang),
    #[error("urdu sample `{0}` has no translation and no urdu lexicon was supplied")]
    MissingTranslation(String),
    #[error("invalid sentiment config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SentimentLexicon {
    pub name: String,
    entries: HashMap<String, f64>,
    /// Entries that overrode an earlier line for the same token.
    pub duplicates: usize,
}

impl SentimentLexicon {
    pub fn from_entries<I, S>(name: &str, entries: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        SentimentLexicon {
            name: name.to_string(),
            entries: entries.into_iter().map(|(k, v)| (k.into(), v)).collect(),
            duplicates: 0,
        }
    }

    /// Parses `token<TAB>valence` lines. Extra tab-separated columns (as in
    /// VADER's distribution, which appends rating statistics) are ignored.
    pub fn parse(text: &str, name: &str) -> Result<Self, SentilexError> {
        let mut lex = SentimentLexicon {
            name: name.to_string(),
            ..Default::default()
        };
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| SentilexError::Parse {
                name: name.to_string(),
                line: i + 1,
                message,
            };
            let mut cols = line.split('\t');
            let token = cols.next().unwrap_or("").trim();
            let raw = cols
                .next()
                .ok_or_else(|| err("expected token<TAB>valence".into()))?
                .trim();
            if token.is_empty() {
                return Err(err("empty token".into()));
            }
            let valence: f64 = raw
                .parse()
                .map_err(|_| err(format!("valence `{raw}` is not a number")))?;
            if !valence.is_finite() {
                return Err(err(format!("valence `{raw}` is not finite")));
            }
            if lex.entries.insert(token.to_string(), valence).is_some() {
                lex.duplicates += 1;
            }
        }
        if lex.duplicates > 0 {
            log::warn!("lexicon {name}: {} duplicate token(s), last entry wins", lex.duplicates);
        }
        Ok(lex)
    }

    pub fn bundled_english() -> Self {
        Self::parse(include_str!("../resources/lexicon_english.tsv"), "bundled-english")
            .expect("bundled lexicon parses")
    }

    pub fn get(&self, token: &str) -> Option<f64> {
        self.entries.get(token).copied()
    }

    /// Entries in sorted order.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        let mut w: Vec<&str> = self.entries.keys().map(String::as_str).collect();
        w.sort_unstable();
        w.into_iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn load_lexicon(path: &Path) -> Result<SentimentLexicon, SentilexError> {
    let text = std::fs::read_to_string(path).map_err(|source| SentilexError::Io {
        path: path.display().to_string(),
        source,
    })?;
    SentimentLexicon::parse(&text, &path.display().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SentimentConfig {
    pub pos_threshold: f64,
    pub neg_threshold: f64,
    pub norm_alpha: f64,
}

impl Default for SentimentConfig {
    fn default() -> Self {
        SentimentConfig {
            pos_threshold: 0.3,
            neg_threshold: -0.3,
            norm_alpha: 15.0,
        }
    }
}

impl SentimentConfig {
    pub fn validate(&self) -> Result<(), SentilexError> {
        if !(self.neg_threshold < self.pos_threshold) {
            return Err(SentilexError::Config(format!(
                "neg_threshold {} must be below pos_threshold {}",
                self.neg_threshold, self.pos_threshold
            )));
        }
        if !(self.norm_alpha > 0.0 && self.norm_alpha.is_finite()) {
            return Err(SentilexError::Config(format!(
                "norm_alpha {} must be positive",
                self.norm_alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentScore {
    pub compound: f64,
    pub raw_sum: f64,
    pub matched_tokens: usize,
}

/// `s / sqrt(s² + alpha)`; odd, strictly increasing, bounded by (-1, 1).
pub fn normalize_sum(s: f64, alpha: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s / (s * s + alpha).sqrt()
    }
}

pub fn compound_score<S: AsRef<str>>(
    tokens: &[S],
    lex: &SentimentLexicon,
    cfg: &SentimentConfig,
) -> SentimentScore {
    let mut raw_sum = 0.0;
    let mut matched_tokens = 0;
    for t in tokens {
        if let Some(v) = lex.get(t.as_ref()) {
            raw_sum += v;
            matched_tokens += 1;
        }
    }
    SentimentScore {
        compound: normalize_sum(raw_sum, cfg.norm_alpha),
        raw_sum,
        matched_tokens,
    }
}

/// Thresholds are inclusive toward the polar classes.
pub fn polarity_label(score: &SentimentScore, cfg: &SentimentConfig) -> Sentiment {
    if score.compound >= cfg.pos_threshold {
        Sentiment::Positive
    } else if score.compound <= cfg.neg_threshold {
        Sentiment::Negative
    } else {
        Sentiment::Neutral
    }
}

/// Per-language lexicons. Urdu samples fall back to scoring their
/// `translation` field with the English lexicon when no Urdu lexicon is set.
#[derive(Debug, Clone, Default)]
pub struct Lexicons {
    pub english: Option<SentimentLexicon>,
    pub urdu: Option<SentimentLexicon>,
}

impl Lexicons {
    pub fn bundled() -> Self {
        Lexicons {
            english: Some(SentimentLexicon::bundled_english()),
            urdu: None,
        }
    }

    /// Tokens and lexicon used to score `s`.
    fn route<'a>(&'a self, s: &LabeledSample) -> Result<(Vec<String>, &'a SentimentLexicon), SentilexError> {
        match s.lang() {
            Lang::English => {
                let lex = self
                    .english
                    .as_ref()
                    .ok_or(SentilexError::MissingLexicon(Lang::English))?;
                Ok((preprocess::normalize(&s.sample.text, Lang::English), lex))
            }
            Lang::Urdu => {
                if let Some(lex) = &self.urdu {
                    return Ok((preprocess::normalize(&s.sample.text, Lang::Urdu), lex));
                }
                let translation = s
                    .sample
                    .translation
                    .as_deref()
                    .ok_or_else(|| SentilexError::MissingTranslation(s.id().to_string()))?;
                let lex = self
                    .english
                    .as_ref()
                    .ok_or(SentilexError::MissingLexicon(Lang::Urdu))?;
                Ok((preprocess::normalize(translation, Lang::English), lex))
            }
        }
    }

    pub fn score(&self, s: &LabeledSample, cfg: &SentimentConfig) -> Result<SentimentScore, SentilexError> {
        let (tokens, lex) = self.route(s)?;
        Ok(compound_score(&tokens, lex, cfg))
    }
}

pub const HISTOGRAM_BIN_WIDTH: f64 = 0.05;
const HISTOGRAM_BINS: usize = 40;

/// Compound-score histogram over [-1, 1) with fixed 0.05-wide bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreHistogram {
    pub counts: Vec<usize>,
}

impl Default for ScoreHistogram {
    fn default() -> Self {
        ScoreHistogram {
            counts: vec![0; HISTOGRAM_BINS],
        }
    }
}

impl ScoreHistogram {
    pub fn bin_of(compound: f64) -> usize {
        let k = ((compound + 1.0) * 20.0).floor();
        (k.max(0.0) as usize).min(HISTOGRAM_BINS - 1)
    }

    pub fn bin_low(k: usize) -> f64 {
        -1.0 + k as f64 * HISTOGRAM_BIN_WIDTH
    }

    pub fn add(&mut self, compound: f64) {
        self.counts[Self::bin_of(compound)] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_low,count\n");
        for (k, c) in self.counts.iter().enumerate() {
            writeln!(out, "{:.2},{c}", Self::bin_low(k)).unwrap();
        }
        out
    }

    /// gnuplot script drawing `csv_file` as a box plot.
    pub fn gnuplot_script(csv_file: &str) -> String {
        format!(
            "set datafile separator ','\n\
             set key off\n\
             set xlabel 'compound score'\n\
             set ylabel 'samples'\n\
             set boxwidth {HISTOGRAM_BIN_WIDTH}\n\
             set style fill solid 0.6\n\
             plot '{csv_file}' every ::1 using ($1+{half}):2 with boxes\n",
            half = HISTOGRAM_BIN_WIDTH / 2.0
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SentimentSummary {
    pub histogram: ScoreHistogram,
    pub counts: BTreeMap<Sentiment, usize>,
}

impl SentimentSummary {
    pub fn count(&self, s: Sentiment) -> usize {
        self.counts.get(&s).copied().unwrap_or(0)
    }

    pub fn counts_csv(&self) -> String {
        let mut out = String::from("sentiment,count\n");
        for s in Sentiment::ALL {
            writeln!(out, "{s},{}", self.count(*s)).unwrap();
        }
        out
    }
}

/// Labels every sample's sentiment. A sample whose sentiment changes loses
/// any emotion annotation it carried.
pub fn label_dataset_sentiment(
    ds: &Dataset,
    lexicons: &Lexicons,
    cfg: &SentimentConfig,
) -> Result<(Dataset, SentimentSummary), SentilexError> {
    cfg.validate()?;
    let mut out = ds.clone();
    let mut summary = SentimentSummary::default();
    for s in out.samples.iter_mut() {
        let score = lexicons.score(s, cfg)?;
        let label = polarity_label(&score, cfg);
        summary.histogram.add(score.compound);
        *summary.counts.entry(label).or_default() += 1;
        if s.sentiment != Some(label) {
            s.emotion = None;
            s.emotion_status = None;
        }
        s.sentiment = Some(label);
    }
    Ok((out, summary))
}
