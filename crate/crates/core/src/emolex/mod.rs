//! Rule-based emotion annotation of polar (non-neutral) samples.
//!
//! Each sentence is tokenized and part-of-speech tagged from a tag lexicon
//! with ordered suffix fallbacks. Only nouns, adjectives and adverbs are
//! considered: the lemma and Porter stem of each such word are looked up in
//! six Ekman synonym lists, hits are tallied per category, and the category
//! with the strictly largest tally becomes the sentence label. Ties and empty
//! tallies are left `unresolved` for a manual override file.

pub mod porter;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dataset, Emotion, EmotionStatus, Lang, LabeledSample, Sentiment};
use crate::preprocess;

pub use porter::stem;

#[derive(Debug, Error)]
pub enum EmolexError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("synonym directory {dir}: {message}")]
    Synonyms { dir: String, message: String },
    #[error("sample `{0}` has no sentiment label; run sentiment labeling first")]
    MissingSentiment(String),
    #[error("no emotion resources for {0} samples")]
    MissingResources(Lang),
    #[error("urdu sample `{0}` has no translation and no urdu emotion resources were supplied")]
    MissingTranslation(String),
    #[error("override(s) name unknown or neutral samples: {}", .0.join(", "))]
    BadOverrides(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PosTag {
    Noun,
    Adjective,
    Adverb,
    Verb,
    Other,
}

impl PosTag {
    pub fn is_content(self) -> bool {
        matches!(self, PosTag::Noun | PosTag::Adjective | PosTag::Adverb)
    }
}

impl std::str::FromStr for PosTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "noun" => Ok(PosTag::Noun),
            "adjective" => Ok(PosTag::Adjective),
            "adverb" => Ok(PosTag::Adverb),
            "verb" => Ok(PosTag::Verb),
            "other" => Ok(PosTag::Other),
            _ => Err(format!("unknown tag `{s}`")),
        }
    }
}

/// Iterates `(line_number, columns)` over the non-comment lines of a TSV file.
fn tsv_rows<'a>(text: &'a str) -> impl Iterator<Item = (usize, Vec<&'a str>)> + 'a {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line.split('\t').map(str::trim).collect()))
        }
    })
}

fn read(path: &Path) -> Result<String, EmolexError> {
    std::fs::read_to_string(path).map_err(|source| EmolexError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_pairs<V: std::str::FromStr>(text: &str, origin: &str) -> Result<Vec<(String, V)>, EmolexError>
where
    V::Err: std::fmt::Display,
{
    tsv_rows(text)
        .map(|(line, cols)| {
            let err = |message: String| EmolexError::Parse {
                path: origin.to_string(),
                line,
                message,
            };
            if cols.len() < 2 || cols[0].is_empty() {
                return Err(err("expected key<TAB>value".into()));
            }
            let v = cols[1].parse::<V>().map_err(|e| err(e.to_string()))?;
            Ok((cols[0].to_string(), v))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TagLexicon {
    pub entries: HashMap<String, PosTag>,
    /// Tried in order when a token is not in `entries`.
    pub suffix_rules: Vec<(String, PosTag)>,
}

impl TagLexicon {
    pub fn parse(entries: &str, suffix_rules: &str, origin: &str) -> Result<Self, EmolexError> {
        Ok(TagLexicon {
            entries: parse_pairs(entries, origin)?.into_iter().collect(),
            suffix_rules: parse_pairs(suffix_rules, origin)?,
        })
    }

    pub fn load(entries: &Path, suffix_rules: &Path) -> Result<Self, EmolexError> {
        let lex = Self::parse(&read(entries)?, "", &entries.display().to_string())?;
        Ok(TagLexicon {
            suffix_rules: parse_pairs(&read(suffix_rules)?, &suffix_rules.display().to_string())?,
            ..lex
        })
    }

    pub fn bundled_english() -> Self {
        Self::parse(
            include_str!("../../resources/emotion/english/tags.tsv"),
            include_str!("../../resources/emotion/english/suffix_rules.tsv"),
            "bundled",
        )
        .expect("bundled tag lexicon parses")
    }

    pub fn tag(&self, token: &str) -> PosTag {
        if let Some(&t) = self.entries.get(token) {
            return t;
        }
        self.suffix_rules
            .iter()
            .find(|(suffix, _)| token.len() > suffix.len() && token.ends_with(suffix.as_str()))
            .map(|&(_, t)| t)
            .unwrap_or(PosTag::Other)
    }
}

pub fn pos_tag<S: AsRef<str>>(tokens: &[S], lex: &TagLexicon) -> Vec<(String, PosTag)> {
    tokens
        .iter()
        .map(|t| (t.as_ref().to_string(), lex.tag(t.as_ref())))
        .collect()
}

/// Exception table plus inflection stripping.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lemmatizer {
    pub exceptions: HashMap<String, String>,
}

impl Lemmatizer {
    pub fn parse(text: &str, origin: &str) -> Result<Self, EmolexError> {
        Ok(Lemmatizer {
            exceptions: parse_pairs(text, origin)?.into_iter().collect(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, EmolexError> {
        Self::parse(&read(path)?, &path.display().to_string())
    }

    pub fn bundled_english() -> Self {
        Self::parse(
            include_str!("../../resources/emotion/english/lemma_exceptions.tsv"),
            "bundled",
        )
        .expect("bundled lemma exceptions parse")
    }

    pub fn lemma(&self, word: &str) -> String {
        let w = word.to_lowercase();
        if let Some(l) = self.exceptions.get(&w) {
            return l.clone();
        }
        strip_inflection(&w)
    }
}

fn has_vowel(s: &str) -> bool {
    s.chars().any(|c| "aeiouy".contains(c))
}

fn undouble(mut s: String) -> String {
    let b = s.as_bytes();
    let n = b.len();
    if n >= 2 && b[n - 1] == b[n - 2] && !b"aeioulsz".contains(&b[n - 1]) {
        s.pop();
    }
    s
}

/// Regular inflection stripping: plural -s/-es/-ies and past/progressive
/// -ed/-ied/-ing. Non-ASCII words are returned unchanged.
fn strip_inflection(w: &str) -> String {
    if !w.is_ascii() {
        return w.to_string();
    }
    let n = w.len();
    if n >= 5 && (w.ends_with("ies") || w.ends_with("ied")) {
        return format!("{}y", &w[..n - 3]);
    }
    if w.ends_with("sses") {
        return w[..n - 2].to_string();
    }
    for es in ["ches", "shes", "xes", "zes"] {
        if w.ends_with(es) && n > es.len() + 1 {
            return w[..n - 2].to_string();
        }
    }
    if n >= 4 && w.ends_with('s') && !w.ends_with("ss") && !w.ends_with("us") && !w.ends_with("is") {
        return w[..n - 1].to_string();
    }
    if n >= 6 && w.ends_with("ing") && has_vowel(&w[..n - 3]) {
        return undouble(w[..n - 3].to_string());
    }
    if n >= 5 && w.ends_with("ed") && has_vowel(&w[..n - 2]) {
        return undouble(w[..n - 2].to_string());
    }
    w.to_string()
}

/// `(lemma, stem)` using the bundled English exception table.
pub fn lemma_stem(word: &str) -> (String, String) {
    static LEMMATIZER: once_cell::sync::Lazy<Lemmatizer> =
        once_cell::sync::Lazy::new(Lemmatizer::bundled_english);
    lemma_stem_with(&LEMMATIZER, word)
}

pub fn lemma_stem_with(lemmatizer: &Lemmatizer, word: &str) -> (String, String) {
    (lemmatizer.lemma(word), stem(&word.to_lowercase()))
}

/// Six category word sets. Sets may overlap; overlapping entries are
/// reported by [`SynonymTable::overlaps`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SynonymTable {
    pub lists: BTreeMap<Emotion, BTreeSet<String>>,
}

impl SynonymTable {
    /// Builds a table from exactly the given strings, no normalization.
    pub fn new(lists: BTreeMap<Emotion, BTreeSet<String>>) -> Self {
        let mut lists = lists;
        for e in Emotion::ALL {
            lists.entry(*e).or_default();
        }
        SynonymTable { lists }
    }

    /// Builds a table whose sets hold each listed word plus its lemma and stem,
    /// so that inflected surface forms in the files still match.
    pub fn from_words(words: BTreeMap<Emotion, Vec<String>>, lemmatizer: &Lemmatizer) -> Self {
        let mut lists = BTreeMap::new();
        for (e, ws) in words {
            let set: &mut BTreeSet<String> = lists.entry(e).or_default();
            for w in ws {
                let (lemma, stem) = lemma_stem_with(lemmatizer, &w);
                set.insert(w.to_lowercase());
                set.insert(lemma);
                set.insert(stem);
            }
        }
        Self::new(lists)
    }

    fn parse_list(text: &str) -> Vec<String> {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect()
    }

    /// Loads `<category>.txt` for each of the six categories from `dir`.
    /// Files for other names are an error, as is a missing category.
    pub fn load_dir(dir: &Path, lemmatizer: &Lemmatizer) -> Result<Self, EmolexError> {
        let fail = |message: String| EmolexError::Synonyms {
            dir: dir.display().to_string(),
            message,
        };
        let entries = std::fs::read_dir(dir).map_err(|source| EmolexError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let mut words = BTreeMap::new();
        for entry in entries {
            let path = entry
                .map_err(|source| EmolexError::Io {
                    path: dir.display().to_string(),
                    source,
                })?
                .path();
            if !path.is_file() {
                continue;
            }
            let name = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            let emotion: Emotion = name
                .parse()
                .map_err(|_| fail(format!("`{}` is not an emotion category", path.display())))?;
            words.insert(emotion, Self::parse_list(&read(&path)?));
        }
        let missing: Vec<&str> = Emotion::ALL
            .iter()
            .filter(|e| !words.contains_key(*e))
            .map(|e| e.as_str())
            .collect();
        if !missing.is_empty() {
            return Err(fail(format!("missing list(s): {}", missing.join(", "))));
        }
        Ok(Self::from_words(words, lemmatizer))
    }

    pub fn bundled_english() -> Self {
        let files = [
            (Emotion::Happiness, include_str!("../../resources/emotion/english/synonyms/happiness.txt")),
            (Emotion::Sadness, include_str!("../../resources/emotion/english/synonyms/sadness.txt")),
            (Emotion::Surprise, include_str!("../../resources/emotion/english/synonyms/surprise.txt")),
            (Emotion::Anger, include_str!("../../resources/emotion/english/synonyms/anger.txt")),
            (Emotion::Fear, include_str!("../../resources/emotion/english/synonyms/fear.txt")),
            (Emotion::Disgust, include_str!("../../resources/emotion/english/synonyms/disgust.txt")),
        ];
        let words = files
            .iter()
            .map(|(e, text)| (*e, Self::parse_list(text)))
            .collect();
        Self::from_words(words, &Lemmatizer::bundled_english())
    }

    pub fn categories_of(&self, form: &str) -> impl Iterator<Item = Emotion> + '_ {
        let form = form.to_string();
        self.lists
            .iter()
            .filter(move |(_, set)| set.contains(&form))
            .map(|(e, _)| *e)
    }

    /// Strings present in more than one category list.
    pub fn overlaps(&self) -> BTreeMap<String, Vec<Emotion>> {
        let mut seen: BTreeMap<String, Vec<Emotion>> = BTreeMap::new();
        for (e, set) in &self.lists {
            for w in set {
                seen.entry(w.clone()).or_default().push(*e);
            }
        }
        seen.retain(|_, v| v.len() > 1);
        seen
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EmotionTally {
    pub counts: BTreeMap<Emotion, usize>,
    pub considered_words: usize,
    /// Words whose lemma/stem hit more than one category.
    pub overlap_words: Vec<String>,
}

impl EmotionTally {
    pub fn count(&self, e: Emotion) -> usize {
        self.counts.get(&e).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }
}

/// Counts, for every noun/adjective/adverb, each category whose list holds
/// the word's lemma or stem. A category is counted at most once per word
/// occurrence even when both forms hit it.
pub fn tally_emotions(tagged: &[(String, PosTag)], syn: &SynonymTable, lemmatizer: &Lemmatizer) -> EmotionTally {
    let mut tally = EmotionTally::default();
    for (token, tag) in tagged {
        if !tag.is_content() {
            continue;
        }
        tally.considered_words += 1;
        let (lemma, stem) = lemma_stem_with(lemmatizer, token);
        let hits: BTreeSet<Emotion> = syn.categories_of(&lemma).chain(syn.categories_of(&stem)).collect();
        if hits.len() > 1 {
            tally.overlap_words.push(token.clone());
        }
        for e in hits {
            *tally.counts.entry(e).or_default() += 1;
        }
    }
    tally
}

/// The unique category with the strictly largest count, or `None` when all
/// counts are zero or the maximum is shared.
pub fn dominant_emotion(tally: &EmotionTally) -> Option<Emotion> {
    let max = tally.counts.values().copied().max().unwrap_or(0);
    if max == 0 {
        return None;
    }
    let mut top = tally.counts.iter().filter(|(_, &c)| c == max);
    let first = top.next().map(|(e, _)| *e);
    if top.next().is_some() {
        None
    } else {
        first
    }
}

/// Tagger, lemmatizer and synonym lists for one language.
#[derive(Debug, Clone)]
pub struct EmotionResources {
    pub tags: TagLexicon,
    pub lemmatizer: Lemmatizer,
    pub synonyms: SynonymTable,
}

impl EmotionResources {
    pub fn bundled_english() -> Self {
        EmotionResources {
            tags: TagLexicon::bundled_english(),
            lemmatizer: Lemmatizer::bundled_english(),
            synonyms: SynonymTable::bundled_english(),
        }
    }

    /// Loads `tags.tsv`, `suffix_rules.tsv`, `lemma_exceptions.tsv` and the
    /// `synonyms/` directory from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, EmolexError> {
        let lemmatizer = Lemmatizer::load(&dir.join("lemma_exceptions.tsv"))?;
        Ok(EmotionResources {
            tags: TagLexicon::load(&dir.join("tags.tsv"), &dir.join("suffix_rules.tsv"))?,
            synonyms: SynonymTable::load_dir(&dir.join("synonyms"), &lemmatizer)?,
            lemmatizer,
        })
    }

    pub fn tally(&self, tokens: &[String]) -> EmotionTally {
        tally_emotions(&pos_tag(tokens, &self.tags), &self.synonyms, &self.lemmatizer)
    }
}

/// Per-language resources. Urdu samples use the `translation` field with the
/// English resources when no Urdu resources are given.
#[derive(Debug, Clone, Default)]
pub struct EmotionResourceSet {
    pub english: Option<EmotionResources>,
    pub urdu: Option<EmotionResources>,
}

impl EmotionResourceSet {
    pub fn bundled() -> Self {
        EmotionResourceSet {
            english: Some(EmotionResources::bundled_english()),
            urdu: None,
        }
    }

    pub fn tally(&self, s: &LabeledSample) -> Result<EmotionTally, EmolexError> {
        match s.lang() {
            Lang::English => {
                let r = self
                    .english
                    .as_ref()
                    .ok_or(EmolexError::MissingResources(Lang::English))?;
                Ok(r.tally(&preprocess::normalize(&s.sample.text, Lang::English)))
            }
            Lang::Urdu => {
                if let Some(r) = &self.urdu {
                    return Ok(r.tally(&preprocess::normalize(&s.sample.text, Lang::Urdu)));
                }
                let translation = s
                    .sample
                    .translation
                    .as_deref()
                    .ok_or_else(|| EmolexError::MissingTranslation(s.id().to_string()))?;
                let r = self
                    .english
                    .as_ref()
                    .ok_or(EmolexError::MissingResources(Lang::Urdu))?;
                Ok(r.tally(&preprocess::normalize(translation, Lang::English)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverrideRecord {
    pub id: String,
    pub emotion: Emotion,
}

/// Reads a JSONL override file of `{"id": ..., "emotion": ...}` records.
/// Later records for the same id win.
pub fn load_overrides(path: &Path) -> Result<BTreeMap<String, Emotion>, EmolexError> {
    let text = read(path)?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: OverrideRecord = serde_json::from_str(line).map_err(|e| EmolexError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.insert(rec.id, rec.emotion);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EmotionSummary {
    pub counts: BTreeMap<Emotion, usize>,
    pub unresolved: usize,
    pub manual: usize,
    /// Ids left unresolved, in dataset order.
    pub worklist: Vec<String>,
    /// Distinct words that hit several categories during labeling.
    pub overlap_words: BTreeSet<String>,
}

impl EmotionSummary {
    pub fn count(&self, e: Emotion) -> usize {
        self.counts.get(&e).copied().unwrap_or(0)
    }

    pub fn counts_csv(&self) -> String {
        let mut out = String::from("emotion,count\n");
        for e in Emotion::ALL {
            writeln!(out, "{e},{}", self.count(*e)).unwrap();
        }
        writeln!(out, "unresolved,{}", self.unresolved).unwrap();
        out
    }
}

/// Annotates every positive or negative sample and clears any emotion on
/// neutral ones. Samples already carrying a `manual` label keep it; overrides
/// are applied last with status `manual`.
pub fn label_dataset_emotion(
    ds: &Dataset,
    resources: &EmotionResourceSet,
    overrides: &BTreeMap<String, Emotion>,
) -> Result<(Dataset, EmotionSummary), EmolexError> {
    if let Some(s) = ds.iter().find(|s| s.sentiment.is_none()) {
        return Err(EmolexError::MissingSentiment(s.id().to_string()));
    }
    let polar: HashMap<&str, bool> = ds
        .iter()
        .map(|s| (s.id(), s.sentiment != Some(Sentiment::Neutral)))
        .collect();
    let offenders: Vec<String> = overrides
        .keys()
        .filter(|id| !polar.get(id.as_str()).copied().unwrap_or(false))
        .cloned()
        .collect();
    if !offenders.is_empty() {
        return Err(EmolexError::BadOverrides(offenders));
    }

    let mut out = ds.clone();
    let mut summary = EmotionSummary::default();
    for s in out.samples.iter_mut() {
        if s.sentiment == Some(Sentiment::Neutral) {
            s.emotion = None;
            s.emotion_status = None;
            continue;
        }
        if let Some(&e) = overrides.get(s.id()) {
            s.emotion = Some(e);
            s.emotion_status = Some(EmotionStatus::Manual);
        } else if s.emotion_status != Some(EmotionStatus::Manual) || s.emotion.is_none() {
            let tally = resources.tally(s)?;
            summary.overlap_words.extend(tally.overlap_words.iter().cloned());
            match dominant_emotion(&tally) {
                Some(e) => {
                    s.emotion = Some(e);
                    s.emotion_status = Some(EmotionStatus::Auto);
                }
                None => {
                    s.emotion = None;
                    s.emotion_status = Some(EmotionStatus::Unresolved);
                }
            }
        }
        match s.emotion {
            Some(e) => *summary.counts.entry(e).or_default() += 1,
            None => {
                summary.unresolved += 1;
                summary.worklist.push(s.id().to_string());
            }
        }
        if s.emotion_status == Some(EmotionStatus::Manual) {
            summary.manual += 1;
        }
    }
    if !summary.overlap_words.is_empty() {
        log::warn!(
            "{} word(s) matched several emotion lists: {:?}",
            summary.overlap_words.len(),
            summary.overlap_words
        );
    }
    Ok((out, summary))
}
