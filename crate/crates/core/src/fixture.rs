//! Seeded synthetic bilingual corpora for tests and demos.
//!
//! Every polar sample carries one sentiment cue word and one emotion cue
//! word; neutral samples carry neither. Cue words are drawn from the bundled
//! lexicon and synonym lists, filtered so that each one triggers exactly the
//! label it is meant to. Emotions follow polarity (happiness and surprise
//! with positive text, the other four with negative). Topic words correlate
//! with the sentiment and emotion classes; `overlap` mixes them across
//! classes. Urdu samples are written in Urdu
//! script with a letter-by-letter transliteration and carry the English
//! sentence as their translation.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Dataset, Emotion, Lang, LabeledSample, Sample, Sentiment};
use crate::emolex::EmotionResources;
use crate::preprocess::StopList;
use crate::sentilex::{compound_score, polarity_label, SentimentConfig, SentimentLexicon};

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("invalid fixture configuration: {0}")]
    Config(String),
    #[error("bundled resources offer no usable cue word for {0}")]
    NoCues(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureConfig {
    pub n: usize,
    pub seed: u64,
    pub urdu_fraction: f64,
    /// Relative class frequencies for negative, neutral, positive.
    pub sentiment_weights: [f64; 3],
    /// Probability that a topic word comes from a random class.
    pub overlap: f64,
    pub min_filler: usize,
    pub max_filler: usize,
    /// Distinct cue words per sentiment or emotion class; 0 keeps all.
    pub cues_per_class: usize,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        FixtureConfig {
            n: 500,
            seed: 7,
            urdu_fraction: 0.5,
            sentiment_weights: [1.0, 1.0, 1.0],
            overlap: 0.0,
            min_filler: 1,
            max_filler: 4,
            cues_per_class: 3,
        }
    }
}

impl FixtureConfig {
    /// Negative-heavy class mix with a rare positive class.
    pub fn imbalanced() -> Self {
        FixtureConfig {
            sentiment_weights: [0.55, 0.33, 0.12],
            overlap: 0.35,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), FixtureError> {
        if self.n == 0 {
            return Err(FixtureError::Config("n must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.urdu_fraction) || !(0.0..=1.0).contains(&self.overlap) {
            return Err(FixtureError::Config("fractions must lie in [0, 1]".into()));
        }
        if self.sentiment_weights.iter().any(|w| !(*w >= 0.0)) || self.sentiment_weights.iter().sum::<f64>() <= 0.0 {
            return Err(FixtureError::Config("sentiment weights must be non-negative with a positive sum".into()));
        }
        if self.min_filler > self.max_filler {
            return Err(FixtureError::Config("min_filler exceeds max_filler".into()));
        }
        Ok(())
    }
}

/// Labels the generator intended for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intended {
    pub sentiment: Sentiment,
    pub emotion: Option<Emotion>,
}

const TOPICS: [&[&str]; 3] = [
    &["hospital", "ward", "shortage", "queue", "lockdown"],
    &["report", "district", "update", "bulletin", "survey"],
    &["vaccine", "clinic", "volunteer", "donation", "campaign"],
];

const EMOTION_TOPICS: [(Emotion, &[&str]); 6] = [
    (Emotion::Happiness, &["wedding", "festival", "reunion"]),
    (Emotion::Sadness, &["funeral", "farewell", "memorial"]),
    (Emotion::Surprise, &["announcement", "discovery", "twist"]),
    (Emotion::Anger, &["delay", "corruption", "bribe"]),
    (Emotion::Fear, &["curfew", "quarantine", "siren"]),
    (Emotion::Disgust, &["sewage", "drain", "rats"]),
];

const POSITIVE_EMOTIONS: [Emotion; 2] = [Emotion::Happiness, Emotion::Surprise];
const NEGATIVE_EMOTIONS: [Emotion; 4] = [Emotion::Sadness, Emotion::Anger, Emotion::Fear, Emotion::Disgust];

const FILLER: &[&str] = &[
    "city", "people", "today", "week", "officials", "cases", "town", "area", "local", "news", "residents", "market", "school",
    "road", "morning", "evening", "family", "village", "province", "staff",
];

const EN_STOP: &[&str] = &["the", "in", "of", "and", "a", "to"];
const UR_STOP: &[&str] = &["کے", "میں", "ہے", "اور", "سے", "کی"];

fn urdu_letter(c: char) -> char {
    match c {
        'a' => 'ا',
        'b' => 'ب',
        'c' => 'چ',
        'd' => 'د',
        'e' => 'ے',
        'f' => 'ف',
        'g' => 'گ',
        'h' => 'ہ',
        'i' => 'ی',
        'j' => 'ج',
        'k' => 'ک',
        'l' => 'ل',
        'm' => 'م',
        'n' => 'ن',
        'o' => 'و',
        'p' => 'پ',
        'q' => 'ق',
        'r' => 'ر',
        's' => 'س',
        't' => 'ت',
        'u' => 'ع',
        'v' => 'ط',
        'w' => 'ظ',
        'x' => 'خ',
        'y' => 'ئ',
        'z' => 'ز',
        other => other,
    }
}

/// Urdu-script rendering of an English cue word; injective on lowercase ASCII.
pub fn transliterate(word: &str) -> String {
    word.chars().map(urdu_letter).collect()
}

/// Cue words checked against the bundled labeling resources.
#[derive(Debug, Clone)]
pub struct CueWords {
    pub sentiment: BTreeMap<Sentiment, Vec<String>>,
    pub emotion: BTreeMap<Emotion, Vec<String>>,
    pub topics: [Vec<String>; 3],
    pub emotion_topics: BTreeMap<Emotion, Vec<String>>,
    pub filler: Vec<String>,
}

impl CueWords {
    pub fn bundled() -> Result<Self, FixtureError> {
        Self::from_resources(&SentimentLexicon::bundled_english(), &EmotionResources::bundled_english())
    }

    pub fn from_resources(lex: &SentimentLexicon, emo: &EmotionResources) -> Result<Self, FixtureError> {
        let cfg = SentimentConfig::default();
        let stop = StopList::bundled(Lang::English);
        let ur_stop = StopList::bundled(Lang::Urdu);
        let polarity = |w: &str| polarity_label(&compound_score(&[w], lex, &cfg), &cfg);
        let silent = |w: &str| lex.get(w).is_none() && emo.tally(&[w.to_string()]).total() == 0 && !stop.contains(w)
                && !ur_stop.contains(&transliterate(w));

        let mut sentiment = BTreeMap::new();
        for s in [Sentiment::Negative, Sentiment::Positive] {
            let words: Vec<String> = lex
                .words()
                .filter(|w| w.chars().all(|c| c.is_ascii_lowercase()) && !ur_stop.contains(&transliterate(w)))
                .filter(|w| polarity(w) == s && emo.tally(&[w.to_string()]).total() == 0 && !stop.contains(w))
                .map(str::to_string)
                .collect();
            if words.is_empty() {
                return Err(FixtureError::NoCues(s.to_string()));
            }
            sentiment.insert(s, words);
        }

        let mut emotion = BTreeMap::new();
        for &e in Emotion::ALL {
            let words: Vec<String> = emo.synonyms.lists[&e]
                .iter()
                .filter(|w| emo.tags.entries.get(w.as_str()).is_some_and(|t| t.is_content()))
                .filter(|w| lex.get(w).is_none() && !stop.contains(w) && !ur_stop.contains(&transliterate(w)))
                .filter(|w| {
                    let t = emo.tally(&[w.to_string()]);
                    t.total() == 1 && t.count(e) == 1
                })
                .cloned()
                .collect();
            if words.is_empty() {
                return Err(FixtureError::NoCues(e.to_string()));
            }
            emotion.insert(e, words);
        }

        let keep = |ws: &[&str]| -> Vec<String> { ws.iter().filter(|w| silent(w)).map(|w| w.to_string()).collect() };
        let topics = [keep(TOPICS[0]), keep(TOPICS[1]), keep(TOPICS[2])];
        let emotion_topics: BTreeMap<Emotion, Vec<String>> = EMOTION_TOPICS.iter().map(|(e, ws)| (*e, keep(ws))).collect();
        let filler = keep(FILLER);
        if topics.iter().any(Vec::is_empty) || emotion_topics.values().any(Vec::is_empty) || filler.is_empty() {
            return Err(FixtureError::NoCues("topics".into()));
        }
        Ok(CueWords {
            sentiment,
            emotion,
            topics,
            emotion_topics,
            filler,
        })
    }
}

fn sentiment_slot(s: Sentiment) -> usize {
    match s {
        Sentiment::Negative => 0,
        Sentiment::Neutral => 1,
        Sentiment::Positive => 2,
    }
}

const SLOTS: [Sentiment; 3] = [Sentiment::Negative, Sentiment::Neutral, Sentiment::Positive];

/// Generates an unlabeled corpus and the labels each sample was built to
/// receive from the bundled labelers.
pub fn generate_fixture(cfg: &FixtureConfig) -> Result<(Dataset, Vec<Intended>), FixtureError> {
    cfg.validate()?;
    let mut cues = CueWords::bundled()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    if cfg.cues_per_class > 0 {
        for list in cues.sentiment.values_mut().chain(cues.emotion.values_mut()) {
            shuffle(list, &mut rng);
            list.truncate(cfg.cues_per_class);
        }
    }
    let total: f64 = cfg.sentiment_weights.iter().sum();
    let n_urdu = (cfg.n as f64 * cfg.urdu_fraction).round() as usize;
    let mut samples = Vec::with_capacity(cfg.n);
    let mut intended = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let lang = if i < cfg.n - n_urdu { Lang::English } else { Lang::Urdu };
        let mut u = rng.random::<f64>() * total;
        let mut slot = 2;
        for (k, w) in cfg.sentiment_weights.iter().enumerate() {
            if u < *w {
                slot = k;
                break;
            }
            u -= w;
        }
        let sentiment = SLOTS[slot];
        let topic_slot = if rng.random_bool(cfg.overlap) { rng.random_range(0..3) } else { slot };

        let mut content: Vec<String> = Vec::new();
        content.push(cues.topics[topic_slot].choose(&mut rng).expect("non-empty").clone());
        let emotion = if sentiment == Sentiment::Neutral {
            None
        } else {
            let pool: &[Emotion] = if sentiment == Sentiment::Positive { &POSITIVE_EMOTIONS } else { &NEGATIVE_EMOTIONS };
            let e = *pool.choose(&mut rng).expect("non-empty");
            let topic_e = if rng.random_bool(cfg.overlap) { *Emotion::ALL.choose(&mut rng).expect("non-empty") } else { e };
            content.push(cues.emotion_topics[&topic_e].choose(&mut rng).expect("non-empty").clone());
            content.push(cues.sentiment[&sentiment].choose(&mut rng).expect("non-empty").clone());
            content.push(cues.emotion[&e].choose(&mut rng).expect("non-empty").clone());
            Some(e)
        };
        for _ in 0..rng.random_range(cfg.min_filler..=cfg.max_filler) {
            content.push(cues.filler.choose(&mut rng).expect("non-empty").clone());
        }
        shuffle(&mut content, &mut rng);

        let mut english = Vec::new();
        let mut urdu = Vec::new();
        for (k, w) in content.iter().enumerate() {
            if k > 0 && rng.random_bool(0.4) {
                let s = rng.random_range(0..EN_STOP.len());
                english.push(EN_STOP[s].to_string());
                urdu.push(UR_STOP[s].to_string());
            }
            english.push(w.clone());
            urdu.push(transliterate(w));
        }
        let mut english = english.join(" ");
        english.push(if sentiment_slot(sentiment) == 1 { '.' } else { '!' });
        let sample = match lang {
            Lang::English => Sample::new(format!("en-{i:04}"), english, Lang::English),
            Lang::Urdu => {
                let mut s = Sample::new(format!("ur-{i:04}"), format!("{}۔", urdu.join(" ")), Lang::Urdu);
                s.translation = Some(english);
                s
            }
        };
        samples.push(LabeledSample::unlabeled(sample));
        intended.push(Intended { sentiment, emotion });
    }
    Ok((Dataset::new(samples, format!("fixture seed={} n={}", cfg.seed, cfg.n)), intended))
}

fn shuffle<T>(v: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..v.len()).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
}
