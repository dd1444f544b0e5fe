//! Text cleaning, punctuation stripping, tokenization and stop-word removal.
//!
//! The URL pattern, emoji ranges and punctuation set live in
//! `resources/cleaning.toml`, compiled into the crate.

use std::collections::BTreeSet;
use std::path::Path;

use once_cell::sync::Lazy;
use regex::Regex;
use serde::Deserialize;
use thiserror::Error;

use crate::corpus::Lang;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("stop list is for {list}, sample is {sample}")]
    LanguageMismatch { list: Lang, sample: Lang },
    #[error("cannot read stop list {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("stop list {path} line {line}: entry `{entry}` is not a single token")]
    BadEntry {
        path: String,
        line: usize,
        entry: String,
    },
}

#[derive(Debug, Deserialize)]
struct CleaningRules {
    url_pattern: String,
    token_prefixes: Vec<String>,
    punctuation: String,
    emoji_ranges: Vec<[u32; 2]>,
    emoji_joiners: Vec<u32>,
}

struct Rules {
    url: Regex,
    token_prefixes: Vec<char>,
    punctuation: BTreeSet<char>,
    emoji_ranges: Vec<(u32, u32)>,
    joiners: Vec<u32>,
}

static RULES: Lazy<Rules> = Lazy::new(|| {
    let raw: CleaningRules = toml::from_str(include_str!("../resources/cleaning.toml"))
        .expect("bundled cleaning rules parse");
    Rules {
        url: Regex::new(&raw.url_pattern).expect("bundled URL pattern compiles"),
        token_prefixes: raw
            .token_prefixes
            .iter()
            .filter_map(|p| p.chars().next())
            .collect(),
        punctuation: raw.punctuation.chars().collect(),
        emoji_ranges: raw.emoji_ranges.iter().map(|r| (r[0], r[1])).collect(),
        joiners: raw.emoji_joiners,
    }
});

pub fn is_emoji(c: char) -> bool {
    let cp = c as u32;
    RULES.emoji_ranges.iter().any(|&(lo, hi)| lo <= cp && cp <= hi)
}

pub fn is_punctuation(c: char) -> bool {
    RULES.punctuation.contains(&c)
}

/// Removes URLs, `#hashtag` / `@mention` tokens and emoji, then collapses
/// whitespace. Idempotent.
pub fn clean(raw: &str) -> String {
    let chars: Vec<char> = raw.chars().collect();
    let mut no_emoji = String::with_capacity(raw.len());
    for (i, &c) in chars.iter().enumerate() {
        if is_emoji(c) {
            no_emoji.push(' ');
            continue;
        }
        if RULES.joiners.contains(&(c as u32)) {
            let near_emoji = (i > 0 && is_emoji(chars[i - 1]))
                || chars.get(i + 1).is_some_and(|&n| is_emoji(n));
            if near_emoji {
                continue;
            }
        }
        no_emoji.push(c);
    }
    let no_urls = RULES.url.replace_all(&no_emoji, " ");
    no_urls
        .split_whitespace()
        .filter(|tok| {
            !tok.chars()
                .next()
                .is_some_and(|c| RULES.token_prefixes.contains(&c))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn strip_punctuation(text: &str) -> String {
    text.chars().filter(|&c| !is_punctuation(c)).collect()
}

/// Whitespace tokenization; English is case-folded, Urdu is left as-is.
pub fn tokenize(text: &str, lang: Lang) -> Vec<String> {
    text.split_whitespace()
        .map(|t| match lang {
            Lang::English => t.to_lowercase(),
            Lang::Urdu => t.to_string(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedSample {
    pub id: String,
    pub tokens: Vec<String>,
}

impl TokenizedSample {
    pub fn n(&self) -> usize {
        self.tokens.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopList {
    pub lang: Lang,
    pub words: BTreeSet<String>,
}

impl StopList {
    fn parse(text: &str, lang: Lang, origin: &str) -> Result<StopList, PreprocessError> {
        let mut words = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let entry = line.trim();
            if entry.is_empty() || entry.starts_with('#') {
                continue;
            }
            let toks = tokenize(entry, lang);
            if toks.len() != 1 {
                return Err(PreprocessError::BadEntry {
                    path: origin.to_string(),
                    line: i + 1,
                    entry: entry.to_string(),
                });
            }
            words.extend(toks);
        }
        Ok(StopList { lang, words })
    }

    /// One token per line, `#` starts a comment line.
    pub fn load(path: &Path, lang: Lang) -> Result<StopList, PreprocessError> {
        let text = std::fs::read_to_string(path).map_err(|source| PreprocessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, lang, &path.display().to_string())
    }

    /// The stop list shipped with the crate for `lang`.
    pub fn bundled(lang: Lang) -> StopList {
        let text = match lang {
            Lang::English => include_str!("../resources/stopwords_english.txt"),
            Lang::Urdu => include_str!("../resources/stopwords_urdu.txt"),
        };
        Self::parse(text, lang, "bundled").expect("bundled stop list is well formed")
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }
}

pub fn remove_stopwords(
    tokens: &[String],
    stoplist: &StopList,
    lang: Lang,
) -> Result<Vec<String>, PreprocessError> {
    if stoplist.lang != lang {
        return Err(PreprocessError::LanguageMismatch {
            list: stoplist.lang,
            sample: lang,
        });
    }
    Ok(tokens
        .iter()
        .filter(|t| !stoplist.contains(t))
        .cloned()
        .collect())
}

/// clean → strip_punctuation → tokenize, the shared front of every pipeline.
pub fn normalize(raw: &str, lang: Lang) -> Vec<String> {
    tokenize(&strip_punctuation(&clean(raw)), lang)
}

/// Stop lists for both languages.
#[derive(Debug, Clone)]
pub struct StopLists {
    pub english: StopList,
    pub urdu: StopList,
}

impl Default for StopLists {
    fn default() -> Self {
        StopLists {
            english: StopList::bundled(Lang::English),
            urdu: StopList::bundled(Lang::Urdu),
        }
    }
}

impl StopLists {
    pub fn get(&self, lang: Lang) -> &StopList {
        match lang {
            Lang::English => &self.english,
            Lang::Urdu => &self.urdu,
        }
    }

    /// Full feature-extraction front end: normalize, then drop stop words.
    pub fn prepare(&self, raw: &str, lang: Lang) -> Vec<String> {
        let list = self.get(lang);
        normalize(raw, lang)
            .into_iter()
            .filter(|t| !list.contains(t))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn clean_examples() {
        assert_eq!(clean("dengue spike [URL] #fever 😷"), "dengue spike");
        assert_eq!(clean("plain text"), "plain text");
        assert_eq!(
            clean("see https://example.org/x?q=1 and www.who.int now @health_dept"),
            "see and now"
        );
        assert_eq!(clean("fever😷cold"), "fever cold");
        assert_eq!(clean("  lots   of\tspace \n"), "lots of space");
        // ZWJ inside an emoji sequence goes, ZWJ between Urdu letters stays.
        assert_eq!(clean("a 👨\u{200D}👩 b"), "a b");
        assert_eq!(clean("ب\u{200D}ب"), "ب\u{200D}ب");
    }

    #[test]
    fn strip_punctuation_examples() {
        assert_eq!(strip_punctuation("fever, chills!"), "fever chills");
        assert_eq!(strip_punctuation("بخار ہے۔"), "بخار ہے");
        assert_eq!(strip_punctuation(""), "");
        assert_eq!(strip_punctuation("covid-19 (2020)"), "covid19 2020");
        assert_eq!(strip_punctuation("کیا، کیوں؟ ہاں؛"), "کیا کیوں ہاں");
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Dengue Fever rising", Lang::English), toks(&["dengue", "fever", "rising"]));
        assert_eq!(tokenize("ڈینگی بخار", Lang::Urdu), toks(&["ڈینگی", "بخار"]));
        assert_eq!(tokenize("  a  b ", Lang::English), toks(&["a", "b"]));
    }

    #[test]
    fn stopword_examples() {
        let en = StopList {
            lang: Lang::English,
            words: ["the", "is"].iter().map(|s| s.to_string()).collect(),
        };
        assert_eq!(
            remove_stopwords(&toks(&["the", "fever", "is", "high"]), &en, Lang::English).unwrap(),
            toks(&["fever", "high"])
        );
        assert!(remove_stopwords(&toks(&["the", "is"]), &en, Lang::English).unwrap().is_empty());
        assert!(matches!(
            remove_stopwords(&toks(&["x"]), &en, Lang::Urdu),
            Err(PreprocessError::LanguageMismatch { .. })
        ));
    }

    #[test]
    fn bundled_urdu_list_drops_possessive() {
        let ur = StopList::bundled(Lang::Urdu);
        assert!(ur.contains("کا"));
        assert_eq!(
            remove_stopwords(&toks(&["ڈینگی", "کا", "بخار"]), &ur, Lang::Urdu).unwrap(),
            toks(&["ڈینگی", "بخار"])
        );
    }

    #[test]
    fn bundled_english_list_is_case_folded_tokens() {
        let en = StopList::bundled(Lang::English);
        for w in ["the", "dont", "its", "wouldnt"] {
            assert!(en.contains(w), "{w}");
        }
        for w in &en.words {
            assert_eq!(tokenize(w, Lang::English), vec![w.clone()]);
        }
    }

    #[test]
    fn stop_list_file_with_comments() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("stop.txt");
        std::fs::write(&p, "# comment\nThe\n\nof\n").unwrap();
        let l = StopList::load(&p, Lang::English).unwrap();
        assert_eq!(l.words, ["of", "the"].iter().map(|s| s.to_string()).collect());
        std::fs::write(&p, "two words\n").unwrap();
        assert!(matches!(StopList::load(&p, Lang::English), Err(PreprocessError::BadEntry { line: 1, .. })));
    }

    fn fuzz_text() -> impl Strategy<Value = String> {
        let pieces = prop_oneof![
            Just("http://x.io/a".to_string()),
            Just("www.a.b".to_string()),
            Just("[URL]".to_string()),
            Just("#".to_string()),
            Just("@".to_string()),
            Just("😷".to_string()),
            Just("\u{200D}".to_string()),
            Just("\u{FE0F}".to_string()),
            Just(" ".to_string()),
            Just("\t".to_string()),
            Just("بخار".to_string()),
            Just("۔".to_string()),
            "[a-zA-Z,.!?]{1,4}",
            any::<char>().prop_map(|c| c.to_string()),
        ];
        prop::collection::vec(pieces, 0..24).prop_map(|v| v.concat())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn clean_is_idempotent_and_total(s in fuzz_text()) {
            let once = clean(&s);
            prop_assert_eq!(clean(&once), once.clone());
            prop_assert!(!RULES.url.is_match(&once));
            prop_assert!(!once.chars().any(is_emoji));
            for tok in once.split(' ') {
                prop_assert!(!tok.starts_with('#') && !tok.starts_with('@'));
                prop_assert!(!tok.is_empty() || once.is_empty());
            }
            prop_assert!(!once.contains("  "));
        }

        #[test]
        fn strip_punctuation_is_idempotent(s in fuzz_text()) {
            let once = strip_punctuation(&s);
            prop_assert_eq!(strip_punctuation(&once), once.clone());
            let kept: String = s.chars().filter(|c| c.is_alphanumeric()).collect();
            let still: String = once.chars().filter(|c| c.is_alphanumeric()).collect();
            prop_assert_eq!(kept, still);
        }

        #[test]
        fn tokenize_round_trips(s in fuzz_text()) {
            let t = tokenize(&s, Lang::Urdu);
            prop_assert!(t.iter().all(|x| !x.is_empty() && !x.chars().any(char::is_whitespace)));
            prop_assert_eq!(tokenize(&t.join(" "), Lang::Urdu), t);
        }

        #[test]
        fn stopword_removal_is_a_subsequence(words in prop::collection::vec("[a-d]{1,2}", 0..20)) {
            let list = StopList {
                lang: Lang::English,
                words: ["a", "bb", "c"].iter().map(|s| s.to_string()).collect(),
            };
            let out = remove_stopwords(&words, &list, Lang::English).unwrap();
            prop_assert!(out.len() <= words.len());
            let mut it = words.iter();
            for o in &out {
                prop_assert!(it.any(|w| w == o));
            }
        }
    }
}
