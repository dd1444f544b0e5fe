//! Bag-of-words vocabularies, sparse count vectors and TFIDF weighting.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("no term reaches min_df = {min_df} over {n_docs} training document(s)")]
    EmptyVocabulary { min_df: usize, n_docs: usize },
    #[error("min_df must be at least 1")]
    BadMinDf,
    #[error("dimension mismatch: vector has {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cannot fit idf weights on an empty corpus")]
    EmptyCorpus,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("inconsistent vocabulary: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    #[serde(skip)]
    term_to_index: BTreeMap<String, usize>,
    index_to_term: Vec<String>,
    pub min_df: usize,
}

impl Vocabulary {
    /// Builds from an explicit term list; terms are sorted and deduplicated.
    pub fn from_terms<I, S>(terms: I, min_df: usize) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = terms.into_iter().map(Into::into).collect();
        let index_to_term: Vec<String> = set.into_iter().collect();
        let term_to_index = index_to_term.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary {
            term_to_index,
            index_to_term,
            min_df,
        }
    }

    pub fn size(&self) -> usize {
        self.index_to_term.len()
    }

    pub fn index(&self, term: &str) -> Option<usize> {
        self.term_to_index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> Option<&str> {
        self.index_to_term.get(index).map(String::as_str)
    }

    pub fn terms(&self) -> &[String] {
        &self.index_to_term
    }

    pub fn contains(&self, term: &str) -> bool {
        self.term_to_index.contains_key(term)
    }

    pub fn save(&self, path: &Path) -> Result<(), FeatureError> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        let v: Vocabulary = read_json(path)?;
        let rebuilt = Vocabulary::from_terms(v.index_to_term.iter().cloned(), v.min_df);
        if rebuilt.index_to_term != v.index_to_term {
            return Err(FeatureError::Inconsistent(format!(
                "{}: terms are not unique and sorted",
                path.display()
            )));
        }
        Ok(rebuilt)
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FeatureError> {
    let text = serde_json::to_string_pretty(value).map_err(|source| FeatureError::Json {
        path: path.display().to_string(),
        source,
    })?;
    std::fs::write(path, text).map_err(|source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, FeatureError> {
    let text = std::fs::read_to_string(path).map_err(|source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| FeatureError::Json {
        path: path.display().to_string(),
        source,
    })
}

/// Keeps every term occurring in at least `min_df` training documents,
/// indexed in lexicographic order.
pub fn build_vocabulary<D, S>(train_docs: &[D], min_df: usize) -> Result<Vocabulary, FeatureError>
where
    D: AsRef<[S]>,
    S: AsRef<str>,
{
    if min_df == 0 {
        return Err(FeatureError::BadMinDf);
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in train_docs {
        let uniq: BTreeSet<&str> = doc.as_ref().iter().map(AsRef::as_ref).collect();
        for t in uniq {
            *df.entry(t).or_default() += 1;
        }
    }
    let vocab = Vocabulary::from_terms(df.into_iter().filter(|&(_, n)| n >= min_df).map(|(t, _)| t), min_df);
    if vocab.size() == 0 {
        return Err(FeatureError::EmptyVocabulary {
            min_df,
            n_docs: train_docs.len(),
        });
    }
    Ok(vocab)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseCountVector {
    pub pairs: Vec<(usize, u32)>,
    pub dim: usize,
}

impl SparseCountVector {
    pub fn total(&self) -> u64 {
        self.pairs.iter().map(|&(_, c)| c as u64).sum()
    }

    pub fn to_features<T: Scalar>(&self) -> FeatureVector<T> {
        FeatureVector {
            pairs: self.pairs.iter().map(|&(i, c)| (i, T::of(c as f64))).collect(),
            dim: self.dim,
            l2_normalized: false,
        }
    }
}

pub fn bow_vectorize<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> SparseCountVector {
    let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
    for t in tokens {
        if let Some(i) = vocab.index(t.as_ref()) {
            *counts.entry(i).or_default() += 1;
        }
    }
    SparseCountVector {
        pairs: counts.into_iter().collect(),
        dim: vocab.size(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdfWeights {
    pub idf: Vec<f64>,
    pub n_docs: usize,
    pub df: Vec<usize>,
}

impl IdfWeights {
    pub fn dim(&self) -> usize {
        self.idf.len()
    }

    pub fn save(&self, path: &Path) -> Result<(), FeatureError> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        read_json(path)
    }
}

/// Smoothed idf: `ln((1 + N) / (1 + df)) + 1`.
pub fn tfidf_fit(train_counts: &[SparseCountVector]) -> Result<IdfWeights, FeatureError> {
    let first = train_counts.first().ok_or(FeatureError::EmptyCorpus)?;
    let dim = first.dim;
    let mut df = vec![0usize; dim];
    for v in train_counts {
        if v.dim != dim {
            return Err(FeatureError::DimensionMismatch { expected: dim, got: v.dim });
        }
        for &(i, c) in &v.pairs {
            if c > 0 {
                df[i] += 1;
            }
        }
    }
    let n = train_counts.len();
    let idf = df
        .iter()
        .map(|&d| ((1.0 + n as f64) / (1.0 + d as f64)).ln() + 1.0)
        .collect();
    Ok(IdfWeights { idf, n_docs: n, df })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FeatureVector<T: Scalar> {
    pub pairs: Vec<(usize, T)>,
    pub dim: usize,
    pub l2_normalized: bool,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn empty(dim: usize) -> Self {
        FeatureVector {
            pairs: Vec::new(),
            dim,
            l2_normalized: false,
        }
    }

    pub fn dot(&self, dense: &[T]) -> T {
        self.pairs.iter().map(|&(i, v)| v * dense[i]).sum()
    }

    pub fn norm(&self) -> T {
        self.pairs.iter().map(|&(_, v)| v * v).sum::<T>().sqrt()
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        for &(i, v) in &self.pairs {
            out[i] = v;
        }
        out
    }
}

pub fn tfidf_transform<T: Scalar>(
    counts: &SparseCountVector,
    idf: &IdfWeights,
    l2: bool,
) -> Result<FeatureVector<T>, FeatureError> {
    if counts.dim != idf.dim() {
        return Err(FeatureError::DimensionMismatch {
            expected: idf.dim(),
            got: counts.dim,
        });
    }
    let mut weights: Vec<(usize, f64)> = counts
        .pairs
        .iter()
        .map(|&(i, c)| (i, c as f64 * idf.idf[i]))
        .collect();
    let norm = weights.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    if l2 && norm > 0.0 {
        for (_, w) in weights.iter_mut() {
            *w /= norm;
        }
    }
    Ok(FeatureVector {
        pairs: weights.into_iter().map(|(i, w)| (i, T::of(w))).collect(),
        dim: counts.dim,
        l2_normalized: l2,
    })
}

/// Which representation a linear model consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    #[default]
    Counts,
    Tfidf,
}

impl Representation {
    pub fn as_str(self) -> &'static str {
        match self {
            Representation::Counts => "counts",
            Representation::Tfidf => "tfidf",
        }
    }
}

impl std::str::FromStr for Representation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "counts" => Ok(Representation::Counts),
            "tfidf" => Ok(Representation::Tfidf),
            _ => Err(format!("unknown representation `{s}` (expected counts or tfidf)")),
        }
    }
}

/// Vocabulary plus idf fitted on one training split.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedFeatures {
    pub vocab: Vocabulary,
    pub idf: IdfWeights,
    pub l2: bool,
}

impl FittedFeatures {
    pub fn fit<D, S>(train_docs: &[D], min_df: usize, l2: bool) -> Result<Self, FeatureError>
    where
        D: AsRef<[S]>,
        S: AsRef<str>,
    {
        let vocab = build_vocabulary(train_docs, min_df)?;
        let counts: Vec<SparseCountVector> = train_docs.iter().map(|d| bow_vectorize(d.as_ref(), &vocab)).collect();
        let idf = tfidf_fit(&counts)?;
        Ok(FittedFeatures { vocab, idf, l2 })
    }

    pub fn transform<T: Scalar, S: AsRef<str>>(&self, tokens: &[S], repr: Representation) -> FeatureVector<T> {
        let counts = bow_vectorize(tokens, &self.vocab);
        match repr {
            Representation::Counts => counts.to_features(),
            Representation::Tfidf => tfidf_transform(&counts, &self.idf, self.l2).expect("dims agree by construction"),
        }
    }
}
