//! Neural text classifiers over padded word-index sequences: a 1-d CNN, an
//! LSTM, a BiLSTM and a BiLSTM with additive attention, all trained from
//! scratch with Adam.

mod net;
mod train;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use net::{attention_weights, backward, forward, Attention, Conv, Dims, Lstm, NetworkParams, Tensor};
pub use train::{gradient_check, predict_one, train, GradientCheck, NeuralModel, MODEL_SCHEMA_VERSION};

use crate::scalar::{Precision, Scalar};

pub const DEFAULT_MAX_LEN: usize = 100;
pub const DEFAULT_EMBEDDING_DIM: usize = 100;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("cannot build a word index from an empty corpus")]
    EmptyCorpus,
    #[error("{path} line {line}: expected {expected} values, found {found}")]
    WrongDimension {
        path: String,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("network parameters are not initialized: {0}")]
    Uninitialized(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("bad sequence: {0}")]
    BadSequence(String),
    #[error("training data has a single class")]
    SingleClass,
    #[error("invalid neural configuration: {0}")]
    Config(String),
    #[error("gradient checking needs f64 precision, the configuration asks for {0}")]
    Precision(&'static str),
    #[error("model file {path}: {message}")]
    Format { path: String, message: String },
    #[error("model file {path} has schema version {found}, this build reads {expected}")]
    Schema { path: String, found: u32, expected: u32 },
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> NeuralError {
    NeuralError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Cnn1d,
    Lstm,
    Bilstm,
    BilstmAttention,
}

impl Arch {
    pub const ALL: [Arch; 4] = [Arch::Cnn1d, Arch::Lstm, Arch::Bilstm, Arch::BilstmAttention];

    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Cnn1d => "cnn1d",
            Arch::Lstm => "lstm",
            Arch::Bilstm => "bilstm",
            Arch::BilstmAttention => "bilstm_attention",
        }
    }
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Arch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Arch::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown architecture `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuralConfig {
    pub arch: Arch,
    pub hidden: usize,
    pub filters: usize,
    pub kernel_widths: Vec<usize>,
    /// Attention projection size; 0 means `hidden`.
    pub attention_dim: usize,
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub precision: Precision,
    pub trainable_embeddings: bool,
    pub max_len: usize,
    pub embedding_dim: usize,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        NeuralConfig {
            arch: Arch::Cnn1d,
            hidden: 128,
            filters: 100,
            kernel_widths: vec![3, 4, 5],
            attention_dim: 0,
            epochs: 10,
            batch: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            precision: Precision::F32,
            trainable_embeddings: false,
            max_len: DEFAULT_MAX_LEN,
            embedding_dim: DEFAULT_EMBEDDING_DIM,
        }
    }
}

impl NeuralConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let positive = [
            ("hidden", self.hidden),
            ("filters", self.filters),
            ("epochs", self.epochs),
            ("batch", self.batch),
            ("max_len", self.max_len),
            ("embedding_dim", self.embedding_dim),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(NeuralError::Config(format!("{name} must be positive")));
        }
        if self.kernel_widths.is_empty() || self.kernel_widths.contains(&0) {
            return Err(NeuralError::Config("kernel widths must be a nonempty list of positive sizes".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(NeuralError::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }

    pub fn dims(&self, classes: usize) -> Dims {
        Dims {
            hidden: self.hidden,
            filters: self.filters,
            kernel_widths: self.kernel_widths.clone(),
            attention: if self.attention_dim == 0 { self.hidden } else { self.attention_dim },
            classes,
        }
    }
}

/// Token to positive index; 0 is the padding index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordIndex {
    pub word_to_index: BTreeMap<String, u32>,
}

impl WordIndex {
    pub fn len(&self) -> usize {
        self.word_to_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word_to_index.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<u32> {
        self.word_to_index.get(word).copied()
    }

    /// Words ordered by index (position `i` holds index `i + 1`).
    pub fn words(&self) -> Vec<&str> {
        let mut v: Vec<(&str, u32)> = self.word_to_index.iter().map(|(w, &i)| (w.as_str(), i)).collect();
        v.sort_by_key(|&(_, i)| i);
        v.into_iter().map(|(w, _)| w).collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        let text = serde_json::to_string_pretty(self).expect("word index serializes");
        std::fs::write(path, text).map_err(|e| io_err(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let wi: WordIndex = serde_json::from_str(&text).map_err(|e| io_err(path, e))?;
        let idx: BTreeSet<u32> = wi.word_to_index.values().copied().collect();
        if idx.len() != wi.len() || idx.first().is_some_and(|&i| i != 1) || idx.last().is_some_and(|&i| i as usize != wi.len()) {
            return Err(io_err(path, "indices are not dense in 1..=n"));
        }
        Ok(wi)
    }
}

/// Lexicographic indices from 1 over the words of the training documents.
pub fn build_word_index<D, S>(train_docs: &[D]) -> Result<WordIndex, NeuralError>
where
    D: AsRef<[S]>,
    S: AsRef<str>,
{
    let words: BTreeSet<&str> = train_docs.iter().flat_map(|d| d.as_ref().iter().map(AsRef::as_ref)).collect();
    if words.is_empty() {
        return Err(NeuralError::EmptyCorpus);
    }
    Ok(WordIndex {
        word_to_index: words.into_iter().zip(1u32..).map(|(w, i)| (w.to_string(), i)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceSample {
    pub indices: Vec<u32>,
    pub true_length: usize,
}

/// Maps known tokens to indices, drops unknown ones, truncates to `max_len`
/// and post-pads with zeros.
pub fn to_sequence<S: AsRef<str>>(tokens: &[S], wi: &WordIndex, max_len: usize) -> SequenceSample {
    let mut indices: Vec<u32> = tokens.iter().filter_map(|t| wi.get(t.as_ref())).take(max_len).collect();
    let true_length = indices.len();
    indices.resize(max_len, 0);
    SequenceSample { indices, true_length }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OneHotLabels {
    pub classes: Vec<String>,
    pub matrix: Vec<Vec<u8>>,
}

impl OneHotLabels {
    pub fn class_indices(&self) -> Vec<usize> {
        self.matrix
            .iter()
            .map(|r| r.iter().position(|&v| v == 1).expect("one hot row"))
            .collect()
    }
}

/// One-hot rows over the sorted distinct labels.
pub fn one_hot<S: AsRef<str>>(labels: &[S]) -> OneHotLabels {
    let classes: Vec<String> = labels
        .iter()
        .map(|s| s.as_ref().to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let matrix = labels
        .iter()
        .map(|l| classes.iter().map(|c| u8::from(c == l.as_ref())).collect())
        .collect();
    OneHotLabels { classes, matrix }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PretrainedVectors {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
    pub malformed: usize,
}

fn is_header(fields: &[&str]) -> bool {
    fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok())
}

/// Reads `word v1 … vd` lines, skipping an optional `count dim` header.
/// With `expected_dim` unset the dimension comes from the header or the
/// first vector line. Lines with unparsable numbers are counted and skipped.
pub fn load_pretrained_vectors(path: &Path, expected_dim: Option<usize>) -> Result<PretrainedVectors, NeuralError> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = PretrainedVectors {
        dim: expected_dim.unwrap_or(0),
        ..Default::default()
    };
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if i == 0 && is_header(&fields) {
            let d: usize = fields[1].parse().expect("checked");
            if out.dim == 0 {
                out.dim = d;
            }
            continue;
        }
        let values = &fields[1..];
        if out.dim == 0 {
            out.dim = values.len();
        }
        if values.len() != out.dim {
            return Err(NeuralError::WrongDimension {
                path: path.display().to_string(),
                line: i + 1,
                expected: out.dim,
                found: values.len(),
            });
        }
        match values.iter().map(|v| v.parse::<f64>()).collect::<Result<Vec<f64>, _>>() {
            Ok(v) if v.iter().all(|x| x.is_finite()) => {
                out.vectors.insert(fields[0].to_string(), v);
            }
            _ => {
                log::warn!("{} line {}: malformed vector skipped", path.display(), i + 1);
                out.malformed += 1;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix<T: Scalar> {
    pub matrix: Tensor<T>,
    pub oov_count: usize,
}

/// Uniform(-0.25, 0.25) row drawn from a generator keyed by `(seed, word)`.
pub fn oov_row(seed: u64, word: &str, d: usize) -> Vec<f64> {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(word.as_bytes());
    let key: [u8; 32] = h.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(key);
    (0..d).map(|_| rng.random_range(-0.25..0.25)).collect()
}

/// `(n + 1) × d` matrix: row 0 zero, pretrained rows copied, others seeded.
pub fn build_embedding_matrix<T: Scalar>(wi: &WordIndex, vectors: &PretrainedVectors, d: usize, seed: u64) -> Result<EmbeddingMatrix<T>, NeuralError> {
    if !vectors.vectors.is_empty() && vectors.dim != d {
        return Err(NeuralError::Config(format!("pretrained vectors have dimension {}, expected {d}", vectors.dim)));
    }
    let mut matrix = Tensor::zeros(&[wi.len() + 1, d]);
    let mut oov_count = 0;
    for (word, &i) in &wi.word_to_index {
        let row = match vectors.vectors.get(word) {
            Some(v) => v.clone(),
            None => {
                oov_count += 1;
                oov_row(seed, word, d)
            }
        };
        let start = i as usize * d;
        for (dst, v) in matrix.data[start..start + d].iter_mut().zip(row) {
            *dst = T::of(v);
        }
    }
    Ok(EmbeddingMatrix { matrix, oov_count })
}
