//! Multinomial Naive Bayes and linear SVM classifiers, one-vs-rest and
//! native multiclass strategies, cross-validated grid search and JSON model
//! files.

mod mnb;
mod svm;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mnb::{mnb_predict, mnb_train, MnbModel};
pub use svm::{svm_predict, svm_train, SgdParams, SvmModel, SvmStrategy};

use crate::corpus::permutation;
use crate::eval::{self, Metric};
use crate::features::FeatureVector;
use crate::scalar::Scalar;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training set is empty")]
    Empty,
    #[error("{0} feature vectors but {1} labels")]
    LengthMismatch(usize, usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("class `{0}` has no training samples")]
    EmptyClass(String),
    #[error("training data has a single class")]
    SingleClass,
    #[error("smoothing alpha must be positive, got {0}")]
    BadAlpha(f64),
    #[error("lambda must be positive, got {0}")]
    BadLambda(f64),
    #[error("{folds}-fold stratification impossible: class `{class}` has {count} sample(s)")]
    InfeasibleFolds { folds: usize, class: String, count: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model file {path}: {message}")]
    File { path: String, message: String },
    #[error("model file {path} has schema version {found}, this build reads {expected}")]
    Schema { path: String, found: u32, expected: u32 },
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
}

/// Sorted distinct labels and the index of each sample's label.
pub fn index_labels<S: AsRef<str>>(y: &[S]) -> Result<(Vec<String>, Vec<usize>), ModelError> {
    if y.is_empty() {
        return Err(ModelError::Empty);
    }
    let classes: Vec<String> = y
        .iter()
        .map(|s| s.as_ref().to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let idx = y
        .iter()
        .map(|s| classes.binary_search_by(|c| c.as_str().cmp(s.as_ref())).expect("present"))
        .collect();
    Ok((classes, idx))
}

pub(crate) fn check_dims<T: Scalar>(x: &[FeatureVector<T>], n_labels: usize) -> Result<usize, ModelError> {
    if x.is_empty() {
        return Err(ModelError::Empty);
    }
    if x.len() != n_labels {
        return Err(ModelError::LengthMismatch(x.len(), n_labels));
    }
    let dim = x[0].dim;
    if let Some(v) = x.iter().find(|v| v.dim != dim) {
        return Err(ModelError::DimensionMismatch {
            expected: dim,
            got: v.dim,
        });
    }
    Ok(dim)
}

pub(crate) fn log_softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    v.iter().map(|x| x - lse).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub index: usize,
    pub label: String,
    pub scores: Vec<f64>,
}

impl Prediction {
    /// Highest score wins; ties go to the earliest (lexicographically
    /// smallest) class.
    pub fn argmax(classes: &[String], scores: Vec<f64>) -> Self {
        let mut index = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[index] {
                index = i;
            }
        }
        Prediction {
            index,
            label: classes[index].clone(),
            scores,
        }
    }
}

/// One binary MNB per class; member `k` has classes `[classes[k], "rest"]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct OvrMnb<T: Scalar> {
    pub classes: Vec<String>,
    pub members: Vec<MnbModel<T>>,
}

impl<T: Scalar> OvrMnb<T> {
    /// Each member's normalized positive-class log-posterior.
    pub fn predict(&self, x: &FeatureVector<T>) -> Result<Prediction, ModelError> {
        let scores = self
            .members
            .iter()
            .map(|m| Ok(log_softmax(&m.joint_log_likelihood(x)?)[0]))
            .collect::<Result<Vec<f64>, ModelError>>()?;
        Ok(Prediction::argmax(&self.classes, scores))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Base {
    Mnb,
    Svm,
}

impl Base {
    pub fn as_str(self) -> &'static str {
        match self {
            Base::Mnb => "mnb",
            Base::Svm => "svm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Multiclass,
    Ovr,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Multiclass => "multiclass",
            Strategy::Ovr => "ovr",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "multiclass" => Ok(Strategy::Multiclass),
            "ovr" => Ok(Strategy::Ovr),
            _ => Err(format!("unknown strategy `{s}` (expected multiclass or ovr)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub seed: u64,
    pub lambda_grid: Vec<f64>,
    pub cv_folds: usize,
    pub alpha: f64,
    pub projection: bool,
    pub metric: Metric,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            seed: 0,
            lambda_grid: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0],
            cv_folds: 3,
            alpha: 1.0,
            projection: false,
            metric: Metric::Accuracy,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.epochs == 0 {
            return Err(ModelError::Config("epochs must be at least 1".into()));
        }
        if self.lambda_grid.is_empty() {
            return Err(ModelError::Config("lambda grid is empty".into()));
        }
        if let Some(&l) = self.lambda_grid.iter().find(|&&l| !(l > 0.0) || !l.is_finite()) {
            return Err(ModelError::BadLambda(l));
        }
        if self.cv_folds < 2 {
            return Err(ModelError::Config("cv_folds must be at least 2".into()));
        }
        Ok(())
    }

    pub fn sgd(&self, lambda: f64) -> SgdParams {
        SgdParams {
            lambda,
            epochs: self.epochs,
            seed: self.seed,
            projection: self.projection,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "")]
pub enum LinearModel<T: Scalar> {
    Mnb(MnbModel<T>),
    OvrMnb(OvrMnb<T>),
    Svm(SvmModel<T>),
}

impl<T: Scalar> LinearModel<T> {
    pub fn classes(&self) -> &[String] {
        match self {
            LinearModel::Mnb(m) => &m.classes,
            LinearModel::OvrMnb(m) => &m.classes,
            LinearModel::Svm(m) => &m.classes,
        }
    }

    pub fn predict(&self, x: &FeatureVector<T>) -> Result<Prediction, ModelError> {
        match self {
            LinearModel::Mnb(m) => m.predict(x),
            LinearModel::OvrMnb(m) => m.predict(x),
            LinearModel::Svm(m) => m.predict(x),
        }
    }

    pub fn predict_labels(&self, x: &[FeatureVector<T>]) -> Result<Vec<String>, ModelError> {
        x.iter().map(|v| Ok(self.predict(v)?.label)).collect()
    }

    /// Strategy name recorded in model files.
    pub fn strategy_name(&self) -> &'static str {
        match self {
            LinearModel::Mnb(_) => "mnb",
            LinearModel::OvrMnb(_) => "mnb_ovr",
            LinearModel::Svm(m) => match m.strategy {
                SvmStrategy::Binary => "svm_binary",
                SvmStrategy::Ovr => "svm_ovr",
                SvmStrategy::CrammerSinger => "svm_crammer_singer",
            },
        }
    }
}

pub fn ovr_train<T: Scalar, S: AsRef<str>>(
    x: &[FeatureVector<T>],
    y: &[S],
    base: Base,
    cfg: &TrainConfig,
    lambda: f64,
) -> Result<LinearModel<T>, ModelError> {
    let (classes, idx) = index_labels(y)?;
    ovr_indexed(x, &idx, classes, base, cfg, lambda)
}

fn ovr_indexed<T: Scalar>(
    x: &[FeatureVector<T>],
    y: &[usize],
    classes: Vec<String>,
    base: Base,
    cfg: &TrainConfig,
    lambda: f64,
) -> Result<LinearModel<T>, ModelError> {
    match base {
        Base::Svm => Ok(LinearModel::Svm(svm::svm_ovr_indexed(x, y, classes, &cfg.sgd(lambda))?)),
        Base::Mnb => {
            let members = (0..classes.len())
                .map(|k| {
                    let yk: Vec<usize> = y.iter().map(|&c| usize::from(c != k)).collect();
                    mnb::mnb_train_indexed(x, &yk, vec![classes[k].clone(), "rest".into()], cfg.alpha)
                })
                .collect::<Result<_, _>>()?;
            Ok(LinearModel::OvrMnb(OvrMnb { classes, members }))
        }
    }
}

/// Native multiclass: MNB as is; SVM is binary for two classes and
/// Crammer–Singer otherwise.
pub fn multiclass_train<T: Scalar, S: AsRef<str>>(
    x: &[FeatureVector<T>],
    y: &[S],
    base: Base,
    cfg: &TrainConfig,
    lambda: f64,
) -> Result<LinearModel<T>, ModelError> {
    let (classes, idx) = index_labels(y)?;
    multiclass_indexed(x, &idx, classes, base, cfg, lambda)
}

fn multiclass_indexed<T: Scalar>(
    x: &[FeatureVector<T>],
    y: &[usize],
    classes: Vec<String>,
    base: Base,
    cfg: &TrainConfig,
    lambda: f64,
) -> Result<LinearModel<T>, ModelError> {
    match base {
        Base::Mnb => Ok(LinearModel::Mnb(mnb::mnb_train_indexed(x, y, classes, cfg.alpha)?)),
        Base::Svm if classes.len() == 2 => Ok(LinearModel::Svm(svm::svm_binary_indexed(x, y, classes, &cfg.sgd(lambda))?)),
        Base::Svm => Ok(LinearModel::Svm(svm::svm_crammer_singer_indexed(x, y, classes, &cfg.sgd(lambda))?)),
    }
}

fn train_indexed<T: Scalar>(
    x: &[FeatureVector<T>],
    y: &[usize],
    classes: Vec<String>,
    base: Base,
    strategy: Strategy,
    cfg: &TrainConfig,
    lambda: f64,
) -> Result<LinearModel<T>, ModelError> {
    match strategy {
        Strategy::Multiclass => multiclass_indexed(x, y, classes, base, cfg, lambda),
        Strategy::Ovr => ovr_indexed(x, y, classes, base, cfg, lambda),
    }
}

/// Fold assignment: within each class, a seeded shuffle dealt round-robin.
pub fn stratified_folds(y: &[usize], k_classes: usize, folds: usize, seed: u64, classes: &[String]) -> Result<Vec<usize>, ModelError> {
    let mut fold = vec![0usize; y.len()];
    for c in 0..k_classes {
        let members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        if members.len() < folds {
            return Err(ModelError::InfeasibleFolds {
                folds,
                class: classes[c].clone(),
                count: members.len(),
            });
        }
        let perm = permutation(members.len(), seed.wrapping_add(c as u64));
        for (pos, &p) in perm.iter().enumerate() {
            fold[members[p]] = pos % folds;
        }
    }
    Ok(fold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub lambda: f64,
    pub fold_scores: Vec<f64>,
    pub mean: f64,
}

/// Seeded stratified k-fold search over `cfg.lambda_grid`. Ties on the mean
/// go to the smaller lambda.
pub fn grid_search<T: Scalar, S: AsRef<str>>(
    x: &[FeatureVector<T>],
    y: &[S],
    cfg: &TrainConfig,
    base: Base,
    strategy: Strategy,
) -> Result<(f64, Vec<CvRow>), ModelError> {
    cfg.validate()?;
    check_dims(x, y.len())?;
    let (classes, idx) = index_labels(y)?;
    let fold = stratified_folds(&idx, classes.len(), cfg.cv_folds, cfg.seed, &classes)?;
    let mut table = Vec::with_capacity(cfg.lambda_grid.len());
    for &lambda in &cfg.lambda_grid {
        let mut fold_scores = Vec::with_capacity(cfg.cv_folds);
        for f in 0..cfg.cv_folds {
            let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for i in 0..x.len() {
                if fold[i] == f {
                    vx.push(x[i].clone());
                    vy.push(classes[idx[i]].clone());
                } else {
                    tx.push(x[i].clone());
                    ty.push(idx[i]);
                }
            }
            let model = train_indexed(&tx, &ty, classes.clone(), base, strategy, cfg, lambda)?;
            let pred = model.predict_labels(&vx)?;
            fold_scores.push(eval::score(cfg.metric, &vy, &pred, &classes)?);
        }
        let mean = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
        table.push(CvRow {
            lambda,
            fold_scores,
            mean,
        });
    }
    let mut best = 0;
    for (i, row) in table.iter().enumerate() {
        let b = &table[best];
        if row.mean > b.mean || (row.mean == b.mean && row.lambda < b.lambda) {
            best = i;
        }
    }
    Ok((table[best].lambda, table))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainSummary {
    pub lambda: Option<f64>,
    pub cv_table: Vec<CvRow>,
}

/// Trains `base` under `strategy`. For SVMs a multi-value grid is searched
/// first and the winner retrained on all of `x`.
pub fn train<T: Scalar, S: AsRef<str>>(
    x: &[FeatureVector<T>],
    y: &[S],
    base: Base,
    strategy: Strategy,
    cfg: &TrainConfig,
) -> Result<(LinearModel<T>, TrainSummary), ModelError> {
    cfg.validate()?;
    let (classes, idx) = index_labels(y)?;
    if classes.len() < 2 {
        return Err(ModelError::SingleClass);
    }
    let mut summary = TrainSummary::default();
    let lambda = match base {
        Base::Mnb => 0.0,
        Base::Svm if cfg.lambda_grid.len() == 1 => cfg.lambda_grid[0],
        Base::Svm => {
            let (l, table) = grid_search(x, y, cfg, base, strategy)?;
            summary.cv_table = table;
            l
        }
    };
    if base == Base::Svm {
        summary.lambda = Some(lambda);
    }
    Ok((train_indexed(x, &idx, classes, base, strategy, cfg, lambda)?, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub strategy: String,
    pub classes: Vec<String>,
    /// Path of the vocabulary file, relative to the model file.
    pub vocab_ref: String,
    pub precision: crate::scalar::Precision,
    pub parameters: serde_json::Value,
}

impl<T: Scalar> LinearModel<T> {
    pub fn to_file(&self, vocab_ref: &str) -> ModelFile {
        ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            strategy: self.strategy_name().to_string(),
            classes: self.classes().to_vec(),
            vocab_ref: vocab_ref.to_string(),
            precision: T::PRECISION,
            parameters: serde_json::to_value(self).expect("model serializes"),
        }
    }

    pub fn to_json(&self, vocab_ref: &str) -> String {
        serde_json::to_string_pretty(&self.to_file(vocab_ref)).expect("model serializes")
    }

    pub fn save(&self, path: &Path, vocab_ref: &str) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json(vocab_ref)).map_err(|e| ModelError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    /// Loads a model file; the schema version must match exactly.
    pub fn load(path: &Path) -> Result<(Self, ModelFile), ModelError> {
        let err = |message: String| ModelError::File {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        let found = value
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| err("missing schema_version".into()))? as u32;
        if found != MODEL_SCHEMA_VERSION {
            return Err(ModelError::Schema {
                path: path.display().to_string(),
                found,
                expected: MODEL_SCHEMA_VERSION,
            });
        }
        let file: ModelFile = serde_json::from_value(value).map_err(|e| err(e.to_string()))?;
        let model: LinearModel<T> = serde_json::from_value(file.parameters.clone()).map_err(|e| err(e.to_string()))?;
        if model.strategy_name() != file.strategy || model.classes() != file.classes.as_slice() {
            return Err(err("header does not match parameters".into()));
        }
        Ok((model, file))
    }
}
