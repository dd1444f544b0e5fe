use serde::{Deserialize, Serialize};

use super::{check_dims, index_labels, log_softmax, ModelError, Prediction};
use crate::features::FeatureVector;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MnbModel<T: Scalar> {
    pub classes: Vec<String>,
    pub class_log_prior: Vec<T>,
    /// `classes.len()` rows of vocabulary length.
    pub feature_log_prob: Vec<Vec<T>>,
    pub alpha: f64,
}

/// Multinomial Naive Bayes with additive smoothing; classes are those
/// present in `y`, sorted.
pub fn mnb_train<T: Scalar, S: AsRef<str>>(x: &[FeatureVector<T>], y: &[S], alpha: f64) -> Result<MnbModel<T>, ModelError> {
    let (classes, idx) = index_labels(y)?;
    mnb_train_indexed(x, &idx, classes, alpha)
}

pub(crate) fn mnb_train_indexed<T: Scalar>(
    x: &[FeatureVector<T>],
    y: &[usize],
    classes: Vec<String>,
    alpha: f64,
) -> Result<MnbModel<T>, ModelError> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(ModelError::BadAlpha(alpha));
    }
    let dim = check_dims(x, y.len())?;
    let k = classes.len();
    let mut counts = vec![vec![0f64; dim]; k];
    let mut docs = vec![0usize; k];
    for (v, &c) in x.iter().zip(y) {
        docs[c] += 1;
        for &(i, w) in &v.pairs {
            counts[c][i] += w.as_f64();
        }
    }
    if let Some(c) = docs.iter().position(|&n| n == 0) {
        return Err(ModelError::EmptyClass(classes[c].clone()));
    }
    let n = y.len() as f64;
    let class_log_prior = docs.iter().map(|&d| T::of((d as f64 / n).ln())).collect();
    let feature_log_prob = counts
        .iter()
        .map(|row| {
            let total: f64 = row.iter().sum::<f64>() + alpha * dim as f64;
            row.iter().map(|&c| T::of(((c + alpha) / total).ln())).collect()
        })
        .collect();
    Ok(MnbModel {
        classes,
        class_log_prior,
        feature_log_prob,
        alpha,
    })
}

impl<T: Scalar> MnbModel<T> {
    pub fn dim(&self) -> usize {
        self.feature_log_prob.first().map_or(0, Vec::len)
    }

    /// Joint log-likelihood per class, before normalization.
    pub fn joint_log_likelihood(&self, x: &FeatureVector<T>) -> Result<Vec<f64>, ModelError> {
        if x.dim != self.dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim(),
                got: x.dim,
            });
        }
        Ok(self
            .class_log_prior
            .iter()
            .zip(&self.feature_log_prob)
            .map(|(p, row)| p.as_f64() + x.pairs.iter().map(|&(i, v)| v.as_f64() * row[i].as_f64()).sum::<f64>())
            .collect())
    }

    /// Label plus normalized per-class log-posterior.
    pub fn predict(&self, x: &FeatureVector<T>) -> Result<Prediction, ModelError> {
        let jll = self.joint_log_likelihood(x)?;
        Ok(Prediction::argmax(&self.classes, log_softmax(&jll)))
    }
}

pub fn mnb_predict<T: Scalar>(model: &MnbModel<T>, x: &FeatureVector<T>) -> Result<Prediction, ModelError> {
    model.predict(x)
}
