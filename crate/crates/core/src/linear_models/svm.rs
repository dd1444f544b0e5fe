//! Primal linear SVMs trained by Pegasos-style stochastic subgradient descent.
//!
//! The bias is an extra always-one feature, so it is regularized with the
//! weights. The returned model is the running average of all iterates, and
//! the objective is evaluated on that average at the end of every epoch.

use serde::{Deserialize, Serialize};

use super::{check_dims, ModelError, Prediction};
use crate::corpus::permutation;
use crate::features::FeatureVector;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvmStrategy {
    Binary,
    Ovr,
    CrammerSinger,
}

impl SvmStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            SvmStrategy::Binary => "binary",
            SvmStrategy::Ovr => "ovr",
            SvmStrategy::CrammerSinger => "crammer_singer",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdParams {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Project onto the ball of radius 1/sqrt(lambda) after each step.
    pub projection: bool,
}

impl SgdParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(ModelError::BadLambda(self.lambda));
        }
        if self.epochs == 0 {
            return Err(ModelError::Config("epochs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SvmModel<T: Scalar> {
    pub strategy: SvmStrategy,
    pub classes: Vec<String>,
    /// One row for `binary`, one per class otherwise.
    pub weights: Vec<Vec<T>>,
    pub bias: Vec<T>,
    pub lambda: f64,
    /// Full training objective after each epoch.
    #[serde(default)]
    pub objective_trace: Vec<Vec<f64>>,
}

impl<T: Scalar> SvmModel<T> {
    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn raw_scores(&self, x: &FeatureVector<T>) -> Result<Vec<f64>, ModelError> {
        if x.dim != self.dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim(),
                got: x.dim,
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| x.pairs.iter().map(|&(i, v)| v.as_f64() * w[i].as_f64()).sum::<f64>() + b.as_f64())
            .collect())
    }

    /// Per-class scores; a binary model scores `[s, -s]` so that `s >= 0`
    /// selects `classes[0]`.
    pub fn class_scores(&self, x: &FeatureVector<T>) -> Result<Vec<f64>, ModelError> {
        let raw = self.raw_scores(x)?;
        Ok(match self.strategy {
            SvmStrategy::Binary => vec![raw[0], -raw[0]],
            _ => raw,
        })
    }

    pub fn predict(&self, x: &FeatureVector<T>) -> Result<Prediction, ModelError> {
        Ok(Prediction::argmax(&self.classes, self.class_scores(x)?))
    }
}

pub fn svm_predict<T: Scalar>(model: &SvmModel<T>, x: &FeatureVector<T>) -> Result<Prediction, ModelError> {
    model.predict(x)
}

type Sparse = Vec<(usize, f64)>;

/// Appends the constant bias feature at index `dim`.
fn augment<T: Scalar>(x: &[FeatureVector<T>], dim: usize) -> Vec<Sparse> {
    x.iter()
        .map(|v| {
            let mut s: Sparse = v.pairs.iter().map(|&(i, w)| (i, w.as_f64())).collect();
            s.push((dim, 1.0));
            s
        })
        .collect()
}

/// `k` weight rows stored as `scale * v`, with lazily accumulated iterate sums.
struct AveragedSgd {
    dim: usize,
    v: Vec<f64>,
    scale: f64,
    sq: f64,
    acc: Vec<f64>,
    last: Vec<f64>,
    clock: f64,
    steps: usize,
}

impl AveragedSgd {
    fn new(k: usize, dim: usize) -> Self {
        AveragedSgd {
            dim,
            v: vec![0.0; k * dim],
            scale: 1.0,
            sq: 0.0,
            acc: vec![0.0; k * dim],
            last: vec![0.0; k * dim],
            clock: 0.0,
            steps: 0,
        }
    }

    fn dot(&self, row: usize, x: &Sparse) -> f64 {
        let base = row * self.dim;
        self.scale * x.iter().map(|&(i, w)| w * self.v[base + i]).sum::<f64>()
    }

    fn sync(&mut self, j: usize) {
        self.acc[j] += self.v[j] * (self.clock - self.last[j]);
        self.last[j] = self.clock;
    }

    fn sync_all(&mut self) {
        for j in 0..self.v.len() {
            self.sync(j);
        }
    }

    fn shrink(&mut self, factor: f64) {
        if factor == 0.0 {
            self.sync_all();
            self.v.iter_mut().for_each(|x| *x = 0.0);
            self.scale = 1.0;
            self.sq = 0.0;
        } else {
            self.scale *= factor;
            if self.scale < 1e-30 {
                self.sync_all();
                let s = self.scale;
                self.v.iter_mut().for_each(|x| *x *= s);
                self.sq *= s * s;
                self.scale = 1.0;
            }
        }
    }

    /// w_row += coef * x
    fn add(&mut self, row: usize, coef: f64, x: &Sparse) {
        let base = row * self.dim;
        for &(i, w) in x {
            let j = base + i;
            self.sync(j);
            let old = self.v[j];
            let new = old + coef * w / self.scale;
            self.sq += new * new - old * old;
            self.v[j] = new;
        }
    }

    fn project(&mut self, radius: f64) {
        let norm = self.scale * self.sq.max(0.0).sqrt();
        if norm > radius {
            self.shrink(radius / norm);
        }
    }

    fn tick(&mut self) {
        self.clock += self.scale;
        self.steps += 1;
    }

    /// Running mean of every iterate so far, one row per weight row.
    fn average(&mut self) -> Vec<Vec<f64>> {
        self.sync_all();
        let n = self.steps.max(1) as f64;
        self.acc.chunks(self.dim).map(|row| row.iter().map(|a| a / n).collect()).collect()
    }
}

fn dense_dot(w: &[f64], x: &Sparse) -> f64 {
    x.iter().map(|&(i, v)| v * w[i]).sum()
}

fn sq_norm(rows: &[Vec<f64>]) -> f64 {
    rows.iter().flatten().map(|w| w * w).sum()
}

fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    permutation(n, seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Binary Pegasos on `y ∈ {+1, -1}`; returns the averaged augmented weight
/// row (bias last) and the per-epoch objective.
fn pegasos_binary(x: &[Sparse], y: &[f64], dim: usize, p: &SgdParams) -> (Vec<f64>, Vec<f64>) {
    let mut sgd = AveragedSgd::new(1, dim + 1);
    let radius = 1.0 / p.lambda.sqrt();
    let mut t = 0usize;
    let mut objectives = Vec::with_capacity(p.epochs);
    let mut avg = vec![0.0; dim + 1];
    for epoch in 0..p.epochs {
        for i in epoch_order(x.len(), p.seed, epoch) {
            t += 1;
            let eta = 1.0 / (p.lambda * t as f64);
            let margin = y[i] * sgd.dot(0, &x[i]);
            sgd.shrink(1.0 - 1.0 / t as f64);
            if margin < 1.0 {
                sgd.add(0, eta * y[i], &x[i]);
            }
            if p.projection {
                sgd.project(radius);
            }
            sgd.tick();
        }
        avg = sgd.average().remove(0);
        let hinge: f64 = x
            .iter()
            .zip(y)
            .map(|(xi, &yi)| (1.0 - yi * dense_dot(&avg, xi)).max(0.0))
            .sum::<f64>()
            / x.len() as f64;
        objectives.push(0.5 * p.lambda * avg.iter().map(|w| w * w).sum::<f64>() + hinge);
    }
    (avg, objectives)
}

fn cs_loss(scores: &[f64], y: usize) -> (f64, Vec<usize>) {
    let mut best = f64::NEG_INFINITY;
    let mut arg = Vec::new();
    for (r, &s) in scores.iter().enumerate() {
        if r == y {
            continue;
        }
        if s > best {
            best = s;
            arg.clear();
            arg.push(r);
        } else if s == best {
            arg.push(r);
        }
    }
    ((1.0 + best - scores[y]).max(0.0), arg)
}

/// Crammer–Singer multiclass hinge with a joint weight matrix.
fn pegasos_crammer_singer(x: &[Sparse], y: &[usize], k: usize, dim: usize, p: &SgdParams) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut sgd = AveragedSgd::new(k, dim + 1);
    let radius = 1.0 / p.lambda.sqrt();
    let mut t = 0usize;
    let mut objectives = Vec::with_capacity(p.epochs);
    let mut avg = vec![vec![0.0; dim + 1]; k];
    for epoch in 0..p.epochs {
        for i in epoch_order(x.len(), p.seed, epoch) {
            t += 1;
            let eta = 1.0 / (p.lambda * t as f64);
            let scores: Vec<f64> = (0..k).map(|r| sgd.dot(r, &x[i])).collect();
            let (loss, rivals) = cs_loss(&scores, y[i]);
            sgd.shrink(1.0 - 1.0 / t as f64);
            if loss > 0.0 {
                sgd.add(y[i], eta, &x[i]);
                let share = eta / rivals.len() as f64;
                for r in rivals {
                    sgd.add(r, -share, &x[i]);
                }
            }
            if p.projection {
                sgd.project(radius);
            }
            sgd.tick();
        }
        avg = sgd.average();
        let hinge: f64 = x
            .iter()
            .zip(y)
            .map(|(xi, &yi)| {
                let s: Vec<f64> = avg.iter().map(|w| dense_dot(w, xi)).collect();
                cs_loss(&s, yi).0
            })
            .sum::<f64>()
            / x.len() as f64;
        objectives.push(0.5 * p.lambda * sq_norm(&avg) + hinge);
    }
    (avg, objectives)
}

fn split_bias<T: Scalar>(rows: Vec<Vec<f64>>) -> (Vec<Vec<T>>, Vec<T>) {
    rows.into_iter()
        .map(|mut r| {
            let b = r.pop().expect("augmented row");
            (r.into_iter().map(T::of).collect(), T::of(b))
        })
        .unzip()
}

/// Binary SVM on `±1` labels. The model's classes are `["+1", "-1"]`, so a
/// score of exactly zero predicts `+1`.
pub fn svm_train<T: Scalar>(x: &[FeatureVector<T>], y: &[i8], params: &SgdParams) -> Result<SvmModel<T>, ModelError> {
    let idx: Vec<usize> = y
        .iter()
        .map(|&v| match v {
            1 => Ok(0),
            -1 => Ok(1),
            _ => Err(ModelError::Config(format!("binary labels must be +1 or -1, got {v}"))),
        })
        .collect::<Result<_, _>>()?;
    svm_binary_indexed(x, &idx, vec!["+1".into(), "-1".into()], params)
}

/// Binary SVM with `classes[0]` as the positive class.
pub(crate) fn svm_binary_indexed<T: Scalar>(
    x: &[FeatureVector<T>],
    y: &[usize],
    classes: Vec<String>,
    params: &SgdParams,
) -> Result<SvmModel<T>, ModelError> {
    params.validate()?;
    let dim = check_dims(x, y.len())?;
    if !y.contains(&0) || !y.contains(&1) {
        return Err(ModelError::SingleClass);
    }
    let ys: Vec<f64> = y.iter().map(|&c| if c == 0 { 1.0 } else { -1.0 }).collect();
    let (row, obj) = pegasos_binary(&augment(x, dim), &ys, dim, params);
    let (weights, bias) = split_bias(vec![row]);
    Ok(SvmModel {
        strategy: SvmStrategy::Binary,
        classes,
        weights,
        bias,
        lambda: params.lambda,
        objective_trace: vec![obj],
    })
}

/// One binary problem per class (that class positive); rows are the
/// positive-class margins.
pub(crate) fn svm_ovr_indexed<T: Scalar>(
    x: &[FeatureVector<T>],
    y: &[usize],
    classes: Vec<String>,
    params: &SgdParams,
) -> Result<SvmModel<T>, ModelError> {
    params.validate()?;
    let dim = check_dims(x, y.len())?;
    let xs = augment(x, dim);
    let mut rows = Vec::with_capacity(classes.len());
    let mut trace = Vec::with_capacity(classes.len());
    for (k, name) in classes.iter().enumerate() {
        let ys: Vec<f64> = y.iter().map(|&c| if c == k { 1.0 } else { -1.0 }).collect();
        if ys.iter().all(|&v| v > 0.0) || ys.iter().all(|&v| v < 0.0) {
            return Err(ModelError::EmptyClass(name.clone()));
        }
        let (row, obj) = pegasos_binary(&xs, &ys, dim, params);
        rows.push(row);
        trace.push(obj);
    }
    let (weights, bias) = split_bias(rows);
    Ok(SvmModel {
        strategy: SvmStrategy::Ovr,
        classes,
        weights,
        bias,
        lambda: params.lambda,
        objective_trace: trace,
    })
}

pub(crate) fn svm_crammer_singer_indexed<T: Scalar>(
    x: &[FeatureVector<T>],
    y: &[usize],
    classes: Vec<String>,
    params: &SgdParams,
) -> Result<SvmModel<T>, ModelError> {
    params.validate()?;
    let dim = check_dims(x, y.len())?;
    let k = classes.len();
    if let Some(c) = (0..k).find(|c| !y.contains(c)) {
        return Err(ModelError::EmptyClass(classes[c].clone()));
    }
    if k < 2 {
        return Err(ModelError::SingleClass);
    }
    let (rows, obj) = pegasos_crammer_singer(&augment(x, dim), y, k, dim, params);
    let (weights, bias) = split_bias(rows);
    Ok(SvmModel {
        strategy: SvmStrategy::CrammerSinger,
        classes,
        weights,
        bias,
        lambda: params.lambda,
        objective_trace: vec![obj],
    })
}
