//! Adam training, finite-difference gradient checking and the binary model
//! container.
//!
//! Container layout, all integers little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 4 | magic `OBNN` |
//! | 4 | schema version (u32) |
//! | 4 | header length `h` (u32) |
//! | h | UTF-8 JSON header: arch, config, classes, word index reference, precision, tensor names and shapes |
//! | rest | tensor values in header order, 4 bytes each for f32, 8 for f64 |

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::{backward, forward, NetworkParams, Tensor};
use super::{io_err, Arch, EmbeddingMatrix, NeuralConfig, NeuralError, SequenceSample};
use crate::corpus::permutation;
use crate::scalar::{Precision, Scalar};

pub const MODEL_SCHEMA_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"OBNN";

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralModel<T: Scalar> {
    pub config: NeuralConfig,
    pub classes: Vec<String>,
    pub params: NetworkParams<T>,
    /// Mean training loss per epoch.
    pub loss_curve: Vec<f64>,
    pub oov_count: usize,
}

impl<T: Scalar> NeuralModel<T> {
    pub fn predict_proba(&self, seqs: &[SequenceSample]) -> Result<Vec<Vec<T>>, NeuralError> {
        if seqs.is_empty() {
            return Ok(Vec::new());
        }
        forward(&self.params, seqs)
    }

    /// Arg-max labels; ties go to the earlier class.
    pub fn predict_labels(&self, seqs: &[SequenceSample]) -> Result<Vec<String>, NeuralError> {
        Ok(self
            .predict_proba(seqs)?
            .iter()
            .map(|p| {
                let mut best = 0;
                for (i, v) in p.iter().enumerate() {
                    if *v > p[best] {
                        best = i;
                    }
                }
                self.classes[best].clone()
            })
            .collect())
    }
}

struct Adam<T: Scalar> {
    m: NetworkParams<T>,
    v: NetworkParams<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    fn new(p: &NetworkParams<T>) -> Self {
        Adam {
            m: p.zeros_like(),
            v: p.zeros_like(),
            t: 0,
        }
    }

    fn step(&mut self, p: &mut NetworkParams<T>, g: &NetworkParams<T>, cfg: &NeuralConfig) {
        self.t += 1;
        let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
        let one = T::one();
        let c1 = one - b1.powi(self.t);
        let c2 = one - b2.powi(self.t);
        let lr = T::of(cfg.learning_rate);
        let eps = T::of(cfg.adam_eps);
        let grads = g.tensors();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for ((((name, pt), (_, gt)), (_, mt)), (_, vt)) in p.tensors_mut().into_iter().zip(grads).zip(ms).zip(vs) {
            if name == "embedding" && !cfg.trainable_embeddings {
                continue;
            }
            for (((w, &gr), m), v) in pt.data.iter_mut().zip(&gt.data).zip(mt.data.iter_mut()).zip(vt.data.iter_mut()) {
                *m = b1 * *m + (one - b1) * gr;
                *v = b2 * *v + (one - b2) * gr * gr;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            }
        }
    }
}

fn index_classes<S: AsRef<str>>(labels: &[S]) -> (Vec<String>, Vec<usize>) {
    let oh = super::one_hot(labels);
    let idx = oh.class_indices();
    (oh.classes, idx)
}

/// Mini-batch Adam on mean cross-entropy. Batches come from a seeded
/// shuffle each epoch.
pub fn train<T: Scalar, S: AsRef<str>>(
    cfg: &NeuralConfig,
    embedding: EmbeddingMatrix<T>,
    data: &[SequenceSample],
    labels: &[S],
) -> Result<NeuralModel<T>, NeuralError> {
    cfg.validate()?;
    if cfg.precision != T::PRECISION {
        return Err(NeuralError::Config(format!(
            "configuration asks for {} but the model is built in {}",
            cfg.precision.as_str(),
            T::PRECISION.as_str()
        )));
    }
    if data.len() != labels.len() {
        return Err(NeuralError::BadSequence(format!("{} sequences but {} labels", data.len(), labels.len())));
    }
    if data.is_empty() {
        return Err(NeuralError::EmptyBatch);
    }
    let (classes, targets) = index_classes(labels);
    if classes.len() < 2 {
        return Err(NeuralError::SingleClass);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = NetworkParams::init(cfg.arch, embedding.matrix, &cfg.dims(classes.len()), &mut rng);
    let mut adam = Adam::new(&params);
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let order = permutation(data.len(), cfg.seed ^ (epoch as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03));
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch) {
            let batch: Vec<SequenceSample> = chunk.iter().map(|&i| data[i].clone()).collect();
            let ys: Vec<usize> = chunk.iter().map(|&i| targets[i]).collect();
            let (loss, grads) = backward(&params, &batch, &ys, cfg.trainable_embeddings)?;
            total += loss.as_f64() * chunk.len() as f64;
            adam.step(&mut params, &grads, cfg);
        }
        let mean = total / data.len() as f64;
        log::info!("{} epoch {}: loss {:.6}", cfg.arch, epoch + 1, mean);
        loss_curve.push(mean);
    }
    Ok(NeuralModel {
        config: cfg.clone(),
        classes,
        params,
        loss_curve,
        oov_count: embedding.oov_count,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    pub per_tensor: BTreeMap<String, f64>,
}

/// Compares analytic gradients with central differences (`eps` = 1e-5) for
/// every scalar parameter. Frozen embeddings and the padding row are
/// skipped.
pub fn gradient_check<T: Scalar>(
    params: &NetworkParams<T>,
    cfg: &NeuralConfig,
    batch: &[SequenceSample],
    targets: &[usize],
) -> Result<GradientCheck, NeuralError> {
    if T::PRECISION != Precision::F64 || cfg.precision != Precision::F64 {
        return Err(NeuralError::Precision(if T::PRECISION != Precision::F64 {
            T::PRECISION.as_str()
        } else {
            cfg.precision.as_str()
        }));
    }
    let eps = 1e-5;
    let (_, analytic) = backward(params, batch, targets, cfg.trainable_embeddings)?;
    let loss_at = |p: &NetworkParams<T>| -> Result<f64, NeuralError> {
        let probs = forward(p, batch)?;
        Ok(probs
            .iter()
            .zip(targets)
            .map(|(row, &y)| -row[y].as_f64().ln())
            .sum::<f64>()
            / batch.len() as f64)
    };
    let mut probe = params.clone();
    let mut out = GradientCheck {
        max_rel_error: 0.0,
        checked: 0,
        per_tensor: BTreeMap::new(),
    };
    let names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
    let d = params.embedding_dim();
    for (ti, name) in names.iter().enumerate() {
        let is_embedding = name == "embedding";
        if is_embedding && !cfg.trainable_embeddings {
            continue;
        }
        let n = params.tensors()[ti].1.len();
        let mut worst = 0.0f64;
        for k in 0..n {
            if is_embedding && k < d {
                continue;
            }
            let original = params.tensors()[ti].1.data[k];
            probe.tensors_mut()[ti].1.data[k] = original + T::of(eps);
            let plus = loss_at(&probe)?;
            probe.tensors_mut()[ti].1.data[k] = original - T::of(eps);
            let minus = loss_at(&probe)?;
            probe.tensors_mut()[ti].1.data[k] = original;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.tensors()[ti].1.data[k].as_f64();
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12);
            worst = worst.max(rel);
            out.checked += 1;
        }
        out.per_tensor.insert(name.clone(), worst);
        out.max_rel_error = out.max_rel_error.max(worst);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorHeader {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ContainerHeader {
    arch: Arch,
    config: NeuralConfig,
    classes: Vec<String>,
    word_index_ref: String,
    precision: Precision,
    loss_curve: Vec<f64>,
    oov_count: usize,
    tensors: Vec<TensorHeader>,
}

impl<T: Scalar> NeuralModel<T> {
    pub fn to_bytes(&self, word_index_ref: &str) -> Vec<u8> {
        let header = ContainerHeader {
            arch: self.params.arch,
            config: self.config.clone(),
            classes: self.classes.clone(),
            word_index_ref: word_index_ref.to_string(),
            precision: T::PRECISION,
            loss_curve: self.loss_curve.clone(),
            oov_count: self.oov_count,
            tensors: self
                .params
                .tensors()
                .into_iter()
                .map(|(name, t)| TensorHeader {
                    name,
                    shape: t.shape.clone(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(12 + json.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&MODEL_SCHEMA_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in self.params.tensors() {
            for &v in &t.data {
                v.write_le(&mut out);
            }
        }
        out
    }

    pub fn save(&self, path: &Path, word_index_ref: &str) -> Result<(), NeuralError> {
        std::fs::write(path, self.to_bytes(word_index_ref)).map_err(|e| io_err(path, e))
    }

    /// Reads a container written in either precision; values are converted
    /// to `T`. Returns the model and its word-index reference.
    pub fn load(path: &Path) -> Result<(Self, String), NeuralError> {
        let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            NeuralError::Format { message, .. } => NeuralError::Format {
                path: path.display().to_string(),
                message,
            },
            NeuralError::Schema { found, expected, .. } => NeuralError::Schema {
                path: path.display().to_string(),
                found,
                expected,
            },
            other => other,
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, String), NeuralError> {
        let bad = |m: &str| NeuralError::Format {
            path: String::new(),
            message: m.to_string(),
        };
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(bad("not a model container"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != MODEL_SCHEMA_VERSION {
            return Err(NeuralError::Schema {
                path: String::new(),
                found: version,
                expected: MODEL_SCHEMA_VERSION,
            });
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let body = bytes.get(12..12 + hlen).ok_or_else(|| bad("truncated header"))?;
        let header: ContainerHeader = serde_json::from_slice(body).map_err(|e| bad(&e.to_string()))?;
        let width = match header.precision {
            Precision::F32 => 4,
            Precision::F64 => 8,
        };
        let emb = header.tensors.first().filter(|t| t.name == "embedding").ok_or_else(|| bad("missing embedding tensor"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut params = NetworkParams::init(
            header.arch,
            Tensor::<T>::zeros(&emb.shape),
            &header.config.dims(header.classes.len()),
            &mut rng,
        );
        let mut offset = 12 + hlen;
        {
            let slots = params.tensors_mut();
            if slots.len() != header.tensors.len() {
                return Err(bad("tensor list does not match the architecture"));
            }
            for ((name, slot), th) in slots.into_iter().zip(&header.tensors) {
                if name != th.name || slot.shape != th.shape {
                    return Err(bad(&format!("tensor `{}` does not match the architecture", th.name)));
                }
                for v in slot.data.iter_mut() {
                    let chunk = bytes.get(offset..offset + width).ok_or_else(|| bad("truncated tensor data"))?;
                    *v = match header.precision {
                        Precision::F32 => T::of(f32::read_le(chunk) as f64),
                        Precision::F64 => T::of(f64::read_le(chunk)),
                    };
                    offset += width;
                }
            }
        }
        if offset != bytes.len() {
            return Err(bad("trailing bytes after tensor data"));
        }
        let mut config = header.config;
        config.precision = T::PRECISION;
        Ok((
            NeuralModel {
                config,
                classes: header.classes,
                params,
                loss_curve: header.loss_curve,
                oov_count: header.oov_count,
            },
            header.word_index_ref,
        ))
    }
}

/// Probability row for a single sequence; convenience for reporting.
pub fn predict_one<T: Scalar>(model: &NeuralModel<T>, seq: &SequenceSample) -> Result<Vec<T>, NeuralError> {
    Ok(forward(&model.params, std::slice::from_ref(seq))?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::super::{build_embedding_matrix, build_word_index, to_sequence, PretrainedVectors};
    use super::*;
    use crate::neural::Dims;

    fn toy(arch: Arch, trainable: bool) -> (NetworkParams<f64>, NeuralConfig, Vec<SequenceSample>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(arch as u64 + 10);
        let mut emb = Tensor::uniform(&[8, 4], 1.0, &mut rng);
        emb.data[..4].iter_mut().for_each(|v| *v = 0.0);
        let dims = Dims {
            hidden: 3,
            filters: 3,
            kernel_widths: vec![2, 3],
            attention: 3,
            classes: 3,
        };
        let mut p = NetworkParams::init(arch, emb, &dims, &mut rng);
        for (_, t) in p.tensors_mut() {
            if t.shape.len() == 1 {
                t.data.iter_mut().enumerate().for_each(|(i, v)| *v += 0.1 * ((i % 5) as f64 - 2.0));
            }
        }
        let cfg = NeuralConfig {
            arch,
            precision: Precision::F64,
            trainable_embeddings: trainable,
            ..Default::default()
        };
        let seqs = vec![
            SequenceSample {
                indices: vec![1, 2, 3, 4, 0, 0],
                true_length: 4,
            },
            SequenceSample {
                indices: vec![5, 6, 7, 1, 2, 3],
                true_length: 6,
            },
            SequenceSample {
                indices: vec![7, 0, 0, 0, 0, 0],
                true_length: 1,
            },
        ];
        (p, cfg, seqs, vec![0, 2, 1])
    }

    #[test]
    fn gradients_match_central_differences() {
        for arch in Arch::ALL {
            for trainable in [false, true] {
                let (p, cfg, seqs, y) = toy(arch, trainable);
                let r = gradient_check(&p, &cfg, &seqs, &y).unwrap();
                assert!(r.max_rel_error < 1e-4, "{arch:?} trainable={trainable}: {:?}", r.per_tensor);
                assert_eq!(r.per_tensor.contains_key("embedding"), trainable);
            }
        }
    }

    #[test]
    fn f32_gradient_check_refuses() {
        let (p, cfg, seqs, y) = toy(Arch::Lstm, false);
        let p32: NetworkParams<f32> = {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let emb = Tensor::<f32>::zeros(&p.embedding.shape);
            NetworkParams::init(Arch::Lstm, emb, &cfg.dims(3), &mut rng)
        };
        assert!(matches!(gradient_check(&p32, &cfg, &seqs, &y), Err(NeuralError::Precision("f32"))));
        let cfg32 = NeuralConfig {
            precision: Precision::F32,
            ..cfg
        };
        assert!(matches!(gradient_check(&p, &cfg32, &seqs, &y), Err(NeuralError::Precision("f32"))));
    }

    fn keyword_fixture(n_per_class: usize, classes: usize) -> (Vec<Vec<String>>, Vec<String>) {
        let mut docs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n_per_class * classes {
            let k = i % classes;
            let mut d: Vec<String> = (0..(i % 4 + 2)).map(|j| format!("filler{}", (i * 7 + j) % 9)).collect();
            d.insert(i % d.len(), format!("key{k}"));
            docs.push(d);
            labels.push(format!("label{k}"));
        }
        (docs, labels)
    }

    fn small_cfg(arch: Arch, precision: Precision) -> NeuralConfig {
        NeuralConfig {
            arch,
            hidden: 8,
            filters: 8,
            kernel_widths: vec![2, 3],
            epochs: 10,
            batch: 8,
            learning_rate: 0.02,
            seed: 3,
            precision,
            max_len: 12,
            embedding_dim: 8,
            ..Default::default()
        }
    }

    fn prepare<T: Scalar>(docs: &[Vec<String>], cfg: &NeuralConfig) -> (EmbeddingMatrix<T>, Vec<SequenceSample>) {
        let wi = build_word_index(docs).unwrap();
        let emb = build_embedding_matrix(&wi, &PretrainedVectors::default(), cfg.embedding_dim, 1).unwrap();
        (emb, docs.iter().map(|d| to_sequence(d, &wi, cfg.max_len)).collect())
    }

    #[test]
    fn loss_falls_and_training_is_deterministic() {
        let (docs, labels) = keyword_fixture(50, 2);
        for arch in Arch::ALL {
            let cfg = small_cfg(arch, Precision::F32);
            let (emb, seqs) = prepare::<f32>(&docs, &cfg);
            let a = train(&cfg, emb.clone(), &seqs, &labels).unwrap();
            let b = train(&cfg, emb, &seqs, &labels).unwrap();
            assert_eq!(a.loss_curve, b.loss_curve);
            assert!(a.loss_curve.last() < a.loss_curve.first(), "{arch:?} {:?}", a.loss_curve);
            assert_eq!(a.loss_curve.len(), 10);
        }
    }

    #[test]
    fn keyword_classes_are_learned_exactly() {
        let (docs, labels) = keyword_fixture(20, 3);
        for arch in Arch::ALL {
            let cfg = NeuralConfig {
                epochs: 30,
                ..small_cfg(arch, Precision::F64)
            };
            let (emb, seqs) = prepare::<f64>(&docs, &cfg);
            let m = train(&cfg, emb, &seqs, &labels).unwrap();
            assert_eq!(m.predict_labels(&seqs).unwrap(), labels, "{arch:?} {:?}", m.loss_curve);
        }
    }

    #[test]
    fn frozen_embeddings_do_not_move() {
        let (docs, labels) = keyword_fixture(10, 2);
        let cfg = small_cfg(Arch::Cnn1d, Precision::F64);
        let (emb, seqs) = prepare::<f64>(&docs, &cfg);
        let before = emb.matrix.clone();
        let m = train(&cfg, emb.clone(), &seqs, &labels).unwrap();
        assert_eq!(m.params.embedding, before);
        let cfg_t = NeuralConfig {
            trainable_embeddings: true,
            ..cfg
        };
        let m = train(&cfg_t, emb, &seqs, &labels).unwrap();
        assert_ne!(m.params.embedding, before);
        assert!(m.params.embedding.row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn training_errors() {
        let (docs, _) = keyword_fixture(3, 2);
        let cfg = small_cfg(Arch::Lstm, Precision::F32);
        let (emb, seqs) = prepare::<f32>(&docs, &cfg);
        let same = vec!["x"; seqs.len()];
        assert!(matches!(train(&cfg, emb.clone(), &seqs, &same), Err(NeuralError::SingleClass)));
        let wrong = NeuralConfig {
            precision: Precision::F64,
            ..cfg.clone()
        };
        let labels: Vec<String> = (0..seqs.len()).map(|i| format!("{}", i % 2)).collect();
        assert!(matches!(train(&wrong, emb, &seqs, &labels), Err(NeuralError::Config(_))));
    }

    #[test]
    fn container_round_trip() {
        let (docs, labels) = keyword_fixture(6, 3);
        let dir = tempfile::tempdir().unwrap();
        for arch in Arch::ALL {
            let cfg = NeuralConfig {
                epochs: 1,
                ..small_cfg(arch, Precision::F32)
            };
            let (emb, seqs) = prepare::<f32>(&docs, &cfg);
            let m = train(&cfg, emb, &seqs, &labels).unwrap();
            let path = dir.path().join(format!("{arch}.bin"));
            m.save(&path, "words.json").unwrap();
            let (back, wref) = NeuralModel::<f32>::load(&path).unwrap();
            assert_eq!(wref, "words.json");
            assert_eq!(back, m);
            let (wide, _) = NeuralModel::<f64>::load(&path).unwrap();
            assert_eq!(wide.predict_labels(&seqs).unwrap(), m.predict_labels(&seqs).unwrap());

            let mut bytes = std::fs::read(&path).unwrap();
            bytes[4] = 9;
            std::fs::write(&path, &bytes).unwrap();
            assert!(matches!(NeuralModel::<f32>::load(&path), Err(NeuralError::Schema { found: 9, .. })));
        }
    }
}
