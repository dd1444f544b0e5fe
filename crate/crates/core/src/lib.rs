//! Bilingual (English/Urdu) sentiment and emotion classification for
//! epidemic surveillance text: lexicon labeling, rule-based emotion
//! annotation, bag-of-words and TFIDF features, naive Bayes and linear SVM
//! classifiers, from-scratch neural sequence models and evaluation.
//!
//! Numeric code is generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! aliases below name the common instantiations.

pub mod corpus;
pub mod emolex;
pub mod eval;
pub mod features;
pub mod fixture;
pub mod linear_models;
pub mod neural;
pub mod preprocess;
pub mod scalar;
pub mod sentilex;

pub type FeatureVectorF32 = features::FeatureVector<f32>;
pub type FeatureVectorF64 = features::FeatureVector<f64>;
pub type LinearModelF32 = linear_models::LinearModel<f32>;
pub type LinearModelF64 = linear_models::LinearModel<f64>;
pub type NeuralModelF32 = neural::NeuralModel<f32>;
pub type NeuralModelF64 = neural::NeuralModel<f64>;
pub type EmbeddingMatrixF32 = neural::EmbeddingMatrix<f32>;
pub type EmbeddingMatrixF64 = neural::EmbeddingMatrix<f64>;
