use outbreak_text::corpus::CorpusError;
use outbreak_text::emolex::EmolexError;
use outbreak_text::eval::EvalError;
use outbreak_text::features::FeatureError;
use outbreak_text::fixture::FixtureError;
use outbreak_text::linear_models::ModelError;
use outbreak_text::neural::NeuralError;
use outbreak_text::preprocess::PreprocessError;
use outbreak_text::sentilex::SentilexError;
use thiserror::Error;

/// Top-level error; each variant maps to one process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("resource: {0}")]
    Resource(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Resource(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::InvalidFraction(_) | CorpusError::NoSeeds => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<PreprocessError> for CliError {
    fn from(e: PreprocessError) -> Self {
        CliError::Resource(e.to_string())
    }
}

impl From<SentilexError> for CliError {
    fn from(e: SentilexError) -> Self {
        match e {
            SentilexError::MissingTranslation(_) => CliError::Data(e.to_string()),
            SentilexError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Resource(e.to_string()),
        }
    }
}

impl From<EmolexError> for CliError {
    fn from(e: EmolexError) -> Self {
        match e {
            EmolexError::MissingSentiment(_) | EmolexError::MissingTranslation(_) | EmolexError::BadOverrides(_) => {
                CliError::Data(e.to_string())
            }
            _ => CliError::Resource(e.to_string()),
        }
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::BadMinDf => CliError::Usage(e.to_string()),
            FeatureError::DimensionMismatch { .. } | FeatureError::Inconsistent(_) => CliError::Internal(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Io { .. } | EvalError::Schema { .. } | EvalError::ClassMismatch(..) | EvalError::MetadataMismatch(_) => {
                CliError::Data(e.to_string())
            }
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Config(_) | ModelError::BadAlpha(_) | ModelError::BadLambda(_) => CliError::Usage(e.to_string()),
            ModelError::LengthMismatch(..) | ModelError::DimensionMismatch { .. } => CliError::Internal(e.to_string()),
            ModelError::Eval(inner) => inner.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<NeuralError> for CliError {
    fn from(e: NeuralError) -> Self {
        match e {
            NeuralError::WrongDimension { .. } | NeuralError::Io { .. } => CliError::Resource(e.to_string()),
            NeuralError::Config(_) | NeuralError::Precision(_) => CliError::Usage(e.to_string()),
            NeuralError::Uninitialized(_) | NeuralError::BadSequence(_) => CliError::Internal(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<FixtureError> for CliError {
    fn from(e: FixtureError) -> Self {
        match e {
            FixtureError::Config(_) => CliError::Usage(e.to_string()),
            FixtureError::NoCues(_) => CliError::Resource(e.to_string()),
        }
    }
}
