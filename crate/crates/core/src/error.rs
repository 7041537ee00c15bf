use thiserror::Error;

/// Per-epoch training history, attached to `TrainingFailed` so a failed fit
/// can still be inspected (loss curve, dev metric curve).
#[derive(Debug, Clone, Default)]
pub struct TrainingCurves {
    pub train_loss: Vec<f64>,
    pub dev_metric: Vec<f64>,
}

impl TrainingCurves {
    pub fn final_dev_metric(&self) -> f64 {
        self.dev_metric.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("sentence is empty after normalization")]
    EmptySentence,

    #[error("no corpus text supplied")]
    EmptyCorpus,

    #[error("cannot rectify class {class}: one cross-label group is empty")]
    EmptyMinority { class: u8 },

    #[error("token id {id} out of range for vocabulary of size {vocab}")]
    TokenOutOfRange { id: usize, vocab: usize },

    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("non-finite gradient in tensor `{name}`")]
    NonFiniteGradient { name: String },

    #[error("training failed: {reason}")]
    TrainingFailed {
        reason: String,
        curves: TrainingCurves,
    },

    #[error("frozen classifier parameters changed during decoder training")]
    FrozenViolation,

    #[error("vocabulary hash mismatch: model has {model}, corpus has {corpus}")]
    VocabMismatch { model: String, corpus: String },

    #[error("both classifiers score the same attribute `{0}`")]
    AttributeCollision(String),

    #[error("{path}:{line}: {detail}")]
    MalformedLine {
        path: String,
        line: usize,
        detail: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
