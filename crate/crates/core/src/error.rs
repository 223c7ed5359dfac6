use std::path::PathBuf;

use crate::features::ClassId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error{}: {message}", record.map(|r| format!(" at record {r}")).unwrap_or_default())]
    Format {
        record: Option<usize>,
        message: String,
    },

    #[error("zero vector: norm {norm:e} is below the normalization floor")]
    ZeroVector { norm: f64 },

    #[error("non-finite feature value at component {component}")]
    NonFinite { component: usize },

    #[error("class {class_id} has {available} samples, needs more than {required}")]
    InsufficientSamples {
        class_id: ClassId,
        available: usize,
        required: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty training set: {0}")]
    EmptyClass(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("external pool holds {available} vectors, budget requires {budget}")]
    InsufficientExternal { available: usize, budget: usize },

    #[error("class {0} is already known")]
    DuplicateClass(ClassId),

    #[error("class {0} is not present")]
    UnknownClass(ClassId),

    #[error("k = {k} exceeds the {known} known classes")]
    KTooLarge { k: usize, known: usize },

    #[error("evaluation set contains class {0}, which the state does not know")]
    UnknownClassInEvalSet(ClassId),

    #[error("class {0} has an empty validation partition")]
    EmptyValidation(ClassId),

    #[error("cannot place {classes} class means {min_angle_deg:.1} degrees apart in dimension {dim}")]
    SeparationInfeasible {
        classes: usize,
        dim: usize,
        min_angle_deg: f64,
    },

    #[error("invalid parameter `{field}`: {message}")]
    InvalidParameter { field: String, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(record: Option<usize>, message: impl Into<String>) -> Self {
        Error::Format {
            record,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            message: message.into(),
        }
    }
}
