use std::path::PathBuf;

use crate::data::{ClassId, SampleId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{context}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("cosine distance is undefined for a zero-norm vector")]
    ZeroNorm,

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown class id {0}")]
    UnknownClass(ClassId),

    #[error("class mismatch: {left} vs {right}")]
    ClassMismatch { left: ClassId, right: ClassId },

    #[error("sample {0} has no text embeddings")]
    MissingTexts(SampleId),

    #[error("training budget exhausted after {0} iterations")]
    Exhausted(u64),

    #[error("requested {way}-way episodes but only {available} novel classes exist")]
    WayTooLarge { way: usize, available: usize },

    #[error("class {class} has {available} samples, needs at least {needed}")]
    ClassTooSmall {
        class: ClassId,
        available: usize,
        needed: usize,
    },

    #[error("text cap {requested} exceeds the {available} texts available for sample {sample}")]
    TextCapTooLarge {
        requested: usize,
        available: usize,
        sample: SampleId,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}:{line}: expected {expected} embedding values, found {found}", path.display())]
    RowDimension {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("{}:{line}: duplicate {what} {id}", path.display())]
    Duplicate {
        path: PathBuf,
        line: usize,
        what: &'static str,
        id: String,
    },

    #[error("{}:{line}: sample {id} references class {class} missing from the split file", path.display())]
    UnregisteredClass {
        path: PathBuf,
        line: usize,
        id: SampleId,
        class: ClassId,
    },

    #[error("{}:{line}: text row for unknown sample id {id}", path.display())]
    UnknownSample {
        path: PathBuf,
        line: usize,
        id: SampleId,
    },

    #[error("class {class} has samples in both base and novel splits")]
    SplitConflict { class: ClassId },

    #[error("model file: {0}")]
    ModelFormat(String),
}

impl Error {
    /// True for errors caused by malformed or inconsistent input data.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::RowDimension { .. }
                | Error::Duplicate { .. }
                | Error::UnregisteredClass { .. }
                | Error::UnknownSample { .. }
                | Error::SplitConflict { .. }
                | Error::ModelFormat(_)
                | Error::MissingTexts(_)
                | Error::WayTooLarge { .. }
                | Error::ClassTooSmall { .. }
                | Error::TextCapTooLarge { .. }
                | Error::UnknownClass(_)
                | Error::Empty(_)
        )
    }

    pub fn is_numerical_failure(&self) -> bool {
        matches!(self, Error::NonFinite(_))
    }
}
