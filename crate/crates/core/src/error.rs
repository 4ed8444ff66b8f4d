use thiserror::Error;

use crate::corpus::CorpusError;
use crate::dedup::DedupError;
use crate::embed::EmbedError;
use crate::eval::EvalError;
use crate::index::IndexError;
use crate::normalize::NormalizeError;
use crate::translate::TranslateError;

/// Broad failure class; the command-line tool maps these to exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Backend,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Backend => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Dedup(#[from] DedupError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Data(_) | Error::Corpus(_) | Error::Normalize(_) | Error::Eval(_) => ErrorKind::Data,
            Error::Translate(e) => match e {
                TranslateError::Config(_) | TranslateError::InvalidLanguage(_) => ErrorKind::Config,
                TranslateError::Cache(_) => ErrorKind::Data,
                TranslateError::BackendUnavailable(_) | TranslateError::RateLimited { .. } => ErrorKind::Backend,
            },
            Error::Embed(e) => match e {
                EmbedError::Config(_) => ErrorKind::Config,
                EmbedError::BackendUnavailable(_) | EmbedError::DimensionMismatch { .. } => ErrorKind::Backend,
            },
            Error::Index(e) => match e {
                IndexError::InvalidConfig(_) | IndexError::NlistExceedsPoints { .. } => ErrorKind::Config,
                _ => ErrorKind::Data,
            },
            Error::Dedup(e) => match e {
                DedupError::NoMatchingRule(..) | DedupError::InvalidRule(_) | DedupError::UnsortedThetas => {
                    ErrorKind::Config
                }
                DedupError::Index(IndexError::InvalidConfig(_)) => ErrorKind::Config,
                _ => ErrorKind::Data,
            },
        }
    }
}
