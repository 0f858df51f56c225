use std::path::PathBuf;

use ntpt_engine::EngineError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Engine(#[from] EngineError),

    #[error("invalid domain: {0}")]
    Domain(String),

    #[error("invalid marginal: {0}")]
    Marginal(String),

    #[error("function `{function}` maps {args:?} to {value}, outside output domain of size {size}")]
    LiftOutOfRange { function: String, args: Vec<usize>, value: usize, size: usize },

    #[error("compile error at `{var}`: {reason}")]
    Compile { var: String, reason: String },

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("library error: {0}")]
    Library(String),

    #[error("library file {path}: {reason}")]
    LibraryFile { path: PathBuf, reason: String },

    #[error("{path}: parse error at byte offset {offset}: {reason}")]
    Idx { path: PathBuf, offset: usize, reason: String },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("config error: {0}")]
    Config(String),

    #[error("listing error: {0}")]
    Listing(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn compile(var: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Compile { var: var.into(), reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
