use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{file}:{line}:{col}: {msg}")]
    Parse {
        file: String,
        line: usize,
        col: usize,
        msg: String,
    },

    #[error("unresolved rule reference `{0}`")]
    UnresolvedRef(String),

    #[error("cyclic rule reference through `{0}`")]
    CyclicRef(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("symbol table mismatch between operands")]
    SymbolTableMismatch,

    #[error("bad file format: {0}")]
    Format(String),

    #[error("checksum mismatch (corrupted file)")]
    Checksum,

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("unknown tag `{0}` in training data")]
    UnknownTag(String),

    #[error("malformed tag span: {0}")]
    MalformedSpan(String),

    #[error("input of length {len} exceeds max position {max}; segment the input")]
    OverLength { len: usize, max: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("shortest-path search exceeded its expansion budget")]
    SearchBudget,

    #[error("cyclic machine passed to shortest_paths")]
    CyclicInput,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
