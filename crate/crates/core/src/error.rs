use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("numerical error: {0}")]
    NumericalError(String),

    #[error("degenerate spectrum{}", frame.map(|f| format!(" at frame {f}")).unwrap_or_default())]
    DegenerateSpectrum { frame: Option<usize> },

    #[error("invalid speaker profile: {0}")]
    InvalidProfile(String),

    #[error("bad magic: expected \"ACVC\", found {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported bundle version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("truncated bundle file while reading {layer}")]
    TruncatedFile { layer: String },

    #[error("invalid bundle: {0}")]
    InvalidBundle(String),

    #[error("speaker registry line {line}: {message}")]
    Registry { line: usize, message: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn shape(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::ShapeMismatch {
            context: context.into(),
            expected,
            found,
        }
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, with stage tags removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}
