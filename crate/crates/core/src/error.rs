use thiserror::Error;

/// Errors produced across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value at layer {layer}")]
    NonFinite { layer: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("invalid encoder spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cosine distance undefined for a zero vector")]
    ZeroVector,

    #[error("jacobi svd did not converge within {sweeps} sweeps")]
    Convergence { sweeps: usize },

    #[error("idx format: bad magic number {found:#010x} (expected {expected:#010x})")]
    BadMagic { expected: u32, found: u32 },

    #[error("idx format: file truncated ({0})")]
    Truncated(String),

    #[error("idx format: {images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("spec has no class head")]
    Headless,

    #[error("unlearning failed at epoch {epoch}, {stage}: {source}")]
    Unlearn {
        epoch: usize,
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::Dimension {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}
