use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input is structurally valid but too small or empty for the operation.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// An argument violates the operation's contract.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A silhouette mask contains no foreground pixels.
    #[error("empty silhouette: mask has no foreground pixels")]
    EmptySilhouette,

    /// Too few gait cycles detected to estimate a period.
    #[error("insufficient cycles: {0}")]
    InsufficientCycles(String),

    /// The gallery is too small to build screening statistics.
    #[error("insufficient gallery: {0}")]
    InsufficientGallery(String),

    /// Fewer than two distinct subject labels were provided for training.
    #[error("insufficient classes: {0}")]
    InsufficientClasses(String),

    /// A sequence identifier occurs more than once.
    #[error("duplicate id: {0}")]
    DuplicateId(String),

    /// Grid or feature dimensions disagree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Probe and gallery moment sets use different Zernike index sets.
    #[error("index set mismatch: {0}")]
    IndexSetMismatch(String),

    /// A point lies outside the unit disk where the basis is undefined.
    #[error("point outside unit disk: rho = {rho}")]
    OutsideDisk { rho: f64 },

    /// The dataset manifest or frame layout is inconsistent.
    #[error("manifest error: {0}")]
    Manifest(String),

    /// A persisted artifact file does not conform to its format.
    #[error("format error: {0}")]
    Format(String),

    /// Artifacts were produced under a different pipeline configuration.
    #[error("incompatible artifacts: {0}")]
    Incompatible(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
