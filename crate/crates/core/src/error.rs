use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // I/O and file format
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a single-file NIfTI-1 image (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedDtype(i16),
    #[error("file truncated: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },
    #[error("non-finite voxel value at index {0}")]
    NonFiniteData(usize),
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("invalid volume: {0}")]
    InvalidVolume(String),

    // atlas
    #[error("label volume holds non-integer value {value} at index {index}")]
    NonIntegerLabels { index: usize, value: f32 },
    #[error("duplicate lut id {0}")]
    DuplicateLutId(u32),
    #[error("region id {0} present in label volume but missing from lut")]
    UnknownRegionInVolume(u32),
    #[error("invalid lut: {0}")]
    InvalidLut(String),
    #[error("unknown region id {0}")]
    UnknownRegionId(u32),

    // alignment
    #[error("dims mismatch: {left:?} vs {right:?}")]
    DimsMismatch { left: [usize; 3], right: [usize; 3] },
    #[error("affine mismatch at ({row},{col}): {left} vs {right}")]
    AffineMismatch {
        row: usize,
        col: usize,
        left: f32,
        right: f32,
    },

    // augmentation
    #[error("k = {k} exceeds the {available} available regions")]
    KTooLarge { k: usize, available: usize },
    #[error("empty region selection")]
    EmptyRegionSelection,
    #[error("replacement ratio {0} outside [0, 1]")]
    RatioOutOfRange(f64),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid soft label: {0}")]
    InvalidLabel(String),
    #[error("empty mask")]
    EmptyMask,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown sample id {0}")]
    UnknownSample(usize),

    // contrastive loss
    #[error("no anchor has positive affinity mass")]
    NoValidAnchors,
    #[error("row {0} has norm below 1e-12")]
    DegenerateNorm(usize),

    // pipeline
    #[error("volume dims {dims:?} not divisible into pooling grid {grid:?}")]
    DimsNotPoolable { dims: [usize; 3], grid: [usize; 3] },
    #[error("empty test set")]
    EmptyTestSet,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::IoFailure {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    ///
    /// 2 usage/validation, 3 I/O or format, 4 alignment, 5 numerical check.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            IoFailure { .. }
            | BadMagic(_)
            | UnsupportedDtype(_)
            | TruncatedFile { .. }
            | NonFiniteData(_)
            | InvalidHeader(_)
            | InvalidVolume(_)
            | NonIntegerLabels { .. }
            | DuplicateLutId(_)
            | UnknownRegionInVolume(_)
            | InvalidLut(_) => 3,
            DimsMismatch { .. } | AffineMismatch { .. } => 4,
            NoValidAnchors | DegenerateNorm(_) => 5,
            UnknownRegionId(_)
            | KTooLarge { .. }
            | EmptyRegionSelection
            | RatioOutOfRange(_)
            | LengthMismatch { .. }
            | InvalidLabel(_)
            | EmptyMask
            | InvalidParameter(_)
            | UnknownSample(_)
            | DimsNotPoolable { .. }
            | EmptyTestSet
            | InvalidConfig(_) => 2,
        }
    }
}
