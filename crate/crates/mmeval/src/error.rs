//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by channel construction, analysis, and file I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An operation that requires a normalized tensor was given a raw one.
    #[error("channel tensor must be normalized before antenna selection")]
    NormalizationRequired,

    /// A normalization was applied to a tensor that is not in the raw state.
    #[error("normalization requires a raw tensor (already {0})")]
    AlreadyNormalized(String),

    /// An antenna subset is malformed or references out-of-range ports.
    #[error("bad antenna subset: {0}")]
    BadSubset(String),

    /// A user row carries zero energy and cannot be normalized.
    #[error("user {0} has zero channel energy")]
    DegenerateUser(usize),

    /// The whole tensor carries zero energy and cannot be normalized.
    #[error("channel tensor has zero total energy")]
    DegenerateChannel,

    /// More users than antennas; outside the supported regime.
    #[error("{users} users exceed {antennas} antennas")]
    Overloaded { users: usize, antennas: usize },

    /// The Gram matrix is singular; the zero-forcing precoder does not exist.
    #[error("Gram matrix is singular; channel is rank-deficient")]
    SingularGram,

    /// A matrix or tensor contains NaN or infinite coefficients.
    #[error("non-finite channel coefficient encountered")]
    NonFinite,

    /// A parameter violates its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// The SAGE window does not fit in the array.
    #[error("window of {window} elements exceeds array of {array} elements")]
    WindowTooLarge { window: usize, array: usize },

    /// Two fingerprints were compared on different grids.
    #[error("fingerprint grids do not match: {0}")]
    GridMismatch(String),

    /// A channel file does not start with the expected magic bytes.
    #[error("not a CTF1 channel file (bad magic)")]
    BadMagic,

    /// A channel file header is present but unreadable or inconsistent.
    #[error("malformed CTF1 header: {0}")]
    BadHeader(String),

    /// A channel file declares an unsupported format version.
    #[error("unsupported CTF1 version {0}")]
    UnsupportedVersion(u32),

    /// A channel file payload ends before the declared coefficient count.
    #[error("truncated CTF1 payload: expected {expected} bytes, got {got}")]
    Truncated { expected: u64, got: u64 },

    /// Declared channel dimensions overflow the addressable payload size.
    #[error("channel dimensions overflow: {0}")]
    DimensionOverflow(String),

    /// An analysis cell failed; coordinates identify the failing cell.
    #[error("cell failed (M={antennas}, subset {subset}, subcarrier {subcarrier}): {source}")]
    Cell {
        antennas: usize,
        subset: usize,
        subcarrier: usize,
        #[source]
        source: Box<Error>,
    },

    /// An experiment stage failed; the stage name locates the failure.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    /// A recorded artifact checksum no longer matches the file on disk.
    #[error("checksum mismatch for {path}: manifest {expected}, recomputed {actual}")]
    ChecksumMismatch {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wraps an error with the (M, subset, subcarrier) cell that produced it.
    pub fn at_cell(self, antennas: usize, subset: usize, subcarrier: usize) -> Self {
        Error::Cell {
            antennas,
            subset,
            subcarrier,
            source: Box::new(self),
        }
    }

    /// Wraps an error with the experiment stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
