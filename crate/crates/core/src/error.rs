//! Crate-wide error type.
//!
//! Fallible operations return [`Result`]. The variants separate caller
//! mistakes (`InvalidInput`), instances on which the requested quantity does
//! not exist (`Domain`, `ZeroDivisor`), instances outside the regime an
//! operation is defined for (`Unsupported`), guarded enumerations
//! (`CapExceeded`), and scenario-file problems (`Scenario`). Length
//! mismatches between functions and spaces are treated as programmer errors
//! and panic via `assert!` instead.

use thiserror::Error;

/// Errors reported by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: bad parameters, unknown ids, out-of-range indices.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The requested quantity does not exist for this instance.
    #[error("domain error: {0}")]
    Domain(String),

    /// The instance violates a structural precondition of the operation.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// An enumeration would exceed its configured cap.
    #[error("enumeration cap exceeded: {count} functions requested, cap is {cap}")]
    CapExceeded {
        /// Functions the enumeration would produce.
        count: u128,
        /// Configured ceiling.
        cap: u128,
    },

    /// A vanishing block average was hit while walking an orbit backwards.
    #[error("zero block average at atom '{atom}' ({steps} step(s) into the backward orbit)")]
    ZeroDivisor {
        /// Id of the atom whose block average vanishes.
        atom: String,
        /// How many steps into the backward orbit the zero sits.
        steps: usize,
    },

    /// Two routes to the same quantity disagreed beyond tolerance.
    #[error("internal cross-check failed: {0}")]
    CrossCheck(String),

    /// A scenario file or parameter set is internally inconsistent.
    #[error("scenario error: {0}")]
    Scenario(String),

    /// Filesystem failure while reading or writing artifacts.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Malformed JSON in a scenario document.
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
