use thiserror::Error;

use crate::conjugate::DiscardError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected} bits, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("bit index {index} out of range for length {len} (indices are 1-based)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid bitstring: {0}")]
    InvalidBitString(String),

    #[error("malformed truth table: expected {expected} entries, found {found}")]
    MalformedTable { expected: usize, found: usize },

    #[error("register width must be at least 1 (level {level})")]
    ZeroWidth { level: usize },

    #[error("width {width} exceeds the supported maximum of {max} bits")]
    WidthTooLarge { width: usize, max: usize },

    #[error("invalid instance configuration: {0}")]
    InvalidConfig(String),

    #[error("unsatisfiable promise at level {level}: {detail}")]
    UnsatisfiablePromise { level: usize, detail: String },

    #[error("level {level} out of range 1..={max}")]
    InvalidLevel { level: usize, max: usize },

    #[error("expected {expected} arguments, found {found}")]
    ArityMismatch { expected: usize, found: usize },

    #[error("shortcut inapplicable: {0}")]
    ShortcutInapplicable(String),

    #[error("unknown register `{0}`")]
    UnknownRegister(String),

    #[error("duplicate register `{0}`")]
    DuplicateRegister(String),

    #[error("{required} qubits exceed the simulator cap of {cap}; use smaller widths or depth")]
    QubitCapExceeded { required: usize, cap: usize },

    #[error("register `{register}` cannot be discarded: P({expected}) = {probability:.12}")]
    DiscardFailed {
        register: String,
        expected: String,
        probability: f64,
    },

    #[error("ablation ensemble too large ({0} amplitudes)")]
    EnsembleTooLarge(usize),

    #[error("ill-posed query: {0}")]
    IllPosedQuery(String),

    #[error(transparent)]
    Discard(#[from] DiscardError),

    #[error("not expressible in RFS_h form: {0}")]
    NotExpressible(String),

    #[error("promise violation: {0}")]
    PromiseViolation(String),

    #[error("instance format: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
