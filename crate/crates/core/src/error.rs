use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("Bloch vector ({x}, {y}, {z}) is not a unit vector (norm^2 = {norm_sq})")]
    NonUnitBloch { x: f64, y: f64, z: f64, norm_sq: f64 },

    #[error("expected {expected} measurement settings, got {got}")]
    SettingCount { expected: usize, got: usize },

    #[error("copy count {n} exceeds the configured cap of {cap}")]
    CopyCap { n: usize, cap: usize },

    #[error("copy count must be at least 1")]
    NoCopies,

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("signaling detected: deviation {deviation:e} exceeds tolerance {tolerance:e}")]
    Signaling { deviation: f64, tolerance: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("efficiency {0} is outside [0, 1]")]
    Efficiency(f64),

    #[error("Collins-Gisin reconstruction produced entry {value} at (x={x}, y={y}, a={a}, b={b})")]
    Reconstruction { x: usize, y: usize, a: usize, b: usize, value: f64 },

    #[error("{strategies} Alice strategies exceed the enumeration cap of {cap}; use the heuristic local bound")]
    EnumerationCap { strategies: f64, cap: u64 },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("no separation at eta = 1; the ideal point should be nonlocal")]
    NoSeparationAtUnitEfficiency,

    #[error("no rationalization with denominator <= {0} preserves separation")]
    Rationalization(u64),

    #[error("threshold undefined: {0}")]
    Threshold(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
