use thiserror::Error;

/// Errors shared across the solver library.
#[derive(Debug, Error)]
pub enum FwanError {
    /// An operation was handed a value outside its mathematical domain.
    #[error("domain error in {context}: {message}")]
    Domain { context: &'static str, message: String },

    /// A tape operation hit a non-differentiable or invalid primal
    /// (e.g. ln of a non-positive value). Carries the offending node index.
    #[error("autodiff domain error at node {node}: {message}")]
    AutodiffDomain { node: usize, message: String },

    /// Caller misuse of an API (dimension mismatch, unknown identifier, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// Invalid configuration (degenerate domain, zero counts, bad weights).
    #[error("config error: {0}")]
    Config(String),

    /// A gradient or loss evaluation produced NaN/Inf.
    #[error("non-finite value in {context} at iteration {iteration} (batch stream {batch_stream}, theta checksum {theta_checksum:#018x}, eta checksum {eta_checksum:#018x})")]
    NonFinite {
        context: &'static str,
        iteration: usize,
        batch_stream: u64,
        theta_checksum: u64,
        eta_checksum: u64,
    },

    /// The adversary network collapsed to (numerically) zero on the batch.
    #[error("degenerate adversary: |v|^2 = {v_norm2:.3e} below floor {floor:.1e}")]
    DegenerateAdversary { v_norm2: f64, floor: f64 },

    /// Relative error metric undefined because the reference field is zero.
    #[error("undefined metric: true solution is identically zero on the evaluation grid")]
    UndefinedMetric,

    /// Checkpoint or CSV I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed checkpoint file.
    #[error("checkpoint format error: {0}")]
    CheckpointFormat(String),
}

pub type Result<T> = std::result::Result<T, FwanError>;
