use thiserror::Error;

/// Every failure surfaced by the library and the command-line tool.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cutoff dimension {0} is below the minimum of 2")]
    InvalidCutoff(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("truncation leakage {leakage:e} at lambda={lambda} exceeds 1e-6 for cutoff {cutoff}")]
    TruncationLeakage {
        lambda: f64,
        cutoff: usize,
        leakage: f64,
    },
    #[error("herald impossible: click probability {0:e} is below 1e-15")]
    HeraldImpossible(f64),
    #[error("quadrature pdf not normalized (error {error:e}); grid must extend to at least |q| = {required_bound}")]
    GridTooNarrow { error: f64, required_bound: f64 },
    #[error("calibration: {0}")]
    Calibration(String),
    #[error("window {window} has {count} samples; at least 2 are required")]
    WindowTooSmall { window: usize, count: usize },
    #[error("variance fit needs at least {required} windows, got {found}")]
    TooFewWindows { required: usize, found: usize },
    #[error("phase-insensitive state (B = 0): use the phase-averaged reconstruction path or supply a fixed phase")]
    PhaseInsensitive,
    #[error("no samples")]
    NoSamples,
    #[error("all likelihood bins are degenerate")]
    DegenerateLikelihood,
    #[error("unsqueezed input: 2<Q+^2> + 2<Q-^2> - 2 = {0:e} is indistinguishable from zero")]
    Unsqueezed(f64),
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("{0}")]
    Config(String),
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{0} self-test check(s) failed")]
    SelfTestFailed(usize),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Short machine-readable class used in `error: <code>: <message>` lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Config(_) | Error::InvalidParameter { .. } | Error::InvalidCutoff(_) => "config",
            Error::TruncationLeakage { .. } => "config",
            Error::Parse { .. } | Error::Io { .. } | Error::NoSamples => "data",
            Error::WindowTooSmall { .. } | Error::TooFewWindows { .. } => "data",
            Error::Calibration(_) | Error::DimensionMismatch { .. } => "data",
            Error::InvalidState(_) => "data",
            Error::PhaseInsensitive => "data",
            Error::HeraldImpossible(_)
            | Error::GridTooNarrow { .. }
            | Error::DegenerateLikelihood
            | Error::Unsqueezed(_)
            | Error::SelfTestFailed(_) => "numerical",
        }
    }

    /// Process exit status: 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self.code() {
            "config" => 2,
            "data" => 3,
            _ => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
