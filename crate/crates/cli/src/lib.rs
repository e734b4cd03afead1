//! Experiment runner for time-series embedding domain adaptation: the
//! synthetic noise sweep and file-based adaptation runs, with deterministic
//! CSV reports and an accuracy-vs-noise SVG plot.

pub mod config;
pub mod report;
pub mod svg;
pub mod sweep;

/// Failures mapped onto process exit codes: configuration and input
/// problems exit 2, numerical failures exit 3 (partial results flushed),
/// unwritable outputs exit 4.
#[derive(Debug, Clone)]
pub enum RunError {
    Config(String),
    Input(String),
    Numerical(String),
    Output(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Input(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Output(_) => 4,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "config error: {m}"),
            RunError::Input(m) => write!(f, "input error: {m}"),
            RunError::Numerical(m) => write!(f, "numerical failure: {m}"),
            RunError::Output(m) => write!(f, "output error: {m}"),
        }
    }
}

impl std::error::Error for RunError {}
