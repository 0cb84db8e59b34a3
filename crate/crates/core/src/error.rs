use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated a documented invariant.
    #[error("invalid `{name}`: {reason}")]
    Validation { name: &'static str, reason: String },

    /// An argument is outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Evaluation landed exactly on a pole of a resolvent.
    #[error("pole hit at frequency {frequency}")]
    Pole { frequency: f64 },

    /// A numerical routine did not meet its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Configuration text could not be parsed or validated.
    #[error("{} configuration error(s):\n{}", .0.len(), render_config_errors(.0))]
    Config(Vec<crate::config::ConfigIssue>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            name,
            reason: reason.into(),
        }
    }

    /// Process exit code used by the CLI: 1 for bad input, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation { .. } | Error::Domain(_) | Error::Config(_) | Error::Io(_) => 1,
            Error::Pole { .. } | Error::Numerical(_) => 2,
        }
    }
}

fn render_config_errors(issues: &[crate::config::ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Rejects NaN and infinities.
pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(name, format!("must be finite, got {value}")))
    }
}
