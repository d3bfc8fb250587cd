use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value violates a domain invariant (non-positive volume, command out of range, ...).
    #[error("invalid {field}: {reason}")]
    InvalidInput { field: String, reason: String },

    /// Integration produced a non-finite state.
    #[error("simulation diverged at t = {t:.6} s: {detail}")]
    Divergence { t: f64, detail: String },

    /// A gauge pressure fell below perfect vacuum and step refinement could not recover.
    #[error("{which} pressure fell below perfect vacuum at t = {t:.6} s ({value:.3} kPa)")]
    BelowVacuum { t: f64, which: &'static str, value: f64 },

    /// Trace does not contain what the analysis needs.
    #[error("analysis rejected trace: {0}")]
    Analysis(String),

    #[error("no feasible design among {evaluated} evaluated configurations")]
    NoFeasibleDesign { evaluated: usize },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput { .. }
            | Error::Json { .. }
            | Error::Io { .. }
            | Error::Analysis(_) => 2,
            Error::Divergence { .. } | Error::BelowVacuum { .. } => 3,
            Error::NoFeasibleDesign { .. } => 4,
        }
    }
}

/// Rejects NaN and infinities with a field-named error.
pub(crate) fn finite(field: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::invalid(field, format!("must be finite, got {value}")))
    }
}

pub(crate) fn positive(field: &str, value: f64) -> Result<f64> {
    finite(field, value)?;
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::invalid(field, format!("must be > 0, got {value}")))
    }
}

pub(crate) fn non_negative(field: &str, value: f64) -> Result<f64> {
    finite(field, value)?;
    if value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::invalid(field, format!("must be >= 0, got {value}")))
    }
}
