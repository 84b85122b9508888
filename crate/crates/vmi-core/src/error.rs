//! Error types shared across the crate.
//!
//! Errors are split by the exit-code contract of the command-line interface:
//! configuration problems (exit code 2) carry the *complete* list of
//! violations found in one pass; numerical failures (exit code 3) carry the
//! identity of the term whose quadrature failed.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum VmiError {
    /// A molecular model or pulse violated a structural invariant
    /// (e.g. non-Hermitian dipole, negative dephasing rate, degenerate
    /// ground level, polarization not transverse).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// A run configuration failed validation. Every violation found is
    /// reported, one per line.
    #[error("invalid configuration:\n{}", .violations.join("\n"))]
    InvalidConfig {
        /// All violations discovered in a single validation pass.
        violations: Vec<String>,
    },

    /// A quadrature failed to converge or produced a non-finite value.
    /// `context` names the signal term being integrated.
    #[error("numerical failure in {context}: {detail}")]
    Numerical {
        /// Which term/integral failed (e.g. "s2_vmi_time term_field1_on_b").
        context: String,
        /// What went wrong.
        detail: String,
    },

    /// An argument outside the supported domain (e.g. unsupported order).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Filesystem or serialization problems while reading configuration or
    /// writing results.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl VmiError {
    /// Build an [`VmiError::InvalidConfig`] from a list of violations.
    ///
    /// # Panics
    /// Panics if `violations` is empty: an empty list means validation
    /// passed and no error should be constructed.
    pub fn config(violations: Vec<String>) -> Self {
        assert!(
            !violations.is_empty(),
            "InvalidConfig requires at least one violation"
        );
        VmiError::InvalidConfig { violations }
    }

    /// Build a [`VmiError::Numerical`] with term context.
    pub fn numerical(context: impl Into<String>, detail: impl Into<String>) -> Self {
        VmiError::Numerical {
            context: context.into(),
            detail: detail.into(),
        }
    }

    /// The process exit code associated with this error by the CLI contract:
    /// 2 for configuration/model errors, 3 for numerical failures, 1 for i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            VmiError::InvalidModel(_)
            | VmiError::InvalidConfig { .. }
            | VmiError::Unsupported(_) => 2,
            VmiError::Numerical { .. } => 3,
            VmiError::Io(_) => 1,
        }
    }
}
