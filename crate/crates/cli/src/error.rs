use fqcp_core::FqcpError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] FqcpError),
    /// Results were written but some did not converge or were flagged.
    #[error("numerical non-convergence: {0}")]
    NotConverged(String),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Core(FqcpError::Config(msg.into()))
    }

    pub fn internal(e: impl std::fmt::Display) -> Self {
        Self::Internal(e.to_string())
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Core(FqcpError::Config(_)) => "config",
            Self::Core(FqcpError::Schema { .. }) => "schema",
            Self::Core(FqcpError::Parse { .. }) => "parse",
            Self::Core(FqcpError::Overwrite(_)) => "overwrite",
            Self::Core(FqcpError::Json(_)) => "json",
            Self::Core(FqcpError::Resource(_)) => "resource",
            Self::Core(FqcpError::Io(_)) => "io",
            Self::Core(_) => "numeric",
            Self::NotConverged(_) => "not_converged",
            Self::Internal(_) => "internal",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Core(
                FqcpError::Config(_)
                | FqcpError::Schema { .. }
                | FqcpError::Parse { .. }
                | FqcpError::Overwrite(_)
                | FqcpError::Json(_)
                | FqcpError::Resource(_),
            ) => 2,
            Self::NotConverged(_) => 3,
            _ => 1,
        }
    }

    /// One-line JSON diagnostic for stderr.
    pub fn diagnostic(&self) -> String {
        #[derive(Serialize)]
        struct Diagnostic<'a> {
            error: &'a str,
            message: String,
            exit_code: u8,
        }
        serde_json::to_string(&Diagnostic {
            error: self.kind(),
            message: self.to_string(),
            exit_code: self.exit_code(),
        })
        .unwrap_or_else(|_| self.to_string())
    }
}
