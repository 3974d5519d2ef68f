use std::path::PathBuf;

use oplab_core::opfit::FitError;
use oplab_core::pdelab::PdeError;
use oplab_core::probes::ProbeError;
use oplab_core::recovery::RecoveryError;
use oplab_core::structured::StructuredError;
use thiserror::Error;

use crate::container::ContainerError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Container {
        path: PathBuf,
        #[source]
        source: ContainerError,
    },
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
    #[error(transparent)]
    Structured(#[from] StructuredError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("writing {path}: {message}")]
    Output { path: PathBuf, message: String },
}

impl CliError {
    /// Short machine-readable code printed as `error[CODE]: message`.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } | CliError::Output { .. } => "io",
            CliError::Container { source, .. } => source.code(),
            CliError::Pde(PdeError::Pair { .. }) => "pair",
            CliError::Pde(_) => "pde",
            CliError::Probe(_) => "probe",
            CliError::Recovery(_) | CliError::Structured(_) => "recovery",
            CliError::Fit(_) => "fit",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } | CliError::Output { .. } => 3,
            CliError::Container { .. } => 4,
            _ => 5,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// The diagnostic line printed on standard error.
    pub fn line(&self) -> String {
        let message = self.to_string().replace('\n', " ");
        format!("error[{}]: {message}", self.code())
    }
}
