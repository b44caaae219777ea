use bonsai_core::Violation;
use bonsai_service::StartupError;

/// Failure of a command, carrying its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad input: unreadable or malformed files, invalid weights, config
    /// violations. Exit 2.
    #[error("error: {0}")]
    Invalid(String),
    #[error("error: config has {} violation(s):\n{}", .0.len(), list(.0))]
    Violations(Vec<Violation>),
    /// The language model provider failed. Exit 3.
    #[error("error: {0}")]
    Provider(String),
    /// The service reported an unknown feed. Exit 4.
    #[error("error: {0}")]
    NotFound(String),
    /// Anything else. Exit 1.
    #[error("error: {0}")]
    Failed(String),
}

fn list(violations: &[Violation]) -> String {
    violations.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n")
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Invalid(_) | CliError::Violations(_) => 2,
            CliError::Provider(_) => 3,
            CliError::NotFound(_) => 4,
        }
    }
}

impl From<StartupError> for CliError {
    fn from(e: StartupError) -> Self {
        match e {
            StartupError::Config(_)
            | StartupError::Catalog(_)
            | StartupError::Corpus(_)
            | StartupError::MockRules(_) => CliError::Invalid(e.to_string()),
            StartupError::Provider(_) => CliError::Provider(e.to_string()),
            StartupError::Store(_) | StartupError::Bind { .. } => CliError::Failed(e.to_string()),
        }
    }
}
