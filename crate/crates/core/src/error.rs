use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller passed arguments that violate an operation's preconditions.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("state {state} out of range (num_states = {num_states})")]
    StateOutOfRange { state: usize, num_states: usize },

    #[error("action {action} out of range (num_actions = {num_actions})")]
    ActionOutOfRange { action: usize, num_actions: usize },

    /// Malformed Gridworld map.
    #[error("invalid map: {0}")]
    Map(String),

    /// Invalid MDP tables.
    #[error("invalid mdp: {0}")]
    Mdp(String),

    /// Configuration rejected during validation or parsing.
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("missing metric `{0}` in results")]
    MissingMetric(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("numeric fault: {0}")]
    Numeric(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit status: 1 for bad input or configuration, 2 for
    /// failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_)
            | Error::StateOutOfRange { .. }
            | Error::ActionOutOfRange { .. }
            | Error::Map(_)
            | Error::Mdp(_)
            | Error::Config { .. } => 1,
            Error::MissingMetric(_) | Error::Checkpoint(_) | Error::Numeric(_) | Error::Io { .. } => 2,
        }
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
