use sast_core::SastError;

/// Command failure, split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration, arguments or input files (exit 2).
    #[error("invalid input: {0}")]
    Input(String),
    /// Failure after inputs were accepted (exit 1).
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Tags errors raised while loading or validating inputs.
pub trait InputContext<T> {
    fn input(self) -> CliResult<T>;
}

/// Tags errors raised during computation or output.
pub trait RuntimeContext<T> {
    fn runtime(self) -> CliResult<T>;
}

impl<T> InputContext<T> for Result<T, SastError> {
    fn input(self) -> CliResult<T> {
        self.map_err(|e| CliError::Input(e.to_string()))
    }
}

impl<T> RuntimeContext<T> for Result<T, SastError> {
    fn runtime(self) -> CliResult<T> {
        self.map_err(|e| CliError::Runtime(e.to_string()))
    }
}
