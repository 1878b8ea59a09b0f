//! CLI-level errors and their process exit codes.

use thetainv_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("missing input file: {0}")]
    MissingInput(String),
    #[error("io error on {0}: {1}")]
    Io(String, std::io::Error),
    #[error("cannot parse {0}: {1:?}")]
    Parse(String, String),
}

impl CliError {
    /// Stable exit codes so scripted callers can tell failure modes apart.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigInvalid(_) => 2,
            CliError::Core(CoreError::DegenerateSpectrum) => 3,
            CliError::Core(CoreError::OrderAmbiguous { .. }) => 4,
            CliError::Core(CoreError::ParityInconsistent) => 5,
            CliError::Core(CoreError::NearSingular) => 6,
            CliError::MissingInput(_) => 7,
            _ => 1,
        }
    }
}
