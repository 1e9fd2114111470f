use std::fmt;
use std::path::Path;

pub const INPUT_ERROR: u8 = 2;
pub const NOT_CONVERGED: u8 = 3;

/// A failed command with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub type Outcome<T> = std::result::Result<T, Failure>;

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: INPUT_ERROR,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        Self::input(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<vbspca::Error> for Failure {
    fn from(err: vbspca::Error) -> Self {
        let code = match err {
            vbspca::Error::Numerical(_) | vbspca::Error::AllPruned => NOT_CONVERGED,
            _ => INPUT_ERROR,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(err: serde_json::Error) -> Self {
        Self::input(err.to_string())
    }
}

impl std::error::Error for Failure {}
