use crate::expr::ExprError;

/// Errors raised by the engine.
#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("unknown coordinate `{0}`")]
    UnknownCoordinate(String),
    #[error("coordinate `{coord}` exceeds the declared order {order}")]
    OrderViolation { coord: String, order: usize },
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("form degree {0} exceeds the ambient dimension {1}")]
    DegreeOverflow(usize, usize),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("verification failed: {0}")]
    VerificationFailed(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::VerificationFailed(_) => 2,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Input(format!("json: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
