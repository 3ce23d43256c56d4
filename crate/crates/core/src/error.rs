use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("denominator polynomial is identically zero")]
    ZeroDenominator,
    #[error("improper system: numerator degree {num} exceeds denominator degree {den}")]
    ImproperSystem { num: usize, den: usize },
    #[error("closed loop is degenerate: 1 + G·H vanishes identically")]
    DegenerateLoop,
    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),
    #[error("trace has no samples")]
    EmptyTrace,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("length mismatch: expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("unknown area `{0}`")]
    UnknownArea(String),
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("missing channel `{0}`")]
    MissingChannel(String),
    #[error("duplicate channel `{0}`")]
    DuplicateChannel(String),
    #[error("infeasible bounds for `{param}`: lower {lb} > upper {ub} or not finite")]
    InfeasibleBounds { param: String, lb: f64, ub: f64 },
    #[error("input excitation too small to identify {}", .params.join(", "))]
    UnidentifiableInput { params: Vec<String> },
    #[error("reference signal is constant (total sum of squares is zero)")]
    ConstantReference,
    #[error("nonuniform sampling at row {row}")]
    NonuniformSampling { row: usize },
    #[error("file contains no data")]
    EmptyFile,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error at `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by malformed user input (configuration, traces,
    /// channel names) as opposed to numerical or solver failures.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::UnknownArea(_)
                | Error::UnknownChannel(_)
                | Error::MissingChannel(_)
                | Error::DuplicateChannel(_)
                | Error::InfeasibleBounds { .. }
                | Error::NonuniformSampling { .. }
                | Error::EmptyFile
                | Error::EmptyTrace
                | Error::Parse(_)
                | Error::Validation { .. }
                | Error::LengthMismatch { .. }
                | Error::DimensionMismatch(_)
                | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
