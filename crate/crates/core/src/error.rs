use thiserror::Error;

/// Errors raised by the numerical core.
///
/// Each variant maps to a distinct CLI exit code, see [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty series: {0}")]
    EmptySeries(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("degenerate weights: total weight is zero")]
    DegenerateWeights,

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("matrix error: {0}")]
    Matrix(String),

    #[error("unsupported kernel: {0}")]
    UnsupportedKernel(String),

    #[error("limit case condition violated: {0}")]
    CaseCondition(String),

    #[error("calibration missing: {0}")]
    CalibrationMissing(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("design error: {0}")]
    Design(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("io error: {0}")]
    Io(String),

    #[error("json error: {0}")]
    Json(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

impl Error {
    /// Process exit code for this error class (0 is reserved for success).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Json(_) => 2,
            Error::Domain(_) | Error::EmptySeries(_) | Error::DegenerateData(_) => 3,
            Error::DegenerateWeights
            | Error::Numerical(_)
            | Error::Quadrature(_)
            | Error::Matrix(_)
            | Error::CaseCondition(_) => 4,
            Error::UnsupportedKernel(_) | Error::Config(_) | Error::Design(_) => 5,
            Error::CalibrationMissing(_) => 6,
            Error::Io(_) => 7,
        }
    }

    /// Short tag naming the module family the error came from.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::Parse { .. } | Error::Json(_) | Error::Io(_) => "io",
            Error::Domain(_) | Error::EmptySeries(_) | Error::DegenerateData(_) => "domain",
            Error::DegenerateWeights | Error::Numerical(_) => "numerical",
            Error::Quadrature(_) | Error::Matrix(_) => "geometry",
            Error::UnsupportedKernel(_) | Error::CaseCondition(_) => "calibration",
            Error::CalibrationMissing(_) => "calibration",
            Error::Config(_) | Error::Design(_) => "config",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
