use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image size: {0}")]
    InvalidSize(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {left_width}x{left_height} vs {right_width}x{right_height}")]
    DimensionMismatch {
        left_width: usize,
        left_height: usize,
        right_width: usize,
        right_height: usize,
    },

    #[error("unsupported sigma {0}: the recursive approximation needs sigma >= 0.5")]
    UnsupportedSigma(f64),

    #[error("line of length {0} is too short for the recursive filter (need at least 4)")]
    LineTooShort(usize),

    #[error("sample position {pos} outside [0, {max}]")]
    OutOfRange { pos: f64, max: f64 },

    #[error("operation counts are not tabulated for {0}")]
    NotTabulated(String),

    #[error("mask is empty")]
    EmptyMask,

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn mismatch(a: (usize, usize), b: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            left_width: a.0,
            left_height: a.1,
            right_width: b.0,
            right_height: b.1,
        }
    }

    /// True for errors caused by bad input data (files, dimensions) rather
    /// than bad parameters. The CLI maps these to a distinct exit code.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Format(_) | Error::Io(_) | Error::Csv(_) | Error::DimensionMismatch { .. }
        )
    }
}
