use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("raster is {raster_h}x{raster_w} but bitmap is {bitmap_h}x{bitmap_w}")]
    InvalidPair {
        raster_h: usize,
        raster_w: usize,
        bitmap_h: usize,
        bitmap_w: usize,
    },
    #[error("bitmap has no active-region pixels (codes 33/34)")]
    EmptyRoi,
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error("invalid bitmap code {code} at index {index}")]
    InvalidCode { code: u8, index: usize },
    #[error("invalid metadata: {0}")]
    InvalidMetadata(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("raster {height}x{width} is smaller than the {side}x{side} kernel")]
    WindowTooSmall {
        height: usize,
        width: usize,
        side: usize,
    },
    #[error("window at ({top}, {left}) of side {side} exceeds {height}x{width} table")]
    OutOfBounds {
        top: usize,
        left: usize,
        side: usize,
        height: usize,
        width: usize,
    },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("misuse: {0}")]
    Misuse(String),
    #[error("score undefined: {0}")]
    UndefinedScore(String),
    #[error("cannot parse timestamp {0:?}")]
    Timestamp(String),
    #[error("row {row}: field `{field}`: {message}")]
    Row {
        row: usize,
        field: String,
        message: String,
    },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("{field}: expected {expected} bytes, found {found}")]
    LengthMismatch {
        field: String,
        expected: usize,
        found: usize,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn row(row: usize, field: &str, message: impl Into<String>) -> Self {
        Error::Row {
            row,
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// Short stable identifier used in machine-readable error summaries.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidPair { .. } => "invalid_pair",
            Error::EmptyRoi => "empty_roi",
            Error::InvalidRaster(_) => "invalid_raster",
            Error::InvalidCode { .. } => "invalid_code",
            Error::InvalidMetadata(_) => "invalid_metadata",
            Error::InvalidConfig(_) => "invalid_config",
            Error::ContractViolation(_) => "contract_violation",
            Error::WindowTooSmall { .. } => "window_too_small",
            Error::OutOfBounds { .. } => "out_of_bounds",
            Error::Parameter(_) => "parameter",
            Error::Misuse(_) => "misuse",
            Error::UndefinedScore(_) => "undefined_score",
            Error::Timestamp(_) => "timestamp",
            Error::Row { .. } => "row",
            Error::DuplicateId(_) => "duplicate_id",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::Io { .. } => "io",
            Error::Csv { .. } => "csv",
        }
    }
}
