use std::io;

use thiserror::Error;

/// Every failure the toolkit reports.
#[derive(Debug, Error)]
pub enum Error {
    #[error("state P{state} is out of range for {states} states")]
    InvalidState { state: u8, states: usize },
    #[error("unsupported bits per cell: {0}")]
    UnsupportedBitsPerCell(usize),
    #[error("invalid Gray map: {0}")]
    InvalidGrayMap(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("address out of range: {0}")]
    Address(String),
    #[error("wordline {0} is already programmed")]
    Overwrite(String),
    #[error("wordline {0} is not programmed")]
    Unprogrammed(String),
    #[error("block {0} is only partially programmed")]
    PartialScan(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid profile field `{field}`: {reason}")]
    ProfileInvalid { field: String, reason: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("metadata corrupt: {0}")]
    MetadataCorrupt(String),
    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("LFSR polynomial {0:#x} is not primitive")]
    NotPrimitive(u64),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("bad dump: {0}")]
    BadDump(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable snake_case name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidState { .. } => "invalid_state",
            Error::UnsupportedBitsPerCell(_) => "unsupported_bits_per_cell",
            Error::InvalidGrayMap(_) => "invalid_gray_map",
            Error::Geometry(_) => "geometry",
            Error::Address(_) => "address",
            Error::Overwrite(_) => "overwrite",
            Error::Unprogrammed(_) => "unprogrammed",
            Error::PartialScan(_) => "partial_scan",
            Error::Domain(_) => "domain",
            Error::ProfileInvalid { .. } => "profile_invalid",
            Error::Dimension(_) => "dimension",
            Error::MetadataCorrupt(_) => "metadata_corrupt",
            Error::UnsupportedMode(_) => "unsupported_mode",
            Error::Config(_) => "config",
            Error::NotPrimitive(_) => "not_primitive",
            Error::Parse(_) => "parse",
            Error::BadDump(_) => "bad_dump",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
