use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("unsupported PNG format in {}: {detail}", path.display())]
    UnsupportedFormat { path: PathBuf, detail: String },

    #[error("unsupported bit depth {depth} in {}", path.display())]
    UnsupportedBitDepth { path: PathBuf, depth: u8 },

    #[error("corrupt PNG stream in {}: {detail}", path.display())]
    CorruptPng { path: PathBuf, detail: String },

    #[error("pixel ({x}, {y}) has value {value}, expected one of 0, 128, 255")]
    InvalidClassValue { x: usize, y: usize, value: u8 },

    #[error("bad magic {found:?}, expected \"CBT1\"")]
    BadMagic { found: [u8; 4] },

    #[error("truncated tensor payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("tensor has {extra} trailing bytes after the payload")]
    TrailingData { extra: usize },

    #[error("tensor dimensions {height}x{width}x{channels} overflow")]
    DimensionOverflow {
        height: u32,
        width: u32,
        channels: u32,
    },

    #[error("invalid raster: {0}")]
    InvalidRaster(String),

    #[error("size mismatch: {left} vs {right}")]
    SizeMismatch { left: String, right: String },

    #[error("tile mismatch: {0}")]
    TileMismatch(String),

    #[error("missing tile {}", .0.display())]
    MissingTile(PathBuf),

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("invalid probabilities: {0}")]
    InvalidProbabilities(String),

    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("input is not thin: {0} pixels would be removed by another thinning pass")]
    NotThin(usize),

    #[error("malformed shapefile {}: {detail}", path.display())]
    Shapefile { path: PathBuf, detail: String },

    #[error("malformed world file {}: {detail}", path.display())]
    WorldFile { path: PathBuf, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        let path = path.into();
        if source.kind() == io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// True for failures of the environment (missing or unreadable files)
    /// rather than of the data or the request.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::MissingFile(_) | Error::Io { .. } | Error::MissingTile(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
