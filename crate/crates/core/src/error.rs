use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the evaluation pipeline.
///
/// Variants are grouped by [`ErrorKind`] so the command-line front end can map
/// them onto stable exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no evaluated pixels")]
    NoPixels,

    #[error("no evaluated pixels in image")]
    NoPixelsInImage,

    #[error("{path}: {message}")]
    Load { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("internal consistency: {0}")]
    Consistency(String),

    #[error("image {image_id}: {source}")]
    Image {
        image_id: String,
        #[source]
        source: Box<Error>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Load,
    Consistency,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Shape(_)
            | Error::InvalidArgument(_)
            | Error::NoPixels
            | Error::NoPixelsInImage => ErrorKind::Usage,
            Error::Load { .. } | Error::Io { .. } => ErrorKind::Load,
            Error::Consistency(_) => ErrorKind::Consistency,
            Error::Image { source, .. } => source.kind(),
        }
    }

    pub(crate) fn in_image(self, image_id: &str) -> Self {
        match self {
            e @ Error::Image { .. } => e,
            e => Error::Image {
                image_id: image_id.to_string(),
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn load(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Load {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
