use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("channel split needs an even channel count, got {0}")]
    OddChannels(usize),

    #[error("spatial size {height}x{width} is not a multiple of {window}")]
    IncompatibleSpatial {
        height: usize,
        width: usize,
        window: usize,
    },

    #[error("invalid network config: {0}")]
    Config(String),

    #[error(transparent)]
    Image(#[from] noisepair::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
