use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("contract violation: {0}")]
    Contract(&'static str),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("iteration {iteration} collected no successful grasps")]
    NoSuccessfulGrasps { iteration: usize },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}
