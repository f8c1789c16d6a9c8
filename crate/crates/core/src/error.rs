use std::io;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("player {player} out of range for a game with {n} players")]
    PlayerOutOfRange { player: usize, n: usize },

    #[error("player {0} is already in the coalition")]
    PlayerInSubset(usize),

    #[error("exact enumeration supports at most {max} players, got {n}")]
    TooManyPlayers { n: usize, max: usize },

    #[error("unknown split `{0}`")]
    UnknownSplit(String),

    #[error("empty training subset")]
    EmptySubset,

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
