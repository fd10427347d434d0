use thiserror::Error;

use crate::games::{GameId, Player};

pub type Result<T> = std::result::Result<T, L2eError>;

#[derive(Debug, Error)]
pub enum L2eError {
    #[error("illegal action {action} for player {player:?}")]
    IllegalAction { player: Player, action: usize },
    #[error("player {0:?} is not due to act")]
    NotActing(Player),
    #[error("missing action for acting player {0:?}")]
    MissingAction(Player),
    #[error("state is terminal")]
    Terminal,
    #[error("no legal action in mask")]
    EmptyMask,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("game mismatch: expected {expected:?}, found {found:?}")]
    GameMismatch { expected: GameId, found: GameId },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("game {0:?} is not enumerable")]
    NotEnumerable(GameId),
    #[error("strategy has no entry for information set `{0}`")]
    MissingInfoSet(String),
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
