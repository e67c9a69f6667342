use thiserror::Error;

use crate::model::NetId;

/// Errors raised across the plane-generation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("board extents must be strictly positive, got {width} x {height}")]
    InvalidBoard { width: f64, height: f64 },

    #[error("grid resolution {0} is below the minimum of {min}", min = crate::model::MIN_GRID_RESOLUTION)]
    GridTooSmall(usize),

    #[error("problem has no nets")]
    NoNets,

    #[error("net {0} has no pins")]
    EmptyNet(NetId),

    #[error("pin ({x}, {y}) of net {net} lies outside the board")]
    PinOutsideBoard { net: NetId, x: f64, y: f64 },

    #[error("nets {first} and {second} both place a pin at ({x}, {y})")]
    DuplicateCrossNetPin {
        first: NetId,
        second: NetId,
        x: f64,
        y: f64,
    },

    #[error("net {0} owns no cells in the partition")]
    NetVanished(NetId),

    #[error("label grid is {got}x{got}, problem expects {expected}x{expected}")]
    GridMismatch { expected: usize, got: usize },

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    TrainingDiverged { epoch: usize, loss: f64 },

    #[error("invalid training data: {0}")]
    InvalidTrainingData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("nets {0} and {1} are at distance zero; inverse distance is undefined")]
    CoincidentNets(NetId, NetId),

    #[error("invalid distance matrix: {0}")]
    InvalidDistanceMatrix(String),

    #[error("synthetic generation gave up after {0} attempts")]
    GenerationStuck(usize),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
