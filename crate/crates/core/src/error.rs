use std::path::PathBuf;

use crate::model::NodeId;
use crate::sdp::SolveStatus;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid error model: {0}")]
    InvalidModel(String),

    #[error("could not generate a connected network after {attempts} attempts")]
    Disconnected { attempts: usize },

    #[error("scenario has no sensor-anchor measurements; the estimate is undetermined")]
    NoAnchorEdges,

    #[error("ill-formed SDP: {0}")]
    IllFormedProblem(String),

    #[error("solver finished with status {status:?}")]
    Solver { status: SolveStatus },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("no grid point lies in the feasible region")]
    EmptyRegion,

    #[error("sensor {sensor} never received a distance bound to anchor {anchor}")]
    UnreachableAnchor { sensor: NodeId, anchor: NodeId },

    #[error("degenerate multipliers: {0}")]
    Degenerate(String),

    #[error("estimate and truth cover different sensors")]
    MismatchedKeys,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
