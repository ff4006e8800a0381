use thiserror::Error;

/// Errors raised while loading scenarios, solving epochs or running horizons.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed scenario document: {0}")]
    Parse(String),

    #[error("validation failed at `{path}`: {message}")]
    Validation { path: String, message: String },

    #[error("missing renewable trace `{0}`")]
    MissingTrace(String),

    #[error("unknown {kind} `{id}`")]
    UnknownId { kind: &'static str, id: String },

    #[error("insufficient capacity for task type `{player}`: needs {demand:.6} tasks/h, {available:.6} usable")]
    InsufficientCapacity {
        player: String,
        demand: f64,
        available: f64,
    },

    #[error("allocation {ar} exceeds capacity {er} for task type `{task}` at data center `{dc}`")]
    CapacityExceeded {
        task: String,
        dc: String,
        ar: f64,
        er: f64,
    },

    #[error("infeasible queue: arrival rate {ar} must stay below execution rate {er}")]
    InfeasibleQueue { ar: f64, er: f64 },

    #[error("epoch {epoch}: {source}")]
    Epoch {
        epoch: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("oracle size cap exceeded: {0}")]
    SizeCap(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Attaches the epoch at which the error occurred (once).
    pub fn at_epoch(self, epoch: usize) -> Self {
        match self {
            e @ Error::Epoch { .. } => e,
            other => Error::Epoch {
                epoch,
                source: Box::new(other),
            },
        }
    }

    /// Strips any epoch wrapper.
    pub fn root(&self) -> &Error {
        match self {
            Error::Epoch { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
