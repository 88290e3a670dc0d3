use thiserror::Error;

/// Errors produced across the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("random topology stayed disconnected after {retries} redraws")]
    TopologyRetries { retries: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("bound assumptions not met: {0}")]
    BoundAssumption(String),

    #[error("configuration invalid:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("replicate diverged at t={time} (thread {thread})")]
    Diverged { time: f64, thread: usize },

    #[error("quadrature box captures only {captured:.4} of the density mass (need >= 0.99)")]
    MassCapture { captured: f64 },

    #[error("too few samples: got {got}, need at least {need}")]
    TooFewSamples { got: usize, need: usize },

    #[error("worker panicked: {0}")]
    WorkerPanic(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
