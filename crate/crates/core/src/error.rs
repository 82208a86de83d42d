use thiserror::Error;

/// Errors produced by the models, checkers and tooling in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlockError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("indeterminate: {0}")]
    Indeterminate(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("collision between agents {i} and {j} (distance {distance:e})")]
    Collision { i: usize, j: usize, distance: f64 },

    #[error("singular weight normalisation at agent {agent}")]
    SingularWeight { agent: usize },

    #[error("stability violated at agent {agent}: h * degree sum = {scaled_degree} >= 1")]
    Stability { agent: usize, scaled_degree: f64 },

    #[error("graph is not rooted: vertex {vertex} unreachable from root {root}")]
    NotRooted { vertex: usize, root: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("divergent integral: {0}")]
    Divergent(String),

    #[error("not at criticality: v0 = {v0}, critical velocity = {critical}")]
    NotCritical { v0: f64, critical: f64 },

    #[error("invalid fitting window: {0}")]
    Window(String),

    #[error("point {index} lies outside the binning grid")]
    Coverage { index: usize },

    #[error("unsupported size: {0}")]
    UnsupportedSize(String),

    #[error("at step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<FlockError>,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl FlockError {
    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            already @ FlockError::AtStep { .. } => already,
            other => FlockError::AtStep {
                step,
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, looking through step annotations.
    pub fn root_cause(&self) -> &FlockError {
        match self {
            FlockError::AtStep { source, .. } => source.root_cause(),
            other => other,
        }
    }
}

impl From<std::io::Error> for FlockError {
    fn from(e: std::io::Error) -> Self {
        FlockError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, FlockError>;
