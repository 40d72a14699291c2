use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{sets} sets exceed the {capacity} degrees of freedom available at degree {degree}")]
    Infeasible {
        sets: usize,
        capacity: usize,
        degree: usize,
    },

    #[error("bisection stalled after {restarts} restarts (max defect {max_defect:.4})")]
    Stalled { restarts: usize, max_defect: f64 },

    #[error("set {index} has near-zero volume ({volume:.3e})")]
    DegenerateSet { index: usize, volume: f64 },

    #[error("surface is singular at a sampled point (|grad P| = {grad_norm:.3e})")]
    SingularSurface { grad_norm: f64 },

    #[error("convex body is lower dimensional")]
    DegenerateBody,

    #[error("tube family {0} is empty")]
    EmptyFamily(usize),

    #[error("tube families are not transverse (theta = 0)")]
    DegenerateTransversality,

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("prerequisite violated: {0}")]
    PrerequisiteViolated(String),

    #[error("search budget exhausted (best min ratio {best_ratio:.4})")]
    BudgetExhausted { best_ratio: f64 },

    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, looking through stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
