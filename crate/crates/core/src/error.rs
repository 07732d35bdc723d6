use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("query text, line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid fleet: {0}")]
    InvalidFleet(String),

    #[error("invalid cost function: {0}")]
    InvalidCost(String),

    #[error("operation requires a linear fleet, machine {0} is not linear")]
    NonLinearFleet(usize),

    #[error("cardinalities are not uniform across atoms")]
    NonUniformCardinality,

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("unsupported query shape for plan {plan}: {reason}")]
    UnsupportedShape { plan: String, reason: String },

    #[error("triangle machine with weight {weight} is outside the small/medium/big classes (f_y = {f_y})")]
    TriangleOutOfClass { weight: u64, f_y: f64 },

    #[error("packing precondition violated: {0}")]
    PackingPrecondition(String),

    #[error("placement inconsistency: {0}")]
    Placement(String),

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("instance does not match query: {0}")]
    InstanceMismatch(String),

    #[error("internal inconsistency: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
