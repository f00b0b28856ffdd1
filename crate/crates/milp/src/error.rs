use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("invalid name `{0}` (must start with a letter or '_' and contain only [A-Za-z0-9_.])")]
    InvalidName(String),
    #[error("unknown variable id {0}")]
    UnknownVariable(usize),
    #[error("invalid bounds for `{name}`: [{lower}, {upper}]")]
    InvalidBounds { name: String, lower: f64, upper: f64 },
    #[error("non-finite coefficient or right-hand side in `{0}`")]
    NonFinite(String),
    #[error("assignment has {got} values, model has {expected} variables")]
    AssignmentLength { expected: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("time limit must be positive, got {0}")]
    TimeLimit(f64),
    #[error("{name} must lie in (0, 1), got {value}")]
    Tolerance { name: &'static str, value: f64 },
}
