use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { pos: usize, name: String },

    #[error("exponent at position {pos} is not an integer")]
    NonIntegerExponent { pos: usize },

    #[error("variable x{index} at position {pos} exceeds arity {arity}")]
    VariableOutOfRange { pos: usize, index: usize, arity: usize },

    #[error("division by zero")]
    DivisionByZero,

    #[error("logarithm of a non-positive value")]
    LogDomain,

    #[error("transcendental node in exact evaluation")]
    Transcendental,

    #[error("point has {got} coordinates, expression needs {need}")]
    PointTooShort { got: usize, need: usize },

    #[error("expression is singular at the base point: {0}")]
    Singular(String),

    #[error("invalid balanced set: {0}")]
    InvalidFamily(String),

    #[error("unknown family `{0}`")]
    UnknownFamily(String),

    #[error("web definition: {0}")]
    Format(String),

    #[error("internal consistency failure: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
